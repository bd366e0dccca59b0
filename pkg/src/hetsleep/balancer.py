"""Rate balancing by dual cutting plane.

Maximizes the common rate scale R such that every point k can be served
beta_k * R simultaneously, where beta is the demand direction. The dual is
solved by alternating a small master LP over the point multipliers with a
closed-form pricing step that pools all spectrum on the single most
valuable pattern; each pricing result enters the master as a cut. The
primal optimum is recovered as the cut combination weighted by the master's
dual multipliers.

Feasibility of a demand vector d reduces to R* >= sum(d).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, SolverError
from .lpcore import LinearProgram, LpStatus, solve
from .netmodel import RateTable
from .patterns import PatternSet

DUAL_GAP_RTOL = 1e-9
ALLOC_TOL = 1e-9


@dataclass(frozen=True)
class DemandProfile:
    """Demand vector plus its normalized direction on the simplex."""

    d: np.ndarray
    beta: np.ndarray = field(init=False)

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 1 or (d < 0).any() or not np.isfinite(d).all():
            raise ValueError("demands must be a finite non-negative vector")
        total = d.sum()
        if total <= 0:
            raise ValueError("total demand must be positive to define a direction")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "beta", d / total)

    @property
    def total(self) -> float:
        return float(self.d.sum())


@dataclass
class Allocation:
    """Primal decision variables: sparse alpha[(k, b, i)] plus pattern shares pi."""

    alpha: dict[tuple[int, int, int], float]
    pi: np.ndarray
    shape: tuple[int, int, int]

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        if self.pi.shape != (self.shape[2],):
            raise ValueError("pi length must match the pattern count")

    @classmethod
    def empty(cls, shape: tuple[int, int, int]) -> "Allocation":
        pi = np.zeros(shape[2])
        pi[0] = 1.0
        return cls({}, pi, shape)

    @classmethod
    def combine(cls, allocations, weights, shape) -> "Allocation":
        """Convex combination of allocations (used for primal recovery)."""
        weights = np.asarray(weights, dtype=float)
        total = weights.sum()
        if total <= 0:
            raise ValueError("combination weights must have positive sum")
        weights = weights / total
        alpha: dict[tuple[int, int, int], float] = {}
        pi = np.zeros(shape[2])
        for alloc, w in zip(allocations, weights):
            if w == 0.0:
                continue
            pi += w * alloc.pi
            for key, val in alloc.alpha.items():
                alpha[key] = alpha.get(key, 0.0) + w * val
        return cls(alpha, pi, shape)

    def rho(self) -> np.ndarray:
        """Per-cell usage: total resource fraction each cell hands out."""
        out = np.zeros(self.shape[1])
        for (_k, b, _i), val in self.alpha.items():
            out[b] += val
        return out

    def point_rates(self, rates: RateTable) -> np.ndarray:
        out = np.zeros(self.shape[0])
        for (k, b, i), val in self.alpha.items():
            out[k] += val * rates.r[k, b, i]
        return out

    def n_active_patterns(self, threshold: float = ALLOC_TOL) -> int:
        return int(np.sum(self.pi > threshold))

    def validate(self, tol: float = ALLOC_TOL) -> None:
        k_n, b_n, i_n = self.shape
        if (self.pi < -tol).any():
            raise ValueError("negative pattern share")
        if abs(self.pi.sum() - 1.0) > max(tol, 1e-9):
            raise ValueError("pattern shares must sum to one")
        per_bi: dict[tuple[int, int], float] = {}
        for (k, b, i), val in self.alpha.items():
            if not (0 <= k < k_n and 0 <= b < b_n and 0 <= i < i_n):
                raise ValueError(f"allocation key {(k, b, i)} outside shape {self.shape}")
            if val < -tol:
                raise ValueError("negative allocation entry")
            per_bi[(b, i)] = per_bi.get((b, i), 0.0) + val
        for (b, i), used in per_bi.items():
            if used > self.pi[i] + 1e-9:
                raise ValueError(f"cell {b} over-allocates pattern {i}: {used} > {self.pi[i]}")
        if (self.rho() > 1.0 + 1e-9).any():
            raise ValueError("cell usage above one")


@dataclass
class CutCollection:
    """Pricing results collected so far, as master-ready coefficient rows.

    ``coeffs[j][k]`` is the served rate of point k divided by beta_k in the
    j-th stored allocation; the master constrains z <= -coeffs[j] @ lambda.
    """

    n_points: int
    allocations: list[Allocation] = field(default_factory=list)
    coeffs: list[np.ndarray] = field(default_factory=list)
    last_kappa: np.ndarray | None = None

    def add(self, alloc: Allocation, rates: RateTable, beta: np.ndarray) -> None:
        served = alloc.point_rates(rates)
        self.allocations.append(alloc)
        self.coeffs.append(served / beta)

    def __len__(self) -> int:
        return len(self.allocations)


def price_cut(lam: np.ndarray, rates: RateTable,
              demand: DemandProfile) -> tuple[Allocation, float]:
    """Closed-form inner minimization for multipliers lam on the simplex.

    Scores every (point, cell, pattern) entry by -r * lam/beta, lets each
    cell pick its best point per pattern, pools all spectrum on the best
    pattern, and serves only entries with strictly negative score (zero
    scores carry no rate, so skipping them changes nothing but keeps the
    allocation sparse). Returns the allocation and the dual value.
    """
    k_n, b_n, i_n = rates.shape
    lam = np.asarray(lam, dtype=float)
    ratio = lam / demand.beta
    ring = -(rates.r * ratio[:, None, None])       # K x B x I, all <= 0
    kbar = ring.argmin(axis=0)                     # B x I
    mval = np.take_along_axis(ring, kbar[None, :, :], axis=0)[0]
    score = mval.sum(axis=0)                       # per-pattern total
    ibar = int(score.argmin())
    g = float(score[ibar])

    alpha = {}
    for b in range(b_n):
        if mval[b, ibar] < 0.0:
            alpha[(int(kbar[b, ibar]), b, ibar)] = 1.0
    pi = np.zeros(i_n)
    pi[ibar] = 1.0
    return Allocation(alpha, pi, rates.shape), g


def master_step(cuts: CutCollection) -> tuple[np.ndarray, float]:
    """Solve the restricted dual master over the collected cuts.

    Variables are the simplex multipliers lambda plus the bound z; each cut
    contributes one row z + coeffs @ lambda <= 0. The optimal z upper-bounds
    the full dual optimum. Cut multipliers are stored on the collection for
    primal recovery.
    """
    if not cuts.coeffs:
        raise ValueError("master problem needs at least one cut")
    k_n = cuts.n_points
    n_cuts = len(cuts.coeffs)
    a_ub = np.zeros((n_cuts, k_n + 1))
    for j, c_j in enumerate(cuts.coeffs):
        a_ub[j, :k_n] = c_j
        a_ub[j, k_n] = 1.0
    c = np.zeros(k_n + 1)
    c[k_n] = 1.0
    a_eq = np.zeros((1, k_n + 1))
    a_eq[0, :k_n] = 1.0
    lower = np.zeros(k_n + 1)
    lower[k_n] = -np.inf

    sol = solve(LinearProgram(c=c, a_ub=a_ub, b_ub=np.zeros(n_cuts),
                              a_eq=a_eq, b_eq=np.ones(1), lower=lower,
                              maximize=True))
    if sol.status is not LpStatus.OPTIMAL:
        raise SolverError(f"rate-balancing master ended {sol.status.value}")
    cuts.last_kappa = sol.duals_ub
    return sol.x[:k_n], float(sol.value)


@dataclass
class BalanceResult:
    allocation: Allocation
    r_sum: float
    iterations: int
    g_trace: list[float]
    z_trace: list[float]


def _initial_allocation(rates: RateTable, rng: np.random.Generator) -> Allocation:
    """One random pattern, each point on its best cell there, equal shares."""
    k_n, b_n, i_n = rates.shape
    i0 = int(rng.integers(i_n))
    best_cell = rates.r[:, :, i0].argmax(axis=1)
    members: dict[int, list[int]] = {}
    for k in range(k_n):
        members.setdefault(int(best_cell[k]), []).append(k)
    alpha = {}
    for b, ks in members.items():
        share = 1.0 / len(ks)
        for k in ks:
            alpha[(k, b, i0)] = share
    pi = np.zeros(i_n)
    pi[i0] = 1.0
    return Allocation(alpha, pi, rates.shape)


def rate_balance(rates: RateTable, demand: DemandProfile, patterns: PatternSet,
                 seed: int = 0, gap_rtol: float = DUAL_GAP_RTOL,
                 max_iters: int | None = None) -> BalanceResult:
    """Algorithmic core: cutting-plane solve of the balancing problem.

    Points with zero demand are excluded from the balancing (they would
    divide by beta=0) and re-enter the recovered allocation with no
    resources. The returned r_sum is evaluated on the recovered primal.
    """
    k_all, b_n, i_n = rates.shape
    if patterns.n_patterns != i_n or patterns.n_cells != b_n:
        raise ValueError("rate table and pattern set disagree on dimensions")
    if demand.d.shape != (k_all,):
        raise ValueError("demand length must match the rate table")

    keep = np.flatnonzero(demand.d > 0)
    sub = RateTable(rates.r[keep])
    sub_demand = DemandProfile(demand.d[keep])
    k_n = keep.size
    cap = max_iters if max_iters is not None else 10 * (k_n + b_n)

    rng = np.random.default_rng(seed)
    cuts = CutCollection(n_points=k_n)
    init = _initial_allocation(sub, rng)
    cuts.add(init, sub, sub_demand.beta)
    seen = {frozenset(init.alpha.items()) | {("pi", int(init.pi.argmax()))}}

    g_trace: list[float] = []
    z_trace: list[float] = []
    for it in range(1, cap + 1):
        lam, z = master_step(cuts)
        alloc, g = price_cut(lam, sub, sub_demand)
        g_trace.append(g)
        z_trace.append(z)
        signature = frozenset(alloc.alpha.items()) | {("pi", int(alloc.pi.argmax()))}
        # A repeated pricing result cannot tighten the master (in exact
        # arithmetic it implies g >= z), so stop at LP tolerance.
        if (g >= z - gap_rtol * (1.0 + abs(z)) - 1e-12 or signature in seen):
            kappa = cuts.last_kappa
            recovered = Allocation.combine(cuts.allocations, kappa, sub.shape)
            served = recovered.point_rates(sub)
            r_sum = float((served / sub_demand.beta).min())
            full = Allocation(
                {(int(keep[k]), b, i): v for (k, b, i), v in recovered.alpha.items()},
                recovered.pi, rates.shape)
            return BalanceResult(full, r_sum, it, g_trace, z_trace)
        seen.add(signature)
        cuts.add(alloc, sub, sub_demand.beta)

    raise ConvergenceError(
        f"rate balancing did not close the duality gap in {cap} iterations",
        diagnostics={"g": g_trace[-1], "z": z_trace[-1], "iterations": cap,
                     "gap": z_trace[-1] - g_trace[-1]})


def is_feasible(r_sum: float, demand: DemandProfile, rtol: float = 1e-9) -> bool:
    """Whether a demand vector is servable given the balancing optimum."""
    return r_sum >= demand.total * (1.0 - rtol)
