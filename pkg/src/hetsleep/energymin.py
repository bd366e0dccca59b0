"""Rate-constrained energy minimization.

The hard part of the power objective is the fixed consumption that switches
in whenever a cell carries any load at all. That indicator is smoothed by a
logarithmic surrogate and minimized by a convex-concave procedure: each
outer iteration linearizes the surrogate at the previous usage vector,
turning the step into a weighted-usage LP, which is itself solved in the
dual by the same cutting-plane pattern as the rate balancer but with an
energy pricing rule. Feasibility is established once by rate balancing and
the balancing solution seeds every inner run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .balancer import (Allocation, DemandProfile, is_feasible, rate_balance)
from .errors import ConvergenceError, SolverError
from .lpcore import LinearProgram, LpStatus, solve
from .netmodel import (DEFAULT_ACTIVITY_THRESHOLD, NetworkTopology, RateTable,
                       total_power)
from .patterns import PatternSet


@dataclass(frozen=True)
class EnergyConfig:
    """Knobs of the reweighting loop and its inner solver."""

    epsilon: float = 1e-6
    max_outer_iters: int = 10
    inner_gap_rtol: float = 1e-9
    outer_rel_change: float = 1e-5
    activity_threshold: float = DEFAULT_ACTIVITY_THRESHOLD
    mu_box_factor: float = 1e9
    inner_iter_cap: int | None = None
    # Post-convergence exact refit and cell-drop descent on the true power
    # objective; see _activation_cleanup.
    cleanup: bool = True

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_outer_iters < 1:
            raise ValueError("need at least one outer iteration")


@dataclass(frozen=True)
class WeightVector:
    """Per-cell marginal prices (W per unit usage) for one reweighted step."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if (w <= 0).any() or not np.isfinite(w).all():
            raise ValueError("weights must be positive and finite")
        object.__setattr__(self, "w", w)


@dataclass
class SolveReport:
    """Everything a run produces: the allocation and its derived views."""

    feasible: bool
    allocation: Allocation
    rho: np.ndarray
    p_tot: float
    active_cells: list[int]
    n_active_patterns: int
    point_rates: np.ndarray
    association: np.ndarray
    objective_trace: list[float]
    inner_iterations: list[int]
    outer_iters: int
    r_sum_balance: float

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "shape": list(self.allocation.shape),
            "alpha": [[k, b, i, v] for (k, b, i), v in sorted(self.allocation.alpha.items())],
            "pi": [[int(i), float(p)] for i, p in enumerate(self.allocation.pi) if p != 0.0],
            "rho": self.rho.tolist(),
            "p_tot": self.p_tot,
            "active_cells": list(self.active_cells),
            "n_active_patterns": self.n_active_patterns,
            "point_rates": self.point_rates.tolist(),
            "association": self.association.tolist(),
            "objective_trace": list(self.objective_trace),
            "inner_iterations": list(self.inner_iterations),
            "outer_iters": self.outer_iters,
            "r_sum_balance": self.r_sum_balance,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SolveReport":
        shape = tuple(doc["shape"])
        alpha = {(int(k), int(b), int(i)): float(v) for k, b, i, v in doc["alpha"]}
        pi = np.zeros(shape[2])
        for i, p in doc["pi"]:
            pi[int(i)] = float(p)
        alloc = Allocation(alpha, pi, shape)
        alloc.validate()
        return cls(
            feasible=bool(doc["feasible"]),
            allocation=alloc,
            rho=np.asarray(doc["rho"], dtype=float),
            p_tot=float(doc["p_tot"]),
            active_cells=[int(b) for b in doc["active_cells"]],
            n_active_patterns=int(doc["n_active_patterns"]),
            point_rates=np.asarray(doc["point_rates"], dtype=float),
            association=np.asarray(doc["association"], dtype=int),
            objective_trace=[float(v) for v in doc["objective_trace"]],
            inner_iterations=[int(v) for v in doc["inner_iterations"]],
            outer_iters=int(doc["outer_iters"]),
            r_sum_balance=float(doc["r_sum_balance"]),
        )


def update_weights(rho_prev: np.ndarray, topo: NetworkTopology,
                   cfg: EnergyConfig) -> WeightVector:
    """Linearization weights at the previous usage vector.

    The variable part of the power model prices usage directly; the fixed
    part contributes the derivative of the log surrogate, which is large
    near zero usage (discouraging re-activation of idle cells) and small
    for well-used cells. Natural logs; the first outer iteration uses the
    plain operational powers instead (see :func:`minimize_energy`).
    """
    rho_prev = np.clip(np.asarray(rho_prev, dtype=float), 0.0, 1.0)
    q = topo.fixed_fraction()
    p_op = topo.op_power_max()
    denom = math.log1p(1.0 / cfg.epsilon) * (cfg.epsilon + rho_prev)
    return WeightVector((1.0 - q) * p_op + q * p_op / denom)


def smoothed_objective(rho: np.ndarray, topo: NetworkTopology,
                       cfg: EnergyConfig) -> float:
    """Power objective with the activity indicator replaced by its log
    surrogate, normalized so full usage prices exactly one fixed share."""
    rho = np.clip(np.asarray(rho, dtype=float), 0.0, None)
    q = topo.fixed_fraction()
    p_op = topo.op_power_max()
    smooth = np.log1p(rho / cfg.epsilon) / math.log1p(1.0 / cfg.epsilon)
    return float(np.sum((1.0 - q) * p_op * rho + q * p_op * smooth))


def price_cut_energy(mu: np.ndarray, w: WeightVector, rates: RateTable,
                     demand: DemandProfile | np.ndarray) -> tuple[Allocation, float]:
    """Closed-form inner minimization for the energy dual.

    Entry scores are the weighted cost minus the priced rate, w_b - r*mu_k.
    Each cell picks its cheapest point per pattern; the pattern whose
    negative-score total is lowest takes all spectrum, and only strictly
    negative entries are served. The returned dual value includes the
    constant demand term d @ mu.
    """
    d = demand.d if isinstance(demand, DemandProfile) else np.asarray(demand, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if (mu < 0).any():
        raise ValueError("multipliers must be non-negative")
    k_n, b_n, i_n = rates.shape
    scores = w.w[None, :, None] - rates.r * mu[:, None, None]
    kbar = scores.argmin(axis=0)                   # B x I
    mval = np.take_along_axis(scores, kbar[None, :, :], axis=0)[0]
    neg_total = np.minimum(mval, 0.0).sum(axis=0)  # per pattern
    ibar = int(neg_total.argmin())
    h = float(neg_total[ibar] + d @ mu)

    alpha = {}
    for b in range(b_n):
        if mval[b, ibar] < 0.0:
            alpha[(int(kbar[b, ibar]), b, ibar)] = 1.0
    pi = np.zeros(i_n)
    pi[ibar] = 1.0
    return Allocation(alpha, pi, rates.shape), h


@dataclass
class WeightedSolveResult:
    allocation: Allocation
    objective: float
    iterations: int
    h_trace: list[float]
    z_trace: list[float]


def _cut_row(alloc: Allocation, w: WeightVector, rates: RateTable) -> tuple[float, np.ndarray]:
    """Master-row data for one stored allocation: its weighted usage cost
    and its served rate per point."""
    cost = 0.0
    served = np.zeros(rates.shape[0])
    for (k, b, i), val in alloc.alpha.items():
        cost += val * w.w[b]
        served[k] += val * rates.r[k, b, i]
    return cost, served


def solve_weighted_l1(w: WeightVector, rates: RateTable,
                      demand: DemandProfile | np.ndarray,
                      patterns: PatternSet, init: Allocation,
                      cfg: EnergyConfig | None = None) -> WeightedSolveResult:
    """Minimize total weighted usage subject to the per-point rate demands.

    Dual cutting plane: the master maximizes a bound z over the demand
    multipliers mu >= 0 subject to one row per stored allocation, and
    :func:`price_cut_energy` generates the next allocation. The initial cut
    must come from a (strictly) feasible allocation or the first master
    would be unbounded; a box bound on mu guards against degenerate cases
    and must be slack at termination.
    """
    cfg = cfg or EnergyConfig()
    k_n, b_n, i_n = rates.shape
    d = demand.d if isinstance(demand, DemandProfile) else np.asarray(demand, dtype=float)
    if d.shape != (k_n,):
        raise ValueError("demand length must match the rate table")

    init_served = init.point_rates(rates)
    if (init_served < d * (1.0 - 1e-9)).any():
        raise ValueError("initial allocation does not meet the rate demands")

    positive = rates.r[rates.r > 0]
    mu_box = (cfg.mu_box_factor * w.w.max() / positive.min()) if positive.size else cfg.mu_box_factor
    cap = cfg.inner_iter_cap if cfg.inner_iter_cap is not None else 10 * (k_n + b_n) + 20

    cut_allocs = [init]
    cut_rows = [_cut_row(init, w, rates)]
    seen = {frozenset(init.alpha.items()) | {("pi", int(init.pi.argmax()))}}

    h_trace: list[float] = []
    z_trace: list[float] = []
    for it in range(1, cap + 1):
        n_cuts = len(cut_rows)
        a_ub = np.zeros((n_cuts, k_n + 1))
        b_ub = np.zeros(n_cuts)
        for j, (cost_j, served_j) in enumerate(cut_rows):
            a_ub[j, :k_n] = served_j - d
            a_ub[j, k_n] = 1.0
            b_ub[j] = cost_j
        c = np.zeros(k_n + 1)
        c[k_n] = 1.0
        lower = np.zeros(k_n + 1)
        lower[k_n] = -np.inf
        upper = np.full(k_n + 1, mu_box)
        upper[k_n] = np.inf
        sol = solve(LinearProgram(c=c, a_ub=a_ub, b_ub=b_ub, lower=lower,
                                  upper=upper, maximize=True))
        if sol.status is not LpStatus.OPTIMAL:
            raise SolverError(f"energy master ended {sol.status.value}")
        mu, z = sol.x[:k_n], float(sol.value)

        alloc, h = price_cut_energy(mu, w, rates, demand)
        h_trace.append(h)
        z_trace.append(z)
        signature = frozenset(alloc.alpha.items()) | {("pi", int(alloc.pi.argmax()))}
        # A repeated cut cannot tighten the master: in exact arithmetic it
        # implies h >= z, so treat it as convergence at LP tolerance.
        if (h >= z - cfg.inner_gap_rtol * (1.0 + abs(z)) - 1e-12
                or signature in seen):
            if (mu > mu_box * (1.0 - 1e-6)).any():
                raise SolverError("mu box bound active at termination; "
                                  "increase mu_box_factor")
            recovered = Allocation.combine(cut_allocs, sol.duals_ub, rates.shape)
            objective = float(sum(v * w.w[b] for (_k, b, _i), v in recovered.alpha.items()))
            return WeightedSolveResult(recovered, objective, it, h_trace, z_trace)
        seen.add(signature)
        cut_allocs.append(alloc)
        cut_rows.append(_cut_row(alloc, w, rates))

    raise ConvergenceError(
        f"weighted usage solve did not converge in {cap} iterations",
        diagnostics={"h": h_trace[-1], "z": z_trace[-1], "iterations": cap})


def _fixed_activation_lp(active: list[int], rates: RateTable, patterns: PatternSet,
                         d: np.ndarray, topo: NetworkTopology,
                         budget: int = 25000) -> Allocation | None:
    """Exact minimum-linear-power allocation with only the given cells on.

    Candidate patterns are those whose transmitters all lie in the active
    set (other patterns could only add interference); columns cover every
    (demanding point, active cell, pattern) link the pattern transmits on.
    Returns None when infeasible or when the assembly would exceed the
    column budget.
    """
    k_n, b_n, i_n = rates.shape
    active_set = set(active)
    act = patterns.a.astype(bool)
    pattern_ids = [i for i in range(i_n)
                   if set(np.flatnonzero(act[i])) <= active_set]
    if not pattern_ids:
        pattern_ids = list(range(i_n))
    kept = [k for k in range(k_n) if d[k] > 0]

    entries = [(k, b, i)
               for i in pattern_ids
               for b in active if act[i, b] and rates.r[:, b, i].any()
               for k in kept]
    n_alpha = len(entries)
    n_vars = n_alpha + len(pattern_ids)
    if n_vars > budget or n_alpha == 0:
        return None

    q = topo.fixed_fraction()
    p_op = topo.op_power_max()
    pi_col = {i: n_alpha + t for t, i in enumerate(pattern_ids)}
    pairs: dict[tuple[int, int], list[int]] = {}
    served: dict[int, list[tuple[int, float]]] = {}
    for col, (k, b, i) in enumerate(entries):
        pairs.setdefault((b, i), []).append(col)
        served.setdefault(k, []).append((col, rates.r[k, b, i]))

    a_ub = np.zeros((len(pairs) + len(kept), n_vars))
    b_ub = np.zeros(len(pairs) + len(kept))
    for row, ((b, i), cols) in enumerate(sorted(pairs.items())):
        a_ub[row, cols] = 1.0
        a_ub[row, pi_col[i]] = -1.0
    for t, k in enumerate(kept):
        row = len(pairs) + t
        for col, rate in served.get(k, []):
            a_ub[row, col] = -rate
        b_ub[row] = -d[k]
    a_eq = np.zeros((1, n_vars))
    a_eq[0, n_alpha:] = 1.0
    c = np.concatenate([np.array([(1.0 - q[b]) * p_op[b] for (_k, b, _i) in entries]),
                        np.zeros(len(pattern_ids))])

    sol = solve(LinearProgram(c=c, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=np.ones(1)))
    if sol.status is not LpStatus.OPTIMAL:
        return None
    alpha = {}
    for col, (k, b, i) in enumerate(entries):
        val = sol.x[col]
        if val > 1e-12:
            alpha[(k, b, i)] = float(val)
    pi = np.zeros(i_n)
    for i, col in pi_col.items():
        pi[i] = max(float(sol.x[col]), 0.0)
    total = pi.sum()
    if total <= 0:
        return None
    pi /= total
    return Allocation(alpha, pi, rates.shape)


def _hard_power(alloc: Allocation, topo: NetworkTopology, cfg: EnergyConfig) -> float:
    return total_power(np.clip(alloc.rho(), 0.0, 1.0), topo, cfg.activity_threshold)


def _kind_tier_sets(topo: NetworkTopology) -> list[list[int]]:
    """Structured activation candidates along the macro/pico split.

    Muting whole macro tiers is the main energy lever of the model, and a
    move-by-move descent cannot jump from a macro-only solution to a
    several-pico one; these candidates bridge that valley.
    """
    from .netmodel import CellKind

    macros = [c.id for c in topo.cells if c.kind is CellKind.MACRO]
    picos = [c.id for c in topo.cells if c.kind is CellKind.PICO]
    tiers = [list(range(topo.n_cells))]
    if picos:
        tiers.append(sorted(picos))
        for m in macros:
            tiers.append(sorted(picos + [m]))
    for m in macros:
        tiers.append([m])
    if len(macros) > 1:
        tiers.append(sorted(macros))
    unique = []
    for t in tiers:
        if t and t not in unique:
            unique.append(t)
    return unique


def _activation_cleanup(alloc: Allocation, topo: NetworkTopology, rates: RateTable,
                        patterns: PatternSet, d: np.ndarray,
                        cfg: EnergyConfig) -> Allocation:
    """Descent on the true power objective over activation sets.

    The smoothed surrogate prices marginal usage of an already-on cell
    above zero and a switched-off cell astronomically, so its stationary
    points often keep cells that an exact reallocation would retire, or
    miss a cheaper tier of cells entirely. This pass re-solves the exact
    linear-cost LP on the converged active set and on a few kind-level
    candidate sets, then greedily drops or swaps single cells while the
    restricted LP certifies a strictly cheaper feasible solution. Every
    accepted move is a concrete feasible allocation, so the reported power
    can only improve.
    """
    best = alloc
    best_p = _hard_power(alloc, topo, cfg)
    active = [int(b) for b in np.flatnonzero(alloc.rho() > cfg.activity_threshold)]
    if not active:
        return best

    for candidate_set in [active] + _kind_tier_sets(topo):
        refit = _fixed_activation_lp(candidate_set, rates, patterns, d, topo)
        if refit is not None and _hard_power(refit, topo, cfg) < best_p * (1.0 - 1e-9):
            best = refit
            best_p = _hard_power(refit, topo, cfg)
    active = [int(b) for b in np.flatnonzero(best.rho() > cfg.activity_threshold)]
    if not active:
        return best

    q = topo.fixed_fraction()
    p_op = topo.op_power_max()
    all_cells = list(range(topo.n_cells))

    def try_sets(trials):
        found = None
        found_p = best_p
        for trial in trials:
            refit = _fixed_activation_lp(trial, rates, patterns, d, topo)
            if refit is None:
                continue
            p = _hard_power(refit, topo, cfg)
            if p < found_p * (1.0 - 1e-9):
                found = refit
                found_p = p
        return found

    improved = True
    while improved:
        improved = False
        by_cost = sorted(active, key=lambda b: (-q[b] * p_op[b], b))
        drops = [[x for x in active if x != b] for b in by_cost if len(active) > 1]
        candidate = try_sets(drops)
        if candidate is None:
            # One-for-one swaps catch cells the reweighting froze out: a
            # switched-off cell is priced astronomically, so the surrogate
            # can never trade an expensive active cell for it.
            swaps = [[x for x in active if x != b] + [a]
                     for b in by_cost
                     for a in all_cells if a not in active]
            candidate = try_sets(swaps)
        if candidate is not None:
            best = candidate
            best_p = _hard_power(candidate, topo, cfg)
            active = [int(b) for b in np.flatnonzero(best.rho() > cfg.activity_threshold)]
            improved = bool(active)
    return best


def _caratheodory_reduce(alloc: Allocation, rates: RateTable) -> Allocation:
    """Re-express the allocation over at most K+B+1 patterns.

    Splitting alpha into per-pattern profiles theta makes cell usages and
    served rates linear in the pattern shares, so any share vector can be
    replaced by a basic feasible solution of that linear system; basic
    solutions carry at most as many positive shares as the system has rows.
    Usage, served rates and hence power are preserved exactly.
    """
    k_n, b_n, i_n = alloc.shape
    support = [i for i in range(i_n) if alloc.pi[i] > 1e-15]
    if len(support) <= k_n + b_n + 1:
        return alloc

    theta: dict[int, dict[tuple[int, int], float]] = {i: {} for i in support}
    for (k, b, i), val in alloc.alpha.items():
        if i in theta and alloc.pi[i] > 0:
            theta[i][(k, b)] = val / alloc.pi[i]

    v = np.zeros((b_n + k_n + 1, len(support)))
    for t, i in enumerate(support):
        for (k, b), th in theta[i].items():
            v[b, t] += th
            v[b_n + k, t] += th * rates.r[k, b, i]
        v[-1, t] = 1.0
    target = v @ np.array([alloc.pi[i] for i in support])

    sol = solve(LinearProgram(c=np.zeros(len(support)), a_eq=v, b_eq=target))
    if sol.status is not LpStatus.OPTIMAL:
        return alloc
    pi = np.zeros(i_n)
    alpha: dict[tuple[int, int, int], float] = {}
    for t, i in enumerate(support):
        share = float(sol.x[t])
        if share <= 1e-15:
            continue
        pi[i] = share
        for (k, b), th in theta[i].items():
            val = th * share
            if val > 1e-15:
                alpha[(k, b, i)] = val
    total = pi.sum()
    if total <= 0:
        return alloc
    pi /= total
    return Allocation(alpha, pi, alloc.shape)


def extract_association(alloc: Allocation,
                        threshold: float = DEFAULT_ACTIVITY_THRESHOLD) -> np.ndarray:
    """Binary point-to-cell association implied by the allocation: a point
    is served by every cell that gives it more than threshold resources."""
    k_n, b_n, _ = alloc.shape
    totals = np.zeros((k_n, b_n))
    for (k, b, _i), val in alloc.alpha.items():
        totals[k, b] += val
    return (totals > threshold).astype(int)


def _report_from_allocation(alloc: Allocation, topo: NetworkTopology,
                            rates: RateTable, cfg: EnergyConfig, *,
                            feasible: bool, trace: list[float],
                            inner_iters: list[int], outer: int,
                            r_sum: float) -> SolveReport:
    rho = np.clip(alloc.rho(), 0.0, 1.0)
    return SolveReport(
        feasible=feasible,
        allocation=alloc,
        rho=rho,
        p_tot=total_power(rho, topo, cfg.activity_threshold),
        active_cells=[int(b) for b in np.flatnonzero(rho > cfg.activity_threshold)],
        n_active_patterns=alloc.n_active_patterns(),
        point_rates=alloc.point_rates(rates),
        association=extract_association(alloc, cfg.activity_threshold),
        objective_trace=trace,
        inner_iterations=inner_iters,
        outer_iters=outer,
        r_sum_balance=r_sum,
    )


def minimize_energy(topo: NetworkTopology, rates: RateTable,
                    demand: np.ndarray | DemandProfile, patterns: PatternSet,
                    cfg: EnergyConfig | None = None, seed: int = 0) -> SolveReport:
    """Full pipeline: feasibility test, then reweighted minimization.

    Returns an infeasible report (empty allocation) when the demands exceed
    what rate balancing can deliver; returns the balancing solution itself
    in the knife-edge case where capacity exactly equals demand. Otherwise
    runs up to ``cfg.max_outer_iters`` reweighted steps, stopping early
    once the smoothed objective stalls.
    """
    cfg = cfg or EnergyConfig()
    d = demand.d if isinstance(demand, DemandProfile) else np.asarray(demand, dtype=float)
    k_n, b_n, i_n = rates.shape
    if d.shape != (k_n,):
        raise ValueError("demand length must match the rate table")
    if patterns.n_patterns != i_n or patterns.n_cells != b_n or topo.n_cells != b_n:
        raise ValueError("topology, rate table and pattern set disagree on dimensions")

    if d.sum() == 0.0:
        empty = Allocation.empty(rates.shape)
        return _report_from_allocation(empty, topo, rates, cfg, feasible=True,
                                       trace=[], inner_iters=[], outer=0,
                                       r_sum=math.inf)

    profile = DemandProfile(d)
    bal = rate_balance(rates, profile, patterns, seed=seed)
    if not is_feasible(bal.r_sum, profile):
        empty = Allocation.empty(rates.shape)
        return _report_from_allocation(empty, topo, rates, cfg, feasible=False,
                                       trace=[], inner_iters=[], outer=0,
                                       r_sum=bal.r_sum)
    if bal.r_sum <= profile.total * (1.0 + 1e-9):
        # Exactly at capacity: the balancing solution is the solution.
        return _report_from_allocation(bal.allocation, topo, rates, cfg,
                                       feasible=True, trace=[], inner_iters=[],
                                       outer=0, r_sum=bal.r_sum)

    current = bal.allocation
    trace: list[float] = []
    inner_iters: list[int] = []
    p_op = topo.op_power_max()
    for t in range(1, cfg.max_outer_iters + 1):
        if t == 1:
            w = WeightVector(p_op.copy())
        else:
            w = update_weights(current.rho(), topo, cfg)
        result = solve_weighted_l1(w, rates, profile, patterns, bal.allocation, cfg)
        current = result.allocation
        inner_iters.append(result.iterations)
        trace.append(smoothed_objective(current.rho(), topo, cfg))
        if t >= 2 and abs(trace[-1] - trace[-2]) <= cfg.outer_rel_change * max(1.0, abs(trace[-2])):
            break

    if cfg.cleanup:
        current = _activation_cleanup(current, topo, rates, patterns, profile.d, cfg)
    current = _caratheodory_reduce(current, rates)
    return _report_from_allocation(current, topo, rates, cfg, feasible=True,
                                   trace=trace, inner_iters=inner_iters,
                                   outer=len(trace), r_sum=bal.r_sum)
