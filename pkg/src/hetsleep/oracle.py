"""Independent brute-force references for the optimizer stack.

Two flavors of ground truth:

* monolithic LP assemblies of the balancing / pricing / weighted-usage
  problems, solved directly (no cutting planes, no closed forms);
* an exact minimizer of the activation problem that enumerates every cell
  subset, charges its fixed power outright and lets an LP allocate the rest.

These exist to verify the production path, so they share nothing with it
beyond the LP engine itself.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .balancer import DemandProfile
from .energymin import WeightVector
from .errors import CapacityError
from .lpcore import LinearProgram, LpSolution, LpStatus, solve
from .netmodel import NetworkTopology, RateTable
from .patterns import PatternSet

VARIABLE_CAP = 20000
SUBSET_CELL_CAP = 8


def _check_size(n_vars: int) -> None:
    if n_vars > VARIABLE_CAP:
        raise CapacityError(f"direct LP would have {n_vars} variables (cap {VARIABLE_CAP})")


def _x_rows(k_n: int, b_n: int, i_n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Constraint blocks of the shared polytope over [alpha (K*B*I), pi (I)].

    Inequalities: per (cell, pattern), the points' shares cannot exceed the
    pattern share. Equality: pattern shares sum to one.
    """
    n_alpha = k_n * b_n * i_n
    n_vars = n_alpha + i_n
    a_ub = np.zeros((b_n * i_n, n_vars))
    for b in range(b_n):
        for i in range(i_n):
            row = b * i_n + i
            a_ub[row, np.arange(k_n) * b_n * i_n + b * i_n + i] = 1.0
            a_ub[row, n_alpha + i] = -1.0
    b_ub = np.zeros(b_n * i_n)
    a_eq = np.zeros((1, n_vars))
    a_eq[0, n_alpha:] = 1.0
    return a_ub, b_ub, a_eq, np.ones(1)


def direct_balance(rates: RateTable, demand: DemandProfile) -> tuple[float, LpSolution]:
    """Monolithic solve of the rate-balancing problem; returns (R_sum*, solution).

    Zero-demand points are dropped up front, matching how the production
    path treats them.
    """
    keep = np.flatnonzero(demand.d > 0)
    r = rates.r[keep]
    beta = demand.d[keep] / demand.d.sum()
    k_n, b_n, i_n = r.shape
    n_alpha = k_n * b_n * i_n
    n_vars = n_alpha + i_n + 1
    _check_size(n_vars)

    a_ub_x, b_ub_x, a_eq, b_eq = _x_rows(k_n, b_n, i_n)
    a_ub_x = np.hstack([a_ub_x, np.zeros((a_ub_x.shape[0], 1))])
    a_eq = np.hstack([a_eq, np.zeros((1, 1))])

    a_dem = np.zeros((k_n, n_vars))
    for k in range(k_n):
        a_dem[k, k * b_n * i_n:(k + 1) * b_n * i_n] = -r[k].ravel()
        a_dem[k, -1] = beta[k]

    c = np.zeros(n_vars)
    c[-1] = -1.0
    sol = solve(LinearProgram(c=c, a_ub=np.vstack([a_ub_x, a_dem]),
                              b_ub=np.concatenate([b_ub_x, np.zeros(k_n)]),
                              a_eq=a_eq, b_eq=b_eq))
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"balance LP ended {sol.status.value}")
    return float(sol.x[-1]), sol


def direct_inner_balance(lam: np.ndarray, rates: RateTable,
                         demand: DemandProfile) -> tuple[float, LpSolution]:
    """Monolithic solve of the balancing pricing subproblem at multipliers lam."""
    k_n, b_n, i_n = rates.shape
    n_vars = k_n * b_n * i_n + i_n
    _check_size(n_vars)
    ring = -(rates.r * (np.asarray(lam, dtype=float) / demand.beta)[:, None, None])
    c = np.concatenate([ring.ravel(), np.zeros(i_n)])
    a_ub, b_ub, a_eq, b_eq = _x_rows(k_n, b_n, i_n)
    sol = solve(LinearProgram(c=c, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=b_eq))
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"inner balance LP ended {sol.status.value}")
    return float(sol.value), sol


def direct_weighted(w: WeightVector, rates: RateTable,
                    demand: DemandProfile | np.ndarray) -> tuple[float, LpSolution]:
    """Monolithic solve of the weighted-usage problem under rate demands."""
    d = demand.d if isinstance(demand, DemandProfile) else np.asarray(demand, dtype=float)
    k_n, b_n, i_n = rates.shape
    n_alpha = k_n * b_n * i_n
    n_vars = n_alpha + i_n
    _check_size(n_vars)

    c = np.concatenate([np.tile(np.repeat(w.w, i_n), k_n), np.zeros(i_n)])
    a_ub_x, b_ub_x, a_eq, b_eq = _x_rows(k_n, b_n, i_n)
    a_dem = np.zeros((k_n, n_vars))
    for k in range(k_n):
        a_dem[k, k * b_n * i_n:(k + 1) * b_n * i_n] = -rates.r[k].ravel()
    sol = solve(LinearProgram(c=c, a_ub=np.vstack([a_ub_x, a_dem]),
                              b_ub=np.concatenate([b_ub_x, -d]),
                              a_eq=a_eq, b_eq=b_eq))
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"weighted LP ended {sol.status.value}")
    return float(sol.value), sol


def direct_inner_energy(mu: np.ndarray, w: WeightVector, rates: RateTable,
                        demand: DemandProfile | np.ndarray) -> tuple[float, LpSolution]:
    """Monolithic solve of the energy pricing subproblem at multipliers mu."""
    d = demand.d if isinstance(demand, DemandProfile) else np.asarray(demand, dtype=float)
    mu = np.asarray(mu, dtype=float)
    k_n, b_n, i_n = rates.shape
    n_vars = k_n * b_n * i_n + i_n
    _check_size(n_vars)
    scores = w.w[None, :, None] - rates.r * mu[:, None, None]
    c = np.concatenate([scores.ravel(), np.zeros(i_n)])
    a_ub, b_ub, a_eq, b_eq = _x_rows(k_n, b_n, i_n)
    sol = solve(LinearProgram(c=c, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=b_eq))
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"inner energy LP ended {sol.status.value}")
    return float(sol.value + d @ mu), sol


def direct_lp(problem: str, **data) -> tuple[float, LpSolution]:
    """Dispatch by problem name: balance, inner, weighted, inner_energy."""
    table = {
        "balance": direct_balance,
        "inner": direct_inner_balance,
        "weighted": direct_weighted,
        "inner_energy": direct_inner_energy,
    }
    if problem not in table:
        raise ValueError(f"unknown direct LP problem {problem!r}")
    return table[problem](**data)


def _is_full_enumeration(patterns: PatternSet) -> bool:
    b_n = patterns.n_cells
    if patterns.n_patterns != 2 ** b_n - 1:
        return False
    masks = {int("".join(map(str, row)), 2) for row in patterns.rows()}
    return masks == set(range(1, 2 ** b_n))


def _table_is_monotone(rates: RateTable, patterns: PatternSet, rtol: float = 1e-9) -> bool:
    """More interferers never help: for nested active sets the rate of every
    link present in the smaller set is at least its rate in the larger."""
    masks = [int("".join(map(str, row)), 2) for row in patterns.rows()]
    a = patterns.a.astype(bool)
    for i, mi in enumerate(masks):
        for j, mj in enumerate(masks):
            if i == j or (mi & mj) != mi:
                continue
            cols = np.flatnonzero(a[i])
            small = rates.r[:, cols, i]
            large = rates.r[:, cols, j]
            if (large > small * (1.0 + rtol) + 1e-12).any():
                return False
    return True


def _zero_structure_ok(rates: RateTable, patterns: PatternSet) -> bool:
    muted = ~patterns.a.T.astype(bool)  # B x I
    return not rates.r[:, muted].any()


def _subset_lp(entries: list[tuple[int, int, int]], pattern_ids: list[int],
               rates: RateTable, d: np.ndarray, cost_alpha: np.ndarray) -> float | None:
    """Minimum linear usage cost with columns restricted to the given
    (point, cell, pattern) entries. None when infeasible."""
    n_alpha = len(entries)
    n_pi = len(pattern_ids)
    n_vars = n_alpha + n_pi
    _check_size(n_vars)
    pi_col = {i: n_alpha + t for t, i in enumerate(pattern_ids)}

    pairs: dict[tuple[int, int], list[int]] = {}
    served_cols: dict[int, list[tuple[int, float]]] = {}
    for col, (k, b, i) in enumerate(entries):
        pairs.setdefault((b, i), []).append(col)
        served_cols.setdefault(k, []).append((col, rates.r[k, b, i]))

    kept = np.flatnonzero(d > 0)
    a_ub = np.zeros((len(pairs) + kept.size, n_vars))
    b_ub = np.zeros(len(pairs) + kept.size)
    for row, ((b, i), cols) in enumerate(sorted(pairs.items())):
        a_ub[row, cols] = 1.0
        a_ub[row, pi_col[i]] = -1.0
    for t, k in enumerate(kept):
        row = len(pairs) + t
        for col, rate in served_cols.get(int(k), []):
            a_ub[row, col] = -rate
        b_ub[row] = -d[k]

    a_eq = np.zeros((1, n_vars))
    a_eq[0, n_alpha:] = 1.0
    c = np.concatenate([cost_alpha, np.zeros(n_pi)])
    sol = solve(LinearProgram(c=c, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=np.ones(1)))
    if sol.status is LpStatus.INFEASIBLE:
        return None
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"subset LP ended {sol.status.value}")
    return float(sol.value)


def exhaustive_min_power(topo: NetworkTopology, rates: RateTable,
                         demand: np.ndarray | DemandProfile,
                         patterns: PatternSet) -> tuple[float, frozenset[int]]:
    """Exact optimum of the activation problem by cell-subset enumeration.

    For each candidate active set the fixed power is charged up front and
    the remaining variable cost is a plain LP with allocations forbidden
    outside the set; the best subset wins. Subsets are visited in order of
    fixed cost so anything at least as expensive as the incumbent is pruned
    without a solve. When the candidate patterns are the full enumeration
    and the table is interference-monotone, patterns outside the active set
    are provably useless and are dropped to shrink the LPs.

    Returns inf and the empty set when no subset can serve the demand.
    """
    d = demand.d if isinstance(demand, DemandProfile) else np.asarray(demand, dtype=float)
    b_n = topo.n_cells
    k_n, b_r, i_n = rates.shape
    if b_r != b_n or patterns.n_patterns != i_n:
        raise ValueError("topology, rate table and pattern set disagree on dimensions")
    if b_n > SUBSET_CELL_CAP:
        raise CapacityError(f"subset enumeration capped at {SUBSET_CELL_CAP} cells")
    if d.sum() == 0.0:
        return 0.0, frozenset()

    q = topo.fixed_fraction()
    p_op = topo.op_power_max()
    zero_ok = _zero_structure_ok(rates, patterns)
    restrict = (_is_full_enumeration(patterns) and zero_ok
                and _table_is_monotone(rates, patterns))
    masks = [int("".join(map(str, row)), 2) for row in patterns.rows()]

    subsets = []
    for size in range(1, b_n + 1):
        for combo in itertools.combinations(range(b_n), size):
            fixed = float(sum(q[b] * p_op[b] for b in combo))
            subsets.append((fixed, combo))
    subsets.sort(key=lambda t: (t[0], t[1]))

    best_val = math.inf
    best_set: frozenset[int] | None = None
    for fixed, combo in subsets:
        if fixed >= best_val:
            continue
        in_set = set(combo)
        set_mask = sum(1 << (b_n - 1 - b) for b in combo)
        if restrict:
            pattern_ids = [i for i, m in enumerate(masks) if (m & set_mask) == m]
        else:
            pattern_ids = list(range(i_n))
        entries = []
        active = patterns.a.astype(bool)
        for i in pattern_ids:
            for b in combo:
                if zero_ok and not active[i, b]:
                    continue
                for k in range(k_n):
                    if d[k] > 0:
                        entries.append((k, b, i))
        cost_alpha = np.array([(1.0 - q[b]) * p_op[b] for (_k, b, _i) in entries])
        linear = _subset_lp(entries, pattern_ids, rates, d, cost_alpha)
        if linear is None:
            continue
        val = fixed + linear
        if val < best_val or (val == best_val and best_set is not None
                              and tuple(sorted(in_set)) < tuple(sorted(best_set))):
            best_val = val
            best_set = frozenset(in_set)

    if best_set is None:
        return math.inf, frozenset()
    return best_val, best_set
