"""Self-contained dense LP solver with dual multipliers.

Two-phase primal simplex on a full tableau. Master problems in this
package are small by construction (a handful of variables, one row per
cut), so a dense tableau beats any sparse machinery; the artificial
columns are kept through phase 2 where they track the basis inverse and
hand out the row duals for free.

Dual convention: multipliers always refer to the *minimized* form (the
cost vector is negated internally for ``maximize``). With
``eta = duals_ub >= 0`` and ``nu = duals_eq``,

    inf_x  c'x + eta'(A_ub x - b_ub) + nu'(A_eq x - b_eq)   over l <= x <= u

equals the minimized optimal value; :func:`lagrangian_dual_value` evaluates
that expression so tests can certify strong duality from the outside.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import SolverError

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-8
OPT_TOL = 1e-9


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """min (or max) c'x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lower <= x <= upper.

    Bounds default to [0, +inf); entries may be +-inf.
    """

    c: np.ndarray
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    maximize: bool = False

    def __post_init__(self):
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        n = self.c.size
        if not np.isfinite(self.c).all():
            raise ValueError("cost vector must be finite")

        def _block(a, b, name):
            if a is None or (hasattr(a, "__len__") and len(a) == 0):
                return np.zeros((0, n)), np.zeros(0)
            a = np.atleast_2d(np.asarray(a, dtype=float))
            b = np.atleast_1d(np.asarray(b, dtype=float))
            if a.shape != (b.size, n):
                raise ValueError(f"{name} block dimensions inconsistent")
            if not (np.isfinite(a).all() and np.isfinite(b).all()):
                raise ValueError(f"{name} block must be finite")
            return a, b

        self.a_ub, self.b_ub = _block(self.a_ub, self.b_ub, "inequality")
        self.a_eq, self.b_eq = _block(self.a_eq, self.b_eq, "equality")
        self.lower = (np.zeros(n) if self.lower is None
                      else np.atleast_1d(np.asarray(self.lower, dtype=float)))
        self.upper = (np.full(n, np.inf) if self.upper is None
                      else np.atleast_1d(np.asarray(self.upper, dtype=float)))
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bound vectors must match the cost dimension")
        if np.isnan(self.lower).any() or np.isnan(self.upper).any():
            raise ValueError("bounds must not be NaN")

    @property
    def n_vars(self) -> int:
        return self.c.size


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    value: float | None = None
    duals_ub: np.ndarray | None = None
    duals_eq: np.ndarray | None = None
    iterations: int = 0
    # Phase-1 certificate rows for infeasible problems, same sign convention
    # as the regular duals.
    farkas_ub: np.ndarray | None = None
    farkas_eq: np.ndarray | None = None


@dataclass
class _Standard:
    """min c'z, A z = b, z >= 0 plus the bookkeeping to map back."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    row_sign: np.ndarray
    n_eq: int
    n_ub: int
    const: float
    # var maps: per original variable a list of (column, coeff) plus offset:
    # x_j = offset_j + sum coeff * z_col
    offsets: np.ndarray
    col_terms: list[list[tuple[int, float]]]
    # slack column per row, -1 where the row has none (equality rows)
    slack_cols: np.ndarray = None


def _standardize(lp: LinearProgram) -> _Standard:
    n = lp.n_vars
    c_min = -lp.c if lp.maximize else lp.c

    cols: list[np.ndarray] = []       # structural columns as stacked (eq; ub) entries
    c_std: list[float] = []
    offsets = np.zeros(n)
    col_terms: list[list[tuple[int, float]]] = []
    bound_rows: list[tuple[int, float]] = []   # (structural column, rhs)

    a_user = np.vstack([lp.a_eq, lp.a_ub])
    b_user = np.concatenate([lp.b_eq, lp.b_ub]).astype(float).copy()
    const = 0.0

    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if lo > hi or lo == np.inf or hi == -np.inf:
            # Trivially infeasible box; emit an impossible bound row 0 <= -1.
            cols.append(np.zeros(a_user.shape[0]))
            c_std.append(0.0)
            col_terms.append([(len(cols) - 1, 1.0)])
            offsets[j] = 0.0
            bound_rows.append((len(cols) - 1, -1.0))
            continue
        if np.isfinite(lo):
            cols.append(a_user[:, j].copy())
            c_std.append(c_min[j])
            col_terms.append([(len(cols) - 1, 1.0)])
            offsets[j] = lo
            if lo != 0.0:
                b_user -= a_user[:, j] * lo
                const += c_min[j] * lo
            if np.isfinite(hi):
                bound_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            # x = hi - z with z >= 0
            cols.append(-a_user[:, j])
            c_std.append(-c_min[j])
            col_terms.append([(len(cols) - 1, -1.0)])
            offsets[j] = hi
            b_user -= a_user[:, j] * hi
            const += c_min[j] * hi
        else:
            cols.append(a_user[:, j].copy())
            c_std.append(c_min[j])
            cols.append(-a_user[:, j])
            c_std.append(-c_min[j])
            col_terms.append([(len(cols) - 2, 1.0), (len(cols) - 1, -1.0)])

    n_struct = len(cols)
    m_eq, m_ub, m_bd = lp.b_eq.size, lp.b_ub.size, len(bound_rows)
    m = m_eq + m_ub + m_bd

    a = np.zeros((m, n_struct + m_ub + m_bd))
    b = np.zeros(m)
    if n_struct:
        a[:m_eq + m_ub, :n_struct] = np.column_stack(cols) if cols else 0.0
    b[:m_eq + m_ub] = b_user
    slack_cols = np.full(m, -1, dtype=int)
    for r in range(m_ub):
        a[m_eq + r, n_struct + r] = 1.0
        slack_cols[m_eq + r] = n_struct + r
    for r, (col, rhs) in enumerate(bound_rows):
        a[m_eq + m_ub + r, col] = 1.0
        a[m_eq + m_ub + r, n_struct + m_ub + r] = 1.0
        b[m_eq + m_ub + r] = rhs
        slack_cols[m_eq + m_ub + r] = n_struct + m_ub + r

    row_sign = np.ones(m)
    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0
    row_sign[neg] = -1.0

    c_full = np.concatenate([np.asarray(c_std, dtype=float),
                             np.zeros(m_ub + m_bd)])
    return _Standard(a, b, c_full, row_sign, m_eq, m_ub, const, offsets,
                     col_terms, slack_cols)


def _equilibrate(std: _Standard) -> tuple[np.ndarray, np.ndarray, np.ndarray,
                                          np.ndarray, np.ndarray]:
    """Max-norm row scaling followed by column scaling.

    The problems this package assembles mix unit-scale simplex rows with
    bit/s-scale rate rows, so pivot tolerances are meaningless without
    scaling. Rows are scaled first; column scaling then only ever *shrinks*
    a column (factors <= 1), which keeps the original-unit optimality
    thresholds representable after rescaling. Returns
    (a, b, c_scaled, row_scale, col_scale).
    """
    a = std.a.copy()
    row_scale = np.abs(a).max(axis=1) if a.size else np.ones(a.shape[0])
    row_scale = np.where(row_scale > 0, row_scale, 1.0)
    a /= row_scale[:, None]
    col_scale = np.abs(a).max(axis=0) if a.size else np.ones(a.shape[1])
    col_scale = np.where(col_scale > 0, col_scale, 1.0)
    a /= col_scale
    return a, std.b / row_scale, std.c / col_scale, row_scale, col_scale


REFRESH_EVERY = 100


class _Simplex:
    """Full-tableau simplex over one standard-form system (equilibrated).

    The tableau is refactorized from the pristine matrix every
    ``REFRESH_EVERY`` pivots and before any optimality or unboundedness
    verdict, so incremental round-off can delay convergence but never leak
    into the answer.
    """

    def __init__(self, std: _Standard, max_iter: int | None = None):
        a, b, c, self.row_scale, self.col_scale = _equilibrate(std)
        self.c_scaled = c
        # Optimality thresholds are stated in original cost units; map them
        # into scaled units per column (col_scale <= 1 keeps this finite).
        self.rc_tol = OPT_TOL * (1.0 + np.abs(std.c)) / self.col_scale
        self.m, self.n = a.shape
        self.a0 = np.hstack([a, np.eye(self.m)])
        self.b0 = b.copy()
        self.tab = self.a0.copy()
        self.rhs = b.copy()
        self.art_start = self.n
        # Rows whose slack survived un-negated start on that slack; only the
        # rest need an artificial driven out in phase 1.
        self.basis = np.arange(self.n, self.n + self.m)
        for r in range(self.m):
            if std.slack_cols[r] >= 0 and std.row_sign[r] > 0:
                self.basis[r] = std.slack_cols[r]
        self.col_scale_full = np.concatenate([self.col_scale, np.ones(self.m)])
        self.iterations = 0
        self.since_refresh = 0
        self.max_iter = max_iter if max_iter is not None else 5000 + 100 * (self.m + self.n)
        self.b_scale = 1.0 + (abs(b).max() if self.m else 0.0)
        if (self.basis < self.art_start).any():
            self.refresh()

    @property
    def needs_phase1(self) -> bool:
        return bool((self.basis >= self.art_start).any())

    def refresh(self) -> None:
        """Recompute tableau and rhs from the basis by a fresh solve."""
        if self.m == 0:
            return
        basis_mat = self.a0[:, self.basis]
        try:
            self.tab = np.linalg.solve(basis_mat, self.a0)
            self.rhs = np.linalg.solve(basis_mat, self.b0)
        except np.linalg.LinAlgError:
            return
        np.clip(self.rhs, 0.0, None, out=self.rhs)
        self.since_refresh = 0

    def _pivot(self, r: int, e: int, rc: np.ndarray):
        piv = self.tab[r, e]
        self.tab[r] /= piv
        self.rhs[r] /= piv
        col = self.tab[:, e].copy()
        col[r] = 0.0
        self.tab -= np.outer(col, self.tab[r])
        self.rhs -= col * self.rhs[r]
        np.clip(self.rhs, 0.0, None, out=self.rhs)
        rc -= rc[e] * self.tab[r]
        self.basis[r] = e

    def _ratio_row(self, e: int, bland: bool) -> int | None:
        col = self.tab[:, e]
        ok = col > PIVOT_TOL
        if not ok.any():
            return None
        rows = np.flatnonzero(ok)
        ratios = self.rhs[rows] / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
        if bland:
            return int(tied[np.argmin(self.basis[tied])])
        art = tied[self.basis[tied] >= self.art_start]
        if art.size:
            tied = art
        return int(tied[np.argmax(col[tied])])

    def run(self, cost: np.ndarray, allow_artificial_entry: bool = False) -> str:
        """Minimize ``cost`` from the current basis. Returns 'optimal'/'unbounded'."""
        c = np.concatenate([cost, np.zeros(self.m)]) if cost.size == self.n else cost
        rc = c - c[self.basis] @ self.tab
        z = float(c[self.basis] @ self.rhs)
        # Thresholds are per original-unit costs, mapped into scaled units.
        rc_scale = OPT_TOL * (1.0 + np.abs(c * self.col_scale_full)) / self.col_scale_full
        enterable = np.ones(self.n + self.m, dtype=bool)
        if not allow_artificial_entry:
            enterable[self.art_start:] = False
        in_basis = np.zeros(self.n + self.m, dtype=bool)
        in_basis[self.basis] = True

        bland = False
        stalled = 0
        verified = False
        while True:
            if self.iterations > self.max_iter:
                raise SolverError("simplex iteration cap exceeded")
            if self.since_refresh >= REFRESH_EVERY:
                self.refresh()
                rc = c - c[self.basis] @ self.tab
            # Basic columns have reduced cost zero up to basis-solve noise;
            # letting one "re-enter" would pivot in place forever.
            cand = enterable & ~in_basis & (rc < -rc_scale)
            if not cand.any():
                # Confirm on a refactorized tableau; apply hysteresis so that
                # round-off on an ill-conditioned basis cannot flip the verdict
                # back and forth.
                if self.since_refresh > 0 and not verified:
                    self.refresh()
                    rc = c - c[self.basis] @ self.tab
                    verified = True
                    if (enterable & ~in_basis & (rc < -4.0 * rc_scale)).any():
                        continue
                return "optimal"
            verified = False
            if bland:
                e = int(np.flatnonzero(cand)[0])
            else:
                masked = np.where(cand, rc, np.inf)
                e = int(np.argmin(masked))
            r = self._ratio_row(e, bland)
            if r is None:
                if self.since_refresh > 0:
                    self.refresh()
                    rc = c - c[self.basis] @ self.tab
                    if self._ratio_row(e, bland) is not None or rc[e] >= -rc_scale[e]:
                        continue
                return "unbounded"
            leaving = self.basis[r]
            self._pivot(r, e, rc)
            in_basis[leaving] = False
            in_basis[e] = True
            self.iterations += 1
            self.since_refresh += 1
            z_new = float(c[self.basis] @ self.rhs)
            if z_new < z - 1e-13 * (1.0 + abs(z)):
                stalled = 0
                bland = False
            else:
                stalled += 1
                if stalled > 2 * (self.m + 10):
                    bland = True
            z = z_new

    def drive_out_artificials(self):
        for r in range(self.m):
            if self.basis[r] < self.art_start:
                continue
            row = self.tab[r, :self.art_start]
            nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
            if nz.size:
                # rhs is zero here, so any pivot sign keeps feasibility.
                piv = self.tab[r, nz[0]]
                self.tab[r] /= piv
                self.rhs[r] /= piv
                col = self.tab[:, nz[0]].copy()
                col[r] = 0.0
                self.tab -= np.outer(col, self.tab[r])
                self.rhs -= col * self.rhs[r]
                np.clip(self.rhs, 0.0, None, out=self.rhs)
                self.basis[r] = int(nz[0])

    def row_duals(self, cost: np.ndarray) -> np.ndarray:
        c = (cost if cost.size == self.n + self.m
             else np.concatenate([cost, np.zeros(self.m)]))
        if self.m == 0:
            return np.zeros(0)
        basis_mat = self.a0[:, self.basis]
        try:
            return np.linalg.solve(basis_mat.T, c[self.basis])
        except np.linalg.LinAlgError:
            return c[self.basis] @ self.tab[:, self.art_start:]


def solve(lp: LinearProgram, max_iter: int | None = None) -> LpSolution:
    """Solve the LP; never raises for infeasible/unbounded inputs."""
    std = _standardize(lp)
    sx = _Simplex(std, max_iter=max_iter)

    phase1 = np.concatenate([np.zeros(std.c.size), np.ones(sx.m)])
    if sx.m and sx.needs_phase1:
        status1 = sx.run(phase1)
        if status1 != "optimal":        # cannot happen: phase 1 is bounded below
            raise SolverError("phase 1 terminated abnormally")
        z1 = float(phase1[sx.basis] @ sx.rhs)
        if z1 > FEAS_TOL * sx.b_scale:
            y1 = std.row_sign * sx.row_duals(phase1) / sx.row_scale
            m_eq = std.n_eq
            return LpSolution(
                status=LpStatus.INFEASIBLE,
                iterations=sx.iterations,
                farkas_eq=-y1[:m_eq],
                farkas_ub=-y1[m_eq:m_eq + std.n_ub],
            )
        sx.drive_out_artificials()

    status2 = sx.run(sx.c_scaled)
    if status2 == "unbounded":
        return LpSolution(status=LpStatus.UNBOUNDED, iterations=sx.iterations)

    # Column scaling cancels in the objective, so this is already in
    # original units.
    z = float(np.concatenate([sx.c_scaled, np.zeros(sx.m)])[sx.basis] @ sx.rhs)
    value_min = z + std.const

    x_std = np.zeros(sx.n)
    in_struct = sx.basis < sx.n
    x_std[sx.basis[in_struct]] = sx.rhs[in_struct]
    x_std /= sx.col_scale
    x = std.offsets.copy()
    for j, terms in enumerate(std.col_terms):
        x[j] += sum(coeff * x_std[col] for col, coeff in terms)

    y = std.row_sign * sx.row_duals(sx.c_scaled) / sx.row_scale
    m_eq = std.n_eq
    duals_eq = -y[:m_eq]
    duals_ub = -y[m_eq:m_eq + std.n_ub]
    # Round tiny negative multipliers on inequalities up to zero.
    np.maximum(duals_ub, 0.0, out=duals_ub)

    return LpSolution(
        status=LpStatus.OPTIMAL,
        x=x,
        value=-value_min if lp.maximize else value_min,
        duals_ub=duals_ub,
        duals_eq=duals_eq,
        iterations=sx.iterations,
    )


def lagrangian_dual_value(lp: LinearProgram, duals_ub: np.ndarray,
                          duals_eq: np.ndarray, rtol: float = 1e-8) -> float:
    """Dual objective of the minimized form at the given multipliers.

    Equals the minimized optimal value when the multipliers are optimal;
    -inf if they are dual infeasible with respect to an unbounded box
    direction. Reduced costs within ``rtol`` of zero are treated as zero so
    that simplex round-off does not spuriously report -inf.
    """
    c_min = -lp.c if lp.maximize else lp.c
    eta = np.zeros(lp.b_ub.size) if duals_ub is None else np.asarray(duals_ub, dtype=float)
    nu = np.zeros(lp.b_eq.size) if duals_eq is None else np.asarray(duals_eq, dtype=float)
    r = c_min + lp.a_ub.T @ eta + lp.a_eq.T @ nu
    tol = rtol * (1.0 + np.abs(c_min))
    total = -float(eta @ lp.b_ub) - float(nu @ lp.b_eq)
    for j in range(lp.n_vars):
        lo, hi = lp.lower[j], lp.upper[j]
        if abs(r[j]) <= tol[j]:
            continue
        edge = lo if r[j] > 0 else hi
        if not np.isfinite(edge):
            return -np.inf
        total += r[j] * edge
    return total


def farkas_certificate_value(lp: LinearProgram, farkas_ub: np.ndarray,
                             farkas_eq: np.ndarray) -> float:
    """Infeasibility margin proven by a Farkas-type dual ray (positive
    certifies that no point in the box satisfies all constraints)."""
    zero_cost = LinearProgram(
        c=np.zeros(lp.n_vars), a_ub=lp.a_ub, b_ub=lp.b_ub,
        a_eq=lp.a_eq, b_eq=lp.b_eq, lower=lp.lower, upper=lp.upper)
    return lagrangian_dual_value(zero_cost, farkas_ub, farkas_eq)
