"""Baseline strategies: reuse-1, biased cell selection and bias fitting.

These wrap the main optimizer so that every baseline differs from the
joint solution only in what it restricts: reuse-1 restricts the candidate
patterns to all-on, range expansion fixes the association up front, and
bias fitting maps a jointly optimized association back onto the standard
per-cell selection-offset rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .balancer import Allocation, DemandProfile
from .energymin import (EnergyConfig, SolveReport, _report_from_allocation,
                        minimize_energy)
from .netmodel import (ChannelGains, NetworkTopology, RadioConfig, RateTable,
                       build_rate_table)
from .patterns import PatternSet, reuse1
from .units import linear_to_db


@dataclass(frozen=True)
class RsrpTable:
    """Received reference-signal power (dBm), cells x points: transmit power
    plus large-scale gain."""

    rsrp: np.ndarray

    def __post_init__(self):
        rsrp = np.asarray(self.rsrp, dtype=float)
        if rsrp.ndim != 2 or not np.isfinite(rsrp).all():
            raise ValueError("RSRP must be a finite cells x points matrix")
        object.__setattr__(self, "rsrp", rsrp)


@dataclass(frozen=True)
class BiasVector:
    """Per-cell selection offsets (dB) added to RSRP before the argmax."""

    eta: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        if (eta < 0).any() or not np.isfinite(eta).all():
            raise ValueError("biases must be non-negative and finite")
        object.__setattr__(self, "eta", eta)


@dataclass(frozen=True)
class BiasFitConfig:
    """Coordinate-descent settings for fitting selection biases."""

    weights: np.ndarray | None = None   # per-cell mismatch weights, defaults to op power
    grid_lo_db: float = 0.0
    grid_hi_db: float = 60.0
    grid_step_db: float = 0.1
    n_orders: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.grid_hi_db <= self.grid_lo_db or self.grid_step_db <= 0:
            raise ValueError("bias grid must have hi > lo and positive step")
        if self.n_orders < 1:
            raise ValueError("need at least one update order")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if (w < 0).any():
                raise ValueError("mismatch weights must be non-negative")
            object.__setattr__(self, "weights", w)


def rsrp_from_gains(topo: NetworkTopology, gains: ChannelGains) -> RsrpTable:
    tx_dbm = np.array([c.tx_power_dbm for c in topo.cells])
    return RsrpTable(tx_dbm[:, None] + linear_to_db(gains.g))


def re_associate(rsrp: RsrpTable, eta: BiasVector) -> np.ndarray:
    """Biased strongest-cell selection; points x cells, one 1 per row.

    Ties go to the lowest cell index.
    """
    biased = rsrp.rsrp + eta.eta[:, None]
    choice = biased.argmax(axis=0)
    out = np.zeros((rsrp.rsrp.shape[1], rsrp.rsrp.shape[0]), dtype=int)
    out[np.arange(choice.size), choice] = 1
    return out


def reuse1_minimize(topo: NetworkTopology, gains: ChannelGains, radio: RadioConfig,
                    demand: np.ndarray | DemandProfile,
                    cfg: EnergyConfig | None = None, seed: int = 0) -> SolveReport:
    """Energy minimization with the candidate patterns restricted to all-on.

    Rates are computed with every cell transmitting, so deactivation never
    improves anyone's rate; this reproduces schemes that ignore the
    interference relief of muting.
    """
    patterns = reuse1(topo.n_cells)
    rates = build_rate_table(topo, gains, radio, patterns)
    return minimize_energy(topo, rates, demand, patterns, cfg, seed=seed)


def fixed_assoc_minimize(topo: NetworkTopology, rates: RateTable, assoc: np.ndarray,
                         demand: np.ndarray | DemandProfile, patterns: PatternSet,
                         cfg: EnergyConfig | None = None, seed: int = 0) -> SolveReport:
    """Energy minimization with the point-cell association fixed in advance.

    Disallowed links are zeroed in the rate table; the unrestricted solver
    then never allocates there, so the standard machinery applies as-is. A
    positive-demand point whose every allowed link is dead yields an
    infeasible report immediately.
    """
    cfg = cfg or EnergyConfig()
    d = demand.d if isinstance(demand, DemandProfile) else np.asarray(demand, dtype=float)
    assoc = np.asarray(assoc)
    if assoc.shape != rates.shape[:2]:
        raise ValueError("association must be points x cells")

    effective = RateTable(rates.r * assoc[:, :, None])
    servable = effective.r.max(axis=(1, 2)) > 0
    if ((d > 0) & ~servable).any():
        empty = Allocation.empty(rates.shape)
        return _report_from_allocation(empty, topo, effective, cfg, feasible=False,
                                       trace=[], inner_iters=[], outer=0, r_sum=0.0)
    return minimize_energy(topo, effective, d, patterns, cfg, seed=seed)


def association_error(rsrp: RsrpTable, eta: BiasVector, reference: np.ndarray,
                      weights: np.ndarray) -> float:
    """Weighted squared mismatch between the biased selection and a reference.

    For binary matrices this is the weighted count of wrongly set entries:
    each point contributes the weights of the cells where the single
    selection and the reference disagree.
    """
    sel = re_associate(rsrp, eta)
    return float(((sel - np.asarray(reference)) ** 2 * np.asarray(weights)[None, :]).sum())


def fit_biases(reference: np.ndarray, rsrp: RsrpTable,
               cfg: BiasFitConfig | None = None,
               topo: NetworkTopology | None = None) -> tuple[BiasVector, float]:
    """Fit per-cell selection biases reproducing a reference association.

    Cyclic coordinate descent with a one-dimensional grid search per cell,
    restarted from zero for several randomized update orders; the best
    result wins (ties broken toward the lexicographically smallest bias
    vector). Multi-cell reference rows can never be matched exactly by a
    single-selection rule, so their residual error is unavoidable.

    Default mismatch weights are the cells' operational powers when a
    topology is supplied (mis-assigning a point to a macro is costlier than
    to a pico), else uniform.
    """
    cfg = cfg or BiasFitConfig()
    rsrp_m = rsrp.rsrp
    b_n, k_n = rsrp_m.shape
    reference = np.asarray(reference)
    if reference.shape != (k_n, b_n):
        raise ValueError("reference association must be points x cells")
    if cfg.weights is not None:
        weights = cfg.weights
    elif topo is not None:
        weights = topo.op_power_max()
    else:
        weights = np.ones(b_n)
    if weights.shape != (b_n,):
        raise ValueError("weight vector length must match the cell count")

    # Per-point error when cell c is selected: base_k + w_c * (1 - 2 ref_kc),
    # with base_k the weight of every reference 1 of the point.
    base = (reference * weights[None, :]).sum(axis=1)

    if b_n == 1:
        eta = BiasVector(np.zeros(1))
        return eta, association_error(rsrp, eta, reference, weights)

    grid = cfg.grid_lo_db + cfg.grid_step_db * np.arange(
        int(round((cfg.grid_hi_db - cfg.grid_lo_db) / cfg.grid_step_db)) + 1)
    rng = np.random.default_rng(cfg.seed)
    cell_ids = np.arange(b_n)

    best_eta = None
    best_err = np.inf
    for trial in range(cfg.n_orders):
        order = cell_ids if trial == 0 else rng.permutation(b_n)
        eta = np.zeros(b_n)
        err = association_error(rsrp, BiasVector(eta), reference, weights)
        improved = True
        while improved:
            improved = False
            for b in order:
                others = np.delete(cell_ids, b)
                rest = rsrp_m[others] + eta[others, None]
                rest_arg_local = rest.argmax(axis=0)
                rest_max = rest[rest_arg_local, np.arange(k_n)]
                rest_arg = others[rest_arg_local]
                # Selection as a function of eta[b], vectorized over the grid;
                # exact ties go to the lower cell index as in re_associate.
                cand = rsrp_m[b][None, :] + grid[:, None]
                wins = (cand > rest_max[None, :]) | (
                    (cand == rest_max[None, :]) & (b < rest_arg)[None, :])
                err_win = base + weights[b] * (1.0 - 2.0 * reference[:, b])
                err_lose = base + weights[rest_arg] * (
                    1.0 - 2.0 * reference[np.arange(k_n), rest_arg])
                grid_err = np.where(wins, err_win[None, :], err_lose[None, :]).sum(axis=1)
                j = int(grid_err.argmin())
                if grid_err[j] < err - 1e-12:
                    eta[b] = grid[j]
                    err = float(grid_err[j])
                    improved = True
        if err < best_err - 1e-12 or (abs(err - best_err) <= 1e-12 and best_eta is not None
                                      and tuple(eta) < tuple(best_eta)):
            best_err = err
            best_eta = eta.copy()
    return BiasVector(best_eta), float(best_err)
