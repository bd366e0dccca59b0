"""Network topology, propagation, rates and the cell power model.

Everything downstream consumes three arrays built here: the linear
large-scale gain matrix ``G`` (cells x points), the per-pattern rate table
``r`` (points x cells x patterns), and the per-cell operational power
parameters. All dB handling goes through :mod:`hetsleep.units`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GenerationError
from .patterns import PatternSet
from .units import db_to_linear, dbm_to_watt

DEFAULT_ACTIVITY_THRESHOLD = 1e-5

# Linear transmit-to-operational power maps, P_op = slope * P_tx + offset (W).
_OP_POWER_COEFF = {
    "macro": (22.6 / 3.0, 412.4 / 3.0),
    "pico": (5.5, 32.0),
}

# Urban path-loss models, dB at distance R km: intercept + slope * log10(R).
_PATH_LOSS_COEFF = {
    "macro": (128.1, 37.6),
    "pico": (140.7, 36.7),
}


class CellKind(enum.Enum):
    MACRO = "macro"
    PICO = "pico"


@dataclass(frozen=True)
class Cell:
    """One base station with its radio and power-model parameters.

    ``op_power_max`` is the operational power drawn at full utilization and
    ``fixed_fraction`` the share of it that is paid whenever the cell is on
    at all (1.0 models a constant-power macro).
    """

    id: int
    kind: CellKind
    position: tuple[float, float]
    tx_power_dbm: float
    antenna_gain_db: float
    op_power_max: float
    fixed_fraction: float

    def __post_init__(self):
        if not math.isfinite(self.tx_power_dbm):
            raise ValueError(f"cell {self.id}: non-finite tx power")
        if self.op_power_max <= 0:
            raise ValueError(f"cell {self.id}: op_power_max must be positive")
        if not 0.0 < self.fixed_fraction <= 1.0:
            raise ValueError(f"cell {self.id}: fixed_fraction must be in (0, 1]")

    @property
    def tx_power_watt(self) -> float:
        return float(dbm_to_watt(self.tx_power_dbm))


def make_macro(cell_id: int, position, tx_power_dbm: float = 46.0,
               antenna_gain_db: float = 15.0, fixed_fraction: float = 1.0) -> Cell:
    """Macro cell with conventional defaults; operational power from the linear model."""
    p_op = op_power_from_tx(CellKind.MACRO, float(dbm_to_watt(tx_power_dbm)))
    return Cell(cell_id, CellKind.MACRO, tuple(position), tx_power_dbm,
                antenna_gain_db, p_op, fixed_fraction)


def make_pico(cell_id: int, position, tx_power_dbm: float = 30.0,
              antenna_gain_db: float = 5.0, fixed_fraction: float = 0.5) -> Cell:
    """Pico cell with conventional defaults; operational power from the linear model."""
    p_op = op_power_from_tx(CellKind.PICO, float(dbm_to_watt(tx_power_dbm)))
    return Cell(cell_id, CellKind.PICO, tuple(position), tx_power_dbm,
                antenna_gain_db, p_op, fixed_fraction)


@dataclass(frozen=True)
class NetworkTopology:
    cells: tuple[Cell, ...]

    def __post_init__(self):
        cells = tuple(self.cells)
        if not cells:
            raise ValueError("topology needs at least one cell")
        ids = [c.id for c in cells]
        if len(set(ids)) != len(ids):
            raise ValueError("cell ids must be unique")
        object.__setattr__(self, "cells", cells)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def positions(self) -> np.ndarray:
        return np.array([c.position for c in self.cells], dtype=float)

    def tx_power_watt(self) -> np.ndarray:
        return np.array([c.tx_power_watt for c in self.cells])

    def op_power_max(self) -> np.ndarray:
        return np.array([c.op_power_max for c in self.cells])

    def fixed_fraction(self) -> np.ndarray:
        return np.array([c.fixed_fraction for c in self.cells])

    def kinds(self) -> list[CellKind]:
        return [c.kind for c in self.cells]


@dataclass(frozen=True)
class RadioConfig:
    """System-wide radio constants.

    Noise is specified as a density plus receiver noise figure; shadowing
    has a per-kind standard deviation and a per-kind correlation between
    the shadowing values that different cells of that kind show towards the
    same point. ``fading_samples > 0`` switches the rate table to a Monte
    Carlo average over i.i.d. Rayleigh small-scale fading instead of the
    default static channel.
    """

    bandwidth_hz: float = 10e6
    noise_density_dbm_hz: float = -174.0
    noise_figure_db: float = 9.0
    penetration_loss_db: float = 20.0
    shadowing_std_db: dict = field(
        default_factory=lambda: {CellKind.MACRO: 8.0, CellKind.PICO: 10.0})
    intercell_shadowing_corr: dict = field(
        default_factory=lambda: {CellKind.MACRO: 1.0, CellKind.PICO: 0.5})
    fading_samples: int = 0

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")
        for kind, std in self.shadowing_std_db.items():
            if std < 0:
                raise ValueError(f"negative shadowing std for {kind}")
        for kind, corr in self.intercell_shadowing_corr.items():
            if not 0.0 <= corr <= 1.0:
                raise ValueError(f"shadowing correlation for {kind} outside [0, 1]")
        if self.fading_samples < 0:
            raise ValueError("fading_samples must be >= 0")

    @property
    def noise_psd_watt_hz(self) -> float:
        """Receiver-referred noise power spectral density in W/Hz."""
        return float(dbm_to_watt(self.noise_density_dbm_hz + self.noise_figure_db))


@dataclass(frozen=True)
class TestPoint:
    """Demand aggregation point: a location plus a minimum average rate."""

    id: int
    position: tuple[float, float]
    demand_bps: float = 0.0

    def __post_init__(self):
        if self.demand_bps < 0:
            raise ValueError(f"test point {self.id}: negative demand")


@dataclass(frozen=True)
class ChannelGains:
    """Linear large-scale gains, cells x points (antenna gain, path loss,
    shadowing and penetration folded in)."""

    g: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 2:
            raise ValueError("gain matrix must be cells x points")
        if not np.isfinite(g).all() or (g <= 0).any():
            raise ValueError("gains must be positive and finite")
        object.__setattr__(self, "g", g)

    @property
    def n_cells(self) -> int:
        return self.g.shape[0]

    @property
    def n_points(self) -> int:
        return self.g.shape[1]


@dataclass(frozen=True)
class RateTable:
    """Achievable rate r[k, b, i] (bit/s) of point k from cell b under pattern i."""

    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if r.ndim != 3:
            raise ValueError("rate table must be points x cells x patterns")
        if (r < 0).any() or not np.isfinite(r).all():
            raise ValueError("rates must be finite and non-negative")
        object.__setattr__(self, "r", r)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.r.shape

    def validate_zero_structure(self, patterns: PatternSet) -> None:
        """Check r[k, b, i] == 0 exactly when pattern i mutes cell b."""
        active = patterns.a.T.astype(bool)[None, :, :]  # 1 x B x I
        if (self.r[~np.broadcast_to(active, self.r.shape)] != 0).any():
            raise ValueError("nonzero rate on a muted cell/pattern entry")
        if (self.r[np.broadcast_to(active, self.r.shape)] <= 0).any():
            raise ValueError("zero rate on an active cell/pattern entry")


@dataclass(frozen=True)
class TrafficModel:
    """File-transfer traffic at one point: Poisson arrivals of exponential
    files served first-come-first-served, i.e. an M/M/1 queue."""

    arrival_rate: float
    mean_file_size_bit: float
    sojourn_target_s: float

    def __post_init__(self):
        if self.arrival_rate < 0 or self.mean_file_size_bit < 0:
            raise ValueError("arrival rate and file size must be non-negative")
        if self.sojourn_target_s <= 0:
            raise ValueError("sojourn target must be positive")


def path_loss(kind: CellKind, distance_km: float) -> float:
    """Distance-dependent path loss in dB for the given cell kind."""
    if distance_km <= 0:
        raise ValueError("distance must be positive")
    intercept, slope = _PATH_LOSS_COEFF[kind.value]
    return intercept + slope * math.log10(distance_km)


def op_power_from_tx(kind: CellKind, tx_power_watt: float) -> float:
    """Maximum operational power (W) from transmit power via the linear model."""
    if tx_power_watt < 0:
        raise ValueError("transmit power must be non-negative")
    slope, offset = _OP_POWER_COEFF[kind.value]
    return slope * tx_power_watt + offset


def demand_from_queue(tm: TrafficModel) -> float:
    """Rate demand (bit/s) that keeps the mean file sojourn time on target.

    With service rate R/L and arrival rate lam, the M/M/1 sojourn time is
    1 / (R/L - lam); bounding it by tau gives R >= L/tau + lam*L.
    """
    return tm.mean_file_size_bit / tm.sojourn_target_s + tm.arrival_rate * tm.mean_file_size_bit


def received_psd(topo: NetworkTopology, gains: ChannelGains,
                 radio: RadioConfig) -> np.ndarray:
    """Received power spectral density (W/Hz), cells x points.

    Transmit power is spread flat over the system bandwidth.
    """
    psd_tx = topo.tx_power_watt() / radio.bandwidth_hz
    return psd_tx[:, None] * gains.g


def sinr(k: int, b: int, i: int, gains: ChannelGains, topo: NetworkTopology,
         radio: RadioConfig, patterns: PatternSet) -> float:
    """Linear SINR of point k served by cell b under pattern i.

    Scalar reference implementation; :func:`build_rate_table` computes the
    same quantity vectorized.
    """
    a = patterns.a
    if a[i, b] == 0:
        return 0.0
    prx = received_psd(topo, gains, radio)
    interference = sum(a[i, l] * prx[l, k] for l in range(topo.n_cells) if l != b)
    return float(prx[b, k] / (radio.noise_psd_watt_hz + interference))


def build_rate_table(topo: NetworkTopology, gains: ChannelGains,
                     radio: RadioConfig, patterns: PatternSet,
                     fading_seed: int = 0) -> RateTable:
    """Per-(point, cell, pattern) achievable rates W*log2(1 + SINR).

    Static channel by default; with ``radio.fading_samples > 0`` the rate is
    a Monte Carlo average over i.i.d. unit-mean Rayleigh power fading on
    every link, seeded for reproducibility.
    """
    prx = received_psd(topo, gains, radio)           # B x K
    a = patterns.a.astype(float)                     # I x B
    noise = radio.noise_psd_watt_hz
    n_k = gains.n_points

    if radio.fading_samples == 0:
        total = a @ prx                              # I x K
        sig = prx.T[:, :, None] * a.T[None, :, :]    # K x B x I
        interf = total.T[:, None, :] - sig
        s = np.divide(sig, noise + interf)
        rate = radio.bandwidth_hz * np.log2(1.0 + s)
        rate[sig == 0] = 0.0
        return RateTable(rate)

    rng = np.random.default_rng(fading_seed)
    acc = np.zeros((n_k, topo.n_cells, patterns.n_patterns))
    for _ in range(radio.fading_samples):
        h2 = rng.exponential(1.0, size=prx.shape)    # |h|^2, unit mean
        faded = prx * h2
        total = a @ faded
        sig = faded.T[:, :, None] * a.T[None, :, :]
        interf = total.T[:, None, :] - sig
        s = np.divide(sig, noise + interf)
        term = radio.bandwidth_hz * np.log2(1.0 + s)
        term[sig == 0] = 0.0
        acc += term
    return RateTable(acc / radio.fading_samples)


def total_power(rho: np.ndarray, topo: NetworkTopology,
                activity_threshold: float = DEFAULT_ACTIVITY_THRESHOLD) -> float:
    """Network power (W) for per-cell usages rho: linear part plus the fixed
    share for every cell whose usage exceeds the activity threshold."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (topo.n_cells,):
        raise ValueError("usage vector length must match cell count")
    if (rho < -1e-9).any() or (rho > 1 + 1e-9).any():
        raise ValueError("usage outside [0, 1]")
    q = topo.fixed_fraction()
    p_op = topo.op_power_max()
    active = rho > activity_threshold
    return float(np.sum(((1.0 - q) * np.clip(rho, 0.0, 1.0) + q * active) * p_op))


@dataclass(frozen=True)
class LayoutParams:
    """Geometry and size of a randomly generated scenario."""

    n_macro: int = 3
    picos_per_macro: int = 4
    n_points: int = 50
    macro_spacing_m: float = 500.0
    pico_drop_radius_m: float = 200.0
    point_margin_m: float = 100.0
    demand_bps: float = 0.0
    max_retries: int = 5000

    # Placement minimums, meters.
    min_macro_ue_m: float = 35.0
    min_pico_ue_m: float = 10.0
    min_macro_pico_m: float = 75.0
    min_pico_pico_m: float = 40.0

    def __post_init__(self):
        if self.n_macro < 1 or self.picos_per_macro < 0 or self.n_points < 0:
            raise ValueError("layout counts must be non-negative (>=1 macro)")


def _macro_positions(layout: LayoutParams) -> np.ndarray:
    n = layout.n_macro
    if n == 1:
        return np.zeros((1, 2))
    radius = layout.macro_spacing_m / (2.0 * math.sin(math.pi / n))
    ang = 2.0 * math.pi * np.arange(n) / n
    return radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def _draw_in_disc(rng: np.random.Generator, center: np.ndarray, radius: float) -> np.ndarray:
    r = radius * math.sqrt(rng.uniform())
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return center + r * np.array([math.cos(theta), math.sin(theta)])


def _shadowing_matrix(rng: np.random.Generator, topo: NetworkTopology,
                      n_points: int, radio: RadioConfig) -> np.ndarray:
    """Zero-mean shadowing (dB), cells x points, correlated within each kind.

    Per point and kind a common factor is mixed with per-cell factors so
    that any two same-kind cells show the configured correlation; kinds are
    independent of each other.
    """
    kinds = topo.kinds()
    shadow = np.zeros((topo.n_cells, n_points))
    for kind in CellKind:
        idx = [b for b, k in enumerate(kinds) if k is kind]
        if not idx:
            continue
        std = radio.shadowing_std_db.get(kind, 0.0)
        corr = radio.intercell_shadowing_corr.get(kind, 0.0)
        common = rng.standard_normal(n_points)
        own = rng.standard_normal((len(idx), n_points))
        shadow[idx, :] = std * (math.sqrt(corr) * common[None, :]
                                + math.sqrt(1.0 - corr) * own)
    return shadow


def _gain_matrix(topo: NetworkTopology, points: list[TestPoint],
                 radio: RadioConfig, shadow_db: np.ndarray) -> ChannelGains:
    pos_c = topo.positions()
    pos_p = np.array([p.position for p in points], dtype=float)
    dist_km = np.linalg.norm(pos_c[:, None, :] - pos_p[None, :, :], axis=2) / 1000.0
    g_db = np.empty((topo.n_cells, len(points)))
    for b, cell in enumerate(topo.cells):
        intercept, slope = _PATH_LOSS_COEFF[cell.kind.value]
        pl = intercept + slope * np.log10(dist_km[b])
        g_db[b] = cell.antenna_gain_db - pl - radio.penetration_loss_db + shadow_db[b]
    return ChannelGains(db_to_linear(g_db))


def draw_channel_gains(topo: NetworkTopology, points: list[TestPoint],
                       radio: RadioConfig, seed: int) -> ChannelGains:
    """Shadowed gain matrix for an existing layout, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    shadow = _shadowing_matrix(rng, topo, len(points), radio)
    return _gain_matrix(topo, points, radio, shadow)


def generate_scenario(seed: int, layout: LayoutParams,
                      radio: RadioConfig) -> tuple[NetworkTopology, list[TestPoint], ChannelGains]:
    """Random macro/pico drop plus test points and their shadowed gains.

    Pure function of the seed. Pico and point placement is rejection
    sampled against the minimum-distance rules; a layout that cannot be
    satisfied within the retry budget raises :class:`GenerationError`.
    """
    rng = np.random.default_rng(seed)
    macro_pos = _macro_positions(layout)
    cells = [make_macro(b, tuple(macro_pos[b])) for b in range(layout.n_macro)]

    pico_pos: list[np.ndarray] = []
    next_id = layout.n_macro
    for m in range(layout.n_macro):
        for _ in range(layout.picos_per_macro):
            for _attempt in range(layout.max_retries):
                cand = _draw_in_disc(rng, macro_pos[m], layout.pico_drop_radius_m)
                d_macro = np.linalg.norm(macro_pos - cand, axis=1).min()
                d_pico = (np.linalg.norm(np.array(pico_pos) - cand, axis=1).min()
                          if pico_pos else math.inf)
                if d_macro >= layout.min_macro_pico_m and d_pico >= layout.min_pico_pico_m:
                    break
            else:
                raise GenerationError(
                    f"could not place pico {next_id} after {layout.max_retries} tries")
            pico_pos.append(cand)
            cells.append(make_pico(next_id, tuple(cand)))
            next_id += 1

    topo = NetworkTopology(tuple(cells))
    points = _place_points(rng, topo, layout.n_points, layout)
    shadow = _shadowing_matrix(rng, topo, len(points), radio)
    gains = _gain_matrix(topo, points, radio, shadow)
    return topo, points, gains


def _place_points(rng: np.random.Generator, topo: NetworkTopology,
                  n_points: int, layout: LayoutParams) -> list[TestPoint]:
    all_pos = topo.positions()
    centroid = all_pos.mean(axis=0)
    field_radius = float(np.linalg.norm(all_pos - centroid, axis=1).max()) + layout.point_margin_m
    is_macro = np.array([c.kind is CellKind.MACRO for c in topo.cells])
    min_d = np.where(is_macro, layout.min_macro_ue_m, layout.min_pico_ue_m)

    points: list[TestPoint] = []
    for k in range(n_points):
        for _attempt in range(layout.max_retries):
            cand = _draw_in_disc(rng, centroid, field_radius)
            if (np.linalg.norm(all_pos - cand, axis=1) >= min_d).all():
                break
        else:
            raise GenerationError(
                f"could not place test point {k} after {layout.max_retries} tries")
        points.append(TestPoint(k, tuple(cand), layout.demand_bps))
    return points


def place_test_points(topo: NetworkTopology, n_points: int, seed: int,
                      layout: LayoutParams | None = None) -> list[TestPoint]:
    """Drop test points around an existing layout, deterministic in the seed."""
    layout = layout or LayoutParams(n_points=n_points)
    return _place_points(np.random.default_rng(seed), topo, n_points, layout)
