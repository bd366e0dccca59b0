"""Shared instance builders for the test suite."""

import numpy as np

from hetsleep.balancer import DemandProfile
from hetsleep.netmodel import (Cell, CellKind, ChannelGains, LayoutParams,
                               NetworkTopology, RadioConfig, RateTable,
                               build_rate_table, generate_scenario)
from hetsleep.patterns import PatternSet, enumerate_all


def synthetic_rates(rng: np.random.Generator, n_points: int, n_cells: int,
                    patterns: PatternSet, lo: float = 2e5, hi: float = 5e6) -> RateTable:
    """Random positive rates with the pattern zero-structure imposed."""
    r = rng.uniform(lo, hi, size=(n_points, n_cells, patterns.n_patterns))
    mask = patterns.a.T[None, :, :].astype(float)
    return RateTable(r * mask)


def synthetic_instance(rng: np.random.Generator, b_max: int = 4, k_max: int = 6):
    """Small random instance over the full pattern enumeration."""
    n_cells = int(rng.integers(1, b_max + 1))
    n_points = int(rng.integers(1, k_max + 1))
    patterns = enumerate_all(n_cells)
    rates = synthetic_rates(rng, n_points, n_cells, patterns)
    demand = DemandProfile(rng.uniform(1e4, 1e5, size=n_points))
    return rates, demand, patterns


def synthetic_topology(rng: np.random.Generator, n_cells: int) -> NetworkTopology:
    """Cells with varied power parameters on a line; kinds alternate."""
    cells = []
    for b in range(n_cells):
        if b % 3 == 0:
            cells.append(Cell(b, CellKind.MACRO, (300.0 * b, 0.0), 46.0, 15.0,
                              float(rng.uniform(300, 500)), 1.0))
        else:
            cells.append(Cell(b, CellKind.PICO, (300.0 * b, 50.0), 30.0, 5.0,
                              float(rng.uniform(30, 60)),
                              float(rng.uniform(0.3, 0.8))))
    return NetworkTopology(tuple(cells))


def hotspot_instance(seed: int, picos: int = 4, n_points: int = 8,
                     demand_bps: float = 4e5):
    """One macro with a pico ring plus uniformly dropped points, physical rates."""
    radio = RadioConfig()
    layout = LayoutParams(n_macro=1, picos_per_macro=picos, n_points=n_points,
                          macro_spacing_m=500.0, pico_drop_radius_m=180.0,
                          demand_bps=demand_bps)
    topo, points, gains = generate_scenario(seed, layout, radio)
    patterns = enumerate_all(topo.n_cells)
    rates = build_rate_table(topo, gains, radio, patterns)
    d = np.array([p.demand_bps for p in points])
    return topo, points, gains, radio, patterns, rates, d


def uniform_gains(values: np.ndarray) -> ChannelGains:
    return ChannelGains(np.asarray(values, dtype=float))
