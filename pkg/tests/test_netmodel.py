import math

import numpy as np
import pytest

from hetsleep.errors import GenerationError
from hetsleep.netmodel import (Cell, CellKind, ChannelGains, LayoutParams,
                               NetworkTopology, RadioConfig, RateTable,
                               TrafficModel, build_rate_table,
                               demand_from_queue, draw_channel_gains,
                               generate_scenario, make_macro, make_pico,
                               op_power_from_tx, path_loss, sinr, total_power)
from hetsleep.netmodel import TestPoint as DemandPoint
from hetsleep.patterns import enumerate_all, reuse1
from hetsleep.units import dbm_to_watt

from support import uniform_gains


class TestPathLoss:
    def test_one_km_reference(self):
        assert path_loss(CellKind.MACRO, 1.0) == pytest.approx(128.1)
        assert path_loss(CellKind.PICO, 1.0) == pytest.approx(140.7)

    def test_half_km_macro(self):
        # 128.1 + 37.6*log10(0.5) evaluated by hand
        assert path_loss(CellKind.MACRO, 0.5) == pytest.approx(116.7813, abs=1e-3)

    def test_strictly_increasing(self):
        d = np.linspace(0.05, 3.0, 40)
        for kind in CellKind:
            vals = [path_loss(kind, x) for x in d]
            assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_rejects_nonpositive_distance(self):
        with pytest.raises(ValueError):
            path_loss(CellKind.MACRO, 0.0)
        with pytest.raises(ValueError):
            path_loss(CellKind.PICO, -1.0)


class TestOpPower:
    def test_macro_headline_value(self):
        # 46 dBm transmit, the rounded reference is 439 W
        assert op_power_from_tx(CellKind.MACRO, dbm_to_watt(46.0)) == pytest.approx(439.0, abs=2.0)
        # 40 W transmit lands on the same rounded value
        assert op_power_from_tx(CellKind.MACRO, 40.0) == pytest.approx(439.0, abs=2.0)

    def test_pico_headline_value(self):
        assert op_power_from_tx(CellKind.PICO, dbm_to_watt(30.0)) == pytest.approx(38.0, abs=1.0)

    def test_zero_tx_offset(self):
        assert op_power_from_tx(CellKind.MACRO, 0.0) == pytest.approx(412.4 / 3.0, abs=1e-9)

    def test_affine(self):
        for kind in CellKind:
            f0 = op_power_from_tx(kind, 0.0)
            f1 = op_power_from_tx(kind, 1.0)
            f2 = op_power_from_tx(kind, 2.0)
            assert f2 - f1 == pytest.approx(f1 - f0, rel=1e-12)

    def test_rejects_negative_power(self):
        with pytest.raises(ValueError):
            op_power_from_tx(CellKind.PICO, -0.1)


class TestQueueDemand:
    def test_zero_arrivals(self):
        assert demand_from_queue(TrafficModel(0.0, 1e6, 1.0)) == pytest.approx(1e6)

    def test_hand_value(self):
        # L/tau + lam*L = 5e5/2 + 2*5e5
        assert demand_from_queue(TrafficModel(2.0, 5e5, 2.0)) == pytest.approx(1.25e6)

    def test_zero_size(self):
        assert demand_from_queue(TrafficModel(1.0, 0.0, 1.0)) == 0.0

    def test_rejects_bad_target(self):
        with pytest.raises(ValueError):
            TrafficModel(1.0, 1e6, 0.0)


def _two_cell_setup(g00=1e-9, g01=1e-9, g10=1e-9, g11=1e-9):
    topo = NetworkTopology((make_macro(0, (0.0, 0.0)), make_pico(1, (100.0, 0.0))))
    gains = uniform_gains([[g00, g01], [g10, g11]])
    radio = RadioConfig()
    return topo, gains, radio


class TestSinr:
    def test_interference_free(self):
        topo, gains, radio = _two_cell_setup()
        pats = enumerate_all(2)  # rows: 01, 10, 11
        # pattern [1,0]: only cell 0 active
        i = pats.rows().index((1, 0))
        psd0 = topo.cells[0].tx_power_watt / radio.bandwidth_hz
        expected = psd0 * 1e-9 / radio.noise_psd_watt_hz
        assert sinr(0, 0, i, gains, topo, radio, pats) == pytest.approx(expected, rel=1e-12)

    def test_muted_cell_zero(self):
        topo, gains, radio = _two_cell_setup()
        pats = enumerate_all(2)
        i = pats.rows().index((1, 0))
        assert sinr(0, 1, i, gains, topo, radio, pats) == 0.0

    def test_equal_psd_symmetry(self):
        topo, gains, radio = _two_cell_setup()
        # Equalize received PSDs: scale pico gain by the tx power ratio.
        ratio = topo.cells[0].tx_power_watt / topo.cells[1].tx_power_watt
        gains = uniform_gains([[1e-6, 1e-6], [1e-6 * ratio, 1e-6 * ratio]])
        pats = enumerate_all(2)
        i = pats.rows().index((1, 1))
        s = sinr(0, 0, i, gains, topo, radio, pats)
        # noise is ~1e-20 W/Hz, received PSD ~1e-11: noise negligible
        assert s == pytest.approx(1.0, rel=1e-6)


class TestRateTable:
    def test_unit_sinr_rate(self):
        # Single cell; tune the gain so received PSD equals the noise PSD.
        topo = NetworkTopology((make_macro(0, (0.0, 0.0)),))
        radio = RadioConfig(bandwidth_hz=10e6)
        g = radio.noise_psd_watt_hz * radio.bandwidth_hz / topo.cells[0].tx_power_watt
        gains = uniform_gains([[g]])
        rates = build_rate_table(topo, gains, radio, reuse1(1))
        assert rates.r[0, 0, 0] == pytest.approx(1e7, rel=1e-12)

    def test_matches_scalar_recomputation(self):
        topo, gains, radio = _two_cell_setup(2e-9, 5e-10, 3e-9, 8e-10)
        pats = enumerate_all(2)
        rates = build_rate_table(topo, gains, radio, pats)
        for k in range(2):
            for b in range(2):
                for i in range(pats.n_patterns):
                    s = sinr(k, b, i, gains, topo, radio, pats)
                    expected = radio.bandwidth_hz * math.log2(1.0 + s)
                    assert rates.r[k, b, i] == pytest.approx(expected, rel=1e-12, abs=0)

    def test_zero_structure_and_monotonicity(self):
        topo, points, gains = generate_scenario(
            3, LayoutParams(n_macro=1, picos_per_macro=3, n_points=4), RadioConfig())
        pats = enumerate_all(topo.n_cells)
        rates = build_rate_table(topo, gains, RadioConfig(), pats)
        rates.validate_zero_structure(pats)
        rows = pats.rows()
        masks = [int("".join(map(str, r)), 2) for r in rows]
        for i, mi in enumerate(masks):
            for j, mj in enumerate(masks):
                if i == j or (mi & mj) != mi:
                    continue
                cols = np.flatnonzero(pats.a[i])
                assert (rates.r[:, cols, j] <= rates.r[:, cols, i] * (1 + 1e-12)).all()

    def test_fading_hook_reduces_to_static_mean(self):
        topo, gains, radio = _two_cell_setup()
        pats = reuse1(2)
        static = build_rate_table(topo, gains, radio, pats)
        faded_radio = RadioConfig(fading_samples=4000)
        faded = build_rate_table(topo, gains, faded_radio, pats, fading_seed=5)
        # The fading average shifts the rate (heavy-tailed SINR ratios can
        # shift interference-limited links up a lot); just pin the band and
        # the zero-structure.
        assert faded.r.shape == static.r.shape
        assert ((faded.r == 0) == (static.r == 0)).all()
        ratio = faded.r[faded.r > 0] / static.r[static.r > 0]
        assert (ratio > 0.1).all() and (ratio < 10.0).all()

    def test_fading_deterministic_in_seed(self):
        topo, gains, radio = _two_cell_setup()
        radio = RadioConfig(fading_samples=50)
        a = build_rate_table(topo, gains, radio, reuse1(2), fading_seed=9)
        b = build_rate_table(topo, gains, radio, reuse1(2), fading_seed=9)
        np.testing.assert_array_equal(a.r, b.r)


class TestTotalPower:
    def test_zero_usage(self):
        topo = NetworkTopology((make_macro(0, (0, 0)), make_pico(1, (10, 0))))
        assert total_power(np.zeros(2), topo) == 0.0

    def test_full_usage(self):
        topo = NetworkTopology((make_macro(0, (0, 0)), make_pico(1, (10, 0))))
        expected = sum(c.op_power_max for c in topo.cells)
        assert total_power(np.ones(2), topo) == pytest.approx(expected)

    def test_constant_macro(self):
        cell = Cell(0, CellKind.MACRO, (0, 0), 46.0, 15.0, 439.0, 1.0)
        topo = NetworkTopology((cell,))
        assert total_power(np.array([0.3]), topo) == pytest.approx(439.0)

    def test_jump_at_threshold(self):
        cell = Cell(0, CellKind.PICO, (0, 0), 30.0, 5.0, 38.0, 0.5)
        topo = NetworkTopology((cell,))
        thr = 1e-5
        below = total_power(np.array([thr * 0.99]), topo, thr)
        above = total_power(np.array([thr * 1.01]), topo, thr)
        assert above - below == pytest.approx(0.5 * 38.0, rel=1e-3)

    def test_monotone_in_usage(self):
        topo = NetworkTopology((make_macro(0, (0, 0)), make_pico(1, (10, 0))))
        rng = np.random.default_rng(0)
        for _ in range(50):
            a = rng.uniform(0, 1, 2)
            b = np.minimum(a + rng.uniform(0, 0.2, 2), 1.0)
            assert total_power(b, topo) >= total_power(a, topo) - 1e-12

    def test_rejects_out_of_range(self):
        topo = NetworkTopology((make_macro(0, (0, 0)),))
        with pytest.raises(ValueError):
            total_power(np.array([1.1]), topo)
        with pytest.raises(ValueError):
            total_power(np.array([-0.1]), topo)


class TestScenarioGeneration:
    def test_deterministic_in_seed(self):
        layout = LayoutParams(n_macro=2, picos_per_macro=2, n_points=6)
        radio = RadioConfig()
        t1, p1, g1 = generate_scenario(123, layout, radio)
        t2, p2, g2 = generate_scenario(123, layout, radio)
        np.testing.assert_array_equal(g1.g, g2.g)
        assert [c.position for c in t1.cells] == [c.position for c in t2.cells]
        assert [p.position for p in p1] == [p.position for p in p2]

    def test_different_seeds_differ(self):
        layout = LayoutParams(n_macro=1, picos_per_macro=2, n_points=4)
        _, _, g1 = generate_scenario(1, layout, RadioConfig())
        _, _, g2 = generate_scenario(2, layout, RadioConfig())
        assert not np.array_equal(g1.g, g2.g)

    def test_min_distances_respected(self):
        layout = LayoutParams(n_macro=3, picos_per_macro=4, n_points=30)
        topo, points, _ = generate_scenario(7, layout, RadioConfig())
        pos = topo.positions()
        kinds = topo.kinds()
        for i in range(topo.n_cells):
            for j in range(i + 1, topo.n_cells):
                dist = np.linalg.norm(pos[i] - pos[j])
                if CellKind.MACRO in (kinds[i], kinds[j]) and kinds[i] != kinds[j]:
                    assert dist >= layout.min_macro_pico_m
                elif kinds[i] is CellKind.PICO and kinds[j] is CellKind.PICO:
                    assert dist >= layout.min_pico_pico_m
        for p in points:
            for b in range(topo.n_cells):
                dist = np.linalg.norm(pos[b] - np.asarray(p.position))
                need = (layout.min_macro_ue_m if kinds[b] is CellKind.MACRO
                        else layout.min_pico_ue_m)
                assert dist >= need

    def test_macro_shadowing_perfectly_correlated(self):
        # With correlation 1, all macros show the same shadowing to a point,
        # so the gain differences reduce to deterministic geometry.
        layout = LayoutParams(n_macro=3, picos_per_macro=0, n_points=5)
        radio = RadioConfig()
        topo, points, gains = generate_scenario(11, layout, radio)
        pos = topo.positions()
        for k, p in enumerate(points):
            shadows = []
            for b, cell in enumerate(topo.cells):
                dist_km = np.linalg.norm(pos[b] - np.asarray(p.position)) / 1000.0
                pl = path_loss(cell.kind, dist_km)
                g_db = 10 * np.log10(gains.g[b, k])
                shadows.append(g_db - cell.antenna_gain_db + pl + radio.penetration_loss_db)
            assert np.ptp(shadows) < 1e-9

    def test_empirical_shadowing_std(self):
        # One pico, many points: per-point shadowing draws should match the
        # configured standard deviation within 5%.
        layout = LayoutParams(n_macro=1, picos_per_macro=1, n_points=10000,
                              point_margin_m=400.0)
        radio = RadioConfig()
        topo, points, gains = generate_scenario(42, layout, radio)
        pico = next(c for c in topo.cells if c.kind is CellKind.PICO)
        b = topo.cells.index(pico)
        pos = topo.positions()
        shadows = []
        for k, p in enumerate(points):
            dist_km = np.linalg.norm(pos[b] - np.asarray(p.position)) / 1000.0
            pl = path_loss(CellKind.PICO, dist_km)
            g_db = 10 * np.log10(gains.g[b, k])
            shadows.append(g_db - pico.antenna_gain_db + pl + radio.penetration_loss_db)
        std = np.std(shadows)
        assert abs(std - radio.shadowing_std_db[CellKind.PICO]) < 0.05 * radio.shadowing_std_db[CellKind.PICO]

    def test_infeasible_layout_raises(self):
        # Forcing picos into a disc smaller than their spacing must fail.
        layout = LayoutParams(n_macro=1, picos_per_macro=8, pico_drop_radius_m=80.0,
                              n_points=1, max_retries=50)
        with pytest.raises(GenerationError):
            generate_scenario(0, layout, RadioConfig())

    def test_draw_channel_gains_deterministic(self):
        layout = LayoutParams(n_macro=1, picos_per_macro=1, n_points=3)
        topo, points, _ = generate_scenario(5, layout, RadioConfig())
        g1 = draw_channel_gains(topo, points, RadioConfig(), 99)
        g2 = draw_channel_gains(topo, points, RadioConfig(), 99)
        np.testing.assert_array_equal(g1.g, g2.g)


class TestInvariants:
    def test_cell_validation(self):
        with pytest.raises(ValueError):
            Cell(0, CellKind.MACRO, (0, 0), 46.0, 15.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            Cell(0, CellKind.MACRO, (0, 0), 46.0, 15.0, 439.0, 0.0)
        with pytest.raises(ValueError):
            Cell(0, CellKind.MACRO, (0, 0), float("inf"), 15.0, 439.0, 1.0)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            NetworkTopology((make_macro(0, (0, 0)), make_pico(0, (10, 0))))

    def test_gains_must_be_positive(self):
        with pytest.raises(ValueError):
            ChannelGains(np.array([[1e-9, 0.0]]))

    def test_test_point_demand_nonnegative(self):
        with pytest.raises(ValueError):
            DemandPoint(0, (0, 0), -1.0)

    def test_rate_table_shape(self):
        with pytest.raises(ValueError):
            RateTable(np.ones((2, 2)))
