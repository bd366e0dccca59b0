import numpy as np

from hetsleep.units import db_to_linear, dbm_to_watt, linear_to_db, watt_to_dbm


def test_db_roundtrip():
    x = np.array([0.1, 1.0, 7.3, 1e6])
    np.testing.assert_allclose(db_to_linear(linear_to_db(x)), x, rtol=1e-12)


def test_dbm_watt_known_values():
    assert dbm_to_watt(30.0) == 1.0
    np.testing.assert_allclose(dbm_to_watt(46.0), 39.81072, rtol=1e-6)
    np.testing.assert_allclose(watt_to_dbm(1.0), 30.0, atol=1e-12)


def test_db_is_power_ratio():
    assert db_to_linear(3.0) != 2.0  # 3 dB is only approximately a doubling
    np.testing.assert_allclose(db_to_linear(10.0), 10.0, rtol=1e-12)
