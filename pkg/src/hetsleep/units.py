"""Decibel/linear conversions, centralized so no module rolls its own."""

import numpy as np


def db_to_linear(x_db):
    """Convert a dB quantity to a linear power ratio."""
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    """Convert a linear power ratio to dB."""
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_watt(p_dbm):
    """Convert a power in dBm to watts."""
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(p_w):
    """Convert a power in watts to dBm."""
    return 10.0 * np.log10(np.asarray(p_w, dtype=float)) + 30.0
