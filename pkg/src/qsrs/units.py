"""Decibel helpers. Power quantities only: dB = 10 log10(x)."""

import numpy as np


def to_db(x):
    return 10.0 * np.log10(x)


def from_db(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0) if np.ndim(db) else 10.0 ** (db / 10.0)


def squeezing_db(variance):
    """Squeezing in dB for a variance normalised to shot noise (positive = below shot noise)."""
    return -to_db(variance)
