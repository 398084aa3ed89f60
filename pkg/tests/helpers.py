import numpy as np
from scipy.interpolate import CubicSpline


def crossing_period(t, n, level=0.5):
    """Oscillation period from successive crossings of `level` (two per period)."""
    roots = CubicSpline(t, np.asarray(n) - level).roots(extrapolate=False)
    k = np.arange(roots.size)
    slope = np.polyfit(k, roots, 1)[0]
    return 2 * slope


def trace_distance(a, b):
    return 0.5 * np.sum(np.abs(np.linalg.eigvalsh(a - b)))
