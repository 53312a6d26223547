"""Shared test utilities."""
import numpy as np


def random_feasible(rng, m, size=None, lo=0.02, hi=0.98):
    """Interior points satisfying pi_j p_j < pi_(j-1), by rejection."""
    n = 1 if size is None else size
    out = []
    while len(out) < n:
        th = rng.uniform(lo, hi, 3 * m)
        pi, p = th[:m], th[m:2 * m]
        if np.all(pi[1:] * p[1:] < pi[:-1]):
            out.append(th)
    return out[0] if size is None else np.array(out)
