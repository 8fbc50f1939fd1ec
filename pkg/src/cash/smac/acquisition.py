"""Closed-form expected improvement under a Gaussian predictive distribution."""

import math

import numpy as np
from scipy.special import ndtr

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def expected_improvement(mu, sigma, c_min):
    """E[max(c_min - c, 0)] for c ~ N(mu, sigma^2).

    Vectorized over numpy inputs.  ``sigma == 0`` returns the deterministic
    limit ``max(c_min - mu, 0)``.
    """
    mu, sigma, c_min = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, sigma, c_min)))
    if np.any(sigma < 0):
        raise ValueError("sigma must be non-negative")
    pos = sigma > 0
    safe = np.where(pos, sigma, 1.0)
    u = (c_min - mu) / safe
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * u * u)
    ei = np.where(pos, safe * (u * ndtr(u) + pdf), np.maximum(c_min - mu, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei
