"""Losses, regrets, weak moments and the theoretical convergence rate."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class LossReport:
    total_sq_error: float
    avg_loss: float
    regret: Optional[float] = None
    sqrt_regret: Optional[float] = None


def _log(x):
    # log(x) is read as log(max(x, e)) throughout the rate calculations
    return math.log(max(x, math.e))


def average_loss(theta_hat, theta, oracle_risk=None):
    """Average squared loss; with ``oracle_risk`` (per coordinate) also the regrets."""
    a = np.asarray(theta_hat, dtype=np.float64).ravel()
    b = np.asarray(theta, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} estimates for {b.size} means")
    d = a - b
    total = float(d @ d)
    avg = total / a.size
    if oracle_risk is None:
        return LossReport(total, avg)
    r, sr = regret(avg, oracle_risk)
    return LossReport(total, avg, r, sr)


def regret(risk, oracle_risk):
    """``(risk - oracle, sqrt(risk) - sqrt(oracle))``."""
    if risk < 0 or oracle_risk < 0:
        raise ValueError("risks must be nonnegative")
    return risk - oracle_risk, math.sqrt(risk) - math.sqrt(oracle_risk)


def weak_moment(G, p):
    """Weak l_p moment ``(sup_{x>0} x^p G(|u| > x))^(1/p)``; ``p=inf`` gives max |u|.

    For an atomic G the supremum is approached as x rises to an atom's |u|, so
    the tail mass is evaluated closed, ``G(|u| >= |u_j|)``.
    """
    keep = G.weights > 0
    a = np.abs(G.support[keep])
    w = G.weights[keep]
    if math.isinf(p):
        return float(a.max())
    if not p > 0:
        raise ValueError("p must be positive")
    order = np.argsort(a)
    a, w = a[order], w[order]
    tail = np.cumsum(w[::-1])[::-1]
    # ties in |u|: use the first (largest) tail of each block
    first = np.concatenate(([True], a[1:] != a[:-1]))
    vals = a[first] ** p * tail[first]
    return float(vals.max() ** (1.0 / p))


def rate_epsilon(n, G, p):
    """Convergence rate ``eps(n, G, p)`` of the Hellinger error of the NPMLE."""
    if n < 2:
        raise ValueError("n must be at least 2")
    L = _log(n)
    if not math.isinf(p) and L < 2.0 / p:
        raise ValueError(f"need log n >= 2/p (log n = {L:.4g}, p = {p})")
    mu = weak_moment(G, p)
    tail = math.sqrt(L / n)
    if math.isinf(p):
        return math.sqrt(max(2.0 * L, math.sqrt(L) * mu)) * tail
    second = (n ** (1.0 / p) * math.sqrt(L) * mu) ** (p / (2.0 + 2.0 * p))
    return max(math.sqrt(2.0 * L), second) * tail
