"""Nonparametric maximum likelihood of the mixing distribution on a grid.

The EM iteration only reweights a fixed set of support points, so the normal
kernel matrix is evaluated once per fit and reused by every step.
"""
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from gmleb._backend import kernels
from gmleb.mixtures import PHI0, DiscreteMixture

DEFAULT_EM_ITERATIONS = 100
CERTIFIED_MAX_ITER = 100_000


class GridMismatchError(ValueError):
    """The grid leaves some observation with numerically zero mixture density."""


@dataclass(frozen=True)
class Grid:
    points: np.ndarray
    spacing: float
    zero_index: Optional[int] = None
    degenerate: bool = False

    def __len__(self):
        return self.points.size


@dataclass(frozen=True)
class FixedIterations:
    k: int = DEFAULT_EM_ITERATIONS


@dataclass(frozen=True)
class CertifiedStop:
    q: Optional[float] = None
    max_iter: int = CERTIFIED_MAX_ITER


@dataclass
class Certificate:
    max_log_weight_ratio: float
    threshold: float
    satisfied: bool
    q: float


@dataclass
class NpmleFit:
    mixture: DiscreteMixture
    loglik_trace: list
    iterations: int
    certificate: Optional[Certificate] = None
    log_ratio_trace: list = field(default_factory=list, repr=False)

    @property
    def final_loglik(self):
        return self.loglik_trace[-1]


def default_q(n):
    """Approximation factor ``(e sqrt(2 pi) / n^2) ^ 1``."""
    return min(math.e * math.sqrt(2 * math.pi) / n ** 2, 1.0)


def certified_threshold(n, q=None):
    """Right-hand side of the EM stopping rule, ``log(1/(e q)) / n``."""
    q = default_q(n) if q is None else q
    return math.log(1.0 / (math.e * q)) / n


def _as_data(X):
    X = np.asarray(X, dtype=np.float64).ravel()
    if X.size == 0:
        raise ValueError("need at least one observation")
    if not np.all(np.isfinite(X)):
        raise ValueError("observations must be finite")
    return X


def build_grid_paper(X):
    """Equally spaced grid through 0 with spacing ``range(X, 0) / 999``."""
    X = _as_data(X)
    lo = min(X.min(), 0.0)
    hi = max(X.max(), 0.0)
    eps = (hi - lo) / 999.0
    if eps == 0.0:
        return Grid(np.zeros(1), 0.0, zero_index=0, degenerate=True)
    # tolerate lo/eps, hi/eps landing a hair off an integer
    i_lo = math.ceil(lo / eps - 1e-9)
    i_hi = math.floor(hi / eps + 1e-9)
    idx = np.arange(i_lo, i_hi + 1)
    points = idx * eps
    return Grid(points, eps, zero_index=int(-i_lo), degenerate=False)


def certified_grid_size(r, n):
    """Smallest m with ``eps^2 (r^2/4 + 1/8) <= 1/n`` for ``eps = r/(m-1)``."""
    if r == 0:
        return 1
    c = r * r / 4.0 + 0.125
    m = max(math.ceil(r * math.sqrt(n * c)) + 1, 2)
    while (r / (m - 1)) ** 2 * c > 1.0 / n:
        m += 1
    while m > 2 and (r / (m - 2)) ** 2 * c <= 1.0 / n:
        m -= 1
    return m


def build_grid_certified(X):
    """Grid from min X to max X fine enough for the certified approximation."""
    X = _as_data(X)
    lo, hi = float(X.min()), float(X.max())
    if lo == hi:
        return Grid(np.array([lo]), 0.0, degenerate=True)
    m = certified_grid_size(hi - lo, X.size)
    points = np.linspace(lo, hi, m)
    eps = (hi - lo) / (m - 1)
    zero = np.flatnonzero(points == 0.0)
    return Grid(points, eps, zero_index=int(zero[0]) if zero.size else None)


def log_likelihood(G, X):
    """``sum_i log f_G(X_i)``."""
    logf, _ = kernels.log_density_and_mean(_as_data(X), G.support, G.log_weights)
    return float(logf.sum())


def em_step(weights, kernel_matrix):
    """One EM reweighting; ``kernel_matrix[i, j]`` is ``phi(X_i - u_j)`` up to a row factor."""
    w = np.ascontiguousarray(weights, dtype=np.float64)
    K = np.ascontiguousarray(kernel_matrix, dtype=np.float64)
    out = np.empty_like(w)
    try:
        kernels.em_step(K, w, out)
    except FloatingPointError as exc:
        raise GridMismatchError(str(exc)) from None
    return out


def _points(grid):
    return grid.points if isinstance(grid, Grid) else np.asarray(grid, dtype=np.float64).ravel()


def fit_npmle(X, grid, init_weights=None, stop=None):
    """EM solve of the grid-restricted NPMLE.

    ``stop`` is :class:`FixedIterations` (default, 100 steps) or
    :class:`CertifiedStop`. The certified rule stops at the first step whose
    largest log weight ratio is at most ``log(1/(e q_n))/n``.
    """
    X = _as_data(X)
    n = X.size
    u = _points(grid)
    stop = FixedIterations() if stop is None else stop
    certified = isinstance(stop, CertifiedStop)
    q = (default_q(n) if stop.q is None else stop.q) if certified else None

    if init_weights is None:
        w = np.full(u.size, 1.0 / u.size)
    else:
        w = np.array(init_weights, dtype=np.float64).ravel()
        if w.shape != u.shape:
            raise ValueError("init_weights must match the grid")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("init_weights must be a probability vector")
    if certified and np.any(w <= 0):
        raise ValueError("certified stopping needs strictly positive initial weights")

    if np.all(X == X[0]) and u.size == 1 and u[0] == X[0]:
        G = DiscreteMixture([X[0]], [1.0])
        ll = log_likelihood(G, X)
        cert = Certificate(0.0, certified_threshold(n, q), True, q) if certified else None
        return NpmleFit(G, [ll], 0, cert)

    K, log_scale = kernels.kernel_matrix(X, u)
    offset = float(log_scale.sum())
    trace = []
    ratios = []
    nxt = np.empty_like(w)
    k = 0
    limit = stop.max_iter if certified else stop.k
    threshold = certified_threshold(n, q) if certified else None
    satisfied = False
    while k < limit:
        try:
            s, r = kernels.em_step(K, w, nxt)
        except FloatingPointError as exc:
            raise GridMismatchError(str(exc)) from None
        trace.append(s + offset)
        ratios.append(r)
        w, nxt = nxt, w
        k += 1
        if certified and r <= threshold:
            satisfied = True
            break
    # log-likelihood of the final weights
    denom = K @ w
    trace.append(float(np.log(denom).sum()) + offset)

    G = DiscreteMixture.normalized(u, w)
    cert = None
    if certified:
        cert = Certificate(ratios[-1] if ratios else math.inf, threshold, satisfied, q)
    return NpmleFit(G, trace, k, cert, ratios)


def density_floor_check(fit, X, q=None):
    """Per-observation check of ``f_G(X_j) >= q phi(0) / (e n)``."""
    X = _as_data(X)
    n = X.size
    if q is None:
        q = fit.certificate.q if fit.certificate is not None else default_q(n)
    logf, _ = kernels.log_density_and_mean(X, fit.mixture.support, fit.mixture.log_weights)
    return logf >= math.log(q * PHI0 / (math.e * n))


def write_fit(fit, csv_path, json_path):
    fit.mixture.to_csv(csv_path)
    cert = None
    if fit.certificate is not None:
        c = fit.certificate
        cert = {"max_log_weight_ratio": c.max_log_weight_ratio, "threshold": c.threshold,
                "satisfied": c.satisfied, "q": c.q}
    side = {"iterations": fit.iterations, "final_loglik": fit.final_loglik, "certificate": cert}
    with open(json_path, "w") as fh:
        json.dump(side, fh, indent=2)
        fh.write("\n")


def read_fit(csv_path, json_path):
    G = DiscreteMixture.from_csv(csv_path)
    with open(json_path) as fh:
        side = json.load(fh)
    cert = side.get("certificate")
    cert = Certificate(**cert) if cert else None
    return NpmleFit(G, [side["final_loglik"]], side["iterations"], cert)
