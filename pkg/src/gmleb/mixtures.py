"""Normal location mixtures with finitely supported mixing distributions.

Everything here takes a :class:`DiscreteMixture` ``G`` and evaluates the
mixture density ``f_G(x) = sum_j w_j phi(x - u_j)``, its derivatives, the
Bayes rule (posterior mean) and its regularized version, the Bayes risk and
the Hellinger distance between two mixture densities. Functions accept a
scalar or an array for ``x`` and return the same shape.
"""
import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.special import logsumexp

from gmleb._backend import kernels

PHI0 = 1.0 / np.sqrt(2.0 * np.pi)
LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

# quadrature settings for bayes_risk / hellinger
QUAD_STEP = 0.01
QUAD_PAD = 8.0


@dataclass(frozen=True)
class DiscreteMixture:
    """Mixing distribution ``sum_j weights[j] * delta(support[j])``."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        u = np.array(self.support, dtype=np.float64).ravel()
        w = np.array(self.weights, dtype=np.float64).ravel()
        if u.size == 0:
            raise ValueError("mixture needs at least one support point")
        if u.shape != w.shape:
            raise ValueError(f"support has {u.size} points but weights has {w.size}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(w))):
            raise ValueError("support and weights must be finite")
        if np.any(np.diff(u) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        u.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "support", u)
        object.__setattr__(self, "weights", w)

    @classmethod
    def point_mass(cls, c=0.0):
        return cls([float(c)], [1.0])

    @classmethod
    def from_atoms(cls, values):
        """Empirical distribution of ``values`` (ties merged)."""
        values = np.asarray(values, dtype=np.float64).ravel()
        atoms, counts = np.unique(values, return_counts=True)
        w = counts / counts.sum()
        return cls(atoms, w / w.sum())

    @classmethod
    def normalized(cls, support, weights):
        """Build from unnormalized nonnegative weights."""
        w = np.asarray(weights, dtype=np.float64)
        return cls(support, w / w.sum())

    def __len__(self):
        return self.support.size

    def __eq__(self, other):
        if not isinstance(other, DiscreteMixture):
            return NotImplemented
        return (np.array_equal(self.support, other.support)
                and np.array_equal(self.weights, other.weights))

    __hash__ = None

    @property
    def log_weights(self):
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    def shift(self, c):
        return DiscreteMixture(self.support + c, self.weights)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["support", "weight"])
            for u, w in zip(self.support, self.weights):
                writer.writerow([repr(float(u)), repr(float(w))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["support", "weight"]:
            raise ValueError(f"{path}: expected header 'support,weight'")
        body = [r for r in rows[1:] if r]
        try:
            data = np.array([[float(a), float(b)] for a, b in body])
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from None
        return cls(data[:, 0], data[:, 1])


def _out(x, values):
    return float(values[0]) if np.ndim(x) == 0 else values.reshape(np.shape(x))


def _flat(x):
    return np.atleast_1d(np.asarray(x, dtype=np.float64)).ravel()


def log_mixture_density(G, x):
    logf, _ = kernels.log_density_and_mean(_flat(x), G.support, G.log_weights)
    return _out(x, logf)


def mixture_density(G, x):
    """``f_G(x) = sum_j w_j phi(x - u_j)``."""
    return _out(x, np.exp(_flat(log_mixture_density(G, x))))


def _posterior_moments(G, x):
    """Return ``(log f, f'/f, f''/f)`` at each x, computed in log space."""
    xs = _flat(x)
    d = G.support[None, :] - xs[:, None]
    a = G.log_weights[None, :] - 0.5 * d * d
    logs = logsumexp(a, axis=1)
    p = np.exp(a - logs[:, None])
    score = (p * d).sum(axis=1)
    curv = (p * d * d).sum(axis=1) - 1.0
    return logs - LOG_SQRT_2PI, score, curv


def mixture_density_derivs(G, x):
    """``(f_G, f_G', f_G'')`` at ``x``."""
    logf, score, curv = _posterior_moments(G, x)
    f = np.exp(logf)
    return _out(x, f), _out(x, score * f), _out(x, curv * f)


def score_ratios(G, x):
    """``(log f_G, f_G'/f_G, f_G''/f_G)`` without forming the possibly tiny f."""
    logf, score, curv = _posterior_moments(G, x)
    return _out(x, logf), _out(x, score), _out(x, curv)


def posterior_mean(G, x):
    """Bayes rule ``E[xi | Y = x]`` for prior G and unit-variance noise."""
    _, mean = kernels.log_density_and_mean(_flat(x), G.support, G.log_weights)
    return _out(x, mean)


def regularized_posterior_mean(G, x, rho):
    """``x + f'(x) / max(f(x), rho)``; rho = 0 is the Bayes rule, rho = inf gives x."""
    if not rho >= 0:
        raise ValueError(f"rho must be nonnegative, got {rho!r}")
    xs = _flat(x)
    if np.isinf(rho):
        return _out(x, xs.copy())
    logf, mean = kernels.log_density_and_mean(xs, G.support, G.log_weights)
    if rho == 0:
        return _out(x, mean)
    # f'/(f v rho) = (f'/f) * min(1, f/rho)
    gap = logf - np.log(rho)
    damped = xs + (mean - xs) * np.exp(np.minimum(gap, 0.0))
    return _out(x, np.where(gap >= 0, mean, damped))


def inv_phi(y):
    """Nonnegative inverse of the standard normal density on (0, phi(0)]."""
    ys = _flat(y)
    if np.any(~(ys > 0)) or np.any(ys > PHI0 * (1 + 1e-12)):
        raise ValueError(f"inv_phi needs 0 < y <= {PHI0!r}")
    arg = -np.log(2.0 * np.pi * ys * ys)
    return _out(y, np.sqrt(np.maximum(arg, 0.0)))


def _quad_grid(lo, hi):
    panels = int(np.ceil((hi - lo) / QUAD_STEP))
    panels += panels % 2
    return np.linspace(lo, hi, panels + 1)


def bayes_risk(G):
    """Minimum Bayes risk ``1 - int (f'/f)^2 f`` by composite Simpson quadrature."""
    x = _quad_grid(G.support[0] - QUAD_PAD, G.support[-1] + QUAD_PAD)
    logf, score, _ = _posterior_moments(G, x)
    with np.errstate(divide="ignore"):
        integrand = np.exp(2.0 * np.log(np.abs(score)) + logf)
    integrand = np.maximum(integrand, 0.0)
    risk = 1.0 - simpson(integrand, x=x)
    return float(min(max(risk, 0.0), 1.0))


def hellinger(G, H):
    """Hellinger distance ``(int (sqrt f_G - sqrt f_H)^2)^(1/2)``."""
    lo = min(G.support[0], H.support[0]) - QUAD_PAD
    hi = max(G.support[-1], H.support[-1]) + QUAD_PAD
    x = _quad_grid(lo, hi)
    rg = np.exp(0.5 * _flat(log_mixture_density(G, x)))
    rh = np.exp(0.5 * _flat(log_mixture_density(H, x)))
    d2 = simpson((rg - rh) ** 2, x=x)
    return float(np.sqrt(max(d2, 0.0)))
