"""Estimators of a normal mean vector from one observation per coordinate.

Each estimator maps ``X`` (and, for the oracle, the true means) to an
:class:`EstimateResult`. :func:`run_estimator` dispatches on an
:class:`EstimatorSpec`, which is what the simulation lab and CLI pass around.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import simpson
from scipy.stats import norm

from gmleb import npmle
from gmleb.mixtures import DiscreteMixture, posterior_mean

KINDS = ("gmleb", "s_gmleb", "oracle", "james_stein", "sure", "fdr",
         "universal_soft", "universal_hard", "identity")

ZERO_PROPORTION_PANELS = 4096


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str
    q: Optional[float] = None
    grid: str = "paper"
    stop: str = "fixed"
    iterations: int = npmle.DEFAULT_EM_ITERATIONS
    kappa: float = 0.5
    target: str = "mean"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.kind == "fdr":
            if self.q is None or not 0 < self.q <= 0.5:
                raise ValueError("fdr needs a level q in (0, 1/2]")
        elif self.q is not None:
            raise ValueError(f"{self.kind} takes no level q")
        if self.grid not in ("paper", "certified"):
            raise ValueError(f"unknown grid mode {self.grid!r}")
        if self.stop not in ("fixed", "certified"):
            raise ValueError(f"unknown stop mode {self.stop!r}")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")
        if self.target not in ("mean", "origin"):
            raise ValueError(f"unknown James-Stein target {self.target!r}")

    @property
    def label(self):
        if self.kind == "fdr":
            return f"fdr({self.q:g})"
        if self.kind == "james_stein" and self.target == "origin":
            return "james_stein_origin"
        if self.kind in ("gmleb", "s_gmleb"):
            extra = []
            if self.grid != "paper":
                extra.append(f"grid={self.grid}")
            if self.stop != "fixed":
                extra.append(f"stop={self.stop}")
            elif self.iterations != npmle.DEFAULT_EM_ITERATIONS:
                extra.append(f"iters={self.iterations}")
            if self.kind == "s_gmleb" and self.kappa != 0.5:
                extra.append(f"kappa={self.kappa:g}")
            if extra:
                return f"{self.kind}[{','.join(extra)}]"
        return self.kind


@dataclass
class EstimateResult:
    estimates: np.ndarray
    mixture: Optional[DiscreteMixture] = None
    threshold: Optional[float] = None
    shrinkage: Optional[float] = None
    zero_proportion: Optional[float] = None
    fit: Optional[npmle.NpmleFit] = None

    def metadata(self):
        out = {}
        if self.mixture is not None:
            out["mixture_atoms"] = int(np.count_nonzero(self.mixture.weights))
            out["grid_size"] = len(self.mixture)
        if self.fit is not None:
            out["em_iterations"] = self.fit.iterations
            out["final_loglik"] = self.fit.final_loglik
            if self.fit.certificate is not None:
                out["certified"] = self.fit.certificate.satisfied
        for key in ("threshold", "shrinkage", "zero_proportion"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out


def _data(X):
    X = np.asarray(X, dtype=np.float64).ravel()
    if X.size == 0:
        raise ValueError("need at least one observation")
    if not np.all(np.isfinite(X)):
        raise ValueError("observations must be finite")
    return X


def _grid(X, mode):
    return npmle.build_grid_paper(X) if mode == "paper" else npmle.build_grid_certified(X)


def _stop(mode, iterations):
    return npmle.FixedIterations(iterations) if mode == "fixed" else npmle.CertifiedStop()


def _fit_and_denoise(X, grid, init, stop):
    fit = npmle.fit_npmle(X, grid, init, stop)
    est = posterior_mean(fit.mixture, X)
    return EstimateResult(np.asarray(est), mixture=fit.mixture, fit=fit)


def gmleb(X, grid="paper", stop="fixed", iterations=npmle.DEFAULT_EM_ITERATIONS):
    """Posterior means under the EM-fitted NPMLE, uniform initialization."""
    X = _data(X)
    g = _grid(X, grid)
    return _fit_and_denoise(X, g, None, _stop(stop, iterations))


def zero_proportion_kernel(z, h, panels=ZERO_PROPORTION_PANELS):
    """``psi(z; h) = int h psi0(h t) exp(t^2/2) cos(z t) dt`` with psi0 uniform on [-1, 1].

    The integrand is even in t, so this is ``h * int_0^{1/h} exp(t^2/2) cos(z t) dt``,
    evaluated by composite Simpson.
    """
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    t = np.linspace(0.0, 1.0 / h, panels + 1)
    base = np.exp(0.5 * t * t)
    out = np.empty(z.size)
    for start in range(0, z.size, 512):
        zs = z[start:start + 512]
        out[start:start + 512] = simpson(base * np.cos(np.outer(zs, t)), x=t, axis=1)
    return h * out


def zero_proportion_raw(X, kappa=0.5):
    """Unclamped Fourier estimate of the fraction of zero means."""
    X = _data(X)
    n = X.size
    if n < 2:
        raise ValueError("zero-proportion estimate needs n >= 2")
    h = (kappa * math.log(n)) ** -0.5
    return float(zero_proportion_kernel(X, h).mean())


def estimate_zero_proportion(X, kappa=0.5):
    return min(max(zero_proportion_raw(X, kappa), 0.0), 1.0)


def sparse_init(m, j0, omega0):
    """Start with mass ``omega0`` at ``j0`` and the rest spread evenly."""
    if m == 1:
        return np.ones(1)
    # keep every atom alive so EM can still move mass off the zero point
    omega0 = min(max(omega0, 1.0 / m), 1.0 - 1.0 / m)
    w = np.full(m, (1.0 - omega0) / (m - 1))
    w[j0] = omega0
    return w


def s_gmleb(X, kappa=0.5, grid="paper", stop="fixed", iterations=npmle.DEFAULT_EM_ITERATIONS):
    """GMLEB with EM started from a point mass estimate at zero."""
    X = _data(X)
    if X.size < 2:
        raise ValueError("s_gmleb needs n >= 2")
    g = _grid(X, grid)
    omega0 = estimate_zero_proportion(X, kappa)
    if g.degenerate:
        res = _fit_and_denoise(X, g, None, _stop(stop, iterations))
    else:
        j0 = g.zero_index if g.zero_index is not None else int(np.argmin(np.abs(g.points)))
        init = sparse_init(len(g), j0, omega0)
        res = _fit_and_denoise(X, g, init, _stop(stop, iterations))
    res.zero_proportion = omega0
    return res


def oracle_rule(theta, X):
    """Bayes rule under the empirical distribution of the true means."""
    theta = _data(theta)
    X = _data(X)
    if theta.shape != X.shape:
        raise ValueError("theta and X must have the same length")
    G = DiscreteMixture.from_atoms(theta)
    return EstimateResult(np.asarray(posterior_mean(G, X)), mixture=G)


def james_stein(X, target="mean"):
    """Positive-part James-Stein.

    ``target="mean"`` shrinks toward the grand mean with factor
    ``(1 - (n-3)/S)_+``; ``target="origin"`` shrinks toward 0 with
    ``(1 - (n-2)/|X|^2)_+``.
    """
    X = _data(X)
    n = X.size
    if target == "origin":
        if n < 3:
            raise ValueError("James-Stein toward the origin needs n >= 3")
        center = 0.0
        dof = n - 2
    else:
        if n < 4:
            raise ValueError("James-Stein toward the mean needs n >= 4")
        center = X.mean()
        dof = n - 3
    resid = X - center
    S = float(resid @ resid)
    factor = max(0.0, 1.0 - dof / S) if S > 0 else 0.0
    return EstimateResult(center + factor * resid, shrinkage=factor)


def soft_threshold(X, t):
    return np.sign(X) * np.maximum(np.abs(X) - t, 0.0)


def sure_curve(X):
    """Candidate thresholds in increasing order and their SURE values."""
    X = _data(X)
    n = X.size
    cap = math.sqrt(2.0 * math.log(n)) if n > 1 else 0.0
    a = np.sort(np.abs(X))
    cand = np.unique(np.concatenate(([0.0], a[a <= cap], [cap])))
    count = np.searchsorted(a, cand, side="right")
    csq = np.concatenate(([0.0], np.cumsum(a * a)))
    risk = n - 2.0 * count + csq[count] + (n - count) * cand * cand
    return cand, risk


def sure_soft(X):
    """Soft thresholding at the SURE-minimizing threshold in [0, sqrt(2 log n)]."""
    X = _data(X)
    cand, risk = sure_curve(X)
    t = float(cand[int(np.argmin(risk))])
    return EstimateResult(soft_threshold(X, t), threshold=t)


def fdr_threshold(X, q):
    """Hard thresholding at the Benjamini-Hochberg cut of the two-sided z-scores."""
    if not 0 < q <= 0.5:
        raise ValueError("q must lie in (0, 1/2]")
    X = _data(X)
    n = X.size
    a = np.sort(np.abs(X))[::-1]
    k = np.arange(1, n + 1)
    crit = norm.isf(q * k / (2.0 * n))
    ok = np.flatnonzero(a >= crit)
    if ok.size == 0:
        return EstimateResult(np.zeros(n), threshold=math.inf)
    t = float(a[ok[-1]])
    return EstimateResult(np.where(np.abs(X) >= t, X, 0.0), threshold=t)


def universal(X, mode="soft"):
    X = _data(X)
    lam = math.sqrt(2.0 * math.log(X.size))
    if mode == "soft":
        est = soft_threshold(X, lam)
    elif mode == "hard":
        est = np.where(np.abs(X) > lam, X, 0.0)
    else:
        raise ValueError(f"mode must be 'soft' or 'hard', got {mode!r}")
    return EstimateResult(est, threshold=lam)


def identity(X):
    return EstimateResult(_data(X).copy())


def run_estimator(spec, X, theta=None):
    """Apply the estimator described by ``spec`` to ``X``."""
    kind = spec.kind
    if kind == "gmleb":
        return gmleb(X, spec.grid, spec.stop, spec.iterations)
    if kind == "s_gmleb":
        return s_gmleb(X, spec.kappa, spec.grid, spec.stop, spec.iterations)
    if kind == "oracle":
        if theta is None:
            raise ValueError("the oracle rule needs the true means")
        return oracle_rule(theta, X)
    if kind == "james_stein":
        return james_stein(X, spec.target)
    if kind == "sure":
        return sure_soft(X)
    if kind == "fdr":
        return fdr_threshold(X, spec.q)
    if kind == "universal_soft":
        return universal(X, "soft")
    if kind == "universal_hard":
        return universal(X, "hard")
    return identity(X)
