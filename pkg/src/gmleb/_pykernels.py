"""Numpy implementations of the hot loops.

Same signatures as the compiled ``_ckernels`` module; used when the extension
is unavailable or when ``GMLEB_PURE_PYTHON=1``.
"""
import numpy as np

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_CHUNK = 256


def kernel_matrix(x, u):
    """Row-scaled normal kernel ``K[i, j] = phi(x_i - u_j) / max_j phi(x_i - u_j)``.

    Returns ``(K, log_scale)`` where ``log_scale[i]`` is the log of the removed
    row factor, so ``log phi(x_i - u_j) = log K[i, j] + log_scale[i]``.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    sq = np.subtract.outer(x, u)
    sq *= sq
    sq *= -0.5
    top = sq.max(axis=1)
    sq -= top[:, None]
    np.exp(sq, out=sq)
    return sq, top - _LOG_SQRT_2PI


def em_step(K, w, out):
    """One EM update of mixing weights on a fixed grid.

    Writes the new weights into ``out`` and returns ``(s, r)`` with ``s`` the
    sum over rows of ``log(K @ w)`` for the *input* weights and ``r`` the
    largest log ratio new/old over atoms with positive input weight.
    """
    n = K.shape[0]
    denom = K @ w
    if not np.all(denom > 0.0):
        bad = int(np.flatnonzero(~(denom > 0.0))[0])
        raise FloatingPointError(f"mixture density vanishes at observation {bad}")
    ratio = (K.T @ (1.0 / denom)) / n
    np.multiply(w, ratio, out=out)
    pos = w > 0.0
    max_log_ratio = float(np.log(ratio[pos].max())) if pos.any() else 0.0
    if not pos.all():
        max_log_ratio = max(max_log_ratio, 0.0)
    return float(np.log(denom).sum()), max_log_ratio


def log_density_and_mean(x, u, logw):
    """Log mixture density and posterior mean at each ``x``, in log space."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    logw = np.ascontiguousarray(logw, dtype=np.float64)
    logf = np.empty_like(x)
    mean = np.empty_like(x)
    for start in range(0, x.size, _CHUNK):
        xs = x[start:start + _CHUNK]
        a = np.subtract.outer(xs, u)
        a *= a
        a *= -0.5
        a += logw
        top = a.max(axis=1)
        a -= top[:, None]
        np.exp(a, out=a)
        s = a.sum(axis=1)
        logf[start:start + _CHUNK] = np.log(s) + top - _LOG_SQRT_2PI
        mean[start:start + _CHUNK] = (a @ u) / s
    return logf, mean
