"""The compiled and numpy kernels must agree; both are exercised explicitly."""
import numpy as np
import pytest

from gmleb import _backend

BACKENDS = _backend.available()


@pytest.fixture(params=BACKENDS)
def kern(request):
    return _backend.load(request.param)


def test_numpy_fallback_always_available():
    assert "numpy" in BACKENDS


def test_default_backend_is_first_available():
    assert _backend.BACKEND in BACKENDS


def test_kernel_matrix(kern):
    rng = np.random.default_rng(0)
    x = rng.normal(0, 5, 40)
    u = np.linspace(-10, 10, 77)
    K, scale = kern.kernel_matrix(x, u)
    logphi = -0.5 * np.subtract.outer(x, u) ** 2 - 0.5 * np.log(2 * np.pi)
    np.testing.assert_allclose(np.log(K) + scale[:, None], logphi, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(K.max(axis=1), 1.0)


def test_em_step_agrees(kern):
    rng = np.random.default_rng(1)
    x = rng.normal(0, 3, 200)
    u = np.linspace(x.min(), x.max(), 150)
    ref = _backend.load("numpy")
    K, _ = ref.kernel_matrix(x, u)
    w = rng.dirichlet(np.ones(u.size))
    w[5] = 0.0
    w /= w.sum()
    out_ref, out = np.empty_like(w), np.empty_like(w)
    s_ref, r_ref = ref.em_step(K, w, out_ref)
    s, r = kern.em_step(K, w, out)
    np.testing.assert_allclose(out, out_ref, rtol=1e-12)
    assert s == pytest.approx(s_ref, rel=1e-13)
    assert r == pytest.approx(r_ref, rel=1e-12, abs=1e-15)
    assert out[5] == 0.0


def test_em_step_zero_row(kern):
    K = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(FloatingPointError):
        kern.em_step(K, np.array([0.5, 0.5]), np.empty(2))


def test_log_density_and_mean(kern):
    rng = np.random.default_rng(2)
    x = rng.normal(0, 10, 600)
    u = np.sort(rng.uniform(-5, 5, 30))
    w = rng.dirichlet(np.ones(30))
    w[3] = 0.0
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    logf, mean = kern.log_density_and_mean(x, u, logw)
    dens = (w * np.exp(-0.5 * np.subtract.outer(x, u) ** 2)).sum(axis=1) / np.sqrt(2 * np.pi)
    ok = dens > 1e-250
    np.testing.assert_allclose(logf[ok], np.log(dens[ok]), rtol=1e-12)
    ref = _backend.load("numpy").log_density_and_mean(x, u, logw)
    np.testing.assert_allclose(logf, ref[0], rtol=1e-13)
    np.testing.assert_allclose(mean, ref[1], rtol=1e-12, atol=1e-12)
    assert np.all(np.isfinite(mean))


def test_fits_agree_across_backends(monkeypatch):
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernels not built")
    from gmleb import npmle
    rng = np.random.default_rng(3)
    X = rng.choice([0.0, 4.0], 300) + rng.standard_normal(300)
    g = npmle.build_grid_paper(X)
    fits = {}
    for name in BACKENDS:
        monkeypatch.setattr(npmle, "kernels", _backend.load(name))
        fits[name] = npmle.fit_npmle(X, g)
    a, b = fits["cython"], fits["numpy"]
    np.testing.assert_allclose(a.mixture.weights, b.mixture.weights, rtol=1e-9, atol=1e-15)
    np.testing.assert_allclose(a.loglik_trace, b.loglik_trace, rtol=1e-12)
