"""Numerical invariant suite behind ``gmleb check``.

Every check is seeded and returns a :class:`CheckResult`; nothing here raises
on a failed property.
"""
import math
from dataclasses import dataclass

import numpy as np

from gmleb import estimators, mixtures, npmle
from gmleb.mixtures import DiscreteMixture


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_mixture(rng, max_atoms=6, spread=5.0):
    m = int(rng.integers(1, max_atoms + 1))
    u = np.sort(rng.uniform(-spread, spread, m))
    u = np.unique(u)
    w = rng.dirichlet(np.ones(u.size))
    return DiscreteMixture.normalized(u, w)


def _pairs(rng, count):
    for _ in range(count):
        G = random_mixture(rng)
        x = rng.uniform(G.support[0] - 6.0, G.support[-1] + 6.0)
        yield G, x


def check_lemma_a1(count=1000, seed=1):
    rng = np.random.default_rng(seed)
    worst = math.inf
    for G, x in _pairs(rng, count):
        f, f1, f2 = mixtures.mixture_density_derivs(G, x)
        lhs = (f1 / f) ** 2
        mid = f2 / f + 1.0
        rhs = float(mixtures.inv_phi(f)) ** 2
        worst = min(worst, mid - lhs, rhs - mid)
    return CheckResult("lemma_a1", worst >= -1e-8, f"min slack {worst:.3e} over {count} pairs")


def check_regularized_bounds(count=1000, seed=2, rhos=(1e-2, 1e-4, 1e-8)):
    rng = np.random.default_rng(seed)
    h = 1e-5
    worst_gap = -math.inf
    worst_lo = math.inf
    worst_hi = -math.inf
    for G, x in _pairs(rng, count):
        for rho in rhos:
            L = float(mixtures.inv_phi(rho))
            t = mixtures.regularized_posterior_mean(G, x, rho)
            worst_gap = max(worst_gap, abs(x - t) - L)
            tp = mixtures.regularized_posterior_mean(G, x + h, rho)
            tm = mixtures.regularized_posterior_mean(G, x - h, rho)
            slope = (tp - tm) / (2 * h)
            worst_lo = min(worst_lo, slope)
            worst_hi = max(worst_hi, slope - L * L)
    ok = worst_gap <= 0 and worst_lo >= -1e-6 and worst_hi <= 1e-6
    return CheckResult("regularized_bounds", ok,
                       f"max |x-t|-L {worst_gap:.3e}, min slope {worst_lo:.3e}, "
                       f"max slope-L^2 {worst_hi:.3e}")


def check_em_ascent(datasets=30, seed=3):
    rng = np.random.default_rng(seed)
    worst = math.inf
    for i in range(datasets):
        n = (1, 10, 200)[i % 3]
        theta = rng.choice([0.0, 3.0], size=n)
        X = theta + rng.standard_normal(n)
        grid = npmle.build_grid_paper(X)
        fit = npmle.fit_npmle(X, grid)
        tr = np.asarray(fit.loglik_trace)
        d = np.diff(tr) + 1e-9 * np.abs(tr[:-1])
        if d.size:
            worst = min(worst, float(d.min()))
    return CheckResult("em_ascent", worst >= 0, f"min relaxed increment {worst:.3e}")


def check_hellinger_closed_form(mus=(0.5, 1.0, 2.0, 4.0)):
    worst = 0.0
    for mu in mus:
        d = mixtures.hellinger(DiscreteMixture.point_mass(0.0), DiscreteMixture.point_mass(mu))
        exact = math.sqrt(2.0 * (1.0 - math.exp(-mu * mu / 8.0)))
        worst = max(worst, abs(d - exact))
    return CheckResult("hellinger_closed_form", worst <= 1e-6, f"max error {worst:.3e}")


def compound_vs_bayes(rule, theta, reps, seed, chunk=2000):
    """Monte Carlo compound risk of a separable rule and its Bayes risk under G_n.

    Returns ``(compound_mean, compound_se, bayes_mean, bayes_se)``.
    """
    rng = np.random.default_rng(seed)
    theta = np.asarray(theta, dtype=np.float64)
    n = theta.size
    comp = []
    bayes = []
    left = reps
    while left > 0:
        b = min(chunk, left)
        X = theta + rng.standard_normal((b, n))
        comp.append(((rule(X) - theta) ** 2).mean(axis=1))
        xi = rng.choice(theta, size=(b, n))
        Y = xi + rng.standard_normal((b, n))
        bayes.append(((rule(Y) - xi) ** 2).ravel())
        left -= b
    comp = np.concatenate(comp)
    bayes = np.concatenate(bayes)
    return (comp.mean(), comp.std(ddof=1) / math.sqrt(comp.size),
            bayes.mean(), bayes.std(ddof=1) / math.sqrt(bayes.size))


def check_compound_theorem(n=100, reps=20000, seed=4):
    lam = math.sqrt(2.0 * math.log(n))
    theta = np.where(np.arange(n) < n // 10, 3.0, 0.0)
    c, cse, b, bse = compound_vs_bayes(lambda x: estimators.soft_threshold(x, lam), theta, reps, seed)
    z = abs(c - b) / math.hypot(cse, bse)
    return CheckResult("compound_decision_theorem", z <= 3.0,
                       f"compound {c:.5f} vs bayes {b:.5f} ({z:.2f} SE)")


def check_bayes_rule_shape(count=200, seed=5):
    rng = np.random.default_rng(seed)
    worst_mono = math.inf
    worst_shift = 0.0
    xs = np.linspace(-12, 12, 481)
    for _ in range(count):
        G = random_mixture(rng)
        t = mixtures.posterior_mean(G, xs)
        worst_mono = min(worst_mono, float(np.diff(t).min()))
        c = rng.uniform(-10, 10)
        ts = mixtures.posterior_mean(G.shift(c), xs + c)
        worst_shift = max(worst_shift, float(np.abs(ts - t - c).max()))
    ok = worst_mono >= -1e-12 and worst_shift <= 1e-10
    return CheckResult("bayes_rule_monotone_equivariant", ok,
                       f"min increment {worst_mono:.3e}, max shift error {worst_shift:.3e}")


def check_certified_floor(datasets=5, n=100, seed=6):
    rng = np.random.default_rng(seed)
    bad = 0
    unsatisfied = 0
    for _ in range(datasets):
        X = rng.choice([0.0, 2.0, -3.0], size=n) + rng.standard_normal(n)
        fit = npmle.fit_npmle(X, npmle.build_grid_certified(X),
                              stop=npmle.CertifiedStop())
        if not fit.certificate.satisfied:
            unsatisfied += 1
            continue
        bad += int((~npmle.density_floor_check(fit, X)).sum())
        rho = fit.certificate.q / (math.e * n * math.sqrt(2 * math.pi))
        reg = mixtures.regularized_posterior_mean(fit.mixture, X, rho)
        plain = mixtures.posterior_mean(fit.mixture, X)
        bad += int((reg != plain).sum())
    ok = bad == 0 and unsatisfied == 0
    return CheckResult("certified_density_floor", ok,
                       f"{bad} violations, {unsatisfied} unsatisfied certificates")


ALL_CHECKS = (
    check_lemma_a1,
    check_regularized_bounds,
    check_em_ascent,
    check_hellinger_closed_form,
    check_compound_theorem,
    check_bayes_rule_shape,
    check_certified_floor,
)


def run_all():
    return [chk() for chk in ALL_CHECKS]
