"""Acceptance criteria, each at its stated tolerance.

Every criterion records a single ``PASS``/``FAIL`` line that is printed in
the terminal summary (and on stdout with ``-s``).
"""

import math
import time

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import logsumexp

from bsmreg import (BetaParams, BsmParams, MixingSpec, aic, beta_log_pdf, beta_moments, bic,
                    bsm_moments, bsm_pdf, bsm_sample, fit_mle, rank_models)
from bsmreg.cli import load_dataset
from bsmreg.distributions import quadrature_for
from bsmreg.em import ASCENT_SLACK, em_fit
from bsmreg.numeric import _lbeta
from bsmreg.simulation import ScenarioConfig, run_sensitivity
from conftest import ACCEPTANCE_LINES, simulate_beta_regression, simulate_tpb_regression

MUS = (0.1, 0.5, 0.9)
PHIS = (0.1, 0.5, 1.0)
MIXING_GRID = {
    "tpb": [MixingSpec.two_point(0.9, 2.0), MixingSpec.two_point(0.75, 5.0), MixingSpec.two_point(0.5, 10.0)],
    "gb": [MixingSpec.gamma(t) for t in (0.1, 1.0, 4.0)],
    "lnb": [MixingSpec.log_normal(t) for t in (0.1, 1.0, 4.0)],
    "igb": [MixingSpec.inverse_gaussian(t) for t in (0.1, 1.0, 4.0)],
}
GRID = np.arange(1, 100) / 100.0


def record(key, ok, detail):
    line = f"criterion {key}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)
    return ok


def all_cases():
    for fam, specs in MIXING_GRID.items():
        for spec in specs:
            for mu in MUS:
                for phi in PHIS:
                    yield fam, BsmParams.of(mu, phi, spec)


def _half_mass(mu, phi, rule):
    """Mass on (0, 1/2] under y = exp(t), with the log density written in t.

    Working in t keeps the mass below the smallest double visible, and the
    breakpoints clustered at log(mu) catch the narrow spikes contributed by
    very large mixing nodes.
    """
    a = mu * rule.nodes / phi
    b = (1.0 - mu) * rule.nodes / phi
    c = rule.log_weights - _lbeta(a, b)

    def g(t):
        return math.exp(logsumexp(a * t + (b - 1.0) * math.log1p(-math.exp(t)) + c))

    top, m = math.log(0.5), math.log(mu)
    edges = {-math.inf, -1e6, -1e4, -1e3, -100.0, -30.0, -10.0, top}
    if m < top:
        edges |= {m} | {p for k in range(1, 11) for p in (m - 10.0 ** -k, m + 10.0 ** -k) if p < top}
    edges = sorted(edges)
    return sum(quad(g, lo, hi, limit=200, epsabs=1e-13, epsrel=1e-12)[0]
               for lo, hi in zip(edges, edges[1:]))


def integrate_unit(p):
    """Integral of the density over (0, 1).

    The upper half is folded onto the lower one through
    f(y; mu) = f(1 - y; 1 - mu), since doubles cannot resolve y near 1.
    """
    rule = quadrature_for(p.mixing, p.quadrature_nodes)
    return _half_mass(p.mu, p.phi, rule) + _half_mass(1.0 - p.mu, p.phi, rule)


def test_criterion_1_information_criteria():
    checks = [
        (aic(28.5806, 3), -51.1611),
        (bic(28.5806, 3, 104), -43.2280),
        (aic(38.4982, 4), -68.9963),
        (bic(38.4982, 4, 104), -58.4188),
    ]
    worst = max(abs(a - b) for a, b in checks)
    ok = record("1", worst <= 5e-4, f"max |AIC/BIC - published| = {worst:.2e} (tol 5e-4)")
    assert ok


def test_criterion_2_normalization():
    t0 = time.perf_counter()
    worst, where = 0.0, None
    count = 0
    for fam, p in all_cases():
        err = abs(integrate_unit(p) - 1.0)
        count += 1
        if err > worst:
            worst, where = err, (fam, p.mu, p.phi, p.mixing.params)
    elapsed = time.perf_counter() - t0
    ok = record("2", worst <= 1e-4 and count == 108 and elapsed < 60,
                f"{count} cases, max |integral - 1| = {worst:.2e} at {where} (tol 1e-4), {elapsed:.1f}s")
    assert ok


def test_criterion_3_mean_preservation():
    worst = 0.0
    mc_worst = 0.0
    count = 0
    for i, (fam, p) in enumerate(all_cases()):
        worst = max(worst, abs(bsm_moments(p).mean - p.mu))
        y = bsm_sample(p, np.random.default_rng(1000 + i), 100_000)
        z = abs(y.mean() - p.mu) / (y.std(ddof=1) / math.sqrt(y.size))
        mc_worst = max(mc_worst, z)
        count += 1
    ok = record("3", worst <= 1e-6 and mc_worst <= 4.0,
                f"{count} cases, max |E[Y] - mu| = {worst:.2e} (tol 1e-6), "
                f"max Monte-Carlo z = {mc_worst:.2f} (tol 4)")
    assert ok


def test_criterion_4_tpb_dual_path():
    mpmath.mp.dps = 30
    rng = np.random.default_rng(44)
    worst = 0.0
    for _ in range(20):
        mu, phi = rng.uniform(0.05, 0.95), math.exp(rng.uniform(math.log(0.01), math.log(2.0)))
        t1, t2 = rng.uniform(0.5, 0.99), rng.uniform(1.1, 20.0)
        p = BsmParams.of(mu, phi, MixingSpec.two_point(t1, t2))
        got = bsm_pdf(GRID, p)

        def fb(y, s):
            a, b = mpmath.mpf(mu) / s, (1 - mpmath.mpf(mu)) / s
            return y ** (a - 1) * (1 - y) ** (b - 1) / mpmath.beta(a, b)

        ref = np.array([float(t1 * fb(mpmath.mpf(y), phi) + (1 - t1) * fb(mpmath.mpf(y), t2 * phi))
                        for y in GRID])
        worst = max(worst, float(np.max(np.abs(got - ref) / np.maximum(1.0, ref))))
    ok = record("4", worst <= 1e-12,
                f"20 random draws x 99 points, max density gap {worst:.2e} (relative above 1; tol 1e-12)")
    assert ok


def test_criterion_5_degenerate_limits():
    base = BetaParams(0.5, 0.3)
    ref = np.exp(beta_log_pdf(GRID, base))
    gaps = {}
    for label, spec in [("gb", MixingSpec.gamma(1e-4)), ("lnb", MixingSpec.log_normal(1e-4)),
                        ("tpb", MixingSpec.two_point(1 - 1e-9, 1 + 1e-9)),
                        ("igb", MixingSpec.inverse_gaussian(1e-4))]:
        gaps[label] = float(np.max(np.abs(bsm_pdf(GRID, BsmParams(base, spec)) - ref)))
    ok = all(gaps[k] <= 1e-3 for k in ("gb", "lnb", "tpb")) and gaps["igb"] <= 1e-2
    record("5", ok, "sup-norm gaps " + ", ".join(f"{k} {v:.1e}" for k, v in gaps.items())
           + " (tol 1e-3; igb 1e-2)")
    assert ok


@pytest.fixture(scope="module")
def em_runs():
    t0 = time.perf_counter()
    runs = []
    for seed in range(50):
        data = simulate_tpb_regression(seed, n=1000)
        fit, trace = em_fit(data, compute_se=False)
        runs.append((data, fit, trace))
    return runs, time.perf_counter() - t0


def test_criterion_6_em_ascent(em_runs):
    runs, em_time = em_runs
    t0 = time.perf_counter()
    worst_drop = max(float(np.max(-np.diff(tr.loglik_path), initial=-math.inf)) for _, _, tr in runs)
    gaps = []
    for data, fit, _ in runs[:20]:
        direct = fit_mle(data, "tpb", compute_se=False)
        gaps.append(abs(fit.loglik - direct.loglik))
    elapsed = em_time + time.perf_counter() - t0
    ok = worst_drop <= ASCENT_SLACK and max(gaps) <= 1e-4 and elapsed < 300
    record("6", ok, f"50 EM paths, largest log-likelihood drop {worst_drop:.1e} (slack 1e-10); "
                    f"max |EM - direct| over 20 fits {max(gaps):.1e} (tol 1e-4); {elapsed:.0f}s")
    assert ok


def test_em_recovers_theta1(em_runs):
    runs, _ = em_runs
    hits = sum(abs(fit.natural_estimates["theta1"] - 0.85) <= 0.1 for _, fit, _ in runs)
    assert hits >= 40


def test_criterion_7_sensitivity_study():
    cfg = ScenarioConfig(replicates=100, n=500, beta0=0.5, beta1=1.0, phi_true=0.25,
                         contamination_rate=0.05, families_to_fit=("beta", "tpb"), seed=2024)
    rep = run_sensitivity(cfg)
    b_bias, t_bias = rep.bias["beta"]["beta1"], rep.bias["tpb"]["beta1"]
    b_mse, t_mse = rep.mse["beta"]["beta1"], rep.mse["tpb"]["beta1"]
    ok = b_bias < 0 and abs(b_bias) > abs(t_bias) and b_mse > t_mse and rep.elapsed < 900
    record("7", ok, f"bias(beta1) B {b_bias:.4f} vs TPB {t_bias:.4f}; MSE B {b_mse:.4f} vs TPB {t_mse:.4f}; "
                    f"converged B {rep.n_converged['beta']}/100, TPB {rep.n_converged['tpb']}/100; "
                    f"{rep.elapsed:.0f}s")
    assert ok


TABLE3_LOGLIK = {"beta": 28.5806, "tpb": 38.9206, "gb": 38.0714, "lnb": 38.4423, "igb": 38.4982}
TABLE5_BETA = {"beta0": (0.8521, 0.1096), "beta1": (0.0859, 0.1019), "phi": (0.3854, 0.3274)}


@pytest.fixture(scope="module")
def mockjurors_fits(mockjurors):
    data = load_dataset(mockjurors, "confidence", ["verdict"], contrasts="sum")
    return data, {fam: fit_mle(data, fam) for fam in TABLE3_LOGLIK}


def test_criterion_8_mockjurors(mockjurors_fits):
    data, fits = mockjurors_fits
    beta = fits["beta"]
    est_gap = max(abs(beta.natural_estimates[k] - v[0]) for k, v in TABLE5_BETA.items())
    se_gaps = {k: abs(beta.standard_errors[k] - v[1]) for k, v in TABLE5_BETA.items()}
    ll_gaps = {f: abs(fits[f].loglik - v) for f, v in TABLE3_LOGLIK.items()}
    table = rank_models([(f, fits[f].loglik, fits[f].n_params) for f in TABLE3_LOGLIK], data.n).by_label()
    igb_first = table["igb"].aic_rank == 1 and table["igb"].bic_rank == 1
    beta_se_gap = max(se_gaps["beta0"], se_gaps["beta1"])
    ok = est_gap <= 1e-3 and beta_se_gap <= 5e-3 and max(ll_gaps.values()) <= 0.1 and igb_first
    record("8", ok, f"beta estimates max gap {est_gap:.1e} (tol 1e-3); regression SE max gap "
                    f"{beta_se_gap:.1e} (tol 5e-3); max loglik gap {max(ll_gaps.values()):.1e} (tol 0.1); "
                    f"IGB ranked first on AIC and BIC: {igb_first}")
    se_inv = beta.standard_errors["phi"] / beta.natural_estimates["phi"] ** 2
    record("8 (phi SE)", se_gaps["phi"] <= 5e-3,
           f"se(phi) = {beta.standard_errors['phi']:.4f} vs published 0.3274 (tol 5e-3); "
           f"the published value equals se(1/phi) = {se_inv:.4f}")
    assert est_gap <= 1e-3
    assert max(ll_gaps.values()) <= 0.1 and igb_first
    assert se_gaps["beta0"] <= 5e-3 and se_gaps["beta1"] <= 5e-3


@pytest.mark.xfail(strict=True, reason="published SE of phi (0.3274) is the SE of 1/phi; "
                   "the SE of phi itself is 0.0486")
def test_criterion_8_mockjurors_phi_se(mockjurors_fits):
    _, fits = mockjurors_fits
    assert abs(fits["beta"].standard_errors["phi"] - 0.3274) <= 5e-3


def test_criterion_8_sdac(sdac):
    data = load_dataset(sdac, "rcd", ["ageadj", "chemo"])
    fit = fit_mle(data, "beta")
    published = {"beta0": 1.0422, "beta1": 0.0143, "beta2": 0.2143, "phi": 0.0883}
    gap = max(abs(fit.natural_estimates[k] - v) for k, v in published.items())
    ok = record("8 (sdac)", gap <= 1e-3, f"beta estimates max gap {gap:.1e} (tol 1e-3)")
    assert ok


def test_criterion_9_moment_cross_check():
    worst_var = 0.0
    rng = np.random.default_rng(9)
    for _ in range(50):
        mu, phi = rng.uniform(0.05, 0.95), rng.uniform(0.01, 3.0)
        t1, t2 = rng.uniform(0.05, 0.99), rng.uniform(1.01, 50.0)
        m = bsm_moments(BsmParams.of(mu, phi, MixingSpec.two_point(t1, t2)))
        brute = mu * (1 - mu) * phi * (t1 / (phi + 1.0) + (1 - t1) / (phi + 1.0 / t2))
        worst_var = max(worst_var, abs(m.variance - brute))
    worst_skew = 0.0
    for _, p in all_cases():
        if p.mu == 0.5:
            worst_skew = max(worst_skew, abs(bsm_moments(p).skewness))
    ok = worst_var <= 1e-12 and worst_skew <= 1e-10
    record("9", ok, f"TPB variance max gap {worst_var:.1e} (tol 1e-12); "
                    f"max |skewness| at mu=0.5 {worst_skew:.1e} (tol 1e-10)")
    assert ok


def test_criterion_10_kurtosis_expansion():
    beta_k = beta_moments(BetaParams(0.5, 0.01)).excess_kurtosis
    details, ok = [], True
    for label, make in [("gb", MixingSpec.gamma), ("lnb", MixingSpec.log_normal),
                        ("igb", MixingSpec.inverse_gaussian)]:
        k = [bsm_moments(BsmParams.of(0.5, 0.01, make(t))).excess_kurtosis for t in (0.05, 0.1, 0.2, 0.4)]
        fine = all(b >= a for a, b in zip(k, k[1:])) and min(k) > beta_k
        ok &= fine
        details.append(f"{label} {k[0]:.3f}..{k[-1]:.3f}")
    tk = [bsm_moments(BsmParams.of(0.5, 0.01, MixingSpec.two_point(0.75, t2))).excess_kurtosis for t2 in (2, 5, 10)]
    ok &= tk[0] < tk[1] < tk[2]
    details.append(f"tpb {tk[0]:.3f} < {tk[1]:.3f} < {tk[2]:.3f}")
    record("10", ok, f"beta {beta_k:.3f}; " + "; ".join(details))
    assert ok
