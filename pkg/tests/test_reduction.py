import math

import numpy as np
import pytest
from scipy.optimize import brentq, fsolve

from nodbr.dynamics import DecisionState, NodParams, Sigmoid, integrate, linearize, phase_readout, polish_equilibrium
from nodbr.dynamics import integrate_batch, random_initial, unit_direction
from nodbr.errors import AliasedHarmonic, NotInCoexistence, NotSubcritical, NotSupercritical
from nodbr.reduction import (
    PolarForcing,
    ReducedModel,
    evidence_threshold,
    polar_forcing,
    polar_rhs,
    recommit_threshold,
    reduced_coefficients,
    ring_amplitude,
    subcritical_branches,
    suppression_residual,
    third_harmonic_index,
)

# effective quintic coefficient of the K=18 width-2 Mexican hat with tanh,
# frozen from the branch fit in test_quintic_matches_full_branch
DELTA_MEXHAT18 = -0.41207


def toy_model(mu0, Gt=0.25, Delta=-0.1, kappa=1.0):
    return ReducedModel(
        mu=mu0, mu0=mu0, Gamma=-0.5, eta=-0.5, Gamma_tilde=Gt, Delta=Delta,
        mu_SN=Gt**2 / (4 * Delta), alpha_c=1.0, lambda_star=1.0, kappa=kappa, k_star=1,
    )


def g_quintic(m, r, p=0.0):
    return m.mu0 * r + m.Gamma_tilde * r**3 + m.Delta * r**5 + p


def scan_roots(m, p=0.0, r_max=3.0, n=10_000):
    # sign-change oracle on a dense grid, refined with brentq
    r = np.linspace(0, r_max, n + 1)
    g = g_quintic(m, r, p)
    roots = [0.0] if g[0] == 0 else []
    for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
        roots.append(brentq(lambda x: g_quintic(m, x, p), r[i], r[i + 1], xtol=1e-15))
    return roots


def test_coefficients_tanh(op18):
    m = reduced_coefficients(NodParams(), op18)
    assert m.alpha_c == pytest.approx(1.0, abs=1e-12)
    assert m.Gamma == pytest.approx(-0.5, abs=1e-12)
    assert m.eta == pytest.approx(-0.5, abs=1e-12)
    assert m.k_star == 1
    sub = reduced_coefficients(NodParams(kappa=0.75), op18)
    assert sub.Gamma_tilde == pytest.approx(0.25, abs=1e-12)
    assert sub.subcritical


def test_coefficients_scaled_sigmoid(op18):
    m = reduced_coefficients(NodParams(sigmoid=Sigmoid(2.0), d_z=1.5), op18)
    assert m.alpha_c == pytest.approx(1.5, abs=1e-12)
    assert m.Gamma == pytest.approx(-0.5 / 4 * 1.5**3, rel=1e-12)
    assert m.eta == pytest.approx(-0.5 / 4 * 1.5**2, rel=1e-12)


def test_saddle_node_closed_form():
    m = toy_model(-0.05)
    assert m.mu_SN == pytest.approx(-0.15625, abs=1e-15)

    # oracle: simultaneous g = 0 and dg/dr = 0 on the reduced quintic
    def eqs(x):
        mu0, r = x
        return [mu0 + 0.25 * r**2 - 0.1 * r**4, mu0 + 0.75 * r**2 - 0.5 * r**4]

    mu0, r = fsolve(eqs, [-0.1, 1.0], xtol=1e-14)
    assert mu0 == pytest.approx(-0.15625, abs=1e-10)
    assert r**2 == pytest.approx(1.25, abs=1e-9)


def test_delta_override(op18):
    m = reduced_coefficients(NodParams(kappa=0.75), op18, Delta=-0.1)
    assert m.Delta == -0.1
    assert m.mu_SN == pytest.approx(-0.15625)


def test_quintic_frozen(op18):
    for kappa in (0.0, 0.55):
        assert reduced_coefficients(NodParams(kappa=kappa), op18).Delta == pytest.approx(DELTA_MEXHAT18, abs=5e-6)


@pytest.mark.parametrize("kappa", [0.0, 0.3])
def test_quintic_matches_full_branch(op18, kappa):
    # fit mu0(r) = -Gt r^2 - Delta r^4 + c r^6 on full-ODE equilibria along theta = 0
    m = reduced_coefficients(NodParams(kappa=kappa), op18)
    rs, mus = [], []
    for r_target in np.linspace(0.05, 0.2, 8):
        mu_guess = -m.Gamma_tilde * r_target**2
        p = NodParams(alpha0=1 + mu_guess, kappa=kappa)
        z, ok = polish_equilibrium(r_target * unit_direction(0.0, op18), p, op18, np.zeros(18))
        assert ok
        rs.append(phase_readout(z, op18)[0])
        mus.append(mu_guess)
    rs, mus = np.array(rs), np.array(mus)
    X = np.stack([rs**2, rs**4, rs**6], axis=1)
    coef = np.linalg.lstsq(X, mus, rcond=None)[0]
    assert -coef[0] == pytest.approx(m.Gamma_tilde, abs=1e-4)
    assert -coef[1] == pytest.approx(m.Delta, rel=1e-2)


def test_polar_rhs_examples():
    sup = toy_model(0.05, Gt=-0.5, Delta=-0.1, kappa=0.0)
    rstar = math.sqrt(0.1)
    for th in np.linspace(0, 2 * np.pi, 7):
        assert polar_rhs((rstar, th), sup, PolarForcing(0.0, 0.0)) == pytest.approx((0.0, 0.0), abs=1e-15)
    f = PolarForcing(0.01, 0.4)
    r = 0.2
    gr, gth = polar_rhs((r, 0.4 + np.pi / 2), sup, f)
    assert gr == pytest.approx(0.05 * r - 0.5 * r**3, abs=1e-15)
    # evidence pulls the phase back towards 0.4
    assert gth == pytest.approx(-0.01 / math.sqrt(2) * (1 - 3 * 0.5 * r**2), abs=1e-15)
    # aligned phase is a stable zero of g_theta
    assert polar_rhs((rstar, 0.4), sup, f)[1] == pytest.approx(0.0, abs=1e-15)
    h = 1e-6
    slope = (polar_rhs((rstar, 0.4 + h), sup, f)[1] - polar_rhs((rstar, 0.4 - h), sup, f)[1]) / (2 * h)
    assert slope < 0


def test_polar_rhs_subcritical_uses_quintic():
    m = toy_model(-0.05)
    gr, gth = polar_rhs((0.7, 0.0), m, PolarForcing(0.02, 0.0))
    assert gr == pytest.approx(g_quintic(m, 0.7) + 0.02 / math.sqrt(2), abs=1e-15)
    assert gth == pytest.approx(0.0, abs=1e-15)


def test_ring_amplitude(op18):
    assert ring_amplitude(toy_model(0.05, Gt=-0.5, kappa=0)) == pytest.approx(0.31623, abs=1e-5)
    assert ring_amplitude(toy_model(0.0, Gt=-0.5, kappa=0)) == 0.0
    with pytest.raises(NotSupercritical):
        ring_amplitude(toy_model(-0.01, Gt=-0.5, kappa=0))
    p = NodParams(alpha0=1.1)
    m = reduced_coefficients(p, op18)
    assert ring_amplitude(m) == pytest.approx(0.44721, abs=1e-5)
    tr = integrate(DecisionState(0.3 * unit_direction(1.0, op18)), p, op18, np.zeros(18), t_end=2000, eq_tol=1e-12)
    r = phase_readout(tr.final.z, op18)[0]
    # the cubic law is 7.5% high here; the quintic branch closes most of the gap
    assert r == pytest.approx(ring_amplitude(m), rel=0.10)
    r_quintic = math.sqrt((-0.5 + math.sqrt(0.25 - 4 * m.Delta * 0.1)) / (-2 * m.Delta))
    assert r == pytest.approx(r_quintic, rel=0.02)


@pytest.mark.parametrize(
    "mu0, pattern",
    [(-0.05, [True, False, True]), (-0.1, [True, False, True]), (-0.2, [True]), (0.03, [False, True])],
)
def test_subcritical_branches_vs_scan(mu0, pattern):
    m = toy_model(mu0)
    got = subcritical_branches(m)
    assert [s for _, s in got] == pattern
    oracle = scan_roots(m)
    assert len(oracle) == len(got)
    for (r, _), ro in zip(got, oracle):
        assert r == pytest.approx(ro, abs=1e-6)
        assert abs(g_quintic(m, r)) < 1e-10


def test_subcritical_branches_forced():
    m = toy_model(-0.08)
    for p in (-0.01, 0.005, 0.02):
        got = subcritical_branches(m, p)
        assert [r for r, _ in got] == pytest.approx(scan_roots(m, p), abs=1e-6)


def test_subcritical_requires_regime():
    with pytest.raises(NotSubcritical):
        subcritical_branches(toy_model(-0.05, Gt=-0.1))


def test_evidence_threshold_toy():
    m = toy_model(-0.08)
    d = evidence_threshold(m)
    assert d > 0
    # outer committed root survives just below and vanishes just above
    assert len([r for r, _ in subcritical_branches(m, -0.9 * d) if r > 0]) == 2
    assert len([r for r, _ in subcritical_branches(m, -1.1 * d) if r > 0]) == 0
    # oracle: fold where dg/dr = 0 on the outer branch
    r_fold = max(np.roots([5 * -0.1, 0, 3 * 0.25, 0, -0.08]).real)
    assert d == pytest.approx(g_quintic(m, r_fold), rel=1e-8)


def test_thresholds_vanish_at_edges():
    near_sn = evidence_threshold(toy_model(-0.15625 * 0.999))
    mid = evidence_threshold(toy_model(-0.08))
    assert near_sn < 0.02 * mid
    assert recommit_threshold(toy_model(-1e-4)) < 1e-5
    with pytest.raises(NotInCoexistence):
        evidence_threshold(toy_model(0.01))
    with pytest.raises(NotInCoexistence):
        recommit_threshold(toy_model(-0.2))


def test_recommit_threshold_toy():
    m = toy_model(-0.08)
    h = recommit_threshold(m)
    inner = lambda p: [r for r, _ in subcritical_branches(m, p) if r > 0]  # noqa: E731
    # aligned forcing lifts r = 0; the uncommitted root and the barrier merge at h
    assert len(inner(0.9 * h)) == 3 and len(inner(1.1 * h)) == 1
    r_min = min(r for r in np.roots([5 * -0.1, 0, 3 * 0.25, 0, -0.08]).real if r > 0)
    assert h == pytest.approx(-g_quintic(m, r_min), rel=1e-8)


@pytest.mark.parametrize("frac", [0.2, 0.45])
def test_threshold_predicts_full_fold(op18, frac):
    from nodbr.harness import hysteresis_sweep

    kappa = 0.505
    m0 = reduced_coefficients(NodParams(kappa=kappa), op18)
    p = NodParams(alpha0=1 + frac * m0.mu_SN, kappa=kappa)
    m = reduced_coefficients(p, op18)
    res = hysteresis_sweep(m, p, op18)
    assert res.up_jump == pytest.approx(evidence_threshold(m), rel=0.10)


def test_third_harmonic_aliasing():
    assert third_harmonic_index(1, 18) == (3, 1)
    assert third_harmonic_index(5, 18) == (3, -1)
    with pytest.raises(AliasedHarmonic):
        third_harmonic_index(1, 4)


def test_polar_forcing_reads_modes(op18):
    b = 0.3 * unit_direction(0.7, op18) + 0.1 * unit_direction(0.0, op18) * 0
    b = b + 0.05 * (np.cos(0.2) * op18.modes[3].cosine_vec + np.sin(0.2) * op18.modes[3].sine_vec)
    f = polar_forcing(b, op18)
    assert f.phase_k == pytest.approx(0.7, abs=1e-12)
    assert f.phase_3k == pytest.approx(0.2, abs=1e-12)
    assert f.amp_3k > 0 and f.amp_k > 0


def test_suppression_zero(op18):
    for row in suppression_residual(np.zeros(18), NodParams(), op18):
        assert row["deviation"] == 0.0


def test_suppression_scaling(op18):
    b = 0.05 * op18.modes[2].cosine_vec
    devs = []
    for eps in (1.0, 0.5, 0.25):
        rows = {r["mode"]: r for r in suppression_residual(eps * b, NodParams(), op18)}
        devs.append(rows[2]["relative_deviation"])
        sigma = -1 + op18.eigenvalues[2]
        assert rows[2]["sigma"] == pytest.approx(sigma, abs=1e-12)
    assert devs[0] < 1e-2
    # superlinear: relative error shrinks faster than the evidence
    assert devs[1] / devs[0] < 0.3 and devs[2] / devs[1] < 0.3


def test_ring_degeneracy(op18):
    p = NodParams(alpha0=1.05)
    Z0 = random_initial(18, np.random.default_rng(3), scale=0.05, n=16)
    Z, conv = integrate_batch(Z0, p, op18, np.zeros(18), 0.05, 40_000, eq_tol=1e-12)
    assert conv.all()
    rs, ths = phase_readout(Z, op18)
    assert np.ptp(rs) < 1e-6
    assert np.ptp(ths) > 1.0


def test_anti_aligned_phase_repels(op18):
    p = NodParams(alpha0=1.1)
    b = 0.02 * unit_direction(0.5, op18) / math.sqrt(2)
    rng = np.random.default_rng(9)
    z0 = 0.44 * unit_direction(0.5 + np.pi, op18) + 1e-6 * rng.normal(size=18)
    tr = integrate(DecisionState(z0), p, op18, b, t_end=4000, eq_tol=1e-11)
    _, th = phase_readout(tr.final.z, op18)
    assert abs(np.angle(np.exp(1j * (th - 0.5)))) < 1e-3
    assert np.max(linearize(tr.final.z, p, op18, b, eq_tol=1e-6).real) < 0
