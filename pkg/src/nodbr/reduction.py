"""Reduced amplitude/phase equations on the dominant eigenplane.

Near critical gain the state is ``z = r e_theta + w`` with ``w`` slaved to the
stable modes. The reduced radial and angular right-hand sides are

    g_r     = mu r + Gamma r^3 + (A_k/sqrt2) cos(theta - th_k)
              + (eta r^2/sqrt2) [3 A_k cos(theta - th_k) + A_3k cos(3 theta - th_3k)]
    g_theta = [b != 0] ( (A_k/sqrt2) sin(th_k - theta)
              + (eta r^2/sqrt2) [3 A_k sin(th_k - theta) + A_3k sin(th_3k - 3 theta)] )

with ``Gamma = (s3/4) (alpha_c lambda)^3`` and ``eta = (s3/4) (alpha_c lambda)^2``.
With state-dependent gain the radial equation becomes the quintic
``mu0 r + Gamma_tilde r^3 + Delta r^5 + forcing``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import NodParams, equilibrium_map, polish_equilibrium, phase_readout, sigmoid_coeffs
from .errors import (
    AliasedHarmonic,
    NotInCoexistence,
    NotSubcritical,
    NotSupercritical,
    ZeroCubicCoefficient,
)
from .spectral import CirculantOperator, dominant_mode, fold_mode, mode_coefficients, project_complement

ROOT_IMAG_TOL = 1e-9


@dataclass(frozen=True)
class ReducedModel:
    mu: float
    mu0: float
    Gamma: float
    eta: float
    Gamma_tilde: float
    Delta: float
    mu_SN: float
    alpha_c: float
    lambda_star: float
    kappa: float
    k_star: int

    @property
    def subcritical(self) -> bool:
        return self.kappa > 0 and self.Gamma_tilde > 0 and self.Delta < 0

    def require_subcritical(self) -> None:
        if not self.Gamma_tilde > 0:
            raise NotSubcritical(f"Gamma_tilde={self.Gamma_tilde:.4g} must be positive")
        if not self.Delta < 0:
            raise NotSubcritical(f"Delta={self.Delta:.4g} must be negative")

    def radial_polynomial(self, forcing: float = 0.0) -> np.ndarray:
        """Coefficients (highest first) of ``Delta r^5 + Gt r^3 + mu0 r + forcing``."""
        return np.array([self.Delta, 0.0, self.Gamma_tilde, 0.0, self.mu0, forcing])


@dataclass(frozen=True)
class PolarForcing:
    amp_k: float
    phase_k: float
    amp_3k: float = 0.0
    phase_3k: float = 0.0

    @property
    def is_zero(self) -> bool:
        return self.amp_k == 0 and self.amp_3k == 0


def third_harmonic_index(k_star: int, K: int) -> tuple[int, int]:
    m, sign = fold_mode(3 * k_star, K)
    if m == k_star:
        raise AliasedHarmonic(f"3*k_star={3 * k_star} aliases onto k_star={k_star} for K={K}")
    return m, sign


def polar_forcing(b, op: CirculantOperator) -> PolarForcing:
    """Amplitude/phase of the evidence at ``k_star`` and ``3 k_star`` (aliased into range)."""
    k_star, _, _ = dominant_mode(op)
    m3, sign = third_harmonic_index(k_star, op.K)
    coef = mode_coefficients(b, op.ring)
    ph_k = coef.phase[k_star] if coef.phase_defined(k_star) else 0.0
    ph_3 = sign * coef.phase[m3] if coef.phase_defined(m3) else 0.0
    return PolarForcing(float(coef.amplitude[k_star]), float(ph_k), float(coef.amplitude[m3]), float(ph_3))


def _lattice_quintic(params: NodParams, op: CirculantOperator, k_star: int, alpha_c: float) -> float:
    """Fifth-order radial coefficient of the full dynamics along ``e_0``.

    Sum of the sigmoid's quintic term, the feedback of the cubic term through
    the slaved stable modes, and the shift of the cubic term by the gain
    excess ``alpha - alpha_c``. Along the unforced branch that excess is
    ``-Gamma r^2 / lambda`` whatever ``kappa`` is, so the result is the r^4
    coefficient of the branch relation ``mu0(r) = -Gamma_tilde r^2 - Delta r^4``.
    """
    _, s3, s5 = sigmoid_coeffs(params)
    lam = op.modes[k_star].eigenvalue
    e0 = np.sqrt(2.0) * op.modes[k_star].cosine_vec
    u = alpha_c * op.apply(e0)
    inner = op.ring.inner
    direct = (s5 / 120.0) * inner(u**5, e0)

    cubic = (s3 / 6.0) * u**3
    coef = mode_coefficients(cubic, op.ring)
    w = np.zeros(op.K)
    for m, mode in enumerate(op.modes):
        if m == k_star:
            continue
        vec = coef.a[m] * mode.cosine_vec
        if mode.planar:
            vec = vec + coef.beta[m] * mode.sine_vec
        w -= vec / (-params.d_z + alpha_c * mode.eigenvalue)
    feedback = (s3 / 2.0) * inner(u**2 * alpha_c * op.apply(w), e0)

    Gamma = inner(cubic, e0)
    gain_shift = 3.0 * Gamma * (-Gamma / lam) / alpha_c
    return float(direct + feedback + gain_shift)


def reduced_coefficients(
    params: NodParams, op: CirculantOperator, Delta: float | None = None
) -> ReducedModel:
    """Reduced-model coefficients for the given parameters.

    ``Delta`` defaults to the effective quintic coefficient of the full
    dynamics (see :func:`_lattice_quintic`); pass a value to override it.
    """
    k_star, lam, _ = dominant_mode(op)
    _, s3, _ = sigmoid_coeffs(params)
    if s3 == 0:
        raise ZeroCubicCoefficient("sigmoid has vanishing third derivative at the origin")
    alpha_c = params.d_z / lam
    Gamma = (s3 / 4.0) * alpha_c**3 * lam**3
    eta = (s3 / 4.0) * alpha_c**2 * lam**2
    mu0 = -params.d_z + params.alpha0 * lam
    Gamma_tilde = Gamma + params.kappa * lam
    if Delta is None:
        Delta = _lattice_quintic(params, op, k_star, alpha_c)
    mu_SN = Gamma_tilde**2 / (4.0 * Delta) if Delta < 0 and Gamma_tilde > 0 else float("nan")
    return ReducedModel(
        mu=mu0,
        mu0=mu0,
        Gamma=Gamma,
        eta=eta,
        Gamma_tilde=Gamma_tilde,
        Delta=float(Delta),
        mu_SN=mu_SN,
        alpha_c=alpha_c,
        lambda_star=lam,
        kappa=params.kappa,
        k_star=k_star,
    )


def polar_rhs(state, model: ReducedModel, forcing: PolarForcing) -> tuple[float, float]:
    r, theta = state
    s2 = np.sqrt(2.0)
    ak, thk, a3, th3 = forcing.amp_k, forcing.phase_k, forcing.amp_3k, forcing.phase_3k
    radial_evidence = ak / s2 * np.cos(theta - thk)
    mixed_r = model.eta * r**2 / s2 * (3 * ak * np.cos(theta - thk) + a3 * np.cos(3 * theta - th3))
    if model.subcritical:
        g_r = model.mu0 * r + model.Gamma_tilde * r**3 + model.Delta * r**5 + radial_evidence
    else:
        g_r = model.mu * r + model.Gamma * r**3 + radial_evidence + mixed_r
    if forcing.is_zero:
        g_theta = 0.0
    else:
        g_theta = ak / s2 * np.sin(thk - theta) + model.eta * r**2 / s2 * (
            3 * ak * np.sin(thk - theta) + a3 * np.sin(th3 - 3 * theta)
        )
    return float(g_r), float(g_theta)


def ring_amplitude(model: ReducedModel) -> float:
    if model.mu < 0 or model.Gamma >= 0:
        raise NotSupercritical(f"need mu >= 0 and Gamma < 0, got mu={model.mu:.4g}, Gamma={model.Gamma:.4g}")
    return float(np.sqrt(-model.mu / model.Gamma))


def _radial_roots(model: ReducedModel, forcing: float) -> np.ndarray:
    poly = model.radial_polynomial(forcing)
    roots = np.roots(poly)
    real = roots[np.abs(roots.imag) <= ROOT_IMAG_TOL * max(1.0, np.max(np.abs(roots)))].real
    dpoly = np.polyder(poly)
    polished = []
    for x in real:
        for _ in range(5):
            d = np.polyval(dpoly, x)
            if d == 0:
                break
            x = x - np.polyval(poly, x) / d
        polished.append(x)
    if forcing == 0.0:
        polished.append(0.0)
    out = np.unique(np.round(np.array(polished), 12))
    return out


def subcritical_branches(model: ReducedModel, radial_forcing: float = 0.0) -> list[tuple[float, bool]]:
    """Non-negative roots of the forced quintic, each flagged stable or not."""
    model.require_subcritical()
    poly = model.radial_polynomial(radial_forcing)
    dpoly = np.polyder(poly)
    roots = _radial_roots(model, radial_forcing)
    out = []
    for r in roots:
        if r < -1e-12:
            continue
        r = max(float(r), 0.0)
        out.append((r, bool(np.polyval(dpoly, r) < 0)))
    return out


def _outer_branch_exists(model: ReducedModel, p: float) -> bool:
    return sum(1 for r, _ in subcritical_branches(model, p) if r > 0) >= 2


def evidence_threshold(model: ReducedModel, rtol: float = 1e-9) -> float:
    """Destabilising radial forcing at which the committed branch is annihilated.

    The committed (outer, stable) root meets the unstable middle root in a
    saddle-node; found by bisection on the number of positive roots. The
    tolerance is relative because the threshold scales like ``|mu_SN|^(3/2)``
    and is tiny near onset.
    """
    model.require_subcritical()
    if not (model.mu_SN < model.mu0 < 0):
        raise NotInCoexistence(f"mu0={model.mu0:.4g} outside ({model.mu_SN:.4g}, 0)")
    r_sn = np.sqrt(-model.Gamma_tilde / (2 * model.Delta))
    hi = 2 * abs(model.mu_SN) * r_sn
    while _outer_branch_exists(model, -hi):
        hi *= 2
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _outer_branch_exists(model, -mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def recommit_threshold(model: ReducedModel, rtol: float = 1e-9) -> float:
    """Aligned forcing above which only the committed branch survives.

    Mirror of :func:`evidence_threshold` on the other side of the fold: for
    aligned forcing below this value the inner (uncommitted) root persists.
    """
    model.require_subcritical()
    if not (model.mu_SN < model.mu0 < 0):
        raise NotInCoexistence(f"mu0={model.mu0:.4g} outside ({model.mu_SN:.4g}, 0)")

    def inner_exists(p):
        return _outer_branch_exists(model, p)

    hi = 2 * abs(model.mu0) * np.sqrt(abs(model.mu0 / model.Gamma_tilde)) + 1e-300
    while inner_exists(hi):
        hi *= 2
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if inner_exists(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def suppression_residual(b, params: NodParams, op: CirculantOperator, z0=None) -> list[dict]:
    """Compare the slaved stable-mode coefficients with ``-b_m / sigma_m`` at critical gain.

    Solves the full equilibrium equation at ``alpha = alpha_c`` by Newton and
    reports, per non-critical mode ``m``, the measured coefficients of the
    complement component and the deviation from the linear prediction.
    """
    k_star, lam, _ = dominant_mode(op)
    alpha_c = params.d_z / lam
    crit = NodParams(params.tau_z, params.d_z, alpha_c, 0.0, params.sigmoid)
    b = np.asarray(b, dtype=float)
    coef_b = mode_coefficients(b, op.ring)
    sigmas = -params.d_z + alpha_c * op.eigenvalues
    if z0 is None:
        z0 = np.zeros(op.K)
        for m, s in enumerate(sigmas):
            if m == k_star:
                continue
            z0 = z0 - (coef_b.a[m] * op.modes[m].cosine_vec) / s
            if op.modes[m].planar:
                z0 = z0 - (coef_b.beta[m] * op.modes[m].sine_vec) / s
    if np.allclose(b, 0):
        z = np.zeros(op.K)
    else:
        z, ok = polish_equilibrium(z0, crit, op, b, tol=1e-14)
        if not ok and np.max(np.abs(equilibrium_map(z, crit, op, b))) > 1e-10:
            raise RuntimeError("equilibrium solve failed at critical gain")
    w = project_complement(z, op)
    coef_w = mode_coefficients(w, op.ring)
    out = []
    for m, s in enumerate(sigmas):
        if m == k_star:
            continue
        pred = np.array([-coef_b.a[m] / s, -coef_b.beta[m] / s])
        meas = np.array([coef_w.a[m], coef_w.beta[m]])
        dev = float(np.hypot(*(meas - pred)))
        scale = float(np.hypot(*pred))
        out.append(
            {
                "mode": m,
                "sigma": float(s),
                "w_cos": float(meas[0]),
                "w_sin": float(meas[1]),
                "predicted_cos": float(pred[0]),
                "predicted_sin": float(pred[1]),
                "deviation": dev,
                "relative_deviation": dev / scale if scale > 0 else (0.0 if dev == 0 else float("inf")),
            }
        )
    return out


def committed_phase(z, op: CirculantOperator) -> float:
    return phase_readout(z, op)[1]
