"""Symmetric circulant coupling on a ring of actions and its real Fourier eigenstructure.

Sectors sit at angles ``theta_j = 2*pi*j/K``. A coupling profile ``phi(d)``
indexed by ring distance defines ``A[j, k] = phi((j - k) mod K)``; such a
matrix is diagonalised by ``cos(k theta_j)`` and ``sin(k theta_j)`` with
eigenvalue ``lambda_k = sum_d phi(d) cos(k theta_d)``.

The inner product used throughout is the ring average
``<u, v> = (1/K) sum_j u_j v_j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AsymmetricKernel,
    BadLength,
    DegenerateKernel,
    DominantModeNotPlanar,
    NoUniqueDominantMode,
)

SYMMETRY_TOL = 1e-12
TIE_TOL = 1e-9
# amplitudes below this (relative to the input scale) have no defined phase
PHASE_UNDEFINED_TOL = 1e-12


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ActionRing:
    """``K`` equally spaced sectors on the circle."""

    K: int
    theta: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 3:
            raise ValueError(f"ring needs an integer K >= 3, got {self.K}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "theta", _frozen(2.0 * np.pi * np.arange(self.K) / self.K))

    def inner(self, u, v):
        """Ring inner product; broadcasts over leading axes."""
        return np.mean(np.asarray(u) * np.asarray(v), axis=-1)

    def shift(self, x, steps: int = 1) -> np.ndarray:
        """Cyclic shift of the action index: ``(sigma x)_j = x_{j - steps}``."""
        return np.roll(x, steps, axis=-1)


@dataclass(frozen=True)
class CouplingKernel:
    """Coupling weights ``phi(d)`` for ring distance ``d = 0..K-1``."""

    profile: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.profile, dtype=float)
        if p.ndim != 1:
            raise BadLength("kernel profile must be one-dimensional")
        if not np.all(np.isfinite(p)):
            raise ValueError("kernel profile has non-finite entries")
        mirrored = np.roll(p[::-1], 1)  # mirrored[d] = p[(K - d) mod K]
        if np.max(np.abs(p - mirrored)) > SYMMETRY_TOL:
            raise AsymmetricKernel("coupling profile violates phi(d) = phi(K - d)")
        object.__setattr__(self, "profile", _frozen(p))

    @property
    def K(self) -> int:
        return len(self.profile)


@dataclass(frozen=True)
class FourierMode:
    index: int
    eigenvalue: float
    cosine_vec: np.ndarray
    sine_vec: np.ndarray | None  # None for k = 0 and k = K/2

    @property
    def planar(self) -> bool:
        return self.sine_vec is not None


@dataclass(frozen=True)
class CirculantOperator:
    ring: ActionRing
    kernel: CouplingKernel
    A: np.ndarray
    modes: tuple[FourierMode, ...]

    @property
    def K(self) -> int:
        return self.ring.K

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([m.eigenvalue for m in self.modes])

    def apply(self, z) -> np.ndarray:
        """``A z`` over the last axis.

        Written as an explicit row reduction so that each row of a batch is
        computed by the same arithmetic regardless of batch size.
        """
        z = np.asarray(z, dtype=float)
        return (z[..., None, :] * self.A).sum(axis=-1)


def eigenvalues_from_profile(profile, ring: ActionRing) -> np.ndarray:
    """``lambda_k = sum_d phi(d) cos(k theta_d)`` for ``k = 0..K//2``."""
    profile = np.asarray(profile, dtype=float)
    k = np.arange(ring.K // 2 + 1)
    return np.cos(np.outer(k, ring.theta)) @ profile


def build_circulant(kernel: CouplingKernel, ring: ActionRing) -> CirculantOperator:
    if kernel.K != ring.K:
        raise BadLength(f"kernel has {kernel.K} weights but the ring has K={ring.K}")
    K = ring.K
    idx = (np.arange(K)[:, None] - np.arange(K)[None, :]) % K
    A = _frozen(kernel.profile[idx])
    lams = eigenvalues_from_profile(kernel.profile, ring)
    modes = []
    for k, lam in enumerate(lams):
        cos_vec = _frozen(np.cos(k * ring.theta))
        one_dim = k == 0 or 2 * k == K
        sin_vec = None if one_dim else _frozen(np.sin(k * ring.theta))
        modes.append(FourierMode(k, float(lam), cos_vec, sin_vec))
    return CirculantOperator(ring, kernel, A, tuple(modes))


def _dominant_index(lams: np.ndarray) -> tuple[int, float]:
    order = np.argsort(lams)[::-1]
    k_star = int(order[0])
    gap = float(lams[order[0]] - lams[order[1]])
    return k_star, gap


def mexican_hat_kernel(
    ring: ActionRing,
    excite_width: int = 2,
    excite_gain: float = 1.0,
    inhibit_gain: float = 0.6,
    normalize_dominant: bool = True,
) -> CouplingKernel:
    """Local excitation, one zero on each flank, inhibitory surround.

    For ``excite_width = 1`` the first row reads ``[+, +, 0, -, ..., -, 0, +]``.
    With ``normalize_dominant`` the profile is scaled so that the dominant
    eigenvalue is exactly one.
    """
    if excite_gain <= 0 or inhibit_gain <= 0:
        raise ValueError("Mexican-hat gains must be positive")
    if excite_width < 0 or not excite_width < ring.K / 2:
        raise ValueError(f"excite_width must lie in [0, K/2), got {excite_width}")
    d = np.arange(ring.K)
    dist = np.minimum(d, ring.K - d)
    profile = np.where(
        dist <= excite_width,
        excite_gain,
        np.where(dist == excite_width + 1, 0.0, -inhibit_gain),
    ).astype(float)

    lams = eigenvalues_from_profile(profile, ring)
    k_star, gap = _dominant_index(lams)
    if gap <= TIE_TOL:
        raise DegenerateKernel("Mexican-hat profile has no unique dominant mode")
    if k_star == 0 or 2 * k_star == ring.K:
        raise DegenerateKernel(f"Mexican-hat profile is dominated by the one-dimensional mode k={k_star}")
    if lams[k_star] <= 0:
        raise DegenerateKernel("dominant eigenvalue is not positive")
    if normalize_dominant:
        profile = profile / lams[k_star]
    return CouplingKernel(profile)


def dominant_mode(op: CirculantOperator) -> tuple[int, float, float]:
    """Return ``(k_star, lambda_k_star, spectral_gap)``."""
    lams = op.eigenvalues
    k_star, gap = _dominant_index(lams)
    if gap <= TIE_TOL:
        raise NoUniqueDominantMode(
            f"modes {sorted(np.flatnonzero(lams >= lams[k_star] - TIE_TOL).tolist())} tie for the largest eigenvalue"
        )
    if not op.modes[k_star].planar:
        raise DominantModeNotPlanar(f"dominant mode k={k_star} spans a one-dimensional eigenspace")
    return k_star, float(lams[k_star]), gap


def fold_mode(m: int, K: int) -> tuple[int, int]:
    """Fold an arbitrary harmonic index into ``0..K//2``.

    Returns ``(index, sine_sign)``: ``sin(m theta_j) = sine_sign * sin(index theta_j)``
    on the ring, while the cosine is unchanged.
    """
    m = m % K
    if m > K // 2:
        return K - m, -1
    return m, 1


@dataclass(frozen=True)
class EvidenceSpectrum:
    """Real Fourier coefficients of a vector on the ring.

    ``a[m]`` and ``beta[m]`` are indexed by ``m = 0..K//2``; ``a[0]`` is the
    mean and ``beta[0]`` (and ``beta[K/2]`` for even K) is zero. ``phase[m]``
    is NaN where the amplitude vanishes; check :meth:`phase_defined`.
    """

    a: np.ndarray
    beta: np.ndarray
    amplitude: np.ndarray
    phase: np.ndarray

    @property
    def a0(self) -> float:
        return float(self.a[0])

    def phase_defined(self, m: int) -> bool:
        return bool(np.isfinite(self.phase[m]))

    def reconstruct(self, ring: ActionRing) -> np.ndarray:
        m = np.arange(len(self.a))
        return self.a @ np.cos(np.outer(m, ring.theta)) + self.beta @ np.sin(np.outer(m, ring.theta))


def mode_coefficients(b, ring: ActionRing) -> EvidenceSpectrum:
    b = np.asarray(b, dtype=float)
    K = ring.K
    if b.shape != (K,):
        raise BadLength(f"expected a vector of length {K}, got shape {b.shape}")
    m = np.arange(K // 2 + 1)
    weights = np.full(len(m), 2.0 / K)
    weights[0] = 1.0 / K
    if K % 2 == 0:
        weights[-1] = 1.0 / K
    a = weights * (np.cos(np.outer(m, ring.theta)) @ b)
    beta = weights * (np.sin(np.outer(m, ring.theta)) @ b)
    beta[0] = 0.0
    if K % 2 == 0:
        beta[-1] = 0.0
    amp = np.hypot(a, beta)
    scale = max(1.0, float(np.max(np.abs(b)))) if b.size else 1.0
    with np.errstate(invalid="ignore"):
        phase = np.where(amp > PHASE_UNDEFINED_TOL * scale, np.arctan2(beta, a), np.nan)
    return EvidenceSpectrum(_frozen(a), _frozen(beta), _frozen(amp), _frozen(phase))


def _critical_coords(b, op: CirculantOperator):
    k_star, _, _ = dominant_mode(op)
    mode = op.modes[k_star]
    b = np.asarray(b, dtype=float)
    if b.shape[-1] != op.K:
        raise BadLength(f"expected trailing length {op.K}, got shape {b.shape}")
    a_k = 2.0 * op.ring.inner(b, mode.cosine_vec)
    beta_k = 2.0 * op.ring.inner(b, mode.sine_vec)
    return mode, a_k, beta_k


def project_evidence(b, op: CirculantOperator) -> np.ndarray:
    """Orthogonal projection onto the dominant eigenplane ``span{phi_k*, psi_k*}``.

    Accepts a single vector or a batch along leading axes.
    """
    mode, a_k, beta_k = _critical_coords(b, op)
    return np.asarray(a_k)[..., None] * mode.cosine_vec + np.asarray(beta_k)[..., None] * mode.sine_vec


def project_complement(b, op: CirculantOperator) -> np.ndarray:
    return np.asarray(b, dtype=float) - project_evidence(b, op)


def kernel_from_config(doc: dict) -> tuple[ActionRing, CouplingKernel]:
    """Parse ``{"K", "profile"}`` or ``{"K", "mexican_hat": {...}}``."""
    ring = ActionRing(int(doc["K"]))
    if "profile" in doc:
        return ring, CouplingKernel(np.asarray(doc["profile"], dtype=float))
    mh = dict(doc.get("mexican_hat", {}))
    return ring, mexican_hat_kernel(
        ring,
        excite_width=int(mh.get("excite_width", 2)),
        excite_gain=float(mh.get("excite_gain", 1.0)),
        inhibit_gain=float(mh.get("inhibit_gain", 0.6)),
        normalize_dominant=bool(mh.get("normalize", True)),
    )
