"""Opinion dynamics on the action ring.

    tau_z dz/dt = -d_z z + S(alpha_eff(z) A z + b),   alpha_eff = alpha0 + kappa <z, z>

integrated with fixed-step RK4, plus equilibrium polishing, linearisation and
the polar readout of a state onto the dominant eigenplane.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonFiniteState, NotAnEquilibrium, StepTooLarge
from .spectral import CirculantOperator, project_evidence, dominant_mode

UNDEFINED_PHASE_R = 1e-12
CONVERGENCE_PATIENCE = 10


@dataclass(frozen=True)
class Sigmoid:
    """Odd saturating nonlinearity with unit slope at the origin.

    ``saturation=None`` is plain ``tanh``; otherwise ``s * tanh(u / s)``.
    """

    saturation: float | None = None

    def __post_init__(self):
        if self.saturation is not None and self.saturation <= 0:
            raise ValueError("sigmoid saturation must be positive")

    @property
    def scale(self) -> float:
        return 1.0 if self.saturation is None else float(self.saturation)

    @property
    def bound(self) -> float:
        return self.scale

    def __call__(self, u):
        s = self.scale
        return s * np.tanh(np.asarray(u) / s)

    def prime(self, u):
        s = self.scale
        return 1.0 / np.cosh(np.asarray(u) / s) ** 2

    def coeffs(self) -> tuple[float, float, float]:
        s = self.scale
        return 1.0, -2.0 / s**2, 16.0 / s**4

    def to_config(self):
        return "tanh" if self.saturation is None else {"scaled_tanh": self.saturation}

    @classmethod
    def from_config(cls, cfg) -> "Sigmoid":
        if cfg is None or cfg == "tanh":
            return cls()
        if isinstance(cfg, dict) and "scaled_tanh" in cfg:
            return cls(float(cfg["scaled_tanh"]))
        raise ValueError(f"unknown sigmoid {cfg!r}")


@dataclass(frozen=True)
class NodParams:
    tau_z: float = 1.0
    d_z: float = 1.0
    alpha0: float = 1.0
    kappa: float = 0.0
    sigmoid: Sigmoid = field(default_factory=Sigmoid)

    def __post_init__(self):
        if self.tau_z <= 0 or self.d_z <= 0:
            raise ValueError("tau_z and d_z must be positive")
        if self.alpha0 < 0 or self.kappa < 0:
            raise ValueError("alpha0 and kappa must be non-negative")

    def to_config(self) -> dict:
        return {
            "tau_z": self.tau_z,
            "d_z": self.d_z,
            "alpha0": self.alpha0,
            "kappa": self.kappa,
            "sigmoid": self.sigmoid.to_config(),
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "NodParams":
        cfg = dict(cfg)
        sig = Sigmoid.from_config(cfg.pop("sigmoid", None))
        return cls(sigmoid=sig, **{k: float(v) for k, v in cfg.items()})


@dataclass
class DecisionState:
    z: np.ndarray
    t: float = 0.0


class Status(enum.Enum):
    CONVERGED = "ConvergedToEquilibrium"
    MAX_TIME = "MaxTimeReached"
    DIVERGED = "Diverged"


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    status: Status
    final: DecisionState

    def to_csv(self, path, op: CirculantOperator) -> None:
        r, theta = phase_readout(self.states, op)
        K = self.states.shape[1]
        header = ",".join(["t"] + [f"z_{j}" for j in range(K)] + ["r", "theta"])
        data = np.column_stack([self.times, self.states, r, theta])
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.12g")


def sigmoid_coeffs(params: NodParams) -> tuple[float, float, float]:
    """Taylor data ``(S'(0), S'''(0), S^(5)(0))``."""
    return params.sigmoid.coeffs()


def effective_gain(params: NodParams, z):
    z = np.asarray(z, dtype=float)
    if params.kappa == 0:
        return np.full(z.shape[:-1], params.alpha0) if z.ndim > 1 else params.alpha0
    return params.alpha0 + params.kappa * np.mean(z * z, axis=-1)


def equilibrium_map(z, params: NodParams, op: CirculantOperator, b) -> np.ndarray:
    """``F(z) = -d_z z + S(alpha_eff A z + b)``, i.e. ``tau_z`` times the velocity."""
    z = np.asarray(z, dtype=float)
    alpha = np.asarray(effective_gain(params, z))[..., None] if z.ndim > 1 else effective_gain(params, z)
    return -params.d_z * z + params.sigmoid(alpha * op.apply(z) + b)


def nod_rhs(state, params: NodParams, op: CirculantOperator, b) -> np.ndarray:
    """Velocity ``dz/dt``. ``state`` may be a DecisionState or an array (batched over leading axes)."""
    z = state.z if isinstance(state, DecisionState) else state
    return equilibrium_map(z, params, op, b) / params.tau_z


def jacobian(z, params: NodParams, op: CirculantOperator, b) -> np.ndarray:
    """Jacobian of ``F`` (``tau_z`` times the Jacobian of the velocity)."""
    z = np.asarray(z, dtype=float)
    K = z.shape[-1]
    alpha = effective_gain(params, z)
    Az = op.apply(z)
    gain_part = alpha * op.A
    if params.kappa > 0:
        # d(alpha_eff)/dz = 2 kappa z / K
        gain_part = gain_part + np.outer(Az, 2.0 * params.kappa * z / K)
    slope = params.sigmoid.prime(alpha * Az + b)
    return -params.d_z * np.eye(K) + slope[:, None] * gain_part


def linearize(z_eq, params: NodParams, op: CirculantOperator, b, eq_tol: float = 1e-8) -> np.ndarray:
    """Eigenvalues of the Jacobian of ``F`` at an equilibrium."""
    res = np.max(np.abs(equilibrium_map(z_eq, params, op, b)))
    if not res < eq_tol:
        raise NotAnEquilibrium(f"residual {res:.3e} exceeds tolerance {eq_tol:.1e}")
    return np.linalg.eigvals(jacobian(z_eq, params, op, b))


def is_stable(eigs) -> bool:
    return bool(np.all(np.real(eigs) < 0))


def polish_equilibrium(
    z0, params: NodParams, op: CirculantOperator, b, tol: float = 1e-12, max_iter: int = 50
) -> tuple[np.ndarray, bool]:
    """Newton iteration on ``F``. Returns ``(z, converged)``.

    Least-squares steps keep the iteration defined at singular points such as
    the origin at critical gain.
    """
    z = np.array(z0, dtype=float)
    b = np.asarray(b, dtype=float)
    for _ in range(max_iter):
        F = equilibrium_map(z, params, op, b)
        if np.max(np.abs(F)) < tol:
            return z, True
        J = jacobian(z, params, op, b)
        step = np.linalg.lstsq(J, -F, rcond=None)[0]
        z = z + step
        if not np.all(np.isfinite(z)):
            break
    F = equilibrium_map(z, params, op, b)
    return z, bool(np.all(np.isfinite(F)) and np.max(np.abs(F)) < tol)


def _check_step(dt: float, params: NodParams) -> None:
    if not dt > 0:
        raise StepTooLarge("time step must be positive")
    if dt > params.tau_z / 10 * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt} exceeds the stability guard tau_z/10={params.tau_z / 10}")


def rk4_step(f: Callable, t: float, z: np.ndarray, dt: float, k1=None) -> np.ndarray:
    if k1 is None:
        k1 = f(t, z)
    k2 = f(t + dt / 2, z + 0.5 * dt * k1)
    k3 = f(t + dt / 2, z + 0.5 * dt * k2)
    k4 = f(t + dt, z + dt * k3)
    return z + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_batch(
    z0,
    params: NodParams,
    op: CirculantOperator,
    b,
    dt: float,
    n_steps: int,
    eq_tol: float | None = None,
):
    """Integrate independent rows of ``z0`` under constant evidence ``b`` (same shape).

    A row stops moving once ``tau_z * |dz/dt|_inf < eq_tol`` has held for
    ten consecutive steps; other rows keep integrating. Every row sees exactly
    the arithmetic it would see on its own, so results do not depend on how
    agents are batched. Returns ``(z, converged_mask)``.
    """
    _check_step(dt, params)
    z = np.array(z0, dtype=float, ndmin=2)
    b = np.broadcast_to(np.asarray(b, dtype=float), z.shape)
    n = z.shape[0]
    active = np.ones(n, dtype=bool)
    streak = np.zeros(n, dtype=int)
    for _ in range(n_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        zi, bi = z[idx], b[idx]

        def f(_t, x, bi=bi):
            return nod_rhs(x, params, op, bi)

        k1 = f(0.0, zi)
        if eq_tol is not None:
            small = np.max(np.abs(k1), axis=-1) * params.tau_z < eq_tol
            streak[idx] = np.where(small, streak[idx] + 1, 0)
            done = streak[idx] >= CONVERGENCE_PATIENCE
            if done.any():
                active[idx[done]] = False
                keep = ~done
                idx, zi, bi, k1 = idx[keep], zi[keep], bi[keep], k1[keep]
                if idx.size == 0:
                    break

                def f(_t, x, bi=bi):
                    return nod_rhs(x, params, op, bi)

        z_new = rk4_step(f, 0.0, zi, dt, k1=k1)
        if not np.all(np.isfinite(z_new)):
            raise NonFiniteState("state became non-finite during integration")
        z[idx] = z_new
    return z, ~active


def integrate(
    initial: DecisionState,
    params: NodParams,
    op: CirculantOperator,
    evidence,
    dt: float | None = None,
    t_end: float = 100.0,
    eq_tol: float | None = 1e-10,
    stride: int = 1,
    blowup: float = 1e6,
) -> Trajectory:
    """Fixed-step RK4 from ``initial`` until ``t_end`` or sustained equilibrium.

    ``evidence`` is either a constant vector or a callable ``t -> b``. With
    ``eq_tol=None`` the run always lasts until ``t_end``.
    """
    if dt is None:
        dt = params.tau_z / 50
    _check_step(dt, params)
    if callable(evidence):
        b_of_t = evidence
    else:
        b_const = np.asarray(evidence, dtype=float)
        b_of_t = lambda t: b_const  # noqa: E731

    def f(t, z):
        return nod_rhs(z, params, op, b_of_t(t))

    z = np.array(initial.z, dtype=float)
    t0 = float(initial.t)
    n_steps = int(round((t_end - t0) / dt))
    times, states = [t0], [z.copy()]
    status = Status.MAX_TIME
    streak = 0
    i = 0
    for i in range(1, n_steps + 1):
        t = t0 + (i - 1) * dt
        k1 = f(t, z)
        if eq_tol is not None:
            streak = streak + 1 if np.max(np.abs(k1)) * params.tau_z < eq_tol else 0
            if streak >= CONVERGENCE_PATIENCE:
                status = Status.CONVERGED
                i -= 1
                break
        z = rk4_step(f, t, z, dt, k1=k1)
        if not np.all(np.isfinite(z)):
            raise NonFiniteState(f"state became non-finite at t={t + dt:.6g}")
        if np.max(np.abs(z)) > blowup:
            status = Status.DIVERGED
            times.append(t0 + i * dt)
            states.append(z.copy())
            break
        if i % stride == 0:
            times.append(t0 + i * dt)
            states.append(z.copy())
    t_final = t0 + i * dt
    if times[-1] != t_final:
        times.append(t_final)
        states.append(z.copy())
    return Trajectory(np.array(times), np.array(states), status, DecisionState(z.copy(), t_final))


def phase_readout(z, op: CirculantOperator):
    """Polar coordinates ``(r, theta)`` of the projection of ``z`` onto the dominant plane.

    ``theta`` lies in ``[0, 2*pi)`` and is NaN when ``r`` is below 1e-12.
    """
    k_star, _, _ = dominant_mode(op)
    mode = op.modes[k_star]
    z = np.asarray(z, dtype=float)
    c = op.ring.inner(z, mode.cosine_vec)
    s = op.ring.inner(z, mode.sine_vec)
    # Psi(z) = 2c phi + 2s psi = r sqrt(2) (cos th phi + sin th psi)
    r = np.sqrt(2.0) * np.hypot(c, s)
    theta = np.mod(np.arctan2(s, c), 2 * np.pi)
    theta = np.where(r < UNDEFINED_PHASE_R, np.nan, theta)
    if np.ndim(r) == 0:
        return float(r), float(theta)
    return r, theta


def unit_direction(theta: float, op: CirculantOperator) -> np.ndarray:
    """``e_theta = sqrt(2) (cos theta phi_k* + sin theta psi_k*)``, unit ring norm."""
    k_star, _, _ = dominant_mode(op)
    mode = op.modes[k_star]
    return np.sqrt(2.0) * (np.cos(theta) * mode.cosine_vec + np.sin(theta) * mode.sine_vec)


def phase_sector(z, op: CirculantOperator) -> np.ndarray:
    """Action read from the phase: argmax of the projected state (lowest index on ties)."""
    return np.argmax(project_evidence(z, op), axis=-1)


def random_initial(K: int, rng: np.random.Generator, scale: float = 1e-3, n: int | None = None) -> np.ndarray:
    shape = (K,) if n is None else (n, K)
    return rng.uniform(-scale, scale, size=shape)


def radial_decay_rate(times, r, r_final: float, floor: float) -> float:
    """Exponent of ``|r(t) - r_final|`` fitted over the last half of the transient.

    The transient runs from the peak deviation down to ``floor``; its last
    half is measured in decades, i.e. deviations between ``floor`` and the
    geometric mean of the peak and ``floor``. That keeps the fit inside the
    linear regime and above any slow residual drift.
    """
    times = np.asarray(times)
    e = np.abs(np.asarray(r) - r_final)
    i_peak = int(np.argmax(e))
    tail = e[i_peak:]
    below = np.flatnonzero(tail < floor)
    end = i_peak + (below[0] if below.size else len(tail))
    upper = np.sqrt(e[i_peak] * floor)
    idx = np.arange(i_peak, end)
    sel = idx[e[idx] <= upper]
    if sel.size < 4:
        raise ValueError("transient too short to fit a decay rate")
    slope = np.polyfit(times[sel], np.log(e[sel]), 1)[0]
    return float(-slope)
