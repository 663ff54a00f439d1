"""Repeated coverage experiment, scenario scripting, metrics and parameter sweeps.

Each epoch every agent sees evidence built from the others' previous actions,
its opinion state relaxes under that evidence for ``inner_horizon`` time
units (warm started), and its action is read off the state. The logit
baseline replaces the relaxation with one softmax draw.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import (
    NodParams,
    equilibrium_map,
    integrate,
    DecisionState,
    integrate_batch,
    jacobian,
    phase_readout,
    phase_sector,
    polish_equilibrium,
    random_initial,
    unit_direction,
)
from .errors import NodbrError, NotSubcritical
from .game import GameParams, UtilityKernel, kernel_for, logit_step, potential, responds_to, evidence_all
from .reduction import (
    ReducedModel,
    evidence_threshold,
    recommit_threshold,
    reduced_coefficients,
    subcritical_branches,
)
from .spectral import ActionRing, CirculantOperator

MIN_INNER_HORIZON = 20.0  # in units of tau_z
EXECUTORS = ("vectorized", "sequential", "threads")
READOUTS = ("argmax", "phase")


class ScenarioError(NodbrError):
    pass


# ---------------------------------------------------------------- scenario


def _keyframed(value):
    """A scalar or a list of ``[t, value]`` keyframes, as ``(times, values)``."""
    if np.ndim(value) == 0:
        return np.array([0.0]), np.array([float(value)])
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ScenarioError("keyframes must be a scalar or a list of [t, value] pairs")
    order = np.argsort(arr[:, 0], kind="stable")
    return arr[order, 0], arr[order, 1]


@dataclass(frozen=True)
class Bump:
    """Von Mises bump; ``center`` and ``width`` in sectors, values piecewise linear in t."""

    center: object
    width: float
    amplitude: object = 1.0

    def __post_init__(self):
        if not self.width > 0:
            raise ScenarioError("bump width must be positive")
        _, amps = _keyframed(self.amplitude)
        if np.any(amps < 0):
            raise ScenarioError("bump amplitudes must be non-negative")
        _keyframed(self.center)

    def center_at(self, t: float) -> float:
        ts, vs = _keyframed(self.center)
        return float(np.interp(t, ts, vs))

    def amplitude_at(self, t: float) -> float:
        ts, vs = _keyframed(self.amplitude)
        return float(np.interp(t, ts, vs))

    def to_config(self) -> dict:
        def enc(v):
            return float(v) if np.ndim(v) == 0 else [[float(a), float(b)] for a, b in v]

        return {"center": enc(self.center), "width": float(self.width), "amplitude": enc(self.amplitude)}


@dataclass(frozen=True)
class AmbiguityWindow:
    """Inside ``[t_start, t_end]`` the listed bumps share their mean amplitude."""

    t_start: float
    t_end: float
    bumps: tuple[int, ...] = (0, 1)

    def to_config(self) -> dict:
        return {"type": "ambiguity", "t_start": self.t_start, "t_end": self.t_end, "bumps": list(self.bumps)}


@dataclass(frozen=True)
class DirectionalShift:
    """From epoch ``t`` on, bump ``bump`` sits at ``center``."""

    t: float
    bump: int
    center: float

    def to_config(self) -> dict:
        return {"type": "shift", "t": self.t, "bump": self.bump, "center": self.center}


def _event_from_config(doc: dict):
    kind = doc.get("type")
    if kind == "ambiguity":
        return AmbiguityWindow(float(doc["t_start"]), float(doc["t_end"]), tuple(int(b) for b in doc.get("bumps", (0, 1))))
    if kind == "shift":
        return DirectionalShift(float(doc["t"]), int(doc["bump"]), float(doc["center"]))
    raise ScenarioError(f"unknown event type {kind!r}")


@dataclass(frozen=True)
class CoverageScenario:
    ring: ActionRing
    horizon: int
    bumps: tuple[Bump, ...]
    events: tuple = ()
    inner_horizon: float = 60.0
    dt_fraction: float = 0.02

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ScenarioError("horizon must be a positive number of epochs")
        if not self.bumps:
            raise ScenarioError("scenario needs at least one bump")
        for ev in self.events:
            times = (ev.t_start, ev.t_end) if isinstance(ev, AmbiguityWindow) else (ev.t,)
            if any(t < 0 or t > self.horizon for t in times):
                raise ScenarioError(f"event {ev} lies outside the horizon")
            idx = ev.bumps if isinstance(ev, AmbiguityWindow) else (ev.bump,)
            if any(i < 0 or i >= len(self.bumps) for i in idx):
                raise ScenarioError(f"event {ev} refers to a missing bump")
        if isinstance(self.events, list):
            object.__setattr__(self, "events", tuple(self.events))
        if not 0 < self.dt_fraction <= 0.1:
            raise ScenarioError("dt_fraction must lie in (0, 0.1]")

    @property
    def K(self) -> int:
        return self.ring.K

    def bump_state(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        centers = np.array([b.center_at(t) for b in self.bumps])
        amps = np.array([b.amplitude_at(t) for b in self.bumps])
        for ev in self.events:
            if isinstance(ev, DirectionalShift) and t >= ev.t:
                centers[ev.bump] = ev.center
        for ev in self.events:
            if isinstance(ev, AmbiguityWindow) and ev.t_start <= t <= ev.t_end:
                idx = list(ev.bumps)
                amps[idx] = amps[idx].mean()
        return centers, amps

    def density(self, t: float) -> np.ndarray:
        """``V(., t)``: non-negative, summing to one."""
        centers, amps = self.bump_state(t)
        th = self.ring.theta
        V = np.zeros(self.K)
        for b, c, a in zip(self.bumps, centers, amps):
            conc = 1.0 / (2 * np.pi * b.width / self.K) ** 2
            V += a * np.exp(conc * (np.cos(th - 2 * np.pi * c / self.K) - 1.0))
        total = V.sum()
        if not total > 0:
            raise ScenarioError(f"density vanishes at t={t}")
        return V / total

    def density_table(self) -> np.ndarray:
        return np.array([self.density(t) for t in range(self.horizon)])

    def to_config(self) -> dict:
        return {
            "K": self.K,
            "horizon": self.horizon,
            "inner_horizon": self.inner_horizon,
            "dt_fraction": self.dt_fraction,
            "bumps": [b.to_config() for b in self.bumps],
            "events": [e.to_config() for e in self.events],
        }

    @classmethod
    def from_config(cls, doc: dict) -> "CoverageScenario":
        bumps = tuple(
            Bump(b["center"], float(b.get("width", 2.0)), b.get("amplitude", 1.0)) for b in doc["bumps"]
        )
        return cls(
            ring=ActionRing(int(doc["K"])),
            horizon=int(doc["horizon"]),
            bumps=bumps,
            events=tuple(_event_from_config(e) for e in doc.get("events", ())),
            inner_horizon=float(doc.get("inner_horizon", 60.0)),
            dt_fraction=float(doc.get("dt_fraction", 0.02)),
        )


def default_scenario(K: int = 18, horizon: int = 700) -> CoverageScenario:
    """Three unequal bumps, an ambiguity window at 270-300 and a shift at 430."""
    return CoverageScenario(
        ring=ActionRing(K),
        horizon=horizon,
        bumps=(Bump(3.0, 2.0, 1.0), Bump(8.0, 2.0, 0.8), Bump(16.0, 2.0, 0.6)),
        events=(AmbiguityWindow(270, 300, (0, 1)), DirectionalShift(430, 0, 5.0)),
    )


DEFAULT_GAME = GameParams(N=10, rho=0.001, logit_beta=20.0)
DEFAULT_NOD = NodParams(tau_z=1.0, d_z=1.0, alpha0=0.96, kappa=0.55)


# ---------------------------------------------------------------- metrics


@dataclass
class MetricsLog:
    """Per-epoch record of one run. ``initial_actions`` is the profile before epoch 0."""

    initial_actions: np.ndarray
    actions: np.ndarray  # (T, N)
    density: np.ndarray  # (T, K)
    br_fraction: np.ndarray
    switches: np.ndarray  # per epoch
    potential: np.ndarray
    r: np.ndarray | None = None  # (T, N)
    theta: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def cum_switches(self) -> np.ndarray:
        return np.cumsum(self.switches)

    @property
    def total_switches(self) -> int:
        return int(self.switches.sum())

    @property
    def modal_action(self) -> np.ndarray:
        K = self.density.shape[1]
        return np.array([np.bincount(a, minlength=K).argmax() for a in self.actions])

    def switches_between(self, t0: int, t1: int) -> int:
        """Switches in epochs ``t0..t1`` inclusive."""
        return int(self.switches[t0 : t1 + 1].sum())

    def to_csv(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        T, N = self.actions.shape
        modal = self.modal_action
        cum = self.cum_switches
        with open(os.path.join(out_dir, "metrics.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "br_fraction", "cum_switches", "potential", "modal_action"])
            for t in range(T):
                w.writerow([t, repr(float(self.br_fraction[t])), int(cum[t]), repr(float(self.potential[t])), int(modal[t])])
        with open(os.path.join(out_dir, "density.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch"] + [f"V_{k}" for k in range(self.density.shape[1])])
            for t in range(T):
                w.writerow([t] + [repr(float(v)) for v in self.density[t]])
        with open(os.path.join(out_dir, "agents.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "agent", "action", "r", "theta"])
            for t in range(T):
                for i in range(N):
                    r = "" if self.r is None else repr(float(self.r[t, i]))
                    th = "" if self.theta is None else repr(float(self.theta[t, i]))
                    w.writerow([t, i, int(self.actions[t, i]), r, th])

    def summary(self) -> dict:
        return {
            "switches": self.total_switches,
            "min_br_fraction": float(self.br_fraction.min()),
            "mean_br_fraction": float(self.br_fraction.mean()),
            "final_modal_action": int(self.modal_action[-1]),
        }


def recompute_br_fraction(log: MetricsLog, game: GameParams, kernel: UtilityKernel) -> np.ndarray:
    """BR fraction rebuilt from logged actions and densities."""
    prev = np.vstack([log.initial_actions[None, :], log.actions[:-1]])
    return np.array(
        [np.mean(responds_to(prev[t], log.actions[t], log.density[t], game, kernel)) for t in range(len(log.actions))]
    )


def reallocation_episodes(log: MetricsLog, start: int = 0, gap: int = 10) -> list[tuple[int, int, int]]:
    """Clusters of switching epochs at or after ``start``; quiet runs of ``gap`` epochs split clusters.

    Returns ``(first_epoch, last_epoch, switches)`` per episode.
    """
    busy = [t for t in range(start, len(log.switches)) if log.switches[t] > 0]
    episodes = []
    for t in busy:
        if episodes and t - episodes[-1][1] <= gap:
            f, _, n = episodes[-1]
            episodes[-1] = (f, t, n + int(log.switches[t]))
        else:
            episodes.append((t, t, int(log.switches[t])))
    return episodes


# ---------------------------------------------------------------- experiments


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for the NOD and logit runs from one master seed."""
    nod_ss, logit_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(nod_ss), np.random.default_rng(logit_ss)


def _relax_agents(Z, params, op, B, dt, n_steps, eq_tol, executor):
    if executor == "vectorized":
        return integrate_batch(Z, params, op, B, dt, n_steps, eq_tol)[0]
    rows = [(Z[i : i + 1], B[i : i + 1]) for i in range(len(Z))]

    def one(row):
        return integrate_batch(row[0], params, op, row[1], dt, n_steps, eq_tol)[0][0]

    if executor == "sequential":
        out = [one(row) for row in rows]
    elif executor == "threads":
        with ThreadPoolExecutor() as pool:
            out = list(pool.map(one, rows))
    else:
        raise ValueError(f"executor must be one of {EXECUTORS}")
    return np.array(out)


def _read_actions(Z, op, readout):
    if readout == "argmax":
        return np.argmax(Z, axis=-1)
    if readout == "phase":
        return phase_sector(Z, op)
    raise ValueError(f"readout must be one of {READOUTS}")


def run_nod_experiment(
    scenario: CoverageScenario,
    params: NodParams,
    game: GameParams,
    op: CirculantOperator,
    seed: int = 0,
    executor: str = "vectorized",
    readout: str = "argmax",
    eq_tol: float = 1e-10,
    keep_states: bool = False,
) -> MetricsLog:
    """NOD agents on the coverage scenario; deterministic given ``seed``."""
    if op.K != scenario.K:
        raise ScenarioError(f"operator has K={op.K} but the scenario has K={scenario.K}")
    if scenario.inner_horizon < MIN_INNER_HORIZON * params.tau_z:
        raise ScenarioError(
            f"inner horizon {scenario.inner_horizon} is below {MIN_INNER_HORIZON} tau_z; timescales not separated"
        )
    kernel = kernel_for(op)
    rng, _ = seed_streams(seed)
    N, K, T = game.N, scenario.K, scenario.horizon
    dt = scenario.dt_fraction * params.tau_z
    n_steps = int(round(scenario.inner_horizon / dt))

    Z = random_initial(K, rng, n=N)
    a = _read_actions(Z, op, readout)
    log = _empty_log(a, T, N, K)
    states = [] if keep_states else None
    for t in range(T):
        V = scenario.density(t)
        B = evidence_all(a, V, game)
        Z = _relax_agents(Z, params, op, B, dt, n_steps, eq_tol, executor)
        new = _read_actions(Z, op, readout)
        r, th = phase_readout(Z, op)
        _record(log, t, a, new, V, game, kernel)
        log.r[t], log.theta[t] = r, th
        if keep_states:
            states.append(Z.copy())
        a = new
    log.meta = {"variant": "nod", "seed": seed, "readout": readout, "executor": executor}
    if keep_states:
        log.meta["states"] = np.array(states)
    return log


def run_logit_experiment(
    scenario: CoverageScenario, game: GameParams, kernel: UtilityKernel, seed: int = 0
) -> MetricsLog:
    """Simultaneous logit revision on the same scenario, from the logit seed stream."""
    _, rng = seed_streams(seed)
    N, K, T = game.N, scenario.K, scenario.horizon
    a = rng.integers(0, K, size=N)
    log = _empty_log(a, T, N, K)
    log.r = log.theta = None
    for t in range(T):
        V = scenario.density(t)
        new = logit_step(a, V, game, kernel, rng)
        _record(log, t, a, new, V, game, kernel)
        a = new
    log.meta = {"variant": "logit", "seed": seed, "beta": game.logit_beta}
    return log


def _empty_log(a0, T, N, K) -> MetricsLog:
    return MetricsLog(
        initial_actions=np.array(a0, dtype=int),
        actions=np.zeros((T, N), dtype=int),
        density=np.zeros((T, K)),
        br_fraction=np.zeros(T),
        switches=np.zeros(T, dtype=int),
        potential=np.zeros(T),
        r=np.zeros((T, N)),
        theta=np.zeros((T, N)),
    )


def _record(log, t, a_prev, a_new, V, game, kernel):
    log.actions[t] = a_new
    log.density[t] = V
    log.br_fraction[t] = np.mean(responds_to(a_prev, a_new, V, game, kernel))
    # the profile before epoch 0 is a readout of noise, not a decision
    log.switches[t] = 0 if t == 0 else int(np.sum(a_new != a_prev))
    log.potential[t] = potential(a_new, V, game, kernel)


# ---------------------------------------------------------------- hysteresis


@dataclass(frozen=True)
class ForcingRamp:
    """Radial forcing ``q`` (positive = against the committed phase) ramped
    from ``-q_aligned`` up to ``q_against`` and back in ``n_steps`` per leg."""

    q_aligned: float
    q_against: float
    n_steps: int = 200

    def legs(self) -> tuple[np.ndarray, np.ndarray]:
        up = np.linspace(-self.q_aligned, self.q_against, self.n_steps + 1)
        return up, up[::-1].copy()


def default_ramp(model: ReducedModel, n_steps: int = 200) -> ForcingRamp:
    """Ramp that crosses the release threshold on the way up and the recommit
    threshold on the way down.

    When release happens before the uncommitted root reappears (``d < h``) the
    top stays below ``h`` so the state lands on the uncommitted branch. Otherwise
    release flips the state to the opposite committed branch and the ramp is
    symmetric.
    """
    d = evidence_threshold(model)
    h = recommit_threshold(model)
    if d < h:
        return ForcingRamp(q_aligned=1.5 * h, q_against=0.5 * (d + h), n_steps=n_steps)
    return ForcingRamp(q_aligned=1.5 * d, q_against=1.5 * d, n_steps=n_steps)


@dataclass
class HysteresisResult:
    records: list[dict]
    up_jump: float | None
    down_jump: float | None
    loop_area: float
    ramp: ForcingRamp


class _SymmetricSolver:
    """Equilibria restricted to states even about ``theta = 0``.

    The forcing is even, so the even subspace is invariant; restricting to it
    removes the neutral phase direction of the ring.
    """

    def __init__(self, params: NodParams, op: CirculantOperator):
        self.params, self.op = params, op
        P = np.array([op.modes[k].cosine_vec for k in range(op.K // 2 + 1)]).T
        self.P = P / np.linalg.norm(P, axis=0)
        self.e0 = unit_direction(0.0, op)

    def newton(self, z, b, tol=1e-13, max_iter=40):
        P = self.P
        c = P.T @ z
        for _ in range(max_iter):
            zz = P @ c
            F = equilibrium_map(zz, self.params, self.op, b)
            if np.max(np.abs(F)) < tol:
                return zz, True
            J = P.T @ jacobian(zz, self.params, self.op, b) @ P
            try:
                c = c - np.linalg.solve(J, P.T @ F)
            except np.linalg.LinAlgError:
                return zz, False
            if not np.all(np.isfinite(c)):
                return zz, False
        zz = P @ c
        return zz, bool(np.max(np.abs(equilibrium_map(zz, self.params, self.op, b))) < 10 * tol)

    def stable(self, z, b) -> bool:
        J = self.P.T @ jacobian(z, self.params, self.op, b) @ self.P
        return bool(np.max(np.linalg.eigvals(J).real) < 0)

    def relax(self, z, b, t_end=1e10):
        """Follow the flow (stiff, slow near the fold) to the attracting equilibrium."""
        P, tau = self.P, self.params.tau_z

        def f(_t, c):
            return P.T @ equilibrium_map(P @ c, self.params, self.op, b) / tau

        def jac(_t, c):
            return P.T @ jacobian(P @ c, self.params, self.op, b) @ P / tau

        def settled(_t, c):
            return np.max(np.abs(f(_t, c))) - 1e-12

        settled.terminal = True
        # loose tolerances are enough: Newton polishes the end point
        sol = solve_ivp(f, (0.0, t_end), P.T @ z, method="BDF", jac=jac, rtol=1e-6, atol=1e-10, events=settled)
        z_end = P @ sol.y[:, -1]
        z_pol, ok = self.newton(z_end, b)
        return z_pol if ok else z_end

    def aligned(self, z) -> float:
        return float(self.op.ring.inner(z, self.e0))


def _lost(solver, z_prev, z_new, ok, b, jump) -> bool:
    """Continuation failed, landed on an unstable point, or hopped to another branch."""
    s0, s1 = solver.aligned(z_prev), solver.aligned(z_new)
    return not ok or not solver.stable(z_new, b) or abs(s1 - s0) > jump


def _locate_fold(solver, z, q0, q1, jump, rtol=1e-4):
    """Bisect between the last tracked forcing ``q0`` and the failing ``q1``."""
    e0 = solver.e0
    while abs(q1 - q0) > rtol * max(abs(q0), abs(q1)):
        qm = 0.5 * (q0 + q1)
        zm, ok = solver.newton(z, -qm * e0)
        if _lost(solver, z, zm, ok, -qm * e0, jump):
            q1 = qm
        else:
            z, q0 = zm, qm
    return 0.5 * (q0 + q1)


def hysteresis_sweep(
    model: ReducedModel, params: NodParams, op: CirculantOperator, ramp: ForcingRamp | None = None
) -> HysteresisResult:
    """Quasi-static up/down sweep of radial forcing against the committed phase (``theta = 0``).

    Each point is the equilibrium reached by continuation from the previous
    one; when the tracked branch disappears the state relaxes along the flow
    and the fold location is refined by bisection.
    """
    if ramp is None:
        if not model.subcritical:
            raise NotSubcritical("hysteresis sweep needs a subcritical model or an explicit ramp")
        ramp = default_ramp(model)
    solver = _SymmetricSolver(params, op)
    e0 = solver.e0
    up, down = ramp.legs()

    q = up[0]
    if model.subcritical:
        r0 = max(r for r, _ in subcritical_branches(model, -q))
    else:
        r0 = 0.5
    z = solver.relax(r0 * e0, -q * e0)

    records, jumps = [], {}
    scale = abs(solver.aligned(z))
    for leg, qs in (("up", up), ("down", down)):
        for j, q in enumerate(qs):
            b = -q * e0
            if j == 0 and leg == "up":
                z_new = z
            else:
                # a hop larger than a quarter of the largest amplitude seen is a jump
                jump = 0.25 * max(scale, 1e-6)
                z_new, ok = solver.newton(z, b)
                if _lost(solver, z, z_new, ok, b, jump):
                    if leg not in jumps:
                        jumps[leg] = _locate_fold(solver, z, qs[j - 1], q, jump)
                    z_new = solver.relax(z, b)
            z = z_new
            scale = max(scale, abs(solver.aligned(z)))
            r, th = phase_readout(z, op)
            records.append(
                {
                    "leg": leg,
                    "forcing": float(q),
                    "r": float(r),
                    "theta": float(th),
                    "r_aligned": solver.aligned(z),
                    "stable": solver.stable(z, b),
                }
            )
    r_up = np.array([rec["r_aligned"] for rec in records if rec["leg"] == "up"])
    r_down = np.array([rec["r_aligned"] for rec in records if rec["leg"] == "down"])[::-1]
    area = float(np.trapezoid(r_up - r_down, up)) if hasattr(np, "trapezoid") else float(np.trapz(r_up - r_down, up))
    return HysteresisResult(records, jumps.get("up"), jumps.get("down"), area, ramp)


# ---------------------------------------------------------------- bifurcation


def _reduced_amplitude(params: NodParams, op: CirculantOperator) -> float:
    m = reduced_coefficients(params, op)
    if m.subcritical:
        br = [r for r, st in subcritical_branches(m) if st]
        return float(max(br))
    gt = m.Gamma_tilde
    if m.mu0 > 0 and gt < 0:
        return float(np.sqrt(-m.mu0 / gt))
    return 0.0


def bifurcation_sweep(
    params: NodParams,
    op: CirculantOperator,
    alphas,
    b=None,
    seed: int = 0,
    t_end: float = 4000.0,
) -> list[dict]:
    """Equilibria versus base gain, from a seeded small state and by continuation.

    Records ``(alpha, source, r, theta, max_re_eig, stable, r_reduced)``.
    With zero evidence the ring's neutral phase direction is excluded from
    the stability verdict.
    """
    b = np.zeros(op.K) if b is None else np.asarray(b, dtype=float)
    rng = np.random.default_rng(seed)
    records = []
    z_prev = None
    for alpha in np.asarray(alphas, dtype=float):
        p = NodParams(params.tau_z, params.d_z, float(alpha), params.kappa, params.sigmoid)
        starts = [("seeded", random_initial(op.K, rng))]
        if z_prev is not None:
            starts.append(("continuation", z_prev))
        for source, z0 in starts:
            traj = integrate(DecisionState(z0), p, op, b, t_end=t_end, eq_tol=1e-12, stride=10**9)
            z, ok = polish_equilibrium(traj.final.z, p, op, b)
            if not ok:
                z = traj.final.z
            eig = np.linalg.eigvals(jacobian(z, p, op, b))
            r, th = phase_readout(z, op)
            if not np.any(b) and r > 1e-8:
                eig = np.delete(eig, np.argmin(np.abs(eig)))
            max_re = float(np.max(eig.real))
            records.append(
                {
                    "alpha": float(alpha),
                    "source": source,
                    "r": float(r),
                    "theta": float(th),
                    "max_re_eig": max_re,
                    "stable": max_re < 0,
                    "r_reduced": _reduced_amplitude(p, op),
                }
            )
        z_prev = z
    return records


def write_records(path, records: list[dict]) -> None:
    if not records:
        raise ValueError("no records to write")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(records[0].keys()))
        w.writeheader()
        for rec in records:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in rec.items()})
