"""Repeated coverage game on the action ring.

Agent ``i`` sees evidence ``b_i = V - rho * (occupancy by the other agents)``
and values action ``k`` by the projected utility ``U_ik = sum_s C_ks b_is``
with ``C_ks = cos(k_star (theta_s - theta_k))``. The game is an exact
potential game with

    W(a) = sum_i Vbar[a_i] - (rho / 2) sum_{i != j} C[a_i, a_j],   Vbar = C V.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .spectral import ActionRing, CirculantOperator, dominant_mode

BR_RTOL = 1e-12


@dataclass(frozen=True)
class GameParams:
    N: int
    rho: float = 0.05
    logit_beta: float = 20.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.logit_beta < 0:
            raise ValueError("logit_beta must be non-negative")

    def to_config(self) -> dict:
        return {"rho": self.rho, "logit_beta": self.logit_beta}


@dataclass(frozen=True)
class UtilityKernel:
    C: np.ndarray
    k_star: int

    @property
    def K(self) -> int:
        return self.C.shape[0]


def utility_kernel(ring: ActionRing, k_star: int) -> UtilityKernel:
    C = np.cos(k_star * (ring.theta[None, :] - ring.theta[:, None]))
    C.setflags(write=False)
    return UtilityKernel(C, int(k_star))


def kernel_for(op: CirculantOperator) -> UtilityKernel:
    return utility_kernel(op.ring, dominant_mode(op)[0])


def _check_actions(a, K: int) -> np.ndarray:
    a = np.asarray(a, dtype=int)
    if a.ndim != 1 or np.any(a < 0) or np.any(a >= K):
        raise ValueError(f"joint action must be a vector of indices in 0..{K - 1}")
    return a


def occupancy(a, K: int) -> np.ndarray:
    return np.bincount(a, minlength=K).astype(float)


def evidence(i: int, a, V, params: GameParams) -> np.ndarray:
    """Evidence seen by agent ``i`` given the others' actions."""
    V = np.asarray(V, dtype=float)
    a = _check_actions(a, len(V))
    counts = occupancy(a, len(V))
    counts[a[i]] -= 1.0
    return V - params.rho * counts


def evidence_all(a, V, params: GameParams) -> np.ndarray:
    """Evidence for every agent, shape ``(N, K)``."""
    V = np.asarray(V, dtype=float)
    a = _check_actions(a, len(V))
    counts = occupancy(a, len(V))
    own = np.zeros((len(a), len(V)))
    own[np.arange(len(a)), a] = 1.0
    return V[None, :] - params.rho * (counts[None, :] - own)


def projected_utility(i: int, a, V, params: GameParams, kernel: UtilityKernel) -> np.ndarray:
    return kernel.C @ evidence(i, a, V, params)


def utilities_all(a, V, params: GameParams, kernel: UtilityKernel) -> np.ndarray:
    return evidence_all(a, V, params) @ kernel.C.T


def argmax_set(u) -> np.ndarray:
    u = np.asarray(u)
    top = np.max(u)
    return np.flatnonzero(u >= top - BR_RTOL * (1.0 + abs(top)))


def best_response(i: int, a, V, params: GameParams, kernel: UtilityKernel) -> np.ndarray:
    """Full argmax set of agent ``i``'s projected utility (own action does not enter)."""
    return argmax_set(projected_utility(i, a, V, params, kernel))


def in_best_response(a, V, params: GameParams, kernel: UtilityKernel) -> np.ndarray:
    """Boolean per agent: is its current action in its best-response set."""
    U = utilities_all(a, V, params, kernel)
    top = U.max(axis=1)
    own = U[np.arange(len(a)), a]
    return own >= top - BR_RTOL * (1.0 + np.abs(top))


def br_fraction(a, V, params: GameParams, kernel: UtilityKernel) -> float:
    return float(np.mean(in_best_response(a, V, params, kernel)))


def responds_to(a_prev, a_new, V, params: GameParams, kernel: UtilityKernel) -> np.ndarray:
    """Boolean per agent: is ``a_new[i]`` a best response to the others' ``a_prev``."""
    a_prev = _check_actions(a_prev, kernel.K)
    a_new = _check_actions(a_new, kernel.K)
    U = utilities_all(a_prev, V, params, kernel)
    top = U.max(axis=1)
    own = U[np.arange(len(a_new)), a_new]
    return own >= top - BR_RTOL * (1.0 + np.abs(top))


def potential(a, V, params: GameParams, kernel: UtilityKernel) -> float:
    V = np.asarray(V, dtype=float)
    a = _check_actions(a, len(V))
    Vbar = kernel.C @ V
    Caa = kernel.C[np.ix_(a, a)]
    pair = Caa.sum() - np.trace(Caa)
    return float(Vbar[a].sum() - 0.5 * params.rho * pair)


def is_projected_nash(a, V, params: GameParams, kernel: UtilityKernel):
    """Return ``(is_nash, deviations)`` with deviations as ``(agent, action, gain)``."""
    a = _check_actions(a, kernel.K)
    U = utilities_all(a, V, params, kernel)
    deviations = []
    for i in range(len(a)):
        best = argmax_set(U[i])
        if a[i] not in best:
            k = int(best[0])
            deviations.append((i, k, float(U[i, k] - U[i, a[i]])))
    return not deviations, deviations


def all_profiles(N: int, K: int):
    return itertools.product(range(K), repeat=N)


def potential_identity_gap(V, params: GameParams, kernel: UtilityKernel) -> float:
    """Largest ``|dW - dU_i|`` over all profiles and unilateral deviations."""
    K, N = kernel.K, params.N
    worst = 0.0
    for prof in all_profiles(N, K):
        a = np.array(prof)
        W0 = potential(a, V, params, kernel)
        U = utilities_all(a, V, params, kernel)
        for i in range(N):
            for k in range(K):
                if k == a[i]:
                    continue
                b = a.copy()
                b[i] = k
                dW = potential(b, V, params, kernel) - W0
                dU = U[i, k] - U[i, a[i]]
                worst = max(worst, abs(dW - dU))
    return worst


def local_maximizers(V, params: GameParams, kernel: UtilityKernel) -> list[tuple[int, ...]]:
    """Profiles no unilateral deviation improves W on (ties count as maximal)."""
    K, N = kernel.K, params.N
    W = {p: potential(np.array(p), V, params, kernel) for p in all_profiles(N, K)}
    out = []
    for p, w in W.items():
        tol = BR_RTOL * (1.0 + abs(w)) * 10
        ok = True
        for i in range(N):
            for k in range(K):
                if k != p[i] and W[p[:i] + (k,) + p[i + 1:]] > w + tol:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out.append(p)
    return out


def nash_profiles(V, params: GameParams, kernel: UtilityKernel) -> list[tuple[int, ...]]:
    return [p for p in all_profiles(params.N, kernel.K) if is_projected_nash(np.array(p), V, params, kernel)[0]]


def softmax_probs(U, beta: float) -> np.ndarray:
    x = beta * np.asarray(U, dtype=float)
    x = x - x.max(axis=-1, keepdims=True)
    p = np.exp(x)
    return p / p.sum(axis=-1, keepdims=True)


def logit_step(a, V, params: GameParams, kernel: UtilityKernel, rng: np.random.Generator) -> np.ndarray:
    """Simultaneous logit revision: every agent samples from its softmax over ``U_i``."""
    a = _check_actions(a, kernel.K)
    P = softmax_probs(utilities_all(a, V, params, kernel), params.logit_beta)
    u = rng.random(len(a))
    cdf = np.cumsum(P, axis=1)
    choice = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(choice, kernel.K - 1)
