"""Projected stochastic dual descent on the zone-occupancy multipliers.

Every agent keeps two multiplier copies. ``lambda_prev`` is rebuilt from the
previous rollout, whose gossip estimates have all reached consensus, so it is
the same on every agent and equals the centralized iterate. ``lambda_curr``
adds the rollout that just ended using whatever estimates have arrived; it
drives the policy during the next rollout.

Gradients carry the ``1/T0`` scaling only and the step size is applied once
in :func:`apply_update`. Both the distributed and the centralized paths build
the gradient from an integer reward count through :func:`rollout_gradient`,
so they agree to the bit when the counts agree.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from gossipdual.errors import ConfigError, ContractViolation
from gossipdual.gossip import EstimateTable


def rollout_gradient(reward_count: np.ndarray, thresholds: np.ndarray, t_zero: int) -> np.ndarray:
    """``(1/T0) * sum_tau (r[tau] - c)`` computed as ``(count - T0*c) / T0``."""
    counts = np.asarray(reward_count, dtype=np.int64).astype(np.float64)
    return (counts - t_zero * np.asarray(thresholds, dtype=np.float64)) / t_zero


def project_step(lam: np.ndarray, grad: np.ndarray, eta: float) -> np.ndarray:
    return np.maximum(lam - eta * grad, 0.0)


@dataclass(frozen=True)
class DualGradient:
    g_prev: np.ndarray | None
    g_curr: np.ndarray


@dataclass(frozen=True)
class MultiplierState:
    agent_id: int
    lambda_prev: np.ndarray
    lambda_curr: np.ndarray
    eta: float
    t_zero: int
    rollout_index: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigError(f"step size eta must be > 0, got {self.eta}")
        if self.t_zero < 1:
            raise ConfigError(f"t_zero must be >= 1, got {self.t_zero}")

    @classmethod
    def zeros(cls, agent_id: int, n_zones: int, eta: float, t_zero: int,
              diameter: int | None = None) -> "MultiplierState":
        if diameter is not None and t_zero < diameter:
            raise ConfigError(f"t_zero={t_zero} is below the graph diameter {diameter}")
        z = np.zeros(n_zones)
        return cls(agent_id, z, z.copy(), eta, t_zero)


def compute_gradients(table: EstimateTable, thresholds: np.ndarray, k: int, t_zero: int) -> DualGradient:
    """Gradients for the two multiplier copies at the end of rollout ``k``.

    Must be called when the table's clock reads ``(k + 1) * t_zero``, after
    that tick's gossip round. Consumes (discards) the finalized sums of
    rollout ``k - 1``.
    """
    boundary = (k + 1) * t_zero
    if table.t != boundary:
        raise ContractViolation(f"agent {table.agent_id}: gradients requested at t={table.t}, "
                                f"rollout {k} ends at t={boundary}")
    thresholds = np.asarray(thresholds, dtype=np.float64)

    g_prev = None
    if k >= 1:
        if table.finalized_counts.get(k - 1, 0) != t_zero:
            raise ContractViolation(f"agent {table.agent_id}: rollout {k - 1} not fully finalized "
                                    f"(is t_zero >= d?)")
        g_prev = rollout_gradient(table.finalized_sums[k - 1], thresholds, t_zero)
        table.discard_rollout(k - 1)

    start = k * t_zero
    count = table.finalized_sums.get(k, np.zeros(table.n_zones, dtype=np.int64)).copy()
    n_seen = table.finalized_counts.get(k, 0)
    lo = max(start, table.window_start) - table.window_start
    hi = boundary - table.window_start
    if hi > lo:
        count += table.values[lo:hi].sum(axis=0, dtype=np.int64)
        n_seen += hi - lo
    if n_seen != t_zero:
        raise ContractViolation(f"agent {table.agent_id}: rollout {k} covers {n_seen} of {t_zero} steps")
    return DualGradient(g_prev, rollout_gradient(count, thresholds, t_zero))


def apply_update(state: MultiplierState, grads: DualGradient) -> MultiplierState:
    lam_prev = state.lambda_prev
    if grads.g_prev is not None:
        lam_prev = project_step(lam_prev, grads.g_prev, state.eta)
    lam_curr = project_step(lam_prev, grads.g_curr, state.eta)
    return replace(state, lambda_prev=lam_prev, lambda_curr=lam_curr,
                   rollout_index=state.rollout_index + 1)


def centralized_update(lam: np.ndarray, rewards: np.ndarray, thresholds: np.ndarray,
                       eta: float, t_zero: int) -> np.ndarray:
    """One exact stochastic dual step from the true rewards of a rollout.

    ``rewards`` has shape ``(T0, M)``.
    """
    rewards = np.asarray(rewards)
    if rewards.shape[0] != t_zero:
        raise ContractViolation(f"rollout has {rewards.shape[0]} steps, expected {t_zero}")
    grad = rollout_gradient(rewards.sum(axis=0, dtype=np.int64), thresholds, t_zero)
    return project_step(np.asarray(lam, dtype=np.float64), grad, eta)


def mismatch(lambda_central: np.ndarray, lambda_currs) -> np.ndarray:
    """Per zone, ``max_n (lambda_central[m] - lambda_curr[n][m])``."""
    stacked = np.atleast_2d(np.asarray(lambda_currs, dtype=np.float64))
    return np.max(np.asarray(lambda_central)[None, :] - stacked, axis=0)


def abs_mismatch(lambda_central: np.ndarray, lambda_currs) -> np.ndarray:
    """Per zone, ``max_n |lambda_central[m] - lambda_curr[n][m]|``."""
    stacked = np.atleast_2d(np.asarray(lambda_currs, dtype=np.float64))
    return np.max(np.abs(np.asarray(lambda_central)[None, :] - stacked), axis=0)
