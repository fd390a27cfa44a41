"""End-to-end distributed execution: act, step, gossip, and multiplier updates.

One tick ``t`` runs, in order: every agent opens its estimate slot for
``tau = t`` from its position, one gossip round over the sampled links, and,
when ``t`` closes a rollout, the per-agent gradient and multiplier updates.
Agents then act on their fresh multiplier copy and the world steps. The run
ends after the update at ``t = K * T0``; rewards are logged for
``t = 0 .. K*T0 - 1``.

A centralized multiplier sequence driven by the true rewards runs alongside
for diagnostics (consensus, mismatch, drift).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gossipdual import dual, gossip
from gossipdual.env import (Cell, GridSpec, OccupancyTable, WorldState, ZoneSpec,
                            step, validate_state, validate_zones)
from gossipdual.errors import ConfigError
from gossipdual.graph import LinkModel, Topology, sample_links
from gossipdual.messages import GossipMessage, encode_message
from gossipdual.policy import PolicyParams, act, feasibility_margin

log = logging.getLogger(__name__)

MODES = ("distributed", "centralized")


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    zones: tuple[ZoneSpec, ...]
    topology: Topology
    starts: tuple[Cell, ...]
    links: LinkModel = LinkModel()
    policy: PolicyParams = PolicyParams()
    eta: float = 0.05
    t_zero: int = 100
    d: int | None = None
    rollouts: int = 1
    seed: int = 0
    beta: float = 0.0
    epsilon: float = 0.0
    mode: str = "distributed"

    def __post_init__(self):
        object.__setattr__(self, "zones", tuple(self.zones))
        object.__setattr__(self, "starts", tuple(tuple(s) for s in self.starts))
        if self.d is None:
            object.__setattr__(self, "d", self.topology.diameter())

    @property
    def n_agents(self) -> int:
        return self.topology.n_agents

    @property
    def n_zones(self) -> int:
        return len(self.zones)

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([z.threshold for z in self.zones], dtype=np.float64)

    def validate(self) -> None:
        if not self.zones:
            raise ConfigError("at least one zone is required")
        ids = [z.zone_id for z in self.zones]
        if ids != list(range(1, len(ids) + 1)):
            raise ConfigError(f"zone ids must be 1..M in order, got {ids}")
        validate_zones(self.grid, self.zones)
        if len(self.starts) != self.n_agents:
            raise ConfigError(f"{len(self.starts)} start cells for {self.n_agents} agents")
        for n, s in enumerate(self.starts):
            if not self.grid.contains(s):
                raise ConfigError(f"agent {n} starts at {s}, outside the grid")
        if not self.eta > 0:
            raise ConfigError(f"eta must be > 0, got {self.eta}")
        if self.rollouts < 1:
            raise ConfigError(f"rollouts must be >= 1, got {self.rollouts}")
        if self.t_zero < 1:
            raise ConfigError(f"t_zero must be >= 1, got {self.t_zero}")
        if self.d < 0 or self.t_zero < self.d:
            raise ConfigError(f"need t_zero >= d >= 0, got t_zero={self.t_zero}, d={self.d}")
        diam = self.topology.diameter()
        if self.links.is_static and self.d < diam:
            raise ConfigError(f"d={self.d} underestimates the graph diameter {diam}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.beta < 0 or self.epsilon < 0:
            raise ConfigError("beta and epsilon estimates must be >= 0")


@dataclass(frozen=True)
class TheoremConditions:
    delta_c: float
    lhs: float
    satisfied: bool
    spec_ok: bool
    c_max: float
    c_sum: float
    diameter: int

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def check_conditions(config: RunConfig) -> TheoremConditions:
    """Sufficient conditions for almost-sure feasibility of the run."""
    c = config.thresholds
    c_max = float(c.max())
    if c_max >= 1.0:
        raise ConfigError(f"c_max={c_max} must be < 1")
    m = config.n_zones
    diam = config.topology.diameter()
    delta_c = float(feasibility_margin(c))
    lhs = config.beta + (m / config.t_zero) * diam * config.eta + config.epsilon + config.eta / 2
    c_sum = float(c.sum())
    return TheoremConditions(
        delta_c=delta_c, lhs=float(lhs), satisfied=bool(lhs < delta_c),
        spec_ok=bool(c_max < 1.0 and c_sum <= config.n_agents - 1),
        c_max=c_max, c_sum=c_sum, diameter=diam,
    )


@dataclass
class Diagnostics:
    thresholds: np.ndarray
    t_zero: int
    reward_counts: np.ndarray
    steps: int
    running_averages: np.ndarray
    trailing_window: int
    trailing_min: np.ndarray
    lambda_sq: np.ndarray
    mismatch: np.ndarray
    abs_mismatch: np.ndarray
    mismatch_bound: float
    drift_samples: np.ndarray
    deadline_violations: int
    consensus_failures: int
    grad_norm_sq_max: float
    conditions: TheoremConditions

    @property
    def terminal_averages(self) -> np.ndarray:
        return self.reward_counts / self.steps


@dataclass
class RunResult:
    config: RunConfig
    positions: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    central_lambda: np.ndarray
    lambda_prev: np.ndarray
    lambda_curr: np.ndarray
    g_prev: np.ndarray
    g_curr: np.ndarray
    diagnostics: Diagnostics
    messages: list[GossipMessage] = field(default_factory=list)


def trailing_window_min(rewards: np.ndarray, window: int) -> np.ndarray:
    """Smallest average of ``rewards`` over any ``window`` consecutive steps, per zone."""
    cs = np.concatenate([np.zeros((1, rewards.shape[1]), dtype=np.int64),
                         np.cumsum(rewards, axis=0, dtype=np.int64)])
    sums = cs[window:] - cs[:-window]
    return sums.min(axis=0) / window


def run(config: RunConfig, trace_messages: bool = False) -> RunResult:
    config.validate()
    conditions = check_conditions(config)
    if not conditions.satisfied:
        log.warning("feasibility condition not met: lhs=%.4g >= delta_c=%.4g", conditions.lhs, conditions.delta_c)
    if not conditions.spec_ok:
        log.warning("thresholds violate c_max < 1 and sum(c) <= N-1 (sum=%.4g)", conditions.c_sum)
    if not config.links.is_static:
        log.warning("intermittent links: gossip deadline and multiplier consensus are not guaranteed")

    n, m, t0, k_total = config.n_agents, config.n_zones, config.t_zero, config.rollouts
    horizon = k_total * t0
    thresholds = config.thresholds
    lookup = OccupancyTable(config.grid, config.zones)
    zones = config.zones
    state = WorldState(config.starts, 0)
    validate_state(config.grid, state)

    env_seed, link_seed, policy_seed = np.random.SeedSequence(config.seed).spawn(3)
    rng_env = np.random.default_rng(env_seed)
    rng_links = np.random.default_rng(link_seed)
    rng_policy = np.random.default_rng(policy_seed)

    tables = gossip.new_tables(n, m, config.d, t0)
    mult = [dual.MultiplierState.zeros(i, m, config.eta, t0) for i in range(n)]

    positions = np.zeros((horizon, n, 2), dtype=np.int16)
    actions = np.zeros((horizon, n), dtype=np.int8)
    rewards = np.zeros((horizon, m), dtype=np.uint8)
    central = np.zeros((k_total + 1, m))
    lam_prev = np.zeros((k_total, n, m))
    lam_curr = np.zeros((k_total, n, m))
    g_prev = np.full((k_total, n, m), np.nan)
    g_curr = np.zeros((k_total, n, m))
    mism = np.zeros((k_total, m))
    abs_mism = np.zeros((k_total, m))
    messages: list[GossipMessage] = []
    deadline_violations = 0
    consensus_failures = 0
    grad_norm_sq_max = 0.0

    t = 0
    while True:
        local = [lookup.local(p) for p in state.positions]
        if t < horizon:
            rewards[t] = np.max(local, axis=0)
            positions[t] = state.positions
        for i in range(n):
            evicted = tables[i].push(t, local[i])
            if evicted is not None:
                tau, vals = evicted
                deadline_violations += int(np.count_nonzero(vals != rewards[tau]))
        gossip.gossip_round(tables, sample_links(config.topology, config.links, rng_links))
        if trace_messages:
            messages.extend(encode_message(tb) for tb in tables)

        if t > 0 and t % t0 == 0:
            k = t // t0 - 1
            true_grad = dual.rollout_gradient(rewards[k * t0:t].sum(axis=0, dtype=np.int64), thresholds, t0)
            grad_norm_sq_max = max(grad_norm_sq_max, float(true_grad @ true_grad))
            central[k + 1] = dual.centralized_update(central[k], rewards[k * t0:t], thresholds, config.eta, t0)
            for i in range(n):
                grads = dual.compute_gradients(tables[i], thresholds, k, t0)
                mult[i] = dual.apply_update(mult[i], grads)
                lam_prev[k, i] = mult[i].lambda_prev
                lam_curr[k, i] = mult[i].lambda_curr
                if grads.g_prev is not None:
                    g_prev[k, i] = grads.g_prev
                g_curr[k, i] = grads.g_curr
                if not np.array_equal(mult[i].lambda_prev, central[k]):
                    consensus_failures += 1
            mism[k] = dual.mismatch(central[k + 1], lam_curr[k])
            abs_mism[k] = dual.abs_mismatch(central[k + 1], lam_curr[k])

        if t == horizon:
            break

        rollout = t // t0
        joint = []
        for i in range(n):
            lam = central[rollout] if config.mode == "centralized" else mult[i].lambda_curr
            joint.append(act(state.positions[i], lam, i, config.policy, zones, n, rng_policy))
        actions[t] = joint
        state = step(config.grid, state, joint, rng_env)
        t += 1

    if deadline_violations:
        log.warning("%d finalized estimates missed the gossip deadline", deadline_violations)
    if grad_norm_sq_max > 1.0:
        log.info("max squared rollout-gradient norm %.4g exceeds 1", grad_norm_sq_max)

    counts = rewards.sum(axis=0, dtype=np.int64)
    cs = np.cumsum(rewards, axis=0, dtype=np.int64)
    boundaries = np.arange(1, k_total + 1) * t0
    window = max(1, horizon // 10)
    diag = Diagnostics(
        thresholds=thresholds,
        t_zero=t0,
        reward_counts=counts,
        steps=horizon,
        running_averages=cs[boundaries - 1] / boundaries[:, None],
        trailing_window=window,
        trailing_min=trailing_window_min(rewards, window),
        lambda_sq=np.einsum("km,km->k", central, central),
        mismatch=mism,
        abs_mismatch=abs_mism,
        mismatch_bound=config.eta * conditions.diameter / t0,
        drift_samples=_drift_samples(central),
        deadline_violations=deadline_violations,
        consensus_failures=consensus_failures,
        grad_norm_sq_max=grad_norm_sq_max,
        conditions=conditions,
    )
    return RunResult(config, positions, actions, rewards, central, lam_prev, lam_curr,
                     g_prev, g_curr, diag, messages)


def _drift_samples(central: np.ndarray) -> np.ndarray:
    sq = np.einsum("km,km->k", central, central)
    keep = np.sqrt(sq[:-1]) >= 1.0
    return (sq[1:] - sq[:-1])[keep]


@dataclass(frozen=True)
class DriftReport:
    status: str
    n_samples: int
    mean: float = math.nan
    ci_low: float = math.nan
    ci_high: float = math.nan
    premise_satisfied: bool = True

    @property
    def supermartingale_consistent(self) -> bool:
        return self.status == "insufficient" or self.ci_high <= 0.0

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


MIN_DRIFT_SAMPLES = 30
Z_95 = 1.959963984540054


def drift_report(diagnostics: Diagnostics) -> DriftReport:
    """Mean increment of the squared multiplier norm while the norm is at least 1."""
    samples = diagnostics.drift_samples
    premise = diagnostics.conditions.satisfied
    if len(samples) < MIN_DRIFT_SAMPLES:
        return DriftReport("insufficient", len(samples), premise_satisfied=premise)
    mean = float(samples.mean())
    half = Z_95 * float(samples.std(ddof=1)) / math.sqrt(len(samples))
    return DriftReport("ok", len(samples), mean, mean - half, mean + half, premise)


@dataclass(frozen=True)
class ZoneFeasibility:
    zone_id: int
    threshold: float
    average: float
    trailing_min: float
    gap: float
    passed: bool


def feasibility_report(diagnostics: Diagnostics, zones: Sequence[ZoneSpec],
                       tolerance: float = 0.02) -> list[ZoneFeasibility]:
    out = []
    for m, z in enumerate(zones):
        avg = float(diagnostics.terminal_averages[m])
        gap = z.threshold - avg
        out.append(ZoneFeasibility(z.zone_id, z.threshold, avg, float(diagnostics.trailing_min[m]),
                                   gap, avg >= z.threshold - tolerance))
    return out
