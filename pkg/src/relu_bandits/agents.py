"""Bandit policies behind a common step-wise protocol.

Every agent exposes ``select_arm(arms, rng) -> index`` and ``observe(y)``,
and the two must strictly alternate (ProtocolError otherwise).  One agent
instance serves one trial; distinct trials never share state.

Policies:

* ``OfuReluAgent``: explore uniformly for t0 rounds, fit the ReLU model by
  ERM on the exploration samples, then run the linear UCB engine on the
  sign-robust lifted features of the margin-restricted arm set.
* ``OfuReluPlusAgent``: the batched variant that needs no gap knowledge: a
  geometric batch grid shrinks the assumed gap batch by batch, exploration
  samples accumulate across batches, and at each refit the ridge state is
  rebuilt by re-featurizing the entire observation history under the fresh
  estimate (features of past actions change with the estimate, so the state
  cannot be patched incrementally across a refit).
* ``OfulAgent``: plain linear UCB on the raw d-dimensional arms, the
  deliberately misspecified baseline.
* ``RandomAgent``: uniform choice, the sanity floor.

Agents never see the true parameters: the sign-corrected parameter vector is
a test-side oracle only.  What the UCB phase learns is its feature-space
surrogate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ProtocolError
from .estimation import BoundParams, FitConfig, Sample, fit_erm, t0_schedule
from .linear_ucb import LinearUcbState, UcbConfig, init_state, ridge_update, ucb_select
from .relu_model import ArmSet, ReluNetwork, margin_mask, sign_robust_features_batch


@dataclass(frozen=True, eq=False)
class AgentObservation:
    """One completed round: the offered set, the pick, and the reward."""

    t: int
    arms: ArmSet
    index: int
    reward: float

    def __post_init__(self):
        if not 0 <= self.index < len(self.arms):
            raise ValueError(f"chosen index {self.index} outside the offered set of {len(self.arms)}")

    @property
    def action(self) -> np.ndarray:
        return self.arms.arms[self.index]


@dataclass(frozen=True)
class OfuReluConfig:
    """t0 exploration rounds, then UCB over features frozen at the one fit.

    nu is the assumed gap; arms are filtered at margin nu/2 before selection.
    nu = 0 disables filtering, which is the experiment default since the true
    gap is unknown there.
    """

    t0: int
    ucb: UcbConfig
    fit: FitConfig
    nu: float = 0.0
    label: str = "ofu_relu"

    def __post_init__(self):
        if self.t0 < 1:
            raise ValueError("t0 must be at least 1")
        if self.nu < 0.0:
            raise ValueError("nu must be nonnegative")


@dataclass(frozen=True)
class OfuReluPlusConfig:
    """Batched variant: initial gap guess nu0 shrunk by b per batch.

    Batch i covers rounds ((a^(i-1) - 1) T1, (a^i - 1) T1]; its exploration
    length comes from the t0 schedule increments under ``schedule`` unless
    ``practical_override`` supplies per-batch lengths verbatim.
    """

    nu0: float
    T1: int
    a: float
    b: float
    schedule: BoundParams
    ucb: UcbConfig
    fit: FitConfig
    practical_override: tuple[int, ...] | None = None
    label: str = "ofu_relu_plus"

    def __post_init__(self):
        if self.nu0 <= 0.0:
            raise ValueError("nu0 must be positive")
        if self.T1 < 1:
            raise ValueError("T1 must be at least 1")
        if self.a <= 1.0 or self.b <= 1.0:
            raise ValueError("batch multipliers a and b must exceed 1")
        if self.practical_override is not None:
            object.__setattr__(self, "practical_override", tuple(int(v) for v in self.practical_override))
            if any(v < 0 for v in self.practical_override):
                raise ValueError("override exploration lengths must be nonnegative")


@dataclass(frozen=True)
class OfulConfig:
    ucb: UcbConfig
    label: str = "oful"


@dataclass(frozen=True)
class RandomConfig:
    label: str = "random"


@dataclass(frozen=True)
class BatchGrid:
    """Resolved batch structure: boundaries T_0..T_M, gaps, exploration sizes."""

    M: int
    boundaries: tuple[int, ...]  # length M+1, starting at T_0 = 0
    nus: tuple[float, ...]  # nu_i = nu0 / b^i, one per batch
    explore_sizes: tuple[int, ...]  # one per batch
    schedule_clamped: bool  # True when a schedule-derived size hit the batch length

    def batch_length(self, i: int) -> int:
        return self.boundaries[i + 1] - self.boundaries[i]


def build_batch_grid(cfg: OfuReluPlusConfig, T: int) -> BatchGrid:
    """Batch count M = ceil(log(T/T1 + 1) / log a), boundaries (a^i - 1) T1.

    The last boundary is clamped to T.  Schedule-derived exploration sizes are
    the increments max(0, ceil(t0(nu_i)) - ceil(t0(nu_{i-1}))), clamped to the
    batch length (and flagged when clamping bites); an override list is stored
    verbatim and only clamped at execution time.
    """
    if T < cfg.T1:
        raise ConfigError(f"horizon T={T} is shorter than the first batch T1={cfg.T1}")
    # round before ceil so exact powers of a do not pick up a spurious batch
    M = math.ceil(round(math.log(T / cfg.T1 + 1.0) / math.log(cfg.a), 12))
    M = max(M, 1)
    boundaries = [0]
    for i in range(1, M + 1):
        raw = (cfg.a**i - 1.0) * cfg.T1
        bound = min(T, max(boundaries[-1] + 1, math.ceil(round(raw, 9))))
        boundaries.append(bound)
    boundaries[-1] = T
    nus = tuple(cfg.nu0 / cfg.b**i for i in range(1, M + 1))
    clamped = False
    if cfg.practical_override is not None:
        if len(cfg.practical_override) < M:
            raise ConfigError(
                f"practical_override has {len(cfg.practical_override)} entries but the grid has {M} batches"
            )
        sizes = tuple(cfg.practical_override[:M])
    else:
        params = replace(cfg.schedule, T=float(T))
        prev = math.ceil(t0_schedule(cfg.nu0, params))
        sizes = []
        for i in range(M):
            cur = math.ceil(t0_schedule(nus[i], params))
            raw_size = max(0, cur - prev)
            prev = cur
            batch_len = boundaries[i + 1] - boundaries[i]
            if raw_size > batch_len:
                clamped = True
                raw_size = batch_len
            sizes.append(raw_size)
        sizes = tuple(sizes)
    return BatchGrid(M=M, boundaries=tuple(boundaries), nus=nus, explore_sizes=sizes, schedule_clamped=clamped)


class _SequentialAgent:
    """Protocol bookkeeping: enforces the select/observe alternation."""

    label: str = "agent"

    def __init__(self):
        self._t = 0  # rounds completed
        self._pending: tuple[ArmSet, int] | None = None

    def select_arm(self, arms: ArmSet, rng: np.random.Generator) -> int:
        if self._pending is not None:
            raise ProtocolError("observe() must be called before the next select_arm()")
        idx = int(self._select(arms, rng, self._t + 1))
        self._pending = (arms, idx)
        return idx

    def observe(self, y: float) -> None:
        if self._pending is None:
            raise ProtocolError("select_arm() must be called before observe()")
        arms, idx = self._pending
        self._pending = None
        self._t += 1
        self._observe(AgentObservation(t=self._t, arms=arms, index=idx, reward=float(y)))

    def _select(self, arms: ArmSet, rng: np.random.Generator, t: int) -> int:
        raise NotImplementedError

    def _observe(self, obs: AgentObservation) -> None:
        raise NotImplementedError


class RandomAgent(_SequentialAgent):
    def __init__(self, cfg: RandomConfig = RandomConfig()):
        super().__init__()
        self.label = cfg.label

    def _select(self, arms, rng, t):
        return int(rng.integers(len(arms)))

    def _observe(self, obs):
        pass


class OfulAgent(_SequentialAgent):
    """Linear UCB on the raw arms; misspecified on purpose for ReLU rewards."""

    def __init__(self, d: int, cfg: OfulConfig):
        super().__init__()
        self.label = cfg.label
        self._cfg = cfg
        self._ridge = init_state(d, cfg.ucb.lam)

    @property
    def ridge(self) -> LinearUcbState:
        return self._ridge

    def _select(self, arms, rng, t):
        return ucb_select(self._ridge, self._cfg.ucb, arms.arms)

    def _observe(self, obs):
        self._ridge = ridge_update(self._ridge, obs.action, obs.reward)


class OfuReluAgent(_SequentialAgent):
    """Explore, fit once, then UCB over sign-robust features.

    The ridge state lives in the 2kd lifted space and absorbs only the
    post-exploration observations; exploration samples feed the fit.  When
    margin filtering empties the offered set, the full set is used and the
    round is counted in ``fallback_rounds``.
    """

    def __init__(self, k: int, d: int, cfg: OfuReluConfig, estimate: ReluNetwork | None = None):
        super().__init__()
        self.label = cfg.label
        self._k, self._d = k, d
        self._cfg = cfg
        self._samples: list[Sample] = []
        self._estimate = estimate
        self._fit_done = estimate is not None
        self._ridge = init_state(2 * k * d, cfg.ucb.lam)
        self._pending_features: np.ndarray | None = None
        self.fallback_rounds = 0

    @property
    def estimate(self) -> ReluNetwork | None:
        return self._estimate

    @property
    def ridge(self) -> LinearUcbState:
        return self._ridge

    def _select(self, arms, rng, t):
        if t <= self._cfg.t0:
            return int(rng.integers(len(arms)))
        est = self._estimate
        mask = margin_mask(arms.arms, est, self._cfg.nu / 2.0)
        if not mask.any():
            self.fallback_rounds += 1
            mask = np.ones(len(arms), dtype=bool)
        kept = np.flatnonzero(mask)
        feats = sign_robust_features_batch(arms.arms[kept], est)
        j = ucb_select(self._ridge, self._cfg.ucb, feats)
        self._pending_features = feats[j]
        return int(kept[j])

    def _observe(self, obs):
        if obs.t <= self._cfg.t0:
            self._samples.append(Sample(x=obs.action, y=obs.reward))
            if obs.t == self._cfg.t0 and not self._fit_done:
                self._estimate = fit_erm(self._samples, self._k, self._cfg.fit)
                self._fit_done = True
        else:
            self._ridge = ridge_update(self._ridge, self._pending_features, obs.reward)
            self._pending_features = None


class OfuReluPlusAgent(_SequentialAgent):
    """Batched agent: refit per batch, never discarding data.

    Within batch i the first explore_sizes[i] rounds (clamped to the batch)
    sample uniformly and extend the cumulative exploration pool; the refit at
    the end of that stretch re-estimates the model on the whole pool and
    rebuilds the ridge state by replaying the entire history under the new
    estimate.  Between refits every observation (exploratory or not) also
    enters the ridge incrementally, so the state always equals a from-scratch
    replay under the current estimate.
    """

    def __init__(self, k: int, d: int, T: int, cfg: OfuReluPlusConfig):
        super().__init__()
        self.label = cfg.label
        self._k, self._d = k, d
        self._cfg = cfg
        self.grid = build_batch_grid(cfg, T)
        self._history: list[AgentObservation] = []
        self._pool: list[Sample] = []
        self._estimate: ReluNetwork | None = None
        self._ridge = init_state(2 * k * d, cfg.ucb.lam)
        self._pending_features: np.ndarray | None = None
        self.fallback_rounds = 0
        self.forced_exploration_rounds = 0
        # explore window of each batch, resolved with runtime clamping
        self._explore_end = []
        for i in range(self.grid.M):
            start = self.grid.boundaries[i]
            length = min(self.grid.explore_sizes[i], self.grid.batch_length(i))
            self._explore_end.append(start + length)

    @property
    def estimate(self) -> ReluNetwork | None:
        return self._estimate

    @property
    def ridge(self) -> LinearUcbState:
        return self._ridge

    @property
    def pool_size(self) -> int:
        return len(self._pool)

    def history(self) -> list[AgentObservation]:
        return list(self._history)

    def _batch_of(self, t: int) -> int:
        for i in range(self.grid.M):
            if t <= self.grid.boundaries[i + 1]:
                return i
        return self.grid.M - 1

    def _exploring(self, t: int) -> bool:
        i = self._batch_of(t)
        if t <= self._explore_end[i]:
            return True
        if self._estimate is None:
            # no refit has ever run (all exploration windows so far were
            # empty); keep exploring rather than select without a model
            return True
        return False

    def _select(self, arms, rng, t):
        if self._exploring(t):
            if t > self._explore_end[self._batch_of(t)]:
                self.forced_exploration_rounds += 1
            return int(rng.integers(len(arms)))
        i = self._batch_of(t)
        est = self._estimate
        mask = margin_mask(arms.arms, est, self.grid.nus[i] / 2.0)
        if not mask.any():
            self.fallback_rounds += 1
            mask = np.ones(len(arms), dtype=bool)
        kept = np.flatnonzero(mask)
        feats = sign_robust_features_batch(arms.arms[kept], est)
        j = ucb_select(self._ridge, self._cfg.ucb, feats)
        self._pending_features = feats[j]
        return int(kept[j])

    def _observe(self, obs):
        self._history.append(obs)
        if self._pending_features is not None:
            # a UCB round: absorb under the current estimate
            self._ridge = ridge_update(self._ridge, self._pending_features, obs.reward)
            self._pending_features = None
            return
        # an exploration round
        self._pool.append(Sample(x=obs.action, y=obs.reward))
        if self._estimate is not None:
            feats = sign_robust_features_batch(obs.action[None, :], self._estimate)[0]
            self._ridge = ridge_update(self._ridge, feats, obs.reward)
        i = self._batch_of(obs.t)
        if obs.t == self._explore_end[i] and self.grid.boundaries[i] < self._explore_end[i]:
            self._refit()

    def _refit(self):
        self._estimate = fit_erm(self._pool, self._k, self._cfg.fit)
        self._ridge = self._rebuild_ridge(self._estimate)

    def _rebuild_ridge(self, est: ReluNetwork) -> LinearUcbState:
        state = init_state(2 * self._k * self._d, self._cfg.ucb.lam)
        if self._history:
            actions = np.stack([o.action for o in self._history])
            feats = sign_robust_features_batch(actions, est)
            for row, o in zip(feats, self._history):
                state = ridge_update(state, row, o.reward)
        return state


AgentConfig = OfuReluConfig | OfuReluPlusConfig | OfulConfig | RandomConfig


def make_agent(cfg: AgentConfig, k: int, d: int, T: int) -> _SequentialAgent:
    """Instantiate the agent a config block describes, for a (k, d, T) run."""
    if isinstance(cfg, OfuReluConfig):
        return OfuReluAgent(k, d, cfg)
    if isinstance(cfg, OfuReluPlusConfig):
        return OfuReluPlusAgent(k, d, T, cfg)
    if isinstance(cfg, OfulConfig):
        return OfulAgent(d, cfg)
    if isinstance(cfg, RandomConfig):
        return RandomAgent(cfg)
    raise ConfigError(f"unknown agent config type {type(cfg).__name__}")
