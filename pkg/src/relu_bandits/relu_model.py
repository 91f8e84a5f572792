"""One-layer ReLU reward models and the transforms that linearize them.

The reward of a unit-norm action x under a weight matrix W (k rows, each a
unit-norm neuron w_i) is

    f(x) = sum_i g(w_i . x),    g(z) = z * 1{z >= 0}.

Ties at the kink count as active: 1{0 >= 0} = 1.  Every map in this module
follows that convention.

Freezing the indicators at an estimate We turns f into a linear function of a
lifted feature vector, which is what lets a linear-bandit engine drive the
post-exploration phase:

* ``frozen_features`` (k blocks): block i is 1{we_i . x >= 0} * x.  Exact when
  every estimated neuron is close to the true neuron with matching sign.
* ``sign_robust_features`` (2k blocks): the extra k blocks carry
  (1/2 - 1{we_i . x >= 0}) * x and absorb estimated neurons that converged to
  the negation of a true neuron.  Paired with ``sign_corrected_parameter``,
  the inner product reproduces f exactly on the margin-restricted action set
  (see ``restrict_arms``), provided each neuron is matched within nu/2.

Actions are plain unit-norm numpy vectors; ``ArmSet`` validates membership.
All types are immutable after construction and all operations are pure, so
they are safe to use from concurrently running trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, UnsupportedDimensionError

NORM_TOL = 1e-9

_TWO_PI = 2.0 * math.pi


def _as_matrix(values, name: str) -> np.ndarray:
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionMismatchError(f"{name} must be a nonempty 2-D array, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _check_unit_rows(a: np.ndarray, name: str) -> None:
    norms = np.linalg.norm(a, axis=1)
    worst = float(np.abs(norms - 1.0).max())
    if worst > NORM_TOL:
        raise ValueError(f"{name} rows must have unit norm within {NORM_TOL:g} (worst deviation {worst:.3e})")


@dataclass(frozen=True, eq=False)
class ReluNetwork:
    """Weight matrix of a one-layer ReLU network: k unit-norm rows in R^d."""

    weights: np.ndarray

    def __post_init__(self):
        w = _as_matrix(self.weights, "weights")
        _check_unit_rows(w, "weights")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True, eq=False)
class ArmSet:
    """Ordered collection of unit-norm actions offered in one round."""

    arms: np.ndarray
    round_index: int = 0

    def __post_init__(self):
        a = _as_matrix(self.arms, "arms")
        _check_unit_rows(a, "arms")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "arms", a)

    def __len__(self) -> int:
        return self.arms.shape[0]

    @property
    def d(self) -> int:
        return self.arms.shape[1]


@dataclass(frozen=True, eq=False)
class TransformedArm:
    """An action together with its sign-robust lifted features.

    ``source_estimate_id`` identifies the estimate the indicators were frozen
    at, so stale features are detectable when the estimate is refreshed.
    """

    raw: np.ndarray
    features: np.ndarray
    source_estimate_id: int = 0

    def __post_init__(self):
        raw = np.asarray(self.raw, dtype=np.float64)
        feats = np.asarray(self.features, dtype=np.float64)
        d = raw.shape[0]
        if raw.ndim != 1 or feats.ndim != 1 or feats.shape[0] % (2 * d) != 0:
            raise DimensionMismatchError(
                f"features length {feats.shape} is not a 2k multiple of the action dimension {d}"
            )
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "features", feats)


def _as_action(x, d: int) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 1 or a.shape[0] != d:
        raise DimensionMismatchError(f"action has shape {a.shape}, expected ({d},)")
    return a


def eval_f(net: ReluNetwork, x) -> float:
    """f(x) = sum_i g(w_i . x); lies in [0, k] for unit-norm x."""
    a = _as_action(x, net.d)
    p = net.weights @ a
    return float(np.where(p >= 0.0, p, 0.0).sum())


def eval_f_batch(net: ReluNetwork, actions: np.ndarray) -> np.ndarray:
    """Vectorized ``eval_f`` over the rows of an (m, d) action matrix."""
    if actions.ndim != 2 or actions.shape[1] != net.d:
        raise DimensionMismatchError(f"actions have shape {actions.shape}, expected (m, {net.d})")
    p = actions @ net.weights.T
    np.maximum(p, 0.0, out=p)
    return p.sum(axis=1)


def active_indicators(est: ReluNetwork, x) -> np.ndarray:
    """1{we_i . x >= 0} for each estimated neuron, as a float vector."""
    a = _as_action(x, est.d)
    return (est.weights @ a >= 0.0).astype(np.float64)


def frozen_features(x, est: ReluNetwork) -> np.ndarray:
    """Indicator-frozen feature map (kd entries): block i = 1{we_i . x >= 0} * x."""
    a = _as_action(x, est.d)
    ind = (est.weights @ a >= 0.0).astype(np.float64)
    return (ind[:, None] * a[None, :]).ravel()


def sign_robust_features(x, est: ReluNetwork) -> np.ndarray:
    """Sign-robust feature map (2kd entries).

    First k blocks as ``frozen_features``; block k+i carries
    (1/2 - 1{we_i . x >= 0}) * x, the handle through which a sign-corrected
    parameter can undo an estimated neuron that matched the negated truth.
    """
    a = _as_action(x, est.d)
    ind = (est.weights @ a >= 0.0).astype(np.float64)
    first = ind[:, None] * a[None, :]
    second = (0.5 - ind)[:, None] * a[None, :]
    return np.concatenate([first, second], axis=0).ravel()


def sign_robust_features_batch(actions: np.ndarray, est: ReluNetwork) -> np.ndarray:
    """Vectorized ``sign_robust_features``: (m, d) actions -> (m, 2kd) features."""
    if actions.ndim != 2 or actions.shape[1] != est.d:
        raise DimensionMismatchError(f"actions have shape {actions.shape}, expected (m, {est.d})")
    ind = (actions @ est.weights.T >= 0.0).astype(np.float64)  # (m, k)
    first = ind[:, :, None] * actions[:, None, :]  # (m, k, d)
    second = (0.5 - ind)[:, :, None] * actions[:, None, :]
    m = actions.shape[0]
    return np.concatenate([first, second], axis=1).reshape(m, 2 * est.k * est.d)


def transform_arm(x, est: ReluNetwork, estimate_id: int = 0) -> TransformedArm:
    """Bundle an action with its sign-robust features under the given estimate."""
    a = _as_action(x, est.d)
    return TransformedArm(raw=a, features=sign_robust_features(a, est), source_estimate_id=estimate_id)


def sign_corrected_parameter(truth: ReluNetwork, est: ReluNetwork, nu: float) -> np.ndarray:
    """The 2kd parameter vector that pairs with ``sign_robust_features``.

    First k blocks are the true neurons; correction block k+i is 2*w_i when
    the estimate matched the negated neuron (|we_i + w_i| <= nu/2), else zero.
    Requires per-neuron matched error <= nu/2 (the caller's responsibility);
    depends on the truth, so it exists for tests and oracles only and is never
    consulted by an agent.
    """
    if nu <= 0.0:
        raise ValueError(f"nu must be positive, got {nu}")
    if truth.weights.shape != est.weights.shape:
        raise DimensionMismatchError(
            f"truth {truth.weights.shape} and estimate {est.weights.shape} disagree"
        )
    flipped = np.linalg.norm(est.weights + truth.weights, axis=1) <= nu / 2.0
    correction = 2.0 * truth.weights * flipped[:, None]
    return np.concatenate([truth.weights, correction], axis=0).ravel()


def margin_mask(actions: np.ndarray, est: ReluNetwork, nu: float) -> np.ndarray:
    """Boolean mask of actions with |we_i . x| >= nu for every neuron i."""
    if actions.ndim != 2 or actions.shape[1] != est.d:
        raise DimensionMismatchError(f"actions have shape {actions.shape}, expected (m, {est.d})")
    return (np.abs(actions @ est.weights.T) >= nu).all(axis=1)


def restrict_arms(arms: ArmSet, est: ReluNetwork, nu: float) -> tuple[ArmSet, bool]:
    """Keep arms with margin |we_i . x| >= nu for all i, preserving order.

    nu = 0 keeps everything (the constraint is vacuous on the unit sphere up
    to exact zeros, which still satisfy >= 0).  A finite sample can leave the
    restricted set empty; in that case the full input set is returned with the
    fallback flag set, so runs always progress.
    """
    if nu < 0.0:
        raise ValueError(f"nu must be nonnegative, got {nu}")
    if nu == 0.0:
        return arms, False
    mask = margin_mask(arms.arms, est, nu)
    if not mask.any():
        return arms, True
    return ArmSet(arms.arms[mask], round_index=arms.round_index), False


def gap_of(net: ReluNetwork, xstar) -> float:
    """Smallest unsigned margin min_i |w_i . x| of an action at the network."""
    a = _as_action(xstar, net.d)
    return float(np.abs(net.weights @ a).min())


def _unit(angle: float) -> np.ndarray:
    return np.array([math.cos(angle), math.sin(angle)])


def exact_argmax_2d(net: ReluNetwork) -> tuple[np.ndarray, float]:
    """Global maximizer of f on the unit circle, exactly (d = 2 only).

    The circle splits into arcs at the angles where some w_i . x = 0.  Inside
    an arc the active set is constant, so f(x) = w . x with w the sum of the
    active neurons; the arc maximum is at w/|w| if that direction lies inside
    the arc, else at an endpoint.  Evaluating f at all critical angles and all
    arc endpoints covers the global maximum.  Ties break toward the smallest
    angle in [0, 2*pi).
    """
    if net.d != 2:
        raise UnsupportedDimensionError(f"exact argmax is implemented for d=2 only, got d={net.d}")
    w = net.weights
    neuron_angles = np.arctan2(w[:, 1], w[:, 0])
    bounds = np.unique(np.concatenate([neuron_angles + math.pi / 2, neuron_angles - math.pi / 2]) % _TWO_PI)
    starts = bounds
    ends = np.concatenate([bounds[1:], [bounds[0] + _TWO_PI]])
    candidates = list(bounds)
    for s, e in zip(starts, ends):
        mid = 0.5 * (s + e)
        active = (w @ _unit(mid)) > 0.0  # strict: no boundary crosses an arc interior
        if not active.any():
            continue
        direction = w[active].sum(axis=0)
        if not direction.any():
            continue
        crit = math.atan2(direction[1], direction[0]) % _TWO_PI
        if crit < s:
            crit += _TWO_PI
        if s <= crit <= e:
            candidates.append(crit % _TWO_PI)
    angles = np.unique(np.asarray(candidates))  # sorted: first argmax is the smallest angle
    points = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    values = eval_f_batch(net, points)
    best = int(np.argmax(values))
    return points[best], float(values[best])
