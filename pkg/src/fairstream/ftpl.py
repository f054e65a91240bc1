"""Follow-the-perturbed-leader over a separating set, plus the semi-bandit
variant's geometric resampling loss estimator.

Each hypothesis draw perturbs the frozen history with fresh fake records:
one per separator point, carrying independent two-sided-exponential
(Laplace) per-action losses, then asks the ERM oracle for the minimizer.
Only the per-point loss difference moves the argmin, so the engine keeps an
incremental cumulative-cost vector over the family and resolves a draw with
one noise vector and one matrix product; the result is identical to running
the ERM oracle over the explicit record union (covered by tests). Every
draw counts as exactly one oracle call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hypotheses import (
    Hypothesis,
    HypothesisFamily,
    OracleCounter,
    Policy,
    WeightedLossRecord,
    record_costs,
)
from .losses import LagrangianRound, slot_decomposition

__all__ = [
    "PerturbationConfig",
    "ResamplingConfig",
    "FtplHistory",
    "EmpiricalPolicy",
    "MissingK",
    "sample_hypothesis",
    "sample_hypothesis_batch",
    "estimate_policy",
    "geometric_resample",
    "semi_bandit_loss_estimate",
]


class MissingK(ValueError):
    """Raised when a positively-predicted slot has no resampling count."""


@dataclass(frozen=True)
class PerturbationConfig:
    """Two-sided exponential noise with density (omega/2) exp(-omega |z|).

    scale = 1/omega; one independent draw per (separator point, action) per
    hypothesis draw.
    """

    omega: float

    def __post_init__(self):
        if not (self.omega > 0 and np.isfinite(self.omega)):
            raise ValueError("omega must be finite and positive")

    @property
    def scale(self) -> float:
        return 1.0 / self.omega


@dataclass(frozen=True)
class ResamplingConfig:
    """Cap on geometric-resampling draws per estimated slot."""

    M: int

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be >= 1")


def _laplace(rng: np.random.Generator, shape, scale: float) -> np.ndarray:
    # difference of two unit exponentials is standard Laplace
    return (rng.standard_exponential(shape) - rng.standard_exponential(shape)) * scale


class FtplHistory:
    """Append-only sequence of frozen slot-decomposed Lagrangian rounds.

    Bound to one family so the cumulative per-member cost of all frozen
    records can be maintained incrementally.
    """

    def __init__(self, family: HypothesisFamily):
        self.family = family
        self.rounds: list[LagrangianRound] = []
        self._cum = np.zeros(family.n_members)

    def __len__(self) -> int:
        return len(self.rounds)

    def append(self, rnd: LagrangianRound) -> None:
        self.rounds.append(rnd)
        self._cum += record_costs(slot_decomposition(rnd), self.family)

    def cumulative_costs(self) -> np.ndarray:
        return self._cum.copy()

    def all_records(self) -> list[WeightedLossRecord]:
        out: list[WeightedLossRecord] = []
        for rnd in self.rounds:
            out.extend(slot_decomposition(rnd))
        return out


def _draw_noise(rng: np.random.Generator, s: int, scale: float) -> np.ndarray:
    """Per-(separator point, action) Laplace losses for one draw, shape (s, 2)."""
    return _laplace(rng, (s, 2), scale)


def sample_hypothesis(
    history: FtplHistory,
    perturbation: PerturbationConfig,
    rng: np.random.Generator,
    counter: OracleCounter | None = None,
) -> Hypothesis:
    """One perturbed-leader draw; exactly one oracle call."""
    if counter is not None:
        counter.spend()
    family = history.family
    z = _draw_noise(rng, family.s, perturbation.scale)
    # fake record (q, (z0, z1), 1) contributes z1-z0 on members predicting 1
    # at q, plus a member-independent z0 total that cannot move the argmin
    costs = history._cum + family.separator_predictions @ (z[:, 1] - z[:, 0])
    return family.members[int(np.argmin(costs))]


def sample_hypothesis_batch(
    history: FtplHistory,
    perturbation: PerturbationConfig,
    R: int,
    rng: np.random.Generator,
    counter: OracleCounter | None = None,
) -> np.ndarray:
    """R independent draws resolved in one vectorized pass; R oracle calls."""
    if counter is not None:
        counter.spend(R)
    family = history.family
    D = _laplace(rng, (R, family.s), perturbation.scale) - _laplace(
        rng, (R, family.s), perturbation.scale
    )
    costs = D @ family.separator_predictions.T.astype(float)
    costs += history._cum[None, :]
    return np.argmin(costs, axis=1)


@dataclass(frozen=True)
class EmpiricalPolicy:
    """Uniform mixture over a multiset of sampled hypothesis ids."""

    sample_ids: np.ndarray
    n_members: int

    def __post_init__(self):
        ids = np.asarray(self.sample_ids, dtype=np.int64).reshape(-1)
        if len(ids) == 0:
            raise ValueError("empirical policy needs at least one sample")
        ids.setflags(write=False)
        object.__setattr__(self, "sample_ids", ids)

    @property
    def R(self) -> int:
        return len(self.sample_ids)

    def to_policy(self) -> Policy:
        counts = np.bincount(self.sample_ids, minlength=self.n_members)
        return Policy(counts / self.R)

    def values(self, family: HypothesisFamily, X) -> np.ndarray:
        weights = np.bincount(self.sample_ids, minlength=self.n_members) / self.R
        return weights @ family.predict_matrix(X)


def estimate_policy(
    history: FtplHistory,
    perturbation: PerturbationConfig,
    R: int,
    rng: np.random.Generator,
    counter: OracleCounter | None = None,
) -> EmpiricalPolicy:
    """Empirical policy from R independent draws; exactly R oracle calls."""
    if R < 1:
        raise ValueError("R must be >= 1")
    ids = sample_hypothesis_batch(history, perturbation, R, rng, counter)
    return EmpiricalPolicy(ids, history.family.n_members)


def geometric_resample(
    target_x,
    target_action: int,
    history: FtplHistory,
    perturbation: PerturbationConfig,
    M: int,
    rng: np.random.Generator,
    counter: OracleCounter | None = None,
) -> int:
    """Index of the first of up to M fresh draws matching the target action.

    Returns M when no draw matches. Early exit on match, so the number of
    oracle calls consumed equals the returned K.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    family = history.family
    target_x = np.asarray(target_x, dtype=float).reshape(1, -1)
    preds = family.predict_matrix(target_x)[:, 0]  # (n,)
    P = family.separator_predictions
    cum = history._cum
    scale = perturbation.scale
    for k in range(1, M + 1):
        if counter is not None:
            counter.spend()
        z = _draw_noise(rng, family.s, scale)
        hid = int(np.argmin(cum + P @ (z[:, 1] - z[:, 0])))
        if preds[hid] == target_action:
            return k
    return M


def semi_bandit_loss_estimate(
    predictions,
    observed_labels: dict[int, int],
    K_values: dict[int, int],
) -> np.ndarray:
    """Per-slot estimated action losses under one-sided label feedback.

    Positively-predicted slot i gets (K_i * 1[y_i != 0], K_i * 1[y_i != 1]);
    with K_i from geometric resampling this is an inverse-propensity
    estimate of the slot's 0-1 losses. Negatively-predicted slots carry no
    loss (no feedback is available for them).
    """
    predictions = np.asarray(predictions, dtype=np.int8).reshape(-1)
    out = np.zeros((len(predictions), 2))
    for i, pred in enumerate(predictions):
        if pred != 1:
            continue
        if i not in K_values:
            raise MissingK(f"positively predicted slot {i} has no K value")
        if i not in observed_labels:
            raise MissingK(f"positively predicted slot {i} has no observed label")
        y = observed_labels[i]
        K = K_values[i]
        out[i, 0] = K * (1 if y != 0 else 0)
        out[i, 1] = K * (1 if y != 1 else 0)
    return out
