"""Finite hypothesis families, policies over them, separating sets, and the
weighted batch ERM oracle.

Hypotheses are deterministic binary predictors over feature vectors. A
family bundles an ordered member list with a separating set Q: a set of
points on which every pair of distinct members disagrees somewhere. All
values are immutable after construction and safe to share across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Hypothesis",
    "HypothesisFamily",
    "Policy",
    "WeightedLossRecord",
    "OracleCounter",
    "UnseparablePair",
    "erm_oracle",
    "policy_eval",
    "policy_values",
    "greedy_separator",
    "constant_hypothesis",
    "threshold_hypothesis",
    "conjunction_hypothesis",
    "table_hypothesis",
    "thresholds_family",
    "conjunctions_family",
    "explicit_family",
    "family_from_config",
]


class UnseparablePair(ValueError):
    """Raised when the candidate pool cannot separate some member pair.

    Signals duplicate hypotheses: the caller should deduplicate.
    """


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    return X


@dataclass(frozen=True)
class Hypothesis:
    """A deterministic binary rule with a family-local integer id.

    kind is one of "constant", "threshold", "conjunction", "table".
    params:
      constant    -> (bit,)
      threshold   -> (coord, cutoff, polarity)   polarity 1: x[coord] >= cutoff
      conjunction -> (coords tuple,)             all named binarized features >= 0.5
      table       -> (pool_key tuple, bits tuple)
    """

    hid: int
    kind: str
    params: tuple

    def predict(self, X) -> np.ndarray:
        X = _as_points(X)
        if self.kind == "constant":
            return np.full(len(X), self.params[0], dtype=np.uint8)
        if self.kind == "threshold":
            coord, cutoff, polarity = self.params
            hit = X[:, coord] >= cutoff
            return (hit if polarity else ~hit).astype(np.uint8)
        if self.kind == "conjunction":
            (coords,) = self.params
            if not coords:
                return np.ones(len(X), dtype=np.uint8)
            return (X[:, list(coords)] >= 0.5).all(axis=1).astype(np.uint8)
        if self.kind == "table":
            pool_key, bits = self.params
            index = {row: i for i, row in enumerate(pool_key)}
            out = np.empty(len(X), dtype=np.uint8)
            for i, row in enumerate(X):
                key = tuple(float(v) for v in row)
                if key not in index:
                    raise KeyError(f"point {key} is not in the table hypothesis pool")
                out[i] = bits[index[key]]
            return out
        raise ValueError(f"unknown hypothesis kind {self.kind!r}")

    def __call__(self, x) -> int:
        return int(self.predict(x)[0])


def constant_hypothesis(bit: int, hid: int = -1) -> Hypothesis:
    return Hypothesis(hid, "constant", (int(bit),))


def threshold_hypothesis(coord: int, cutoff: float, polarity: int = 1, hid: int = -1) -> Hypothesis:
    return Hypothesis(hid, "threshold", (int(coord), float(cutoff), int(polarity)))


def conjunction_hypothesis(coords: Iterable[int], hid: int = -1) -> Hypothesis:
    return Hypothesis(hid, "conjunction", (tuple(int(c) for c in coords),))


def table_hypothesis(pool, bits, hid: int = -1) -> Hypothesis:
    pool = _as_points(pool)
    key = tuple(tuple(float(v) for v in row) for row in pool)
    return Hypothesis(hid, "table", (key, tuple(int(b) for b in bits)))


def _predict_matrix(members: Sequence[Hypothesis], X) -> np.ndarray:
    X = _as_points(X)
    out = np.empty((len(members), len(X)), dtype=np.uint8)
    for i, h in enumerate(members):
        out[i] = h.predict(X)
    return out


def greedy_separator(members: Sequence[Hypothesis], pool) -> np.ndarray:
    """Greedy separating set from a candidate pool.

    Repeatedly adds the candidate separating the most still-unseparated
    member pairs (ties: earliest pool index) until every pair of distinct
    members disagrees on some chosen point. Raises UnseparablePair if the
    pool cannot separate some pair.
    """
    pool = _as_points(pool)
    n = len(members)
    if n <= 1:
        return pool[:0]
    P = _predict_matrix(members, pool)  # (n, |pool|)
    iu, ju = np.triu_indices(n, k=1)
    # disagree[p, c] = 1 iff pair p is separated by candidate c
    disagree = P[iu] != P[ju]
    unsep = ~disagree.any(axis=1)
    if unsep.any():
        l, r = iu[unsep.argmax()], ju[unsep.argmax()]
        raise UnseparablePair(
            f"members {members[l].hid} and {members[r].hid} agree on the whole pool"
        )
    open_pairs = np.ones(len(iu), dtype=bool)
    chosen: list[int] = []
    while open_pairs.any():
        gains = (disagree[open_pairs]).sum(axis=0)
        c = int(np.argmax(gains))
        chosen.append(c)
        open_pairs &= ~disagree[:, c]
    return pool[sorted(chosen)]


class HypothesisFamily:
    """Ordered finite family with a separating set Q.

    Duplicate behaviors (on Q plus the candidate pool) are removed at
    construction; surviving members get ids 0..n-1 in first-seen order.
    """

    def __init__(self, members: Sequence[Hypothesis], separator=None, candidate_pool=None):
        if not members:
            raise ValueError("family must be nonempty")
        probe_parts = []
        if separator is not None:
            probe_parts.append(_as_points(separator))
        if candidate_pool is not None:
            probe_parts.append(_as_points(candidate_pool))
        if not probe_parts:
            raise ValueError("need a separator or candidate pool to build a family")
        probe = np.vstack(probe_parts)
        sig = _predict_matrix(members, probe)
        keep: list[Hypothesis] = []
        seen: set[bytes] = set()
        for i, h in enumerate(members):
            key = sig[i].tobytes()
            if key in seen:
                continue
            seen.add(key)
            keep.append(h)
        self.members: tuple[Hypothesis, ...] = tuple(
            Hypothesis(i, h.kind, h.params) for i, h in enumerate(keep)
        )
        if separator is None:
            separator = greedy_separator(self.members, candidate_pool)
        self.separator: np.ndarray = _as_points(separator)
        self.separator.setflags(write=False)
        self.separator_predictions: np.ndarray = _predict_matrix(self.members, self.separator)
        self.separator_predictions.setflags(write=False)
        self._check_separated()

    def _check_separated(self) -> None:
        n = self.n_members
        if n <= 1:
            return
        P = self.separator_predictions
        iu, ju = np.triu_indices(n, k=1)
        ok = (P[iu] != P[ju]).any(axis=1)
        if not ok.all():
            bad = int(np.argmin(ok))
            raise UnseparablePair(
                f"separator does not separate members {iu[bad]} and {ju[bad]}"
            )

    @property
    def n_members(self) -> int:
        return len(self.members)

    @property
    def s(self) -> int:
        return len(self.separator)

    def predict_matrix(self, X) -> np.ndarray:
        """Predictions of every member on the given points, shape (n, len(X))."""
        return _predict_matrix(self.members, X)

    def __len__(self) -> int:
        return self.n_members

    def __getitem__(self, hid: int) -> Hypothesis:
        return self.members[hid]


@dataclass(frozen=True)
class Policy:
    """A point in the simplex over a family's members."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if (w < 0).any():
            raise ValueError("policy weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"policy weights sum to {w.sum()!r}, not 1")

    @staticmethod
    def point_mass(hid: int, n_members: int) -> "Policy":
        w = np.zeros(n_members)
        w[hid] = 1.0
        return Policy(w)

    @staticmethod
    def uniform(n_members: int) -> "Policy":
        return Policy(np.full(n_members, 1.0 / n_members))


def policy_eval(policy: Policy, family: HypothesisFamily, x) -> float:
    """Acceptance probability of the policy on one individual."""
    return float(policy_values(policy, family, _as_points(x))[0])


def policy_values(policy: Policy, family: HypothesisFamily, X) -> np.ndarray:
    """Acceptance probabilities on each row of X."""
    P = family.predict_matrix(X)
    return policy.weights @ P


@dataclass(frozen=True)
class WeightedLossRecord:
    """One ERM input row: a context with per-action losses and a weight."""

    context: np.ndarray
    action_losses: tuple[float, float]
    weight: float = 1.0

    def __post_init__(self):
        c = np.asarray(self.context, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "context", c)
        l0, l1 = self.action_losses
        if not (np.isfinite(l0) and np.isfinite(l1) and np.isfinite(self.weight)):
            raise ValueError("loss record values must be finite")
        object.__setattr__(self, "action_losses", (float(l0), float(l1)))


class OracleCounter:
    """Counts batch-ERM oracle invocations for one run."""

    def __init__(self):
        self.total = 0

    def spend(self, n: int = 1) -> None:
        self.total += n


def record_costs(records: Sequence[WeightedLossRecord], family: HypothesisFamily) -> np.ndarray:
    """Total weighted loss of every member on the records, shape (n,)."""
    costs = np.zeros(family.n_members)
    if not records:
        return costs
    X = np.vstack([r.context for r in records])
    P = family.predict_matrix(X)  # (n, m)
    w = np.array([r.weight for r in records])
    l0 = np.array([r.action_losses[0] for r in records])
    l1 = np.array([r.action_losses[1] for r in records])
    # weighted loss of member h = sum_r w_r * (l0_r * (1 - P) + l1_r * P)
    costs += (w * l0) @ (1 - P.T)
    costs += (w * l1) @ P.T
    return costs


def erm_oracle(
    records: Sequence[WeightedLossRecord],
    family: HypothesisFamily,
    counter: OracleCounter | None = None,
) -> Hypothesis:
    """Member minimizing the total weighted loss; ties break to the lowest id.

    An empty record list returns member 0. Each call counts as one oracle
    invocation.
    """
    if counter is not None:
        counter.spend()
    if not records:
        return family.members[0]
    costs = record_costs(records, family)
    return family.members[int(np.argmin(costs))]


# --- family builders -------------------------------------------------------


def thresholds_family(
    cutoffs: Sequence[float],
    coord: int = 0,
    polarities: str = "both",
    include_constants: bool = True,
    candidate_pool=None,
    dim: int = 1,
) -> HypothesisFamily:
    """Axis-threshold family on one coordinate, optionally both polarities.

    When no candidate pool is given, one is built from midpoints between
    consecutive cutoffs plus outer points, embedded in `dim` dimensions
    (other coordinates zero).
    """
    cutoffs = sorted(float(c) for c in cutoffs)
    members: list[Hypothesis] = []
    if include_constants:
        members.append(constant_hypothesis(0))
        members.append(constant_hypothesis(1))
    for c in cutoffs:
        members.append(threshold_hypothesis(coord, c, 1))
        if polarities == "both":
            members.append(threshold_hypothesis(coord, c, 0))
    if candidate_pool is None:
        lo, hi = cutoffs[0], cutoffs[-1]
        span = max(hi - lo, 1.0)
        xs = [lo - 0.25 * span]
        xs += [0.5 * (a + b) for a, b in zip(cutoffs[:-1], cutoffs[1:])]
        xs += [hi + 0.25 * span]
        candidate_pool = np.zeros((len(xs), dim))
        candidate_pool[:, coord] = xs
    return HypothesisFamily(members, candidate_pool=candidate_pool)


def conjunctions_family(
    n_features: int,
    subsets: Sequence[Sequence[int]] | None = None,
    include_constants: bool = True,
) -> HypothesisFamily:
    """Conjunctions over binarized features; default: all nonempty subsets."""
    if subsets is None:
        subsets = [
            [j for j in range(n_features) if (mask >> j) & 1]
            for mask in range(1, 2**n_features)
        ]
    members: list[Hypothesis] = []
    if include_constants:
        members.append(constant_hypothesis(0))
        members.append(constant_hypothesis(1))
    members += [conjunction_hypothesis(s) for s in subsets]
    # pool: all-ones plus each one-coordinate-off vector separates conjunctions
    pool = np.ones((n_features + 2, n_features))
    for j in range(n_features):
        pool[j + 1, j] = 0.0
    pool[-1] = 0.0
    return HypothesisFamily(members, candidate_pool=pool)


def explicit_family(pool, tables: Sequence[Sequence[int]]) -> HypothesisFamily:
    """Truth-table family over a finite context pool; Q is the pool itself."""
    pool = _as_points(pool)
    members = [table_hypothesis(pool, bits) for bits in tables]
    return HypothesisFamily(members, separator=pool, candidate_pool=pool)


def family_from_config(cfg: dict) -> HypothesisFamily:
    """Build a family from its run-config block."""
    kind = cfg.get("kind")
    if kind == "thresholds":
        return thresholds_family(
            cfg["cutoffs"],
            coord=cfg.get("coord", 0),
            polarities=cfg.get("polarities", "both"),
            include_constants=cfg.get("constants", True),
            dim=cfg.get("dim", 1),
        )
    if kind == "conjunctions":
        return conjunctions_family(
            cfg["n_features"],
            subsets=cfg.get("subsets"),
            include_constants=cfg.get("constants", True),
        )
    if kind == "explicit":
        return explicit_family(cfg["pool"], cfg["tables"])
    raise ValueError(f"unknown family kind {kind!r}")
