"""Auditors, objection matrices, monotone aggregation, auditing schemes, and
the pivot-auditor characterization.

An auditor holds a symmetric distance on individuals into [0, 1] and, given
a policy's acceptance probabilities on a round's k individuals, objects to
the ordered pair (l, r) exactly when probs[l] - probs[r] > d(x_l, x_r) + alpha
(strict). A scheme applies an entrywise aggregation rule to the panel's
objection matrices.

For a monotone rule and a fixed pair, sort the panel ascending by distance
on that pair; only prefix objection profiles (1..1 0..0) are realizable, so
the scheme's decision on the pair always coincides with one auditor's: the
one at the smallest prefix length the rule accepts. Two dummies close the
range: the never-objecting auditor (distance 1 everywhere) for rules that
reject every profile, and an always-objecting auditor for the degenerate
rule that accepts the empty profile (which, being monotone, accepts
everything; no distance in [0, 1] reproduces that, so the dummy objects
outright on every ordered pair).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Auditor",
    "L1Auditor",
    "TableAuditor",
    "ConstantAuditor",
    "NEVER_OBJECTS",
    "ALWAYS_OBJECTS",
    "AggregationFunction",
    "AuditingScheme",
    "NotMonotone",
    "audit_single",
    "is_monotone",
    "aggregate_and_report",
    "pivot_index",
    "pivot_auditor",
    "pivot_prefix_length",
    "enumerate_monotone_tables",
    "random_monotone_function",
    "auditor_from_config",
    "scheme_from_config",
]


class NotMonotone(ValueError):
    """Raised when an operation requires a monotone aggregation function."""


def _points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return X


class Auditor:
    """Base auditor: objection via an implicit distance function."""

    kind = "abstract"

    def distance(self, x, x2) -> float:
        X = np.vstack([_points(x), _points(x2)])
        return float(self.distance_matrix(X)[0, 1])

    def distance_matrix(self, X) -> np.ndarray:
        raise NotImplementedError

    def objections(self, probs, X, alpha: float) -> np.ndarray:
        probs = np.asarray(probs, dtype=float)
        gaps = probs[:, None] - probs[None, :]
        out = (gaps > self.distance_matrix(X) + alpha).astype(np.uint8)
        np.fill_diagonal(out, 0)
        return out


class L1Auditor(Auditor):
    """Weighted L1 distance on features, clipped into [0, 1]."""

    kind = "l1"

    def __init__(self, weights, clip: float = 1.0):
        self.weights = np.asarray(weights, dtype=float).reshape(-1)
        if (self.weights < 0).any():
            raise ValueError("l1 auditor weights must be nonnegative")
        self.clip = float(clip)

    def distance_matrix(self, X) -> np.ndarray:
        X = _points(X)
        diff = np.abs(X[:, None, :] - X[None, :, :])
        return np.minimum(diff @ self.weights, self.clip)


class OffsetL1Auditor(Auditor):
    """Weighted L1 distance plus a constant offset, clipped into [0, 1].

    The offset keeps distinct individuals at least `offset` apart, i.e. the
    auditor tolerates prediction gaps up to offset + alpha on any pair.
    """

    kind = "offset-l1"

    def __init__(self, offset: float, weights, clip: float = 1.0):
        if not 0.0 <= offset <= 1.0:
            raise ValueError("offset must lie in [0, 1]")
        self.offset = float(offset)
        self.weights = np.asarray(weights, dtype=float).reshape(-1)
        if (self.weights < 0).any():
            raise ValueError("offset-l1 auditor weights must be nonnegative")
        self.clip = float(clip)

    def distance_matrix(self, X) -> np.ndarray:
        X = _points(X)
        diff = np.abs(X[:, None, :] - X[None, :, :])
        out = np.minimum(self.offset + diff @ self.weights, self.clip)
        np.fill_diagonal(out, 0.0)
        return out


class TableAuditor(Auditor):
    """Explicit per-pair distances for a fixed round roster, by position."""

    kind = "table"

    def __init__(self, matrix):
        M = np.asarray(matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("distance table must be square")
        if not np.allclose(M, M.T):
            raise ValueError("distance table must be symmetric")
        if ((M < 0) | (M > 1)).any():
            raise ValueError("distances must lie in [0, 1]")
        self.matrix = M

    def distance_matrix(self, X) -> np.ndarray:
        X = _points(X)
        if len(X) != len(self.matrix):
            raise ValueError("table auditor roster size mismatch")
        return self.matrix


class ConstantAuditor(Auditor):
    """Distance equal to a constant in [0, 1] on every pair."""

    kind = "constant"

    def __init__(self, value: float):
        if not 0.0 <= value <= 1.0:
            raise ValueError("constant distance must lie in [0, 1]")
        self.value = float(value)

    def distance_matrix(self, X) -> np.ndarray:
        k = len(_points(X))
        return np.full((k, k), self.value)


class _AlwaysObjects(Auditor):
    """Dummy that objects to every ordered pair regardless of predictions."""

    kind = "always"

    def distance_matrix(self, X) -> np.ndarray:
        k = len(_points(X))
        return np.full((k, k), -np.inf)

    def objections(self, probs, X, alpha: float) -> np.ndarray:
        k = len(_points(X))
        out = np.ones((k, k), dtype=np.uint8)
        np.fill_diagonal(out, 0)
        return out


NEVER_OBJECTS = ConstantAuditor(1.0)
NEVER_OBJECTS.kind = "never"
ALWAYS_OBJECTS = _AlwaysObjects()


def audit_single(auditor: Auditor, probs, X, alpha: float) -> np.ndarray:
    """One auditor's k-by-k objection matrix at sensitivity alpha."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return auditor.objections(probs, X, alpha)


class AggregationFunction:
    """Entrywise aggregation rule over m auditor bits, stored as a truth table.

    Table index packs the profile little-endian: auditor i contributes
    bit i, so profile v maps to sum(v[i] << i).
    """

    def __init__(self, m: int, table, name: str = "table"):
        if m < 1:
            raise ValueError("arity must be >= 1")
        table = np.asarray(table, dtype=np.uint8).reshape(-1)
        if len(table) != 2**m:
            raise ValueError(f"table must have 2^{m} entries")
        self.m = m
        self.table = table
        self.table.setflags(write=False)
        self.name = name

    # constructors ----------------------------------------------------------

    @staticmethod
    def from_callable(m: int, fn: Callable[[tuple[int, ...]], int], name: str = "callable") -> "AggregationFunction":
        profiles = _all_profiles(m)
        table = np.array([1 if fn(tuple(int(b) for b in v)) else 0 for v in profiles], dtype=np.uint8)
        return AggregationFunction(m, table, name)

    @staticmethod
    def majority(m: int, theta: float) -> "AggregationFunction":
        # objects iff at least theta fraction of the panel objects
        return AggregationFunction.from_callable(
            m, lambda v: sum(v) >= theta * m, name=f"majority({theta})"
        )

    @staticmethod
    def disjunction(m: int, subset: Sequence[int]) -> "AggregationFunction":
        subset = tuple(subset)
        return AggregationFunction.from_callable(
            m, lambda v: any(v[i] for i in subset), name=f"disjunction{subset}"
        )

    # a veto member forces the violation on their own: same rule shape
    veto = disjunction

    @staticmethod
    def conjunction(m: int, subset: Sequence[int]) -> "AggregationFunction":
        subset = tuple(subset)
        return AggregationFunction.from_callable(
            m, lambda v: all(v[i] for i in subset), name=f"conjunction{subset}"
        )

    @staticmethod
    def constant(m: int, bit: int) -> "AggregationFunction":
        return AggregationFunction(m, np.full(2**m, bit, dtype=np.uint8), name=f"constant({bit})")

    @staticmethod
    def exactly_one(m: int) -> "AggregationFunction":
        return AggregationFunction.from_callable(m, lambda v: sum(v) == 1, name="exactly-one")

    @staticmethod
    def parity(m: int) -> "AggregationFunction":
        return AggregationFunction.from_callable(m, lambda v: sum(v) % 2 == 1, name="xor")

    # evaluation ------------------------------------------------------------

    def evaluate(self, profiles) -> np.ndarray:
        """Aggregate bit for each profile row of shape (..., m)."""
        profiles = np.asarray(profiles, dtype=np.uint8)
        idx = np.zeros(profiles.shape[:-1], dtype=np.int64)
        for i in range(self.m):
            idx |= profiles[..., i].astype(np.int64) << i
        return self.table[idx]

    def __call__(self, profile) -> int:
        return int(self.evaluate(np.asarray(profile).reshape(1, -1))[0])

    @property
    def monotone(self) -> bool:
        return is_monotone(self)


def _all_profiles(m: int) -> np.ndarray:
    idx = np.arange(2**m, dtype=np.int64)
    return ((idx[:, None] >> np.arange(m)) & 1).astype(np.uint8)


def is_monotone(f: AggregationFunction) -> bool:
    """True iff no single 0->1 flip of a coordinate flips the output 1->0.

    The single-flip check is equivalent to the full profile-order check.
    Truth-table based; arity must stay <= 20.
    """
    if f.m > 20:
        raise ValueError("monotonicity check supports arity <= 20 only")
    table = f.table
    idx = np.arange(2**f.m, dtype=np.int64)
    for i in range(f.m):
        zero_side = (idx >> i) & 1 == 0
        if (table[idx[zero_side]] > table[idx[zero_side] | (1 << i)]).any():
            return False
    return True


@dataclass(frozen=True)
class AuditingScheme:
    """A panel of auditors plus an aggregation function of matching arity."""

    panel: tuple[Auditor, ...]
    aggregation: AggregationFunction

    def __post_init__(self):
        object.__setattr__(self, "panel", tuple(self.panel))
        if len(self.panel) != self.aggregation.m:
            raise ValueError("aggregation arity must match panel size")

    @property
    def m(self) -> int:
        return len(self.panel)


def aggregate_and_report(
    scheme: AuditingScheme, probs, X, alpha: float
) -> tuple[np.ndarray, tuple[int, int] | None]:
    """Aggregate objection matrix plus the reported pair.

    The report is None when the aggregate matrix is all zero, otherwise the
    row-major smallest (l, r) with entry 1 (a deterministic stand-in for the
    scheme's arbitrary selection).
    """
    stack = np.stack(
        [audit_single(j, probs, X, alpha) for j in scheme.panel], axis=-1
    )  # (k, k, m)
    agg = scheme.aggregation.evaluate(stack)
    np.fill_diagonal(agg, 0)
    hits = np.argwhere(agg == 1)
    report = None if len(hits) == 0 else (int(hits[0][0]), int(hits[0][1]))
    return agg, report


def pivot_prefix_length(f: AggregationFunction, order) -> int | None:
    """Smallest c such that objections by the c closest auditors are accepted.

    `order` lists panel indices ascending by distance on the pair. Returns
    None when f rejects every profile. For monotone f only such prefix
    profiles are realizable, so the scheme's decision on the pair equals
    that of the auditor at sorted position c.
    """
    order = list(order)
    if len(order) != f.m:
        raise ValueError("order must be a permutation of the panel")
    idx = 0
    if f.table[0]:
        return 0
    for c, j in enumerate(order, start=1):
        idx |= 1 << j
        if f.table[idx]:
            return c
    return None


def _sorted_panel_order(panel: Sequence[Auditor], pair) -> np.ndarray:
    x_l, x_r = pair
    X = np.vstack([_points(x_l), _points(x_r)])
    d = np.array([j.distance_matrix(X)[0, 1] for j in panel])
    return np.argsort(d, kind="stable")  # ties: original panel index


def pivot_index(f: AggregationFunction, panel: Sequence[Auditor], pair) -> int:
    """Pivot position in {0, .., m+1} indexing (always-dummy, sorted panel, never-dummy).

    Sorting is ascending by distance on the pair, ties by original panel
    index. Computed as the minimum, over accepted objection profiles, of the
    largest sorted position carrying an objection; m+1 when no profile is
    accepted, 0 when the all-zeros profile is accepted.
    """
    if not is_monotone(f):
        raise NotMonotone(f"aggregation {f.name} is not monotone")
    m = f.m
    if len(panel) != m:
        raise ValueError("panel size must match aggregation arity")
    accepted = np.flatnonzero(f.table)
    if len(accepted) == 0:
        return m + 1
    if f.table[0]:
        return 0
    order = _sorted_panel_order(panel, pair)
    # sorted position (1-based) of each panel coordinate
    position = np.empty(m, dtype=np.int64)
    position[order] = np.arange(1, m + 1)
    profiles = _all_profiles(m)[accepted]
    top = np.max(np.where(profiles == 1, position[None, :], 0), axis=1)
    return int(top.min())


def pivot_auditor(
    f: AggregationFunction, panel: Sequence[Auditor], pair
) -> tuple[int, Auditor]:
    """Pivot position plus the auditor whose decision equals the scheme's.

    Position 0 maps to the always-objecting dummy, m+1 to the
    never-objecting dummy; otherwise to the panel member at that sorted
    position.
    """
    i_star = pivot_index(f, panel, pair)
    if i_star == 0:
        return i_star, ALWAYS_OBJECTS
    if i_star == f.m + 1:
        return i_star, NEVER_OBJECTS
    order = _sorted_panel_order(panel, pair)
    return i_star, panel[order[i_star - 1]]


@lru_cache(maxsize=8)
def enumerate_monotone_tables(m: int) -> tuple[bytes, ...]:
    """All monotone truth tables of the given arity (as bytes), m <= 4."""
    if m > 4:
        raise ValueError("exhaustive enumeration supported for m <= 4 only")
    out = []
    size = 2**m
    for code in range(2 ** size):
        table = np.array([(code >> i) & 1 for i in range(size)], dtype=np.uint8)
        if is_monotone(AggregationFunction(m, table)):
            out.append(table.tobytes())
    return tuple(out)


def random_monotone_function(m: int, rng: np.random.Generator) -> AggregationFunction:
    """Random monotone DNF: accept profiles containing one of a few minterms."""
    n_terms = int(rng.integers(1, 4))
    terms = []
    for _ in range(n_terms):
        mask = 0
        while mask == 0:
            mask = int(rng.integers(1, 2**m))
        terms.append(mask)
    idx = np.arange(2**m, dtype=np.int64)
    table = np.zeros(2**m, dtype=np.uint8)
    for mask in terms:
        table |= (idx & mask) == mask
    return AggregationFunction(m, table, name=f"dnf{tuple(terms)}")


# --- config parsing --------------------------------------------------------


def auditor_from_config(cfg: dict) -> Auditor:
    kind = cfg.get("kind")
    if kind == "l1":
        return L1Auditor(cfg["weights"], clip=cfg.get("clip", 1.0))
    if kind == "offset-l1":
        return OffsetL1Auditor(cfg["offset"], cfg["weights"], clip=cfg.get("clip", 1.0))
    if kind == "table":
        return TableAuditor(cfg["matrix"])
    if kind == "constant":
        return ConstantAuditor(cfg["value"])
    if kind == "never":
        return NEVER_OBJECTS
    raise ValueError(f"unknown auditor kind {kind!r}")


def aggregation_from_config(cfg: dict, m: int) -> AggregationFunction:
    kind = cfg.get("kind")
    if kind == "majority":
        return AggregationFunction.majority(m, cfg["theta"])
    if kind in ("veto", "disjunction"):
        return AggregationFunction.disjunction(m, cfg.get("subset", range(m)))
    if kind == "conjunction":
        return AggregationFunction.conjunction(m, cfg.get("subset", range(m)))
    if kind == "table":
        return AggregationFunction(m, cfg["table"])
    raise ValueError(f"unknown aggregation kind {kind!r}")


def scheme_from_config(cfg: dict) -> AuditingScheme:
    panel = tuple(auditor_from_config(a) for a in cfg["panel"])
    aggregation = aggregation_from_config(cfg["aggregation"], len(panel))
    return AuditingScheme(panel, aggregation)
