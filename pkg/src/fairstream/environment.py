"""Stream generation, the one-sided label curtain, and the exact
fair-in-hindsight comparator.

Streams are reproducible from (spec, seed): every round draws from its own
derived generator, so replaying round t never depends on visit order. The
comparator solves, oracle-side, the linear program minimizing total error
over the member simplex subject to one pivot-auditor bound per realized
ordered pair; the pivot characterization makes the schemes' implicit
constraints explicit and exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .auditing import AuditingScheme, pivot_prefix_length, scheme_from_config
from .hypotheses import HypothesisFamily, Policy, policy_values
from .losses import LagrangianRound, unfair_proxy
from .rng import per_round_rng

__all__ = [
    "LabelCurtain",
    "Stream",
    "ComparatorResult",
    "best_fair_in_hindsight",
    "comparator_constraints",
    "sample_feasible_policies",
    "containment_check",
]


class LabelCurtain:
    """One-sided feedback: label i is revealed only for prediction 1 on slot i.

    The learner interacts through observe() after committing predictions;
    realized_mistakes() is post-commitment scorekeeping. Oracle-side
    consumers (the comparator) read labels directly from the stream.
    """

    def __init__(self, labels):
        self._labels = np.asarray(labels, dtype=np.int8).reshape(-1)

    def observe(self, predictions) -> dict[int, int]:
        predictions = np.asarray(predictions, dtype=np.int8).reshape(-1)
        if len(predictions) != len(self._labels):
            raise ValueError("prediction vector length mismatch")
        return {int(i): int(self._labels[i]) for i in np.flatnonzero(predictions == 1)}

    def realized_mistakes(self, predictions) -> int:
        predictions = np.asarray(predictions, dtype=np.int8).reshape(-1)
        return int((predictions != self._labels).sum())


class Stream:
    """Adversary stand-in: per-round individuals, labels, and scheme.

    kinds: "iid-gaussian" (features N(0,1) on coordinate 0, optional
    boundary-sign coordinate), "grid" (cycles a fixed 1-d grid), "scripted"
    (replays explicit tables verbatim). Labels follow a noisy threshold rule
    unless scripted; the drift option flips the label rule's polarity at
    T/2. Schemes come from the spec's scheme block, optionally cycling a
    list round-robin.
    """

    def __init__(self, spec: dict, k: int, T: int, seed: int):
        self.spec = spec
        self.k = k
        self.T = T
        self.seed = seed
        self.kind = spec.get("kind", "iid-gaussian")
        label = spec.get("label", {"kind": "noisy-threshold"})
        self.label_kind = label.get("kind", "noisy-threshold")
        self.label_cutoff = float(label.get("cutoff", 0.0))
        self.label_noise = float(label.get("noise", 0.0))
        # optional high-noise band around the cutoff
        self.label_band = float(label.get("band", 0.0))
        self.label_band_noise = float(label.get("band_noise", self.label_noise))
        self.drift = bool(spec.get("drift", False))
        self.boundary_feature = bool(spec.get("boundary_feature", False))
        if "scheme_cycle" in spec:
            self._schemes = [scheme_from_config(c) for c in spec["scheme_cycle"]]
        else:
            self._schemes = [scheme_from_config(spec["scheme"])]
        if self.kind == "grid":
            self._grid = np.asarray(spec["grid"], dtype=float).reshape(-1)
        if self.kind == "scripted":
            self._points = np.asarray(spec["points"], dtype=float)
            self._labels = np.asarray(spec["labels"], dtype=np.int8)

    def scheme_at(self, t: int) -> AuditingScheme:
        return self._schemes[(t - 1) % len(self._schemes)]

    def round(self, t: int) -> tuple[np.ndarray, np.ndarray, AuditingScheme]:
        """Individuals, labels, and scheme for round t (1-based); deterministic in (seed, t)."""
        if not 1 <= t <= self.T:
            raise ValueError(f"round {t} outside horizon 1..{self.T}")
        scheme = self.scheme_at(t)
        if self.kind == "scripted":
            X = self._points[t - 1]
            y = self._labels[t - 1]
            return X, y, scheme
        rng = per_round_rng(self.seed, t)
        if self.kind == "iid-gaussian":
            base = rng.standard_normal(self.k)
        elif self.kind == "grid":
            idx = (np.arange(self.k) + (t - 1) * self.k) % len(self._grid)
            base = self._grid[idx]
        else:
            raise ValueError(f"unknown stream kind {self.kind!r}")
        positive = base > self.label_cutoff
        if self.drift and t > self.T // 2:
            positive = ~positive
        y = positive.astype(np.int8)
        flip_prob = np.where(
            np.abs(base - self.label_cutoff) < self.label_band,
            self.label_band_noise,
            self.label_noise,
        )
        if (flip_prob > 0).any():
            flip = rng.random(self.k) < flip_prob
            y = (y ^ flip).astype(np.int8)
        if self.boundary_feature:
            sign = np.where(base >= self.label_cutoff, 1.0, -1.0)
            X = np.stack([base, sign], axis=1)
        else:
            X = base.reshape(-1, 1)
        return X, y, scheme

    def materialize(self) -> list[tuple[np.ndarray, np.ndarray, AuditingScheme]]:
        return [self.round(t) for t in range(1, self.T + 1)]


@dataclass(frozen=True)
class ComparatorResult:
    """Best fixed fair-in-hindsight mixture and its certificate."""

    policy: Policy
    total_error: float
    max_slack: float
    n_constraints: int


def comparator_constraints(
    rounds, family: HypothesisFamily, alpha_c: float
) -> tuple[np.ndarray, np.ndarray]:
    """Explicit LP rows: one pivot bound per realized ordered pair.

    Row (t, l, r): sum_h w_h (h(x_l) - h(x_r)) <= d_pivot(x_l, x_r) + alpha_c.
    Rows that cannot bind (never-objecting pivot, bound >= 1, or no member
    separating the pair against a nonnegative bound) are dropped; duplicate
    difference vectors keep their tightest bound.
    """
    rows: dict[bytes, tuple[np.ndarray, float]] = {}
    for X, _, scheme in rounds:
        X = np.asarray(X, dtype=float)
        k = len(X)
        P = family.predict_matrix(X).astype(np.int8)
        dists = np.stack([j.distance_matrix(X) for j in scheme.panel])  # (m, k, k)
        f = scheme.aggregation
        for l in range(k):
            for r in range(k):
                if l == r:
                    continue
                d_pair = dists[:, l, r]
                order = np.argsort(d_pair, kind="stable")
                c = pivot_prefix_length(f, order)
                if c is None:
                    continue  # scheme never objects on any pair
                if c == 0:
                    raise ValueError(
                        "scheme accepts the empty objection profile; no policy is fair"
                    )
                bound = float(d_pair[order[c - 1]] + alpha_c)
                if bound >= 1.0:
                    continue
                v = (P[:, l] - P[:, r]).astype(np.int8)
                if bound >= 0 and (v <= 0).all():
                    continue
                key = v.tobytes()
                if key not in rows or bound < rows[key][1]:
                    rows[key] = (v, bound)
    if not rows:
        return np.zeros((0, family.n_members)), np.zeros(0)
    A = np.array([v for v, _ in rows.values()], dtype=float)
    b = np.array([bound for _, bound in rows.values()])
    return A, b


def _total_error_vector(rounds, family: HypothesisFamily) -> np.ndarray:
    """c[h] = total mistakes of member h over the realized sequence."""
    X_all = np.vstack([np.asarray(X, dtype=float) for X, _, _ in rounds])
    y_all = np.concatenate([np.asarray(y, dtype=np.int8) for _, y, _ in rounds])
    P = family.predict_matrix(X_all)
    return (P != y_all[None, :]).sum(axis=1).astype(float)


# 1e-10 is the tightest tolerance HiGHS accepts
_LP_OPTIONS = {
    "presolve": True,
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


def _solve_simplex(c, A, b, n):
    res = linprog(
        c,
        A_ub=A if len(A) else None,
        b_ub=b if len(b) else None,
        A_eq=np.ones((1, n)),
        b_eq=np.ones(1),
        bounds=(0, None),
        method="highs",
        options=_LP_OPTIONS,
    )
    if not res.success:
        raise RuntimeError(f"comparator LP failed: {res.message}")
    w = np.maximum(res.x, 0.0)
    return w / w.sum()


def best_fair_in_hindsight(
    rounds, family: HypothesisFamily, alpha_c: float
) -> ComparatorResult:
    """Exact best fixed (alpha_c)-fair mixture for the realized sequence.

    Always feasible: constant members have zero prediction gap on every
    pair, and every kept bound is nonnegative.
    """
    c = _total_error_vector(rounds, family)
    A, b = comparator_constraints(rounds, family, alpha_c)
    w = _solve_simplex(c, A, b, family.n_members)
    slack = float(np.max(A @ w - b, initial=0.0))
    return ComparatorResult(
        policy=Policy(w),
        total_error=float(c @ w),
        max_slack=slack,
        n_constraints=len(b),
    )


def sample_feasible_policies(
    rounds,
    family: HypothesisFamily,
    alpha_c: float,
    n: int,
    rng: np.random.Generator,
) -> list[Policy]:
    """Random feasible points: vertices from random objectives plus mixtures."""
    A, b = comparator_constraints(rounds, family, alpha_c)
    m = family.n_members
    n_vertices = min(n, 8)
    vertices = [
        _solve_simplex(rng.standard_normal(m), A, b, m) for _ in range(n_vertices)
    ]
    out = [Policy(v) for v in vertices]
    while len(out) < n:
        coeffs = rng.dirichlet(np.ones(len(vertices)))
        mix = np.tensordot(coeffs, np.array(vertices), axes=1)
        out.append(Policy(mix / mix.sum()))
    return out[:n]


def containment_check(
    history_rounds: list[LagrangianRound],
    family: HypothesisFamily,
    policy: Policy,
    tol: float = 1e-9,
) -> tuple[bool, float]:
    """Whether the policy's unfairness proxy stays nonpositive on every
    frozen round; returns (ok, max proxy observed)."""
    worst = -np.inf
    for rnd in history_rounds:
        ctx = rnd.proxy
        if ctx.report is None:
            continue
        l, r = ctx.report
        pair = rnd.individuals[[l, r]]
        v_l, v_r = policy_values(policy, family, pair)
        worst = max(worst, unfair_proxy((v_l, v_r), ctx))
    if worst == -np.inf:
        worst = 0.0
    return worst <= tol, float(worst)
