"""Invariant suites behind the `verify` CLI: reduced-scale versions of the
module invariants with machine-readable pass/fail results and
counterexample dumps.

Each check returns {"name", "passed", "detail"}; a suite passes iff all its
checks do. The pytest acceptance module runs the same batteries at their
full contracted scale.
"""

from __future__ import annotations

import numpy as np

from .auditing import (
    AggregationFunction,
    AuditingScheme,
    TableAuditor,
    enumerate_monotone_tables,
    is_monotone,
    pivot_auditor,
    pivot_prefix_length,
    random_monotone_function,
)
from .environment import (
    best_fair_in_hindsight,
    comparator_constraints,
    containment_check,
    sample_feasible_policies,
)
from .ftpl import (
    FtplHistory,
    PerturbationConfig,
    estimate_policy,
    geometric_resample,
    sample_hypothesis,
)
from .hypotheses import (
    OracleCounter,
    Policy,
    erm_oracle,
    explicit_family,
    policy_values,
    thresholds_family,
)
from .losses import PreconditionViolated, proxy_dominates_unfair

__all__ = [
    "SUITES",
    "run_suite",
    "pivot_grid_agreement",
    "fig1_panel_distances",
    "fig1_rule_pivot_or_majority",
    "fig1_rule_both_extremes",
    "random_dominance_trial",
    "singleton_indicator_family",
    "truncated_geometric_mean",
    "run_containment_rounds",
]


# --- shared fixtures and oracles --------------------------------------------


def fig1_panel_distances() -> np.ndarray:
    """The five panel distances of the worked diagram, in panel order 1..5."""
    return np.array([0.53, 0.10, 0.30, 0.65, 0.38])


def fig1_rule_pivot_or_majority() -> AggregationFunction:
    """Objects iff auditor 3 objects or at least an 80% majority is reached."""
    return AggregationFunction.from_callable(
        5, lambda v: v[2] == 1 or sum(v) >= 4, name="j3-or-80pct"
    )


def fig1_rule_both_extremes() -> AggregationFunction:
    """Objects iff both auditor 1 and auditor 5 object."""
    return AggregationFunction.conjunction(5, (0, 4))


def pivot_grid_agreement(f, distances, gaps, alphas) -> tuple[int, int]:
    """Cases and mismatches of scheme-vs-pivot bits over a gap x alpha grid.

    One fixed pair with the given per-auditor distances; the scheme bit is
    the aggregation applied to the per-auditor objection bits, the pivot bit
    is the single pivot auditor's objection bit.
    """
    distances = np.asarray(distances, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    order = np.argsort(distances, kind="stable")
    c = pivot_prefix_length(f, order)
    G = gaps[:, None]
    A = alphas[None, :]
    bits = (G[..., None] > distances[None, None, :] + A[..., None]).astype(np.uint8)
    scheme_bit = f.evaluate(bits)
    if c is None:
        pivot_bit = np.zeros_like(scheme_bit)
    elif c == 0:
        pivot_bit = np.ones_like(scheme_bit)
    else:
        pivot_bit = (G > distances[order[c - 1]] + A).astype(np.uint8)
    return scheme_bit.size, int((scheme_bit != pivot_bit).sum())


def random_dominance_trial(rng: np.random.Generator) -> tuple[float, float]:
    """One random precondition-satisfying proxy-dominance instance.

    Draws a monotone scheme over table auditors, an anchor policy's values,
    and an evaluated policy within eps'/4 per point, then returns both sides
    of the bound (the callee asserts lhs <= rhs).
    """
    k = int(rng.integers(2, 5))
    m = int(rng.integers(1, 4))
    alpha = float(rng.uniform(0.05, 1.0))
    eps_prime = float(rng.uniform(0.01, alpha))
    panel = []
    for _ in range(m):
        upper = rng.uniform(0, 1, size=(k, k))
        D = np.triu(upper, 1)
        D = D + D.T
        panel.append(TableAuditor(D))
    tables = enumerate_monotone_tables(m)
    f = AggregationFunction(m, np.frombuffer(tables[int(rng.integers(len(tables)))], dtype=np.uint8))
    scheme = AuditingScheme(tuple(panel), f)
    tilde = rng.uniform(0, 1, size=k)
    pi = np.clip(tilde + rng.uniform(-eps_prime / 4, eps_prime / 4, size=k), 0, 1)
    X = np.arange(k, dtype=float).reshape(-1, 1)
    return proxy_dominates_unfair(scheme, X, pi, tilde, alpha, eps_prime)


def singleton_indicator_family(n: int):
    """n table hypotheses, member i firing only on pool point i.

    The perturbed-leader race over this family is exactly uniform (each
    member's relative noise is one i.i.d. Laplace difference), which pins
    the match probability of pool point 0 at 1/n for action 1.
    """
    pool = np.arange(n, dtype=float).reshape(-1, 1)
    tables = np.eye(n, dtype=int).tolist()
    return explicit_family(pool, tables)


def truncated_geometric_mean(q: float, M: int) -> float:
    """Closed-form mean of min(Geometric(q), M)."""
    return (1.0 - (1.0 - q) ** M) / q


def _small_threshold_family():
    return thresholds_family([-0.9, -0.3, 0.3, 0.9], coord=0, dim=2)


def _small_scheme() -> AuditingScheme:
    from .auditing import L1Auditor

    panel = (
        L1Auditor([0.3, 0.5]),
        L1Auditor([0.5, 0.5]),
        L1Auditor([0.7, 0.5]),
    )
    return AuditingScheme(panel, AggregationFunction.majority(3, 0.5))


def run_containment_rounds(seed: int, T: int = 40):
    """A small full-information run; returns (frozen rounds, stream rounds, family)."""
    from .environment import Stream
    from .learners import FullInfoLearner, make_hyperparameters
    from .rng import substream_seed

    family = _small_threshold_family()
    hp = make_hyperparameters(
        T=T, k=2, s=family.s, alpha=0.4, epsilon=0.3, delta=0.1,
        mode="full", n_members=family.n_members,
    )
    spec = {
        "kind": "iid-gaussian",
        "label": {"kind": "noisy-threshold", "cutoff": 0.0, "noise": 0.1},
        "boundary_feature": True,
        "scheme": {
            "panel": [
                {"kind": "l1", "weights": [0.3, 0.5]},
                {"kind": "l1", "weights": [0.5, 0.5]},
                {"kind": "l1", "weights": [0.7, 0.5]},
            ],
            "aggregation": {"kind": "majority", "theta": 0.5},
        },
    }
    stream = Stream(spec, 2, T, substream_seed(seed, "stream"))
    learner = FullInfoLearner(family, hp, seed)
    rounds = []
    for t in range(1, T + 1):
        X, y, scheme = stream.round(t)
        rounds.append((X, y, scheme))
        learner.play_round(X, y, scheme)
    return learner.history.rounds, rounds, family


# --- suites ------------------------------------------------------------------


def _check(name: str, passed: bool, detail: str = "") -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def suite_auditing() -> list[dict]:
    checks = []
    n3 = len(enumerate_monotone_tables(3))
    checks.append(_check("monotone-count-arity3", n3 == 20, f"found {n3}, expected 20"))
    n4 = len(enumerate_monotone_tables(4))
    checks.append(_check("monotone-count-arity4", n4 == 168, f"found {n4}, expected 168"))

    rng = np.random.default_rng(7)
    gaps = np.arange(-1.0, 1.0 + 1e-9, 0.02)
    alphas = np.array([0.0, 0.05, 0.1, 0.3])
    cases = mismatches = 0
    for table in enumerate_monotone_tables(3):
        f = AggregationFunction(3, np.frombuffer(table, dtype=np.uint8))
        for _ in range(6):
            n, bad = pivot_grid_agreement(f, rng.uniform(0, 1, 3), gaps, alphas)
            cases += n
            mismatches += bad
    for m in (4, 5):
        for _ in range(20):
            f = random_monotone_function(m, rng)
            n, bad = pivot_grid_agreement(f, rng.uniform(0, 1, m), gaps, alphas)
            cases += n
            mismatches += bad
    checks.append(_check(
        "pivot-grid-agreement", mismatches == 0,
        f"{mismatches} mismatches over {cases} cases"))

    d = fig1_panel_distances()
    panel = tuple(TableAuditor(np.array([[0.0, di], [di, 0.0]])) for di in d)
    pair = (np.array([0.0]), np.array([1.0]))
    _, aud1 = pivot_auditor(fig1_rule_pivot_or_majority(), panel, pair)
    _, aud5 = pivot_auditor(fig1_rule_both_extremes(), panel, pair)
    ok = aud1 is panel[2] and aud5 is panel[0]
    checks.append(_check("fig1-pivots", ok, "expected pivots: auditor 3 then auditor 1"))

    checks.append(_check(
        "monotone-detector",
        is_monotone(AggregationFunction.majority(3, 0.5))
        and is_monotone(AggregationFunction.disjunction(3, (1,)))
        and not is_monotone(AggregationFunction.exactly_one(2))
        and not is_monotone(AggregationFunction.parity(3)),
        "majority/veto monotone, exactly-one/xor not",
    ))

    # realized profiles in ascending-distance order must be prefixes
    prefix_ok = True
    for _ in range(300):
        m = int(rng.integers(1, 6))
        dists = rng.uniform(0, 1, m)
        gap = rng.uniform(-1, 1)
        alpha = float(rng.choice(alphas))
        bits = (gap > dists + alpha).astype(np.uint8)
        sorted_bits = bits[np.argsort(dists, kind="stable")]
        if not (np.diff(sorted_bits.astype(int)) <= 0).all():
            prefix_ok = False
            break
    checks.append(_check("prefix-structure", prefix_ok, "sorted objection profiles are 1..10..0"))
    return checks


def suite_lemmas(trials: int = 100_000) -> list[dict]:
    checks = []
    rng = np.random.default_rng(11)
    failures = 0
    example = ""
    for i in range(trials):
        try:
            random_dominance_trial(rng)
        except AssertionError as exc:
            failures += 1
            if not example:
                example = f"trial {i}: {exc}"
        except PreconditionViolated:
            raise
    checks.append(_check(
        "proxy-dominance", failures == 0,
        example or f"{trials} randomized instances"))

    worst = -np.inf
    n_policies = 0
    for seed in range(3):
        frozen, rounds, family = run_containment_rounds(seed)
        policies = sample_feasible_policies(
            rounds, family, alpha_c=0.1, n=10, rng=np.random.default_rng(100 + seed))
        for pol in policies:
            ok, value = containment_check(frozen, family, pol)
            worst = max(worst, value)
            n_policies += 1
    checks.append(_check(
        "baseline-containment", worst <= 1e-9,
        f"max proxy {worst:.3e} over {n_policies} feasible policies"))
    return checks


def suite_ftpl() -> list[dict]:
    checks = []
    family = singleton_indicator_family(2)
    history = FtplHistory(family)
    pert = PerturbationConfig(1.0)
    rng = np.random.default_rng(3)
    ids = estimate_policy(history, pert, 10_000, rng).sample_ids
    frac = float((ids == 0).mean())
    checks.append(_check(
        "race-symmetry", abs(frac - 0.5) <= 0.02, f"member-0 rate {frac:.4f}"))

    # single draws must reproduce the ERM oracle over the explicit union
    from .hypotheses import WeightedLossRecord
    from .losses import LagrangianRound, ProxyContext

    fam2 = _small_threshold_family()
    hist2 = FtplHistory(fam2)
    rng_hist = np.random.default_rng(5)
    for _ in range(4):
        X = np.stack([rng_hist.standard_normal(2), rng_hist.choice([-1.0, 1.0], 2)], axis=1)
        y = rng_hist.integers(0, 2, size=2)
        hist2.append(LagrangianRound(
            individuals=X,
            slot_error_losses=np.stack([(y != 0), (y != 1)], axis=1).astype(float),
            proxy=ProxyContext(None, None, 0.1, 0.2),
            lam=0.0,
            mu=0.1,
            error_weight=0.5,
        ))
    agree = True
    for trial in range(50):
        seed = 1000 + trial
        drawn = sample_hypothesis(hist2, PerturbationConfig(0.5), np.random.default_rng(seed))
        # replay the same noise through the explicit record union
        rng_replay = np.random.default_rng(seed)
        z = (rng_replay.standard_exponential((fam2.s, 2))
             - rng_replay.standard_exponential((fam2.s, 2))) * 2.0
        fakes = [
            WeightedLossRecord(fam2.separator[i], (z[i, 0], z[i, 1]), 1.0)
            for i in range(fam2.s)
        ]
        explicit = erm_oracle(hist2.all_records() + fakes, fam2)
        if explicit.hid != drawn.hid:
            agree = False
            break
    checks.append(_check("sampler-matches-erm", agree, "50 seeded draws"))

    q, M = 0.5, 100
    fam = singleton_indicator_family(2)
    hist = FtplHistory(fam)
    rngK = np.random.default_rng(9)
    Ks = [geometric_resample(np.array([0.0]), 1, hist, pert, M, rngK) for _ in range(30_000)]
    mean = float(np.mean(Ks))
    target = truncated_geometric_mean(q, M)
    checks.append(_check(
        "geometric-resample-mean", abs(mean - target) <= 0.02 * target,
        f"mean {mean:.4f} vs {target:.4f}"))
    return checks


def suite_comparator() -> list[dict]:
    checks = []
    _, rounds, family = run_containment_rounds(0, T=30)
    result = best_fair_in_hindsight(rounds, family, alpha_c=0.1)
    checks.append(_check(
        "feasibility-slack", result.max_slack <= 1e-9,
        f"max slack {result.max_slack:.3e} over {result.n_constraints} constraints"))

    # grid oracle on a 3-member family
    pool = np.array([[0.0], [1.0], [2.0]])
    fam3 = explicit_family(pool, [[0, 0, 0], [1, 1, 1], [0, 1, 1]])
    scheme = AuditingScheme(
        (TableAuditor(np.array([[0, 0.05, 0.9], [0.05, 0, 0.9], [0.9, 0.9, 0]])),),
        AggregationFunction.majority(1, 1.0),
    )
    X = pool
    y = np.array([0, 1, 1], dtype=np.int8)
    rounds3 = [(X, y, scheme)]
    res3 = best_fair_in_hindsight(rounds3, fam3, alpha_c=0.0)
    A, b = comparator_constraints(rounds3, fam3, 0.0)
    grid = np.arange(0.0, 1.0 + 1e-12, 0.01)
    gw = np.array([
        (w0, w1, 1.0 - w0 - w1)
        for w0 in grid
        for w1 in grid
        if w0 + w1 <= 1.0 + 1e-12
    ])
    feasible = (A @ gw.T <= b[:, None] + 1e-9).all(axis=0)
    P = fam3.predict_matrix(X)
    c = (P != y[None, :]).sum(axis=1).astype(float)
    values = gw[feasible] @ c
    checks.append(_check(
        "grid-cross-check", res3.total_error <= values.min() + 1e-9,
        f"lp {res3.total_error:.6f} vs grid {values.min():.6f}"))

    res_loose = best_fair_in_hindsight(rounds3, fam3, alpha_c=1.0)
    best_member = c.min()
    checks.append(_check(
        "vacuous-alpha", abs(res_loose.total_error - best_member) <= 1e-9,
        f"unconstrained optimum {best_member}"))
    return checks


def suite_accounting() -> list[dict]:
    from .environment import LabelCurtain, Stream
    from .learners import FullInfoLearner, PartialInfoLearner, make_hyperparameters
    from .rng import substream_seed

    checks = []
    family = _small_threshold_family()
    spec = {
        "kind": "iid-gaussian",
        "label": {"kind": "noisy-threshold", "cutoff": 0.0, "noise": 0.1},
        "boundary_feature": True,
        "scheme": {
            "panel": [{"kind": "l1", "weights": [0.5, 0.5]}],
            "aggregation": {"kind": "majority", "theta": 1.0},
        },
    }
    T = 5
    hp_full = make_hyperparameters(T=T, k=2, s=family.s, alpha=1.0, epsilon=1.0,
                                   delta=0.5, mode="full", n_members=family.n_members)
    stream = Stream(spec, 2, T, substream_seed(0, "stream"))
    learner = FullInfoLearner(family, hp_full, 0)
    ok_full = True
    for t in range(1, T + 1):
        X, y, scheme = stream.round(t)
        log = learner.play_round(X, y, scheme)
        ok_full &= log.oracle_calls == hp_full.R + 1
    checks.append(_check("full-round-calls", ok_full, f"R+1 = {hp_full.R + 1} per round"))

    hp_part = make_hyperparameters(T=T, k=2, s=family.s, alpha=1.0, epsilon=1.0,
                                   delta=0.5, mode="partial", n_members=family.n_members)
    learner_p = PartialInfoLearner(family, hp_part, 0)
    ok_part = True
    for t in range(1, T + 1):
        X, y, scheme = stream.round(t)
        log = learner_p.play_round(X, LabelCurtain(y), scheme)
        ok_part &= log.oracle_calls == hp_part.R + 1 + log.sum_K
        ok_part &= log.sum_K <= 2 * hp_part.M
    checks.append(_check(
        "partial-round-calls", ok_part, f"R+1+sum(K), sum(K) <= kM = {2 * hp_part.M}"))
    return checks


SUITES = {
    "auditing": suite_auditing,
    "lemmas": suite_lemmas,
    "ftpl": suite_ftpl,
    "comparator": suite_comparator,
    "accounting": suite_accounting,
}


def run_suite(name: str) -> dict:
    """Run one named suite (or 'all'); returns a machine-readable report."""
    if name == "all":
        checks = []
        for key in SUITES:
            checks.extend(
                {**chk, "name": f"{key}.{chk['name']}"} for chk in SUITES[key]()
            )
    elif name in SUITES:
        checks = SUITES[name]()
    else:
        raise ValueError(f"unknown suite {name!r}; pick from {sorted(SUITES)} or 'all'")
    return {"suite": name, "passed": all(c["passed"] for c in checks), "checks": checks}
