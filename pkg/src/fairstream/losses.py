"""Loss functionals: misclassification, unfairness indicator, the
policy-linear unfairness proxy, the Lagrangian combinations, and the
per-hypothesis slot decomposition fed to the ERM oracle.

Every frozen round carries per-individual per-action error losses, a proxy
context anchored at the empirical policy, and the dual variable and
learning rate current when the round was played. Rounds never mutate once
frozen; the ERM-facing records and the exact Lagrangian values are both
reconstructable from a round.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .auditing import AuditingScheme, aggregate_and_report
from .hypotheses import WeightedLossRecord

__all__ = [
    "MissingLabel",
    "PreconditionViolated",
    "RoundData",
    "ProxyContext",
    "LagrangianRound",
    "misclassification",
    "unfair_indicator",
    "unfair_proxy",
    "lagrangian",
    "slot_decomposition",
    "proxy_dominates_unfair",
]


class MissingLabel(ValueError):
    """Raised when an exact loss is requested for an unobserved label."""


class PreconditionViolated(ValueError):
    """Raised when the proxy-dominance approximation condition fails."""


@dataclass(frozen=True)
class RoundData:
    """One round's individuals and (possibly partially observed) labels.

    Unobserved labels are -1, never defaulted to a value.
    """

    individuals: np.ndarray  # (k, d)
    labels: np.ndarray       # (k,), entries in {0, 1} or -1 when unobserved

    def __post_init__(self):
        X = np.asarray(self.individuals, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(self.labels, dtype=np.int8).reshape(-1)
        if len(X) != len(y):
            raise ValueError("individuals and labels must have equal length")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "individuals", X)
        object.__setattr__(self, "labels", y)

    @property
    def k(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class ProxyContext:
    """Frozen inputs of the unfairness proxy for one round.

    `report` is the pair of slot indices flagged by the scheme when queried
    with the empirical policy at sensitivity alpha_query, or None.
    `tilde_values` are the empirical policy's values at the reported pair.
    """

    report: tuple[int, int] | None
    tilde_values: tuple[float, float] | None
    beta: float
    alpha_query: float

    def __post_init__(self):
        if (self.report is None) != (self.tilde_values is None):
            raise ValueError("tilde_values must be present iff report is present")
        if self.report is not None and self.report[0] == self.report[1]:
            raise ValueError("report indices must differ")


@dataclass(frozen=True)
class LagrangianRound:
    """Per-round loss descriptor frozen into the FTPL history.

    slot_error_losses[i] holds the per-action error losses of slot i; exact
    0-1 losses in full information, inverse-propensity estimates under
    one-sided feedback. error_weight folds the 1/k normalization and the
    accuracy-fairness frontier factor into one scalar.
    """

    individuals: np.ndarray        # (k, d)
    slot_error_losses: np.ndarray  # (k, 2)
    proxy: ProxyContext
    lam: float
    mu: float
    error_weight: float

    def __post_init__(self):
        X = np.asarray(self.individuals, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        L = np.asarray(self.slot_error_losses, dtype=float)
        if L.shape != (len(X), 2):
            raise ValueError("slot_error_losses must have shape (k, 2)")
        if not np.isfinite(L).all():
            raise ValueError("slot losses must be finite")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        X.setflags(write=False)
        L.setflags(write=False)
        object.__setattr__(self, "individuals", X)
        object.__setattr__(self, "slot_error_losses", L)

    @property
    def k(self) -> int:
        return len(self.slot_error_losses)

    def dropped_constant(self) -> float:
        """Policy-independent part of the plain Lagrangian left out of the slots."""
        ctx = self.proxy
        if ctx.report is None:
            return 0.0
        t_l, t_r = ctx.tilde_values
        return self.lam * (ctx.beta - (t_l - t_r))

    def regularizer_constant(self) -> float:
        return -self.mu * self.lam**2 / 2.0


def misclassification(values, labels) -> float:
    """Expected number of mistakes of a policy with the given acceptance values.

    values[i] is the policy's acceptance probability on individual i. Raises
    MissingLabel when any label is unobserved.
    """
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    if (labels < 0).any():
        raise MissingLabel("misclassification needs every label observed")
    return float(np.where(labels == 1, 1.0 - values, values).sum())


def unfair_indicator(report) -> int:
    """1 iff a violation was reported."""
    return 0 if report is None else 1


def unfair_proxy(pair_values, ctx: ProxyContext) -> float:
    """Policy-linear unfairness surrogate anchored at the empirical policy.

    pair_values are the evaluated policy's values at the reported pair
    (ignored for a Null report).
    """
    if ctx.report is None:
        return 0.0
    p_l, p_r = pair_values
    t_l, t_r = ctx.tilde_values
    return float((p_l - p_r) - (t_l - t_r) + ctx.beta)


def lagrangian(values, rnd: LagrangianRound, regularized: bool = False) -> float:
    """Lagrangian loss of a policy with acceptance values on the round's slots."""
    values = np.asarray(values, dtype=float)
    L = rnd.slot_error_losses
    error_term = float(((1.0 - values) * L[:, 0] + values * L[:, 1]).sum())
    out = rnd.error_weight * error_term
    if rnd.proxy.report is not None:
        l, r = rnd.proxy.report
        out += rnd.lam * unfair_proxy((values[l], values[r]), rnd.proxy)
    if regularized:
        out += rnd.regularizer_constant()
    return out


def slot_decomposition(rnd: LagrangianRound) -> list[WeightedLossRecord]:
    """Per-slot ERM records of the round's plain Lagrangian.

    Slot i carries error_weight times its per-action error losses; the
    reported pair (l, r) additionally carries +lam / -lam on action 1. The
    policy-independent constants (lam times the empirical-policy gap and
    offset, and the dual regularizer) shift every hypothesis equally and
    are dropped; dropped_constant()/regularizer_constant() recover them.
    """
    k = rnd.k
    losses = rnd.error_weight * rnd.slot_error_losses
    bonus = np.zeros(k)
    if rnd.proxy.report is not None:
        l, r = rnd.proxy.report
        bonus[l] += rnd.lam
        bonus[r] -= rnd.lam
    return [
        WeightedLossRecord(
            rnd.individuals[i],
            (float(losses[i, 0]), float(losses[i, 1] + bonus[i])),
            1.0,
        )
        for i in range(k)
    ]


def proxy_dominates_unfair(
    scheme: AuditingScheme,
    X,
    pi_values,
    tilde_values,
    alpha: float,
    eps_prime: float,
) -> tuple[float, float]:
    """Both sides of the proxy-dominance bound for a monotone scheme.

    Returns (unfairness at sensitivity alpha under pi, (2/eps') times the
    proxy at sensitivity alpha - eps' anchored at tilde with offset eps').
    Requires max_i |pi(x_i) - tilde(x_i)| <= eps'/4 and asserts lhs <= rhs.
    """
    if not scheme.aggregation.monotone:
        raise ValueError("proxy dominance requires a monotone scheme")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if not 0 < eps_prime <= alpha:
        raise ValueError("eps' must lie in (0, alpha]")
    pi_values = np.asarray(pi_values, dtype=float)
    tilde_values = np.asarray(tilde_values, dtype=float)
    gap = float(np.max(np.abs(pi_values - tilde_values)))
    if gap > eps_prime / 4 + 1e-15:
        raise PreconditionViolated(
            f"approximation gap {gap} exceeds eps'/4 = {eps_prime / 4}"
        )
    _, report = aggregate_and_report(scheme, tilde_values, X, alpha - eps_prime)
    ctx = ProxyContext(
        report=report,
        tilde_values=None if report is None else (
            float(tilde_values[report[0]]), float(tilde_values[report[1]])),
        beta=eps_prime,
        alpha_query=alpha - eps_prime,
    )
    pair_values = (0.0, 0.0) if report is None else (
        float(pi_values[report[0]]), float(pi_values[report[1]]))
    rhs = (2.0 / eps_prime) * unfair_proxy(pair_values, ctx)
    _, report_pi = aggregate_and_report(scheme, pi_values, X, alpha)
    lhs = float(unfair_indicator(report_pi))
    if lhs > rhs + 1e-12:
        raise AssertionError(f"proxy dominance violated: {lhs} > {rhs}")
    return lhs, rhs
