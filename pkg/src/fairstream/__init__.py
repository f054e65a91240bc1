"""Online learning with individual fairness under monotone multi-auditor
auditing: deterministic, seedable simulation library and experiment harness.
"""

from .auditing import (
    AggregationFunction,
    AuditingScheme,
    Auditor,
    ConstantAuditor,
    L1Auditor,
    NotMonotone,
    TableAuditor,
    aggregate_and_report,
    audit_single,
    is_monotone,
    pivot_auditor,
    pivot_index,
)
from .environment import (
    ComparatorResult,
    LabelCurtain,
    Stream,
    best_fair_in_hindsight,
    containment_check,
    sample_feasible_policies,
)
from .ftpl import (
    EmpiricalPolicy,
    FtplHistory,
    MissingK,
    PerturbationConfig,
    ResamplingConfig,
    estimate_policy,
    geometric_resample,
    sample_hypothesis,
    semi_bandit_loss_estimate,
)
from .harness import ConfigError, RunConfig, RunResult, run, sweep
from .hypotheses import (
    Hypothesis,
    HypothesisFamily,
    OracleCounter,
    Policy,
    UnseparablePair,
    WeightedLossRecord,
    erm_oracle,
    greedy_separator,
    policy_eval,
    policy_values,
)
from .learners import (
    FullInfoLearner,
    Hyperparameters,
    InvalidRange,
    NonMonotoneScheme,
    PartialInfoLearner,
    RoundLog,
    dual_update,
    make_hyperparameters,
)
from .losses import (
    LagrangianRound,
    MissingLabel,
    PreconditionViolated,
    ProxyContext,
    RoundData,
    lagrangian,
    misclassification,
    proxy_dominates_unfair,
    slot_decomposition,
    unfair_indicator,
    unfair_proxy,
)

__version__ = "0.1.0"
