"""Rule-ensemble learning with elicited expert risk assessments.

Workflow: fit boosted trees on tabular binary-outcome data, convert them to
conjunctive rules, select rules with L1-penalized logistic regression, have
experts rate each rule's subpopulation risk through the questionnaire
service, quantify expert/data disagreement as rank deltas, and refit models
that penalize (hard or soft) the rules experts distrust.
"""

from .boosting import GbmConfig, GbmModel, GradientBoostedTrees, fit_gbm, predict_gbm
from .data import (
    Dataset,
    FeatureSpec,
    MeanImputer,
    impute_mean,
    load_csv,
    load_schema,
    save_csv,
    save_schema,
    stratified_split,
    subsample_stratified,
)
from .eaml import (
    EamlConfig,
    fit_general_eaml,
    fit_hard_eaml,
    fit_soft_eaml,
    select_hyperparams,
    soft_penalty_weights,
)
from .elicitation import (
    AssessmentSummary,
    DeltaRanking,
    ExpertAssessment,
    aggregate,
    compute_delta_ranking,
    empirical_risk,
    empirical_risks,
    outlier_rules,
    quintile_calibration,
)
from .evaluation import (
    EvalReport,
    LearningCurve,
    auc,
    balanced_accuracy,
    learning_curve,
    shift_eval,
    wilcoxon_rank_sum,
)
from .linear import (
    LinearRuleModel,
    PenalizedLogistic,
    fit_penalized_logistic,
    lambda_path,
    predict_linear,
)
from .pipeline import PipelineConfig, RuleEnsembleClassifier, run_rulefit
from .rules import (
    Condition,
    Rule,
    RuleBinarizer,
    RuleCard,
    RuleMatrix,
    build_rule_matrix,
    evaluate_rule,
    extract_leaf_rules,
    extract_rules,
    filter_by_support,
    prediction_via_rules,
    render_rule_card,
    rule_mask,
)
from .synthetic import SimulatedExpertSpec, SyntheticSpec, generate, simulate_experts
from .validation import ConvergenceError, DataError

__version__ = "0.1.0"

__all__ = [
    "AssessmentSummary",
    "Condition",
    "ConvergenceError",
    "DataError",
    "Dataset",
    "DeltaRanking",
    "EamlConfig",
    "EvalReport",
    "ExpertAssessment",
    "FeatureSpec",
    "GbmConfig",
    "GbmModel",
    "GradientBoostedTrees",
    "LearningCurve",
    "LinearRuleModel",
    "MeanImputer",
    "PenalizedLogistic",
    "PipelineConfig",
    "Rule",
    "RuleBinarizer",
    "RuleCard",
    "RuleEnsembleClassifier",
    "RuleMatrix",
    "SimulatedExpertSpec",
    "SyntheticSpec",
    "aggregate",
    "auc",
    "balanced_accuracy",
    "build_rule_matrix",
    "compute_delta_ranking",
    "empirical_risk",
    "empirical_risks",
    "evaluate_rule",
    "extract_leaf_rules",
    "extract_rules",
    "filter_by_support",
    "fit_gbm",
    "fit_general_eaml",
    "fit_hard_eaml",
    "fit_penalized_logistic",
    "fit_soft_eaml",
    "generate",
    "impute_mean",
    "lambda_path",
    "learning_curve",
    "load_csv",
    "load_schema",
    "outlier_rules",
    "predict_gbm",
    "predict_linear",
    "prediction_via_rules",
    "quintile_calibration",
    "render_rule_card",
    "rule_mask",
    "run_rulefit",
    "save_csv",
    "save_schema",
    "select_hyperparams",
    "shift_eval",
    "simulate_experts",
    "soft_penalty_weights",
    "stratified_split",
    "subsample_stratified",
    "wilcoxon_rank_sum",
]
