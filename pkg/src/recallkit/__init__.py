"""recallkit: recall-probability models and adaptive study scheduling.

Two knowledge-state models over per-KC trial histories (a logistic
regression on history features and a recurrent power-law forgetting
model), their maximum-likelihood trainers, an AUC evaluation harness, a
synthetic-student simulator, and a greedy weakest-first study scheduler
exposed through a CLI and an HTTP session service.
"""

from .domain import (
    CUED_RECALL,
    Deck,
    DeckItem,
    Direction,
    FormatKind,
    KCHistory,
    QuestionFormat,
    TrialRecord,
    group_histories,
    parse_trial_log,
)
from .evaluation import (
    ConstantPredictor,
    EvaluationReport,
    MLRPredictor,
    RPLPredictor,
    ScoredTrial,
    auc,
    evaluate_model,
    log_likelihood,
    train_test_split,
)
from .mlr import (
    FeatureVector,
    build_training_examples,
    extract_features,
    fit_mlr,
    predict_mlr,
    select_windows,
)
from .optimizers import OptimizerConfig, nelder_mead, newton_raphson
from .params import (
    REFERENCE_MLR_PARAMS,
    REFERENCE_RPL_PARAMS,
    MLRParams,
    RPLParams,
    load_mlr_params,
    load_params,
    load_rpl_params,
    save_mlr_params,
    save_rpl_params,
)
from .rpl import (
    ItemState,
    RecallPrediction,
    StatePair,
    apply_difficulty,
    apply_transfer,
    correct_probability,
    evolve_states,
    fit_rpl,
    init_state,
    predict_rpl,
    recall_probability,
    update_state,
)
from .scheduler import Question, SessionProtocolError, StudySession
from .simulator import SimulationConfig, empirical_forgetting_curve, simulate

__version__ = "0.1.0"

__all__ = [
    "CUED_RECALL",
    "ConstantPredictor",
    "Deck",
    "DeckItem",
    "Direction",
    "EvaluationReport",
    "FeatureVector",
    "FormatKind",
    "ItemState",
    "KCHistory",
    "MLRParams",
    "MLRPredictor",
    "OptimizerConfig",
    "Question",
    "QuestionFormat",
    "REFERENCE_MLR_PARAMS",
    "REFERENCE_RPL_PARAMS",
    "RPLParams",
    "RPLPredictor",
    "RecallPrediction",
    "ScoredTrial",
    "SessionProtocolError",
    "SimulationConfig",
    "StatePair",
    "StudySession",
    "TrialRecord",
    "apply_difficulty",
    "apply_transfer",
    "auc",
    "build_training_examples",
    "correct_probability",
    "empirical_forgetting_curve",
    "evaluate_model",
    "evolve_states",
    "extract_features",
    "fit_mlr",
    "fit_rpl",
    "group_histories",
    "init_state",
    "load_mlr_params",
    "load_params",
    "load_rpl_params",
    "log_likelihood",
    "nelder_mead",
    "newton_raphson",
    "parse_trial_log",
    "predict_mlr",
    "predict_rpl",
    "recall_probability",
    "save_mlr_params",
    "save_rpl_params",
    "select_windows",
    "simulate",
    "train_test_split",
    "update_state",
]
