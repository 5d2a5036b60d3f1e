"""Concept-bottleneck selective classification with budgeted confirmation.

A front-end predicts the label from human-interpretable concepts; detectors
estimate those concepts from raw features with calibrated probabilities. The
concept uncertainty is propagated exactly through the front-end, a gate
abstains whenever the propagated confidence is too close to even, and a
budgeted planner picks which concepts a human should confirm to resolve the
most abstentions.
"""

from .confirmation import (ConfirmationBudget, ConfirmationCosts,
                           ConfirmationPlan, PlanEntry, apply_confirmation,
                           budget_from_fraction, gain, gain_batch,
                           greedy_select, random_select, write_plan)
from .detectors import (ConceptDetector, DetectorTrainConfig,
                        ProbabilityTable, calibrate_detectors,
                        ingest_probability_table, predict_concepts,
                        predict_concepts_batch, train_detectors,
                        write_probability_table)
from .frontend import (LogisticFrontEnd, LogisticTrainConfig, TabularFrontEnd,
                       corner_index, dumps_frontend, frontend_predict,
                       frontend_predict_batch, load_frontend, loads_frontend,
                       save_frontend, train_frontend_logistic,
                       train_frontend_tabular)
from .gate import (CurvePoint, PlattScaler, accuracy_coverage_curve,
                   apply_gate, default_tau_grid, expected_calibration_error,
                   fit_platt, gate_decisions, tune_threshold,
                   write_curve_points)
from .harness import (METHODS, ExperimentConfig, ExperimentResult, XYScorer,
                      emit_reports, load_config, parse_config_text,
                      run_experiment, train_xy_mlp)
from .propagation import (PropagationConfig, propagate, propagate_exact,
                          propagate_exact_batch, propagate_mc)
from .service import (ConfirmationRejected, ReviewSession, SessionRow,
                      UnknownInstanceError, confirm_concept, replay_log,
                      serve, session_metrics, start_session)
from .synthetic import (SyntheticConfig, generate, oracle_concept_probs,
                        oracle_frontend, read_dataset, write_dataset)
from .types import (ABSTAIN, ConceptProbabilityVector, Dataset, Instance,
                    PartiallyConfirmedVector)

__version__ = "0.1.0"

__all__ = [
    "ABSTAIN",
    "ConceptProbabilityVector",
    "PartiallyConfirmedVector",
    "Instance",
    "Dataset",
    "LogisticFrontEnd",
    "TabularFrontEnd",
    "LogisticTrainConfig",
    "train_frontend_logistic",
    "train_frontend_tabular",
    "frontend_predict",
    "frontend_predict_batch",
    "corner_index",
    "dumps_frontend",
    "loads_frontend",
    "save_frontend",
    "load_frontend",
    "PropagationConfig",
    "propagate",
    "propagate_exact",
    "propagate_exact_batch",
    "propagate_mc",
    "apply_gate",
    "gate_decisions",
    "CurvePoint",
    "accuracy_coverage_curve",
    "default_tau_grid",
    "PlattScaler",
    "fit_platt",
    "expected_calibration_error",
    "tune_threshold",
    "write_curve_points",
    "ConfirmationCosts",
    "ConfirmationBudget",
    "PlanEntry",
    "ConfirmationPlan",
    "gain",
    "gain_batch",
    "greedy_select",
    "random_select",
    "apply_confirmation",
    "budget_from_fraction",
    "write_plan",
    "SyntheticConfig",
    "generate",
    "oracle_concept_probs",
    "oracle_frontend",
    "write_dataset",
    "read_dataset",
    "ConceptDetector",
    "DetectorTrainConfig",
    "ProbabilityTable",
    "train_detectors",
    "predict_concepts",
    "predict_concepts_batch",
    "calibrate_detectors",
    "ingest_probability_table",
    "write_probability_table",
    "METHODS",
    "ExperimentConfig",
    "ExperimentResult",
    "XYScorer",
    "train_xy_mlp",
    "run_experiment",
    "emit_reports",
    "parse_config_text",
    "load_config",
    "SessionRow",
    "ReviewSession",
    "UnknownInstanceError",
    "ConfirmationRejected",
    "start_session",
    "confirm_concept",
    "session_metrics",
    "replay_log",
    "serve",
    "__version__",
]
