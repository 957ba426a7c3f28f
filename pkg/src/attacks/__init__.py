"""Attack criteria, the MinMax attack, the penalty baseline and the batch driver."""
from src.attacks.batch import AttackJob, attack_success_rate, build_criterion, mean_best_mi, run_attack_batch, run_attack_job
from src.attacks.criteria import AttackCriterion, f_sup_targeted, f_sup_untargeted, f_unsup, hinge
from src.attacks.minmax import minmax_attack
from src.attacks.penalty import SearchBounds, c_schedule, penalty_attack
from src.attacks.projections import c_update, project_box, project_c, stationarity
from src.attacks.similarity import (
    FeatureDistanceSimilarity,
    MineSimilarity,
    ReconstructionSimilarity,
    SimilarityObjective,
    alt_similarity,
    make_similarity,
)
from src.attacks.types import TRACE_HEADER, AttackResult, TraceRow

__all__ = [
    "AttackJob",
    "attack_success_rate",
    "build_criterion",
    "mean_best_mi",
    "run_attack_batch",
    "run_attack_job",
    "AttackCriterion",
    "f_sup_targeted",
    "f_sup_untargeted",
    "f_unsup",
    "hinge",
    "minmax_attack",
    "SearchBounds",
    "c_schedule",
    "penalty_attack",
    "c_update",
    "project_box",
    "project_c",
    "stationarity",
    "FeatureDistanceSimilarity",
    "MineSimilarity",
    "ReconstructionSimilarity",
    "SimilarityObjective",
    "alt_similarity",
    "make_similarity",
    "TRACE_HEADER",
    "AttackResult",
    "TraceRow",
]
