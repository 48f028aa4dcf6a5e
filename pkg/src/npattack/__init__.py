"""Hard-label black-box attack on speech recognizers.

Perturbations factor into a direction and a magnitude; the toolkit probes
the smallest transcript-flipping magnitude per direction, trains a neural
predictor of that distance, and descends the predictor to propose new
directions under a strict oracle query budget.
"""

from .audio import Direction, Perturbation, Waveform, apply_perturbation, read_wav, write_wav
from .baselines import RandomBasis, random_basis_search, random_search
from .engine import (
    AttackConfig,
    AttackResult,
    best_adversarial,
    init_dataset,
    queries_to_success,
    run,
)
from .metrics import WerBreakdown, is_success, snr, success_rate, wer
from .oracle import (
    BudgetExhausted,
    QueryLedger,
    RemoteOracle,
    SyntheticOracle,
    SyntheticOracleSpec,
    Transcript,
    closed_form_distance,
)
from .predictor import PredictorParams, TrainConfig, predict, train
from .search import DistanceEstimate, SearchConfig, estimate_g, worst_case_queries

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackResult",
    "BudgetExhausted",
    "Direction",
    "DistanceEstimate",
    "Perturbation",
    "PredictorParams",
    "QueryLedger",
    "RandomBasis",
    "RemoteOracle",
    "SearchConfig",
    "SyntheticOracle",
    "SyntheticOracleSpec",
    "TrainConfig",
    "Transcript",
    "Waveform",
    "WerBreakdown",
    "apply_perturbation",
    "best_adversarial",
    "closed_form_distance",
    "estimate_g",
    "init_dataset",
    "is_success",
    "predict",
    "queries_to_success",
    "random_basis_search",
    "random_search",
    "read_wav",
    "run",
    "snr",
    "success_rate",
    "train",
    "wer",
    "worst_case_queries",
    "write_wav",
]
