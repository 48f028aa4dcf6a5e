"""Attack loop: probe directions, fit the distance predictor, descend, repeat.

A run seeds a dataset of (direction, observed distance) pairs by probing
random directions, trains the predictor on it, then in each round descends
the predictor from fresh random starts to propose candidates, resolves them
against the oracle, and refreshes the predictor.  The loop stops as soon as
some probed direction flips the transcript at a magnitude within the
perturbation budget, or when the query budget runs out.

Budget accounting: the caller's oracle keeps its own ledger; the attack
additionally enforces ``query_budget`` through a wrapper, so a run issues at
most ``query_budget`` search queries plus the one initial transcript query.
"""

import dataclasses
from typing import Optional

import numpy as np

from . import predictor as pred
from .audio import Direction, Waveform, apply_perturbation
from .oracle import BudgetExhausted, QueryLedger, Transcript
from .search import SearchConfig, estimate_g, worst_case_queries


@dataclasses.dataclass(frozen=True)
class AttackConfig:
    query_budget: int
    lambda_max: float
    n_init: int = 10
    candidates_per_round: int = 5
    search: SearchConfig = dataclasses.field(default_factory=SearchConfig)
    seed: int = 0
    initial_epochs: int = 300
    refresh_epochs: int = 30
    retrain_from_scratch: bool = False
    train_lr: float = 1e-4
    train_decay: float = 0.99
    train_batch: int = 32
    descent_steps: int = 150
    descent_lr: float = 0.2
    dedup_cosine: float = 0.999

    def __post_init__(self):
        if self.query_budget < 0:
            raise ValueError("query_budget must be nonnegative")
        if self.lambda_max <= 0.0:
            raise ValueError("lambda_max must be positive")
        if self.n_init < 0 or self.candidates_per_round < 1:
            raise ValueError("n_init must be >= 0 and candidates_per_round >= 1")
        need = self.n_init * worst_case_queries(self.search)
        if need > self.query_budget:
            raise ValueError(
                f"query_budget {self.query_budget} cannot cover {self.n_init} "
                f"seed probes at {worst_case_queries(self.search)} worst-case "
                "queries each"
            )
        if not 0.0 < self.dedup_cosine <= 1.0:
            raise ValueError("dedup_cosine must be in (0, 1]")


@dataclasses.dataclass(frozen=True)
class AttackResult:
    success: bool
    best_lambda: float
    best_direction: Optional[Direction]
    queries_used: int
    trace: tuple
    base_transcript: Transcript
    best_transcript: Optional[Transcript]


@dataclasses.dataclass(frozen=True)
class ProbeRecord:
    """One resolved direction: max-normalized values and observed distance.

    ``magnitude`` is the sentinel cap when the direction never crossed the
    boundary (``found`` False).  ``queries_after`` is the attack's query
    count when the probe finished, for trace reconstruction.
    """

    direction: np.ndarray
    magnitude: float
    found: bool
    transcript: Optional[Transcript]
    queries_after: int


class TrainingSet:
    """Growing collection of probe records feeding predictor training."""

    def __init__(self):
        self.records = []
        self.truncated = False

    def __len__(self):
        return len(self.records)

    def add(self, record: ProbeRecord):
        self.records.append(record)

    def arrays(self):
        if not self.records:
            raise ValueError("training set is empty")
        dirs = np.stack([r.direction for r in self.records])
        mags = np.array([r.magnitude for r in self.records])
        return dirs, mags


class _BudgetView:
    """Oracle wrapper that enforces the attack's own query budget."""

    def __init__(self, oracle, budget: int):
        self._oracle = oracle
        self.ledger = QueryLedger(budget)

    def transcribe(self, waveform: Waveform) -> Transcript:
        self.ledger.charge()
        return self._oracle.transcribe(waveform)


def init_dataset(oracle, x: Waveform, n: int, rng, search_cfg: SearchConfig,
                 base: Optional[Transcript] = None) -> TrainingSet:
    """Probe ``n`` uniform random directions and record their distances.

    Runs until ``n`` probes complete or the oracle's budget runs out, in
    which case the partial set is returned with ``truncated`` set.  When
    ``base`` is omitted it is fetched with one extra oracle query.
    """
    if base is None:
        base = oracle.transcribe(x)
    data = TrainingSet()
    dim = len(x)
    for _ in range(n):
        theta = rng.uniform(-1.0, 1.0, dim)
        try:
            est = estimate_g(oracle, x, Direction(theta), search_cfg, base)
        except BudgetExhausted:
            data.truncated = True
            break
        data.add(
            ProbeRecord(
                direction=theta / np.abs(theta).max(),
                magnitude=est.lambda_hat,
                found=est.found,
                transcript=est.flip_transcript,
                queries_after=oracle.ledger.used,
            )
        )
    return data


class _RunState:
    def __init__(self, cap: float):
        self.best_lambda = cap
        self.best_direction = None
        self.best_transcript = None
        self.trace = []

    def absorb(self, record: ProbeRecord):
        if record.found and record.magnitude < self.best_lambda:
            self.best_lambda = record.magnitude
            self.best_direction = Direction(record.direction)
            self.best_transcript = record.transcript
            self.trace.append((record.queries_after, record.magnitude))


def _freshen(candidate, data: TrainingSet, rng, threshold: float):
    """Perturb candidates that nearly duplicate an already-probed direction."""
    norm = np.linalg.norm(candidate)
    if norm == 0.0:
        return rng.uniform(-1.0, 1.0, candidate.shape[0])
    unit = candidate / norm
    for record in data.records:
        ref = record.direction / np.linalg.norm(record.direction)
        if unit @ ref > threshold:
            scale = np.abs(candidate).max()
            return candidate + 0.25 * scale * rng.uniform(-1.0, 1.0, candidate.shape[0])
    return candidate


def run(oracle, x: Waveform, cfg: AttackConfig) -> AttackResult:
    """Execute the full attack and return the best perturbation found."""
    rng = np.random.default_rng(cfg.seed)
    base = oracle.transcribe(x)
    if cfg.query_budget == 0:
        return AttackResult(
            success=False,
            best_lambda=cfg.search.magnitude_cap,
            best_direction=None,
            queries_used=0,
            trace=(),
            base_transcript=base,
            best_transcript=None,
        )
    view = _BudgetView(oracle, cfg.query_budget)
    state = _RunState(cfg.search.magnitude_cap)
    dim = len(x)

    data = init_dataset(view, x, cfg.n_init, rng, cfg.search, base)
    for record in data.records:
        state.absorb(record)

    params = None
    exhausted = data.truncated
    success = (
        state.best_direction is not None and state.best_lambda <= cfg.lambda_max
    )
    # n_init = 0 disables the predictor entirely: the run degenerates to
    # pure random search rather than training on round data alone.
    use_predictor = cfg.n_init > 0
    round_seed = cfg.seed
    while not success and not exhausted:
        if use_predictor and len(data) > 0:
            if params is None or cfg.retrain_from_scratch:
                params = pred.PredictorParams(seed=cfg.seed)
                epochs = cfg.initial_epochs
            else:
                epochs = cfg.refresh_epochs
            round_seed += 1
            pred.train(
                params,
                *data.arrays(),
                pred.TrainConfig(
                    epochs=epochs,
                    batch_size=cfg.train_batch,
                    lr=cfg.train_lr,
                    lr_decay=cfg.train_decay,
                    seed=round_seed,
                ),
            )
            candidates, _ = pred.optimize_directions(
                params, dim, cfg.candidates_per_round,
                cfg.descent_steps, cfg.descent_lr, rng,
            )
        else:
            candidates = rng.uniform(-1.0, 1.0, (cfg.candidates_per_round, dim))
        for cand in candidates:
            cand = _freshen(cand, data, rng, cfg.dedup_cosine)
            if np.abs(cand).max() == 0.0:
                cand = rng.uniform(-1.0, 1.0, dim)
            try:
                est = estimate_g(view, x, Direction(cand), cfg.search, base)
            except BudgetExhausted:
                exhausted = True
                break
            record = ProbeRecord(
                direction=cand / np.abs(cand).max(),
                magnitude=est.lambda_hat,
                found=est.found,
                transcript=est.flip_transcript,
                queries_after=view.ledger.used,
            )
            data.add(record)
            state.absorb(record)
            if (
                state.best_direction is not None
                and state.best_lambda <= cfg.lambda_max
            ):
                success = True
                break

    return AttackResult(
        success=success,
        best_lambda=state.best_lambda,
        best_direction=state.best_direction,
        queries_used=view.ledger.used,
        trace=tuple(state.trace),
        base_transcript=base,
        best_transcript=state.best_transcript,
    )


def best_adversarial(result: AttackResult, x: Waveform) -> Waveform:
    """Realize the best perturbation found as a waveform."""
    if result.best_direction is None:
        raise ValueError("attack never found a crossing direction")
    return apply_perturbation(x, result.best_direction, result.best_lambda)


def queries_to_success(result: AttackResult, lambda_max: float) -> float:
    """Query count at which the trace first met the perturbation budget."""
    for query_index, lam in result.trace:
        if lam <= lambda_max:
            return float(query_index)
    return float("inf")
