"""Query-matched baselines: plain random search and a low-dimensional one.

Both reuse the attack's stopping rules and result shape so traces compare
one-to-one.  ``random_search`` draws directions from the same distribution
and rng stream as the attack's seeding phase, which makes per-seed
comparisons paired rather than merely distribution-matched.
"""

import dataclasses

import numpy as np

from .audio import Direction, Waveform
from .engine import (
    AttackConfig,
    AttackResult,
    ProbeRecord,
    TrainingSet,
    _BudgetView,
    _RunState,
    run,
)
from .oracle import BudgetExhausted
from .search import estimate_g

DEFAULT_BASIS_SIZE = 100


def random_search(oracle, x: Waveform, cfg: AttackConfig) -> AttackResult:
    """Probe i.i.d. uniform directions until success or budget exhaustion."""
    return run(oracle, x, dataclasses.replace(cfg, n_init=0))


class RandomBasis:
    """Fixed random subspace: ``size`` rows of i.i.d. uniform [-1, 1] values."""

    def __init__(self, dim: int, size: int, rng):
        if size < 1 or size > dim:
            raise ValueError("basis size must be in [1, dim]")
        self.matrix = rng.uniform(-1.0, 1.0, (size, dim))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def upsample(self, coeffs: np.ndarray) -> Direction:
        """Lift low-dimensional coefficients into a full direction."""
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.shape != (self.size,):
            raise ValueError(f"expected {self.size} coefficients, got {coeffs.shape}")
        return Direction(self.matrix.T @ coeffs)


def random_basis_search(oracle, x: Waveform, cfg: AttackConfig,
                        basis_size: int = DEFAULT_BASIS_SIZE) -> AttackResult:
    """Random search restricted to the span of a fixed random basis.

    The basis is drawn once per run from the seed, then every probe samples
    uniform coefficients and lifts them to full dimension.
    """
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
    basis = RandomBasis(len(x), basis_size, rng)

    data = TrainingSet()
    success = False
    exhausted = False
    while not success and not exhausted:
        coeffs = rng.uniform(-1.0, 1.0, basis.size)
        if not np.any(coeffs):
            continue
        direction = basis.upsample(coeffs)
        try:
            est = estimate_g(view, x, direction, cfg.search, base)
        except BudgetExhausted:
            exhausted = True
            break
        record = ProbeRecord(
            direction=direction.unit(),
            magnitude=est.lambda_hat,
            found=est.found,
            transcript=est.flip_transcript,
            queries_after=view.ledger.used,
        )
        data.add(record)
        state.absorb(record)
        success = (
            state.best_direction is not None
            and state.best_lambda <= cfg.lambda_max
        )

    return AttackResult(
        success=success,
        best_lambda=state.best_lambda,
        best_direction=state.best_direction,
        queries_used=view.ledger.used,
        trace=tuple(state.trace),
        base_transcript=base,
        best_transcript=state.best_transcript,
    )
