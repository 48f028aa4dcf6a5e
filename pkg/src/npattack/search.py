"""Two-step estimation of the boundary distance along a direction.

A coarse pass steps outward by a fixed increment until the transcript flips,
then bisection narrows the bracketing interval down to tolerance.  Every probe
is one oracle query, so query counts are exact and auditable:
``i + ceil(log2(step / tolerance))`` for a flip found at coarse index ``i``.
"""

import math
from dataclasses import dataclass
from typing import Optional

from .audio import Waveform, Direction, perturbed_samples
from .oracle import Oracle, Transcript


@dataclass(frozen=True)
class SearchConfig:
    step: float = 0.01
    tolerance: float = 1e-4
    magnitude_cap: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.tolerance < self.step <= self.magnitude_cap):
            raise ValueError(
                "need 0 < tolerance < step <= magnitude_cap, got "
                f"tol={self.tolerance}, step={self.step}, cap={self.magnitude_cap}"
            )


@dataclass(frozen=True)
class DistanceEstimate:
    """Estimated flip distance.  ``found=False`` carries the cap as a sentinel."""

    lambda_hat: float
    queries_spent: int
    found: bool
    flip_transcript: Optional[Transcript] = None


@dataclass(frozen=True)
class CoarseBracket:
    lo: float
    hi: float
    index: int  # hi == index * step
    queries_spent: int
    flip_transcript: Transcript


def coarse_search(
    oracle: Oracle,
    x: Waveform,
    theta: Direction,
    cfg: SearchConfig,
    base: Transcript,
) -> Optional[CoarseBracket]:
    """Step along ``theta`` until the transcript changes or the cap is passed.

    Returns the bracketing interval ``((i-1)*step, i*step]`` or None when no
    flip occurs at any probed magnitude up to the cap.
    """
    u = theta.unit()
    k = 1
    # Tiny relative slack so a cap that is an exact multiple of step is probed.
    limit = cfg.magnitude_cap * (1.0 + 1e-12)
    while k * cfg.step <= limit:
        lam = k * cfg.step
        got = oracle.transcribe(perturbed_samples(x, u, lam))
        if got != base:
            return CoarseBracket(
                lo=(k - 1) * cfg.step,
                hi=lam,
                index=k,
                queries_spent=k,
                flip_transcript=got,
            )
        k += 1
    return None


def binary_search(
    oracle: Oracle,
    x: Waveform,
    theta: Direction,
    lo: float,
    hi: float,
    tolerance: float,
    base: Transcript,
    flip_transcript: Optional[Transcript] = None,
) -> tuple[float, int, Optional[Transcript]]:
    """Bisect a bracket where ``hi`` flips and ``lo`` does not.

    Returns the flipping endpoint once the bracket width is within tolerance,
    together with the query count and the transcript observed at that endpoint.
    """
    if not (lo < hi):
        raise ValueError(f"invalid bracket [{lo}, {hi}]")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    u = theta.unit()
    queries = 0
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        got = oracle.transcribe(perturbed_samples(x, u, mid))
        queries += 1
        if got != base:
            hi = mid
            flip_transcript = got
        else:
            lo = mid
    return hi, queries, flip_transcript


def estimate_g(
    oracle: Oracle,
    x: Waveform,
    theta: Direction,
    cfg: SearchConfig,
    base: Transcript,
) -> DistanceEstimate:
    """Coarse-then-binary estimate of the flip distance along ``theta``."""
    bracket = coarse_search(oracle, x, theta, cfg, base)
    if bracket is None:
        spent = _coarse_probe_count(cfg)
        return DistanceEstimate(
            lambda_hat=cfg.magnitude_cap, queries_spent=spent, found=False
        )
    lam, refine_queries, flip = binary_search(
        oracle,
        x,
        theta,
        bracket.lo,
        bracket.hi,
        cfg.tolerance,
        base,
        bracket.flip_transcript,
    )
    return DistanceEstimate(
        lambda_hat=lam,
        queries_spent=bracket.queries_spent + refine_queries,
        found=True,
        flip_transcript=flip,
    )


def _coarse_probe_count(cfg: SearchConfig) -> int:
    """Probes spent by a coarse pass that never flips (mirrors the loop exactly)."""
    limit = cfg.magnitude_cap * (1.0 + 1e-12)
    k = 1
    while k * cfg.step <= limit:
        k += 1
    return k - 1


def refine_query_count(cfg: SearchConfig) -> int:
    """Queries the bisection stage spends on a coarse bracket of width ``step``."""
    return math.ceil(math.log2(cfg.step / cfg.tolerance))


def worst_case_queries(cfg: SearchConfig) -> int:
    """Upper bound on queries a single distance estimate can consume."""
    return _coarse_probe_count(cfg) + refine_query_count(cfg)
