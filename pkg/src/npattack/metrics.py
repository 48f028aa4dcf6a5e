"""Word error rate, signal-to-noise ratio, and attack success accounting."""

import math
from dataclasses import dataclass

import numpy as np

from .audio import Waveform, linf_norm
from .oracle import Transcript


@dataclass(frozen=True)
class WerBreakdown:
    """Edit operations from one optimal word alignment.

    The scalar rate is invariant across optimal alignments; only the
    substitution vs insertion+deletion split can vary.
    """

    substitutions: int
    insertions: int
    deletions: int
    reference_words: int

    def __post_init__(self):
        counts = (self.substitutions, self.insertions, self.deletions)
        if any(c < 0 for c in counts) or self.reference_words < 1:
            raise ValueError("negative counts or empty reference")
        if self.substitutions + self.deletions > self.reference_words:
            raise ValueError("more substitutions+deletions than reference words")

    @property
    def wer(self) -> float:
        total = self.substitutions + self.insertions + self.deletions
        return total / self.reference_words


def wer(reference: Transcript, hypothesis: Transcript) -> WerBreakdown:
    """Word-level minimum edit distance, unit costs, reference-normalized.

    Ties between alignments are broken in favor of substitutions, so a
    one-word swap reports S=1 rather than one insertion plus one deletion.
    """
    ref = reference.words
    hyp = hypothesis.words
    n, m = len(ref), len(hyp)
    if n == 0:
        raise ValueError("reference transcript is empty")
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            swap = dist[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1])
            dist[i][j] = min(swap, dist[i - 1][j] + 1, dist[i][j - 1] + 1)

    subs = ins = dels = 0
    i, j = n, m
    while i > 0 or j > 0:
        if (
            i > 0
            and j > 0
            and dist[i][j] == dist[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1])
        ):
            subs += ref[i - 1] != hyp[j - 1]
            i -= 1
            j -= 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return WerBreakdown(subs, ins, dels, n)


def snr(x: Waveform, delta: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB: 20 log10(max|x| / max|delta|)."""
    peak_signal = linf_norm(x.samples)
    peak_noise = linf_norm(np.asarray(delta, dtype=np.float64))
    if peak_noise == 0.0:
        raise ValueError("perturbation is identically zero")
    if peak_signal == 0.0:
        raise ValueError("signal is silent")
    return 20.0 * math.log10(peak_signal / peak_noise)


def is_success(
    base: Transcript,
    adv: Transcript,
    magnitude: float,
    lambda_max: float,
    min_wer: float = 0.0,
) -> bool:
    """Whether a perturbation both fits the budget and degrades the transcript.

    ``min_wer`` at or below zero demands only that the transcripts differ;
    a positive threshold demands at least that much word error rate.
    """
    if magnitude <= 0.0:
        raise ValueError("perturbation magnitude must be positive")
    if magnitude > lambda_max:
        return False
    rate = wer(base, adv).wer
    if min_wer <= 0.0:
        return rate > 0.0
    return rate >= min_wer


def success_rate(results) -> float:
    """Percent of successful attacks in a nonempty batch."""
    results = list(results)
    if not results:
        raise ValueError("no attack outcomes given")
    return 100.0 * sum(bool(r) for r in results) / len(results)
