"""Speech recognizers served over the wire protocol.

Two backends share one duck-typed interface: a ``name`` attribute and a
``transcribe(samples, sample_rate) -> str`` method whose output is already
lowercased and whitespace-normalized.

``builtin-segment-grid`` is a self-contained frame classifier with fixed
parameters.  It is not a speech model, but it is a deterministic recognizer
with real decision boundaries, so it stands in wherever no checkpoint can
be fetched: transcripts change under small input perturbations, which is
exactly what a boundary attack needs from its target.  Any other model
identifier is treated as a Hugging Face hub id and loaded through
``transformers``.
"""

import threading

import numpy as np

__all__ = [
    "ModelLoadError",
    "SegmentGridRecognizer",
    "HuggingFaceRecognizer",
    "load_recognizer",
    "normalize_transcript",
]


class ModelLoadError(RuntimeError):
    """The configured model could not be constructed at startup."""


def normalize_transcript(text: str) -> str:
    """Lowercase and collapse all whitespace runs to single spaces."""
    return " ".join(text.lower().split())


class SegmentGridRecognizer:
    """Maps fixed-length audio frames onto a word grid.

    The signal is cut into ``frame_seconds`` frames.  Each frame lands on a
    word through two features:

    * mean absolute amplitude, quantized by ``level_step`` into an index
      into a ten-word bank (frames quieter than ``quiet`` emit nothing);
    * zero-crossing rate, which picks the bank: digit words below
      ``zcr_split``, phonetic-alphabet words above it.

    Every threshold is a decision boundary in input space.  The bank switch
    is the softest one: adding broadband noise to a tonal frame drives the
    crossing rate up long before it moves the energy, so small perturbations
    already flip words.
    """

    name = "builtin-segment-grid"

    frame_seconds = 1.0 / 32.0
    quiet = 0.004
    level_step = 0.01
    zcr_split = 0.2

    _LOW_BANK = ("zero", "one", "two", "three", "four",
                 "five", "six", "seven", "eight", "nine")
    _HIGH_BANK = ("alfa", "bravo", "charlie", "delta", "echo",
                  "foxtrot", "golf", "hotel", "india", "juliett")

    def transcribe(self, samples: np.ndarray, sample_rate: int) -> str:
        s = np.asarray(samples, dtype=np.float64)
        if s.size == 0 or float(np.max(np.abs(s))) < self.quiet:
            return ""
        frame = max(1, int(round(self.frame_seconds * sample_rate)))
        words = []
        for start in range(0, s.size, frame):
            word = self._frame_word(s[start:start + frame])
            if word is not None:
                words.append(word)
        return " ".join(words)

    def _frame_word(self, seg: np.ndarray):
        amp = float(np.mean(np.abs(seg)))
        if amp < self.quiet:
            return None
        level = min(9, int(amp / self.level_step))
        bank = self._HIGH_BANK if self._crossing_rate(seg) > self.zcr_split \
            else self._LOW_BANK
        return bank[level]

    @staticmethod
    def _crossing_rate(seg: np.ndarray) -> float:
        # Exact zeros carry no sign information; skip them rather than
        # letting them fabricate or swallow crossings.
        signs = np.sign(seg)
        nz = signs[signs != 0.0]
        if nz.size < 2:
            return 0.0
        return float(np.mean(nz[1:] != nz[:-1]))


class HuggingFaceRecognizer:
    """Pretrained ASR checkpoint behind the same interface.

    Decoding is greedy (the pipeline default) and the torch seed is pinned
    before every call, so identical audio yields identical transcripts.
    Inputs are linearly resampled to the feature extractor's rate when the
    request rate differs.
    """

    def __init__(self, model_id: str):
        self.name = model_id
        try:
            import torch
            from transformers import pipeline
        except Exception as exc:
            raise ModelLoadError(f"transformers backend unavailable: {exc}") from exc
        self._torch = torch
        try:
            self._pipe = pipeline(
                "automatic-speech-recognition", model=model_id, framework="pt"
            )
        except Exception as exc:
            raise ModelLoadError(f"could not load model {model_id!r}: {exc}") from exc
        extractor = getattr(self._pipe, "feature_extractor", None)
        rate = getattr(extractor, "sampling_rate", None)
        self._model_rate = int(rate) if rate else None

    def transcribe(self, samples: np.ndarray, sample_rate: int) -> str:
        s = np.asarray(samples, dtype=np.float32)
        rate = int(sample_rate)
        if self._model_rate and rate != self._model_rate and s.size > 1:
            n_out = max(1, int(round(s.size * self._model_rate / rate)))
            grid = np.linspace(0.0, s.size - 1.0, n_out)
            s = np.interp(grid, np.arange(s.size), s).astype(np.float32)
            rate = self._model_rate
        self._torch.manual_seed(0)
        with self._torch.no_grad():
            out = self._pipe({"raw": s, "sampling_rate": rate})
        text = out.get("text", "") if isinstance(out, dict) else str(out)
        return normalize_transcript(text)


_BUILTIN = {SegmentGridRecognizer.name: SegmentGridRecognizer}
_hf_backend = HuggingFaceRecognizer


def load_recognizer(model_id: str):
    """Construct the recognizer behind ``model_id``.

    Raises ModelLoadError when the identifier is empty or the backend
    cannot come up, so callers fail at startup instead of per request.
    """
    if not model_id:
        raise ModelLoadError("model identifier must be non-empty")
    builtin = _BUILTIN.get(model_id)
    if builtin is not None:
        return builtin()
    return _hf_backend(model_id)


class SerializedRecognizer:
    """Wrapper that serializes transcribe calls through one lock.

    Backends keep no per-call state, but model inference is not assumed
    reentrant; forcing one call at a time keeps concurrent identical
    requests byte-identical.
    """

    def __init__(self, inner):
        self._inner = inner
        self._lock = threading.Lock()

    @property
    def name(self) -> str:
        return self._inner.name

    def transcribe(self, samples: np.ndarray, sample_rate: int) -> str:
        with self._lock:
            return self._inner.transcribe(samples, sample_rate)
