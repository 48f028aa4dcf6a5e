"""Transcription service speaking the hard-label oracle wire protocol."""

from .app import create_app, serve
from .config import AUTH_TOKEN_ENV, DEFAULT_MODEL, ServiceConfig
from .recognizer import (
    HuggingFaceRecognizer,
    ModelLoadError,
    SegmentGridRecognizer,
    load_recognizer,
    normalize_transcript,
)

__all__ = [
    "AUTH_TOKEN_ENV",
    "DEFAULT_MODEL",
    "HuggingFaceRecognizer",
    "ModelLoadError",
    "SegmentGridRecognizer",
    "ServiceConfig",
    "create_app",
    "load_recognizer",
    "normalize_transcript",
    "serve",
]
