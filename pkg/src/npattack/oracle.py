"""Hard-label transcription oracles.

The attacker sees nothing but final transcripts.  Three oracle flavors share
one interface: synthetic oracles with closed-form decision boundaries (used to
validate the search machinery), and an HTTP client for a remote recognizer.
Every answered query charges a shared :class:`QueryLedger`.
"""

import os
import threading
from dataclasses import dataclass
from typing import Literal, Optional, Protocol

import numpy as np
import requests

from .audio import Waveform, Direction, linf_norm

AUTH_TOKEN_ENV = "NPATTACK_ORACLE_TOKEN"


class OracleError(Exception):
    """Base class for oracle failures."""


class BudgetExhausted(OracleError):
    """The query ledger is spent; the attack should report best-so-far."""


class ConnectionFailure(OracleError):
    """Remote oracle unreachable; no budget consumed."""


class MalformedResponse(OracleError):
    """Remote oracle answered with an unparseable body; no budget consumed."""


class ServiceError(OracleError):
    """Remote oracle answered with an error status; no budget consumed."""

    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"service returned {status}: {detail}")
        self.status = status
        self.detail = detail


@dataclass(frozen=True)
class Transcript:
    """Case-normalized word sequence."""

    words: tuple[str, ...]

    @classmethod
    def from_text(cls, text: str) -> "Transcript":
        return cls(tuple(text.lower().split()))

    def __str__(self) -> str:
        return " ".join(self.words)

    def __len__(self) -> int:
        return len(self.words)


class QueryLedger:
    """Thread-safe monotone query counter with a hard cap."""

    def __init__(self, budget: int):
        if budget < 1:
            raise ValueError("budget must be a positive integer")
        self.budget = budget
        self._used = 0
        self._lock = threading.Lock()

    @property
    def used(self) -> int:
        return self._used

    @property
    def remaining(self) -> int:
        return self.budget - self._used

    def charge(self) -> None:
        with self._lock:
            if self._used >= self.budget:
                raise BudgetExhausted(f"query budget of {self.budget} spent")
            self._used += 1


class Oracle(Protocol):
    ledger: QueryLedger

    def transcribe(self, x: Waveform) -> Transcript: ...


@dataclass(frozen=True)
class SyntheticOracleSpec:
    """Closed-form decision boundary used as a stand-in for a real recognizer.

    ``halfspace``: base transcript where ``normal . s < offset``.
    ``sphere``: base transcript strictly inside the ball around ``center``.
    """

    kind: Literal["halfspace", "sphere"]
    base_text: str = "the quick brown fox jumps"
    alternate_text: str = "the quick brown cat naps"
    normal: Optional[np.ndarray] = None
    offset: float = 0.0
    center: Optional[np.ndarray] = None
    radius: float = 0.0

    def __post_init__(self):
        if self.kind == "halfspace":
            if self.normal is None or not np.any(self.normal):
                raise ValueError("halfspace needs a non-zero normal vector")
            object.__setattr__(
                self, "normal", np.asarray(self.normal, dtype=np.float64)
            )
        elif self.kind == "sphere":
            if self.center is None or self.radius <= 0:
                raise ValueError("sphere needs a center and a positive radius")
            object.__setattr__(
                self, "center", np.asarray(self.center, dtype=np.float64)
            )
        else:
            raise ValueError(f"unknown synthetic oracle kind {self.kind!r}")

    def mistranscribes(self, samples: np.ndarray) -> bool:
        """Whether a point falls outside the base-transcript region."""
        if self.kind == "halfspace":
            return float(self.normal @ samples) >= self.offset
        return float(np.linalg.norm(samples - self.center)) >= self.radius

    def transcript_at(self, samples: np.ndarray) -> Transcript:
        text = self.alternate_text if self.mistranscribes(samples) else self.base_text
        return Transcript.from_text(text)


class SyntheticOracle:
    """Deterministic oracle over a :class:`SyntheticOracleSpec`."""

    def __init__(self, spec: SyntheticOracleSpec, ledger: QueryLedger):
        self.spec = spec
        self.ledger = ledger

    def transcribe(self, x: Waveform) -> Transcript:
        self.ledger.charge()
        return self.spec.transcript_at(x.samples)


def closed_form_distance(
    spec: SyntheticOracleSpec, x: Waveform, theta: Direction
) -> Optional[float]:
    """Exact smallest magnitude along ``theta`` that flips the transcript.

    Ignores clipping, so it is only exact while the ray stays inside (-1, 1);
    callers keep test geometry well inside the valid amplitude range.
    Returns None when the ray never leaves the base region.
    """
    if spec.mistranscribes(x.samples):
        raise ValueError("x is already mistranscribed; no base-side distance")
    u = theta.unit()
    if spec.kind == "halfspace":
        rate = float(spec.normal @ u)
        if rate <= 0.0:
            return None
        return (spec.offset - float(spec.normal @ x.samples)) / rate
    d = x.samples - spec.center
    uu = float(u @ u)
    du = float(d @ u)
    disc = du * du - uu * (float(d @ d) - spec.radius**2)
    # x inside the ball => disc > 0 and exactly one positive root.
    return (-du + np.sqrt(disc)) / uu


class RemoteOracle:
    """Client for the ``/transcribe`` wire protocol.

    Only successfully answered queries consume budget; connection and service
    failures surface as distinct errors and leave the ledger untouched.
    """

    def __init__(
        self,
        url: str,
        ledger: QueryLedger,
        timeout: float = 30.0,
        session: Optional[requests.Session] = None,
    ):
        self.url = url.rstrip("/")
        self.ledger = ledger
        self.timeout = timeout
        self._session = session or requests.Session()
        self._lock = threading.Lock()
        token = os.environ.get(AUTH_TOKEN_ENV)
        if token:
            self._session.headers["Authorization"] = f"Bearer {token}"

    def health(self) -> dict:
        try:
            resp = self._session.get(f"{self.url}/health", timeout=self.timeout)
        except requests.RequestException as exc:
            raise ConnectionFailure(str(exc)) from exc
        if resp.status_code != 200:
            raise ServiceError(resp.status_code, resp.text[:200])
        return resp.json()

    def transcribe(self, x: Waveform) -> Transcript:
        # Lock spans check + request + charge so `used <= budget` holds even
        # under concurrent callers; remote decoding is serialized anyway.
        with self._lock:
            if self.ledger.remaining <= 0:
                raise BudgetExhausted(f"query budget of {self.ledger.budget} spent")
            body = {"sample_rate": x.sample_rate, "samples": x.samples.tolist()}
            try:
                resp = self._session.post(
                    f"{self.url}/transcribe", json=body, timeout=self.timeout
                )
            except requests.RequestException as exc:
                raise ConnectionFailure(str(exc)) from exc
            if resp.status_code != 200:
                try:
                    detail = resp.json().get("error", "")
                except ValueError:
                    detail = resp.text[:200]
                raise ServiceError(resp.status_code, detail)
            try:
                text = resp.json()["transcript"]
            except (ValueError, KeyError, TypeError) as exc:
                raise MalformedResponse(f"bad transcribe response: {exc}") from exc
            if not isinstance(text, str):
                raise MalformedResponse("transcript field is not a string")
            self.ledger.charge()
        return Transcript.from_text(text)


def random_halfspace(
    rng: np.random.Generator,
    x: Waveform,
    margin: float,
    structured: bool = False,
) -> SyntheticOracleSpec:
    """Random halfspace whose boundary sits ``margin`` past ``x`` (in w . s units)."""
    dim = len(x)
    if structured:
        normal = np.ones(dim)
    else:
        normal = rng.standard_normal(dim)
    offset = float(normal @ x.samples) + margin
    return SyntheticOracleSpec(kind="halfspace", normal=normal, offset=offset)


def random_sphere(
    rng: np.random.Generator, x: Waveform, radius: float
) -> SyntheticOracleSpec:
    """Random ball containing ``x`` strictly inside."""
    dim = len(x)
    # Center offset keeps x inside at 40-80% of the radius.
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    rho = radius * rng.uniform(0.4, 0.8)
    center = x.samples + rho * direction
    return SyntheticOracleSpec(kind="sphere", center=center, radius=radius)
