"""Qubit-based distributed anonymous key distribution.

The voter conjugate-codes a random string ``R`` under the combined basis key
``N = N1 ^ N2`` and sends it anonymously together with the combined tag
``T = T1 ^ T2``. Charlie looks up ``N`` by ``T``, measures, and publishes a
random check subset of his outcome; the voter compares it against ``R`` and
either keeps the unchecked bits as the key or aborts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .primitives import bits_str, random_bits, split_key, to_bits, xor_combine
from .qubit_sim import QubitRegister, channel_transmit, encode_conjugate, measure_register
from .transcript import Transcript

__all__ = [
    "PHASES",
    "AqkdAbort",
    "DuplicateTagError",
    "TagRegistry",
    "AnonymityChannel",
    "BasicSetup",
    "trusted_setup",
    "CheckAnnouncement",
    "CharlieRecord",
    "BasicKey",
    "BasicAqkdSession",
    "voter_prepare",
    "charlie_measure_announce",
    "voter_verify_extract",
    "run_basic_session",
]

PHASES = ("prepared", "measured", "checked", "completed", "aborted")
DEFAULT_CHECK_FRACTION = 0.5
DEFAULT_ERROR_THRESHOLD = 0.05
DEFAULT_MAX_RETRIES = 3


class AqkdAbort(RuntimeError):
    def __init__(self, reason: str, mismatch_rate: float = float("nan")):
        super().__init__(reason)
        self.reason = reason
        self.mismatch_rate = mismatch_rate


class DuplicateTagError(ValueError):
    """Charlie has already accepted this tag."""


class TagRegistry:
    """Charlie's single-writer record of tags accepted so far."""

    def __init__(self):
        self._seen: set[str] = set()

    def __contains__(self, tag) -> bool:
        return bits_str(to_bits(tag)) in self._seen

    def __len__(self) -> int:
        return len(self._seen)

    def accept(self, tag) -> None:
        key = bits_str(to_bits(tag))
        if key in self._seen:
            raise DuplicateTagError(f"tag {key} was already used")
        self._seen.add(key)

    def discard(self, tag) -> None:
        self._seen.discard(bits_str(to_bits(tag)))


class AnonymityChannel:
    """Collects messages, strips the sender, and delivers them in shuffled order.

    ``submit`` returns a receipt (delivery slot) that only the sender learns.
    """

    def __init__(self):
        self._queue: list = []

    def submit(self, payload) -> int:
        self._queue.append(payload)
        return len(self._queue) - 1

    def deliver(self, rng: np.random.Generator) -> list[tuple[int, object]]:
        order = rng.permutation(len(self._queue))
        out = [(int(k), self._queue[k]) for k in order]
        self._queue = []
        return out

    def __len__(self) -> int:
        return len(self._queue)


@dataclass(frozen=True)
class BasicSetup:
    """Pre-shared halves ``S_i1 = N_i1 || T_i1`` and ``S_i2 = N_i2 || T_i2``."""

    N1: np.ndarray
    T1: np.ndarray
    N2: np.ndarray
    T2: np.ndarray

    @property
    def N(self) -> np.ndarray:
        return xor_combine(self.N1, self.N2)

    @property
    def T(self) -> np.ndarray:
        return xor_combine(self.T1, self.T2)


def trusted_setup(m: int, tag_len: int, rng: np.random.Generator) -> BasicSetup:
    return BasicSetup(
        N1=random_bits(m, rng), T1=random_bits(tag_len, rng),
        N2=random_bits(m, rng), T2=random_bits(tag_len, rng),
    )


@dataclass(frozen=True)
class CheckAnnouncement:
    T: np.ndarray
    sigma: np.ndarray
    positions: np.ndarray
    received_positions: np.ndarray


@dataclass(frozen=True)
class CharlieRecord:
    """What Charlie keeps privately after announcing."""

    outcome: np.ndarray
    residual_positions: np.ndarray

    @property
    def key(self) -> np.ndarray:
        return self.outcome[self.residual_positions]


@dataclass(frozen=True)
class BasicKey:
    key: np.ndarray
    K_L: np.ndarray
    K_R: np.ndarray
    mismatch_rate: float
    residual_positions: np.ndarray


def voter_prepare(N, rng: np.random.Generator, m: int | None = None) -> tuple[np.ndarray, QubitRegister]:
    N = to_bits(N)
    if m is not None and m != N.size:
        raise ValueError(f"|N| = {N.size} but m = {m}")
    R = random_bits(N.size, rng)
    return R, encode_conjugate(R, N)


def _locate(received: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Index of each position inside the ascending ``received``; -1 where absent."""
    idx = np.searchsorted(received, positions)
    idx[idx >= received.size] = -1
    hit = idx >= 0
    hit[hit] = received[idx[hit]] == positions[hit]
    return np.where(hit, idx, -1)


def _residual(received: np.ndarray, checked: np.ndarray) -> np.ndarray:
    received = np.sort(received)
    idx = _locate(received, checked)
    keep = np.ones(received.size, dtype=bool)
    keep[idx[idx >= 0]] = False
    return received[keep]


def charlie_measure_announce(
    reg: QubitRegister,
    N,
    T,
    rng: np.random.Generator,
    *,
    registry: TagRegistry,
    check_fraction: float = DEFAULT_CHECK_FRACTION,
) -> tuple[CheckAnnouncement, CharlieRecord]:
    """Measure under ``N``, then publish a uniformly chosen check subset.

    The subset has ``ceil(check_fraction * received)`` positions drawn without
    replacement from the received positions.
    """
    N, T = to_bits(N), to_bits(T)
    if T in registry:
        raise DuplicateTagError(f"tag {bits_str(T)} was already used")
    if len(reg) == 0:
        raise ValueError("empty register")
    if N.size != len(reg):
        raise ValueError(f"|N| = {N.size} but register has {len(reg)} qubits")
    if not 0.0 < check_fraction <= 1.0:
        raise ValueError("check_fraction must lie in (0, 1]")
    registry.accept(T)
    meas = measure_register(reg, N, rng)
    received = meas.received
    n_check = math.ceil(check_fraction * received.size)
    positions = np.sort(rng.choice(received, size=n_check, replace=False)) if n_check else received[:0]
    ann = CheckAnnouncement(T=T, sigma=meas.bits[positions], positions=positions, received_positions=received)
    return ann, CharlieRecord(outcome=meas.bits, residual_positions=_residual(received, positions))


def voter_verify_extract(R, ann: CheckAnnouncement, error_threshold: float = DEFAULT_ERROR_THRESHOLD) -> BasicKey:
    """Compare the check subset with ``R``; keep the rest as ``K_L || K_R``.

    Residual bits are the received positions minus the checked ones, in
    ascending position order. Raises :class:`AqkdAbort` on too many
    mismatches or when fewer than two residual bits remain.
    """
    R = to_bits(R)
    if (_locate(np.sort(ann.received_positions), ann.positions) < 0).any():
        raise ValueError("announced check positions must be received positions")
    n = ann.positions.size
    mismatches = int(np.count_nonzero(R[ann.positions] != ann.sigma))
    rate = mismatches / n if n else 0.0
    if n == 0:
        raise AqkdAbort("no check bits announced", rate)
    if rate > error_threshold:
        raise AqkdAbort(f"check mismatch rate {rate:.3f} exceeds {error_threshold}", rate)
    residual = _residual(ann.received_positions, ann.positions)
    if residual.size < 2:
        raise AqkdAbort("no residual key bits", rate)
    key = R[residual]
    K_L, K_R = split_key(key)
    return BasicKey(key=key, K_L=K_L, K_R=K_R, mismatch_rate=rate, residual_positions=residual)


@dataclass
class BasicAqkdSession:
    """Voter-side and Charlie-side record of one run, with its retries."""

    m: int
    setup: BasicSetup
    R: Optional[np.ndarray] = None
    phase: str = "prepared"
    check_fraction: float = DEFAULT_CHECK_FRACTION
    attempts: int = 0
    voter_key: Optional[BasicKey] = None
    charlie_key: Optional[np.ndarray] = None
    mismatch_rate: float = float("nan")
    abort_reason: Optional[str] = None
    transcript: Transcript = field(default_factory=Transcript)

    def advance(self, phase: str) -> None:
        if PHASES.index(phase) <= PHASES.index(self.phase) or self.phase in ("completed", "aborted"):
            raise RuntimeError(f"illegal phase transition {self.phase} -> {phase}")
        self.phase = phase

    @property
    def completed(self) -> bool:
        return self.phase == "completed"


Interceptor = Callable[[QubitRegister, np.random.Generator], QubitRegister]


def run_basic_session(
    m: int,
    rng: np.random.Generator,
    *,
    registry: TagRegistry,
    tag_len: int = 16,
    loss_p: float = 0.0,
    flip_p: float = 0.0,
    attacker: Interceptor | None = None,
    check_fraction: float = DEFAULT_CHECK_FRACTION,
    error_threshold: float = DEFAULT_ERROR_THRESHOLD,
    max_retries: int = DEFAULT_MAX_RETRIES,
    transcript: Transcript | None = None,
) -> BasicAqkdSession:
    """Run the protocol end to end, restarting with fresh keys after an abort.

    Each retry draws new pre-shared material from the trusted setup, since the
    old tag has been burned in Charlie's registry.
    """
    tx = transcript if transcript is not None else Transcript()
    session = None
    for attempt in range(max_retries + 1):
        setup = trusted_setup(m, tag_len, rng)
        # The dealer never hands out a tag Charlie has already burned.
        while setup.T in registry:
            setup = trusted_setup(m, tag_len, rng)
        session = BasicAqkdSession(m=m, setup=setup, check_fraction=check_fraction,
                                   attempts=attempt + 1, transcript=tx)
        R, reg = voter_prepare(setup.N, rng)
        session.R = R
        tx.emit("keydist", "voter", "send_register", {"T": setup.T, "n": m})
        reg = channel_transmit(reg, loss_p, flip_p, rng)
        if attacker is not None:
            reg = attacker(reg, rng)
        ann, record = charlie_measure_announce(reg, setup.N, setup.T, rng,
                                               registry=registry, check_fraction=check_fraction)
        session.advance("measured")
        tx.emit("keydist", "charlie", "announce_check",
                {"T": ann.T, "sigma": ann.sigma, "pos": ann.positions, "recv": ann.received_positions})
        session.advance("checked")
        try:
            key = voter_verify_extract(R, ann, error_threshold)
        except AqkdAbort as exc:
            session.mismatch_rate = exc.mismatch_rate
            session.abort_reason = exc.reason
            session.advance("aborted")
            tx.emit("keydist", "voter", "abort", {"reason": exc.reason})
            continue
        session.voter_key = key
        session.charlie_key = record.key
        session.mismatch_rate = key.mismatch_rate
        session.advance("completed")
        tx.emit("keydist", "voter", "complete", {"ok": True})
        return session
    return session
