"""Qubit-string anonymous key distribution with a two-party administrator.

Bob1 and Bob2 share ``C(k) = S(k) || M(k) || N(k) || L(k)`` with Charlie and
hand ``N(k), L(k)`` to every voter. For each voter they prepare the layered
register ``H^{S2} Y^{R2} H^{S1} Y^{R1} |0>`` where ``R(k)`` is fresh random with
block parities ``M(k)``. The voter picks a key ``K``, pads ``K || N`` with
``L`` into a tag ``T``, spreads ``T`` into a block-parity mask ``P`` and applies
``Y^P``. Charlie measures in basis ``s = S1 ^ S2``; each m-qubit block then
carries ``M_j ^ T_j`` in its parity.

The lossy variant repeats each block of a free random ``P`` over ``r`` intact
blocks (a blockwise repetition code) so that Charlie, who only ever sees
block parities, can majority-decode the tag.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional

import numpy as np

from .primitives import (
    EccCode,
    KeyBundle,
    ecc_decode_report,
    ecc_encode,
    otp_decrypt,
    otp_encrypt,
    parity_collapse,
    parity_expand,
    random_bits,
    to_bits,
    xor_combine,
)
from .qubit_sim import QubitRegister, measure_register, prepare_layered

__all__ = [
    "StringAqkdKeys",
    "BobView",
    "VoterView",
    "DecodeResult",
    "EccDecodeResult",
    "setup_keys",
    "bob_prepare",
    "voter_randomize",
    "charlie_decode",
    "decode_outcomes",
    "intact_blocks",
    "ecc_carriers",
    "voter_randomize_ecc",
    "charlie_decode_ecc",
    "verification_broadcast",
    "round_trip",
    "DEFAULT_L",
    "DEFAULT_M",
]

DEFAULT_L = 32
DEFAULT_M = 8
DEFAULT_MAX_CORRECTION_RATE = 0.25


@dataclass(frozen=True)
class StringAqkdKeys:
    """Both administrator bundles plus the XOR-combined strings Charlie derives."""

    bundle1: KeyBundle
    bundle2: KeyBundle

    def __post_init__(self):
        if (self.bundle1.l, self.bundle1.m) != (self.bundle2.l, self.bundle2.m):
            raise ValueError("bundles disagree on (l, m)")

    @classmethod
    def random(cls, l: int, m: int, rng: np.random.Generator) -> "StringAqkdKeys":
        return cls(KeyBundle.random(l, m, rng), KeyBundle.random(l, m, rng))

    @property
    def l(self) -> int:
        return self.bundle1.l

    @property
    def m(self) -> int:
        return self.bundle1.m

    @cached_property
    def s(self) -> np.ndarray:
        return xor_combine(self.bundle1.S, self.bundle2.S)

    @cached_property
    def M(self) -> np.ndarray:
        return xor_combine(self.bundle1.M, self.bundle2.M)

    @cached_property
    def N(self) -> np.ndarray:
        return xor_combine(self.bundle1.N, self.bundle2.N)

    @cached_property
    def L(self) -> np.ndarray:
        return xor_combine(self.bundle1.L, self.bundle2.L)

    def voter_material(self) -> tuple[np.ndarray, np.ndarray]:
        """What every voter can compute: ``(N, L)``."""
        return self.N, self.L


def setup_keys(l: int, m: int, rng: np.random.Generator) -> StringAqkdKeys:
    if not (isinstance(l, (int, np.integer)) and isinstance(m, (int, np.integer))):
        raise TypeError("l and m must be integers")
    if m < 2 or l <= m:
        raise ValueError(f"need l > m >= 2, got l={l}, m={m}")
    return StringAqkdKeys.random(int(l), int(m), rng)


@dataclass(frozen=True)
class BobView:
    R1: np.ndarray
    R2: np.ndarray
    flip_mask: Optional[np.ndarray] = None


def bob_prepare(keys: StringAqkdKeys, rng: np.random.Generator, *, flip_mask: bool = False) -> tuple[BobView, QubitRegister]:
    """Fresh per-voter register; optionally hidden under a Y-mask shared with the voter."""
    m = keys.m
    R1 = parity_expand(keys.bundle1.M, m, rng)
    R2 = parity_expand(keys.bundle2.M, m, rng)
    reg = prepare_layered(keys.bundle1.S, R1, keys.bundle2.S, R2)
    mask = None
    if flip_mask:
        mask = random_bits(len(reg), rng)
        reg.apply("Y", mask.astype(bool))
    return BobView(R1=R1, R2=R2, flip_mask=mask), reg


@dataclass(frozen=True)
class VoterView:
    K: np.ndarray
    T: np.ndarray
    P: np.ndarray
    received_positions: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None
    carriers: Optional[np.ndarray] = None

    @property
    def p(self) -> np.ndarray:
        """Block parities of ``P``; equals ``T`` on both code paths."""
        return parity_collapse(self.P, self.P.size // self.T.size)


def _undo_flip_mask(reg: QubitRegister, flip_mask) -> None:
    if flip_mask is not None:
        reg.apply("Y", to_bits(flip_mask).astype(bool))


def voter_randomize(
    reg: QubitRegister,
    N,
    L,
    l: int,
    m: int,
    rng: np.random.Generator,
    *,
    flip_mask=None,
) -> tuple[VoterView, QubitRegister]:
    """Choose ``K``, form ``T = L xor (K || N)`` and apply ``Y^P`` with parity(P_j) = T_j."""
    N, L = to_bits(N), to_bits(L)
    if len(reg) != l * m or L.size != l or N.size != m:
        raise ValueError(f"expected register {l * m}, |L|={l}, |N|={m}; got {len(reg)}, {L.size}, {N.size}")
    _undo_flip_mask(reg, flip_mask)
    K = random_bits(l - m, rng)
    T = otp_encrypt(L, np.concatenate([K, N]))
    P = parity_expand(T, m, rng)
    reg.apply("Y", P.astype(bool))
    return VoterView(K=K, T=T, P=P), reg


@dataclass(frozen=True)
class DecodeResult:
    accepted: bool
    K: np.ndarray
    N_prime: np.ndarray
    T_prime: np.ndarray
    outcome: np.ndarray


def decode_outcomes(outcome, keys: StringAqkdKeys):
    """Tag recovery from raw outcomes; works on any leading batch shape.

    Returns ``(T', K', N', accepted)``.
    """
    outcome = np.asarray(outcome, dtype=np.uint8)
    l, m = keys.l, keys.m
    T_prime = keys.M ^ parity_collapse(outcome, m)
    KN = T_prime ^ keys.L
    K, N_prime = KN[..., : l - m], KN[..., l - m:]
    accepted = np.all(N_prime == keys.N, axis=-1)
    return T_prime, K, N_prime, accepted


def charlie_decode(reg: QubitRegister, keys: StringAqkdKeys, rng: np.random.Generator) -> DecodeResult:
    """Measure in basis ``s``, collapse parities, strip ``M`` and ``L``, check ``N``."""
    if len(reg) != keys.l * keys.m:
        raise ValueError(f"register length {len(reg)} != l*m = {keys.l * keys.m}")
    if reg.lost.any():
        raise ValueError("register has lost positions; use charlie_decode_ecc")
    meas = measure_register(reg, keys.s, rng)
    T_prime, K, N_prime, accepted = decode_outcomes(meas.bits, keys)
    return DecodeResult(accepted=bool(accepted), K=K, N_prime=N_prime, T_prime=T_prime, outcome=meas.bits)


def intact_blocks(received_positions, l: int, m: int) -> np.ndarray:
    """Indices of m-qubit blocks none of whose qubits is missing."""
    have = np.zeros(l * m, dtype=bool)
    have[np.asarray(received_positions, dtype=np.int64)] = True
    return np.flatnonzero(have.reshape(l, m).all(axis=1))


def ecc_carriers(received_positions, l: int, m: int, code: EccCode, tag_len: int) -> np.ndarray:
    """Blocks that carry the coded tag: the first ``r * tag_len`` intact blocks.

    Group ``g`` of the repetition code occupies carriers ``g*r .. g*r + r-1``.
    """
    blocks = intact_blocks(received_positions, l, m)
    need = code.r * tag_len
    if blocks.size < need:
        raise ValueError(f"only {blocks.size} intact blocks, code needs {need}")
    return blocks[:need]


def _check_tag_len(tag_len: int, l: int, m: int) -> None:
    if not m < tag_len <= l:
        raise ValueError(f"tag length must satisfy m < tag_len <= l, got {tag_len}")


def voter_randomize_ecc(
    reg: QubitRegister,
    N,
    L,
    l: int,
    m: int,
    code: EccCode,
    rng: np.random.Generator,
    *,
    tag_len: int,
    flip_mask=None,
) -> tuple[VoterView, QubitRegister, np.ndarray]:
    """Lossy-channel randomization.

    ``P`` has ``tag_len`` blocks. The first ``tag_len - m`` are free random
    and define ``K = p xor L`` on those positions; the last ``m`` are drawn with
    parities fixed so that the padded tail equals ``N``. Each block of ``P`` is
    written onto ``r`` intact carrier blocks of ``D``; all other positions of
    ``D`` are random filler. ``Y^D`` touches received positions only.
    """
    N, L = to_bits(N), to_bits(L)
    if len(reg) != l * m or L.size != l or N.size != m:
        raise ValueError("register or key lengths inconsistent with (l, m)")
    _check_tag_len(tag_len, l, m)
    serials = reg.received_positions
    carriers = ecc_carriers(serials, l, m, code, tag_len)
    _undo_flip_mask(reg, flip_mask)

    n_key = tag_len - m
    free = random_bits(n_key * m, rng)
    tail = parity_expand(N ^ L[n_key:tag_len], m, rng)
    P = np.concatenate([free, tail])
    p = parity_collapse(P, m)
    K = p[:n_key] ^ L[:n_key]

    D = random_bits(l * m, rng).reshape(l, m)
    D[carriers] = np.repeat(P.reshape(tag_len, m), code.r, axis=0)
    D = D.reshape(-1)
    reg.apply("Y", D.astype(bool))
    view = VoterView(K=K, T=p, P=P, received_positions=serials, D=D, carriers=carriers)
    return view, reg, serials


@dataclass(frozen=True)
class EccDecodeResult:
    accepted: bool
    reason: str
    p: Optional[np.ndarray]
    K: Optional[np.ndarray]
    N_prime: Optional[np.ndarray]
    parity_word: np.ndarray
    erased: np.ndarray
    corrected_groups: int
    outcome: np.ndarray = field(repr=False)

    @property
    def recovered(self) -> bool:
        return self.reason != "decode_failure"


def charlie_decode_ecc(
    reg: QubitRegister,
    serials,
    keys: StringAqkdKeys,
    code: EccCode,
    rng: np.random.Generator,
    *,
    tag_len: int,
    max_correction_rate: float = DEFAULT_MAX_CORRECTION_RATE,
) -> EccDecodeResult:
    """Read carrier-block parities, majority-decode, unpad and check ``N``.

    Carrier blocks with a qubit lost on the voter-to-Charlie hop are erased.
    Decoding fails when a group is undecodable or when more than
    ``max_correction_rate`` of the groups needed correcting, which is far above
    honest channel noise and typical of a forged register.
    """
    l, m = keys.l, keys.m
    if len(reg) != l * m:
        raise ValueError(f"register length {len(reg)} != l*m = {l * m}")
    _check_tag_len(tag_len, l, m)
    serials = np.asarray(serials, dtype=np.int64)
    if serials.size and (serials.min() < 0 or serials.max() >= l * m):
        raise ValueError("serial numbers out of range")
    meas = measure_register(reg, keys.s, rng)
    empty = np.zeros(0, dtype=np.uint8)
    try:
        carriers = ecc_carriers(serials, l, m, code, tag_len)
    except ValueError:
        return EccDecodeResult(False, "decode_failure", None, None, None, empty, empty, 0, meas.bits)

    blocks = meas.bits.reshape(l, m)[carriers]
    word = (blocks.sum(axis=1) & 1).astype(np.uint8) ^ keys.M[carriers]
    lost = np.zeros(l * m, dtype=bool)
    lost[meas.lost] = True
    erased = np.flatnonzero(lost.reshape(l, m)[carriers].any(axis=1))
    report = ecc_decode_report(word, code, erased)
    too_many = report.corrected_groups > max_correction_rate * tag_len
    if not report.ok or too_many:
        return EccDecodeResult(False, "decode_failure", None, None, None, word, erased,
                               report.corrected_groups, meas.bits)
    p = report.bits
    KN = p ^ keys.L[:tag_len]
    K, N_prime = KN[: tag_len - m], KN[tag_len - m:]
    ok = bool(np.array_equal(N_prime, keys.N))
    return EccDecodeResult(ok, "accepted" if ok else "bad_N", p, K, N_prime, word, erased,
                           report.corrected_groups, meas.bits)


def verification_broadcast(
    charlie_keys: Mapping[int, Optional[np.ndarray]],
    voter_keys: Mapping[int, np.ndarray],
    n_check: int,
) -> dict[int, bool]:
    """Charlie publishes the first ``n_check`` bits of each accepted key.

    Keys are indexed by anonymous delivery slot. A voter succeeds when its
    slot was accepted and the published bits match its own key. Those bits are
    burned and never reach the ballot pad.
    """
    if n_check < 1:
        raise ValueError("check subset must contain at least one bit")
    published = {slot: (None if k is None else to_bits(k)[:n_check].copy()) for slot, k in charlie_keys.items()}
    flags = {}
    for slot, K in voter_keys.items():
        pub = published.get(slot)
        flags[slot] = pub is not None and np.array_equal(pub, to_bits(K)[:n_check])
    return flags


def round_trip(
    keys: StringAqkdKeys,
    rng: np.random.Generator,
    *,
    flip_mask: bool = False,
) -> tuple[VoterView, DecodeResult, BobView]:
    """One noiseless session: Bob prepares, voter randomizes, Charlie decodes."""
    bob, reg = bob_prepare(keys, rng, flip_mask=flip_mask)
    N, L = keys.voter_material()
    view, reg = voter_randomize(reg, N, L, keys.l, keys.m, rng, flip_mask=bob.flip_mask)
    return view, charlie_decode(reg, keys, rng), bob
