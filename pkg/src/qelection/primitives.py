"""Classical building blocks: XOR combiner, one-time pad, parity blocks, ECC, key split.

Bit strings are ``numpy.uint8`` arrays of zeros and ones. Code in this package
indexes them from 0; block ``j`` of an ``l*m`` string is ``x[j*m:(j+1)*m]``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

__all__ = [
    "to_bits",
    "bits_str",
    "random_bits",
    "xor_combine",
    "otp_encrypt",
    "otp_decrypt",
    "OneTimePad",
    "KeyReuseError",
    "parity_expand",
    "parity_collapse",
    "EccCode",
    "EccReport",
    "DecodeError",
    "ecc_encode",
    "ecc_decode",
    "ecc_decode_report",
    "split_key",
    "KeyBundle",
]


class KeyReuseError(ValueError):
    pass


class DecodeError(ValueError):
    """The received word is outside the code's correction capability."""


def to_bits(x) -> np.ndarray:
    """Coerce ``"0110"``, a list of ints or an array into a uint8 bit array."""
    if isinstance(x, str):
        if set(x) - {"0", "1"}:
            raise ValueError(f"not a bit string: {x!r}")
        return np.frombuffer(x.encode(), dtype=np.uint8) - ord("0")
    arr = np.asarray(x, dtype=np.uint8).reshape(-1)
    if arr.size and arr.max() > 1:
        raise ValueError("bit arrays hold only 0 and 1")
    return arr


def bits_str(bits) -> str:
    arr = np.asarray(bits).reshape(-1) != 0
    return (arr.astype(np.uint8) + ord("0")).tobytes().decode("ascii")


def random_bits(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)


def xor_combine(a, b) -> np.ndarray:
    """Bitwise XOR of two equal-length strings (the two-party combiner)."""
    a, b = to_bits(a), to_bits(b)
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} != {b.size}")
    return a ^ b


def otp_encrypt(key, msg) -> np.ndarray:
    """One-time pad with the leading ``len(msg)`` bits of ``key``."""
    key, msg = to_bits(key), to_bits(msg)
    if key.size < msg.size:
        raise ValueError(f"key of {key.size} bits cannot pad a {msg.size}-bit message")
    return msg ^ key[: msg.size]


otp_decrypt = otp_encrypt


class OneTimePad:
    """Pad that refuses to encrypt twice under the same key within one session."""

    def __init__(self):
        self._used: set[bytes] = set()

    def encrypt(self, key, msg) -> np.ndarray:
        k = to_bits(key)
        digest = hashlib.sha256(np.packbits(k).tobytes() + k.size.to_bytes(4, "big")).digest()
        if digest in self._used:
            raise KeyReuseError("one-time pad key reused within a session")
        out = otp_encrypt(k, msg)
        self._used.add(digest)
        return out

    @staticmethod
    def decrypt(key, ct) -> np.ndarray:
        return otp_decrypt(key, ct)


def parity_expand(t, m: int, rng: np.random.Generator) -> np.ndarray:
    """Expand each bit of ``t`` into an m-bit block whose XOR equals that bit.

    Each block is uniform over the ``2**(m-1)`` admissible strings.
    """
    if m < 1:
        raise ValueError("block size m must be >= 1")
    t = to_bits(t)
    blocks = rng.integers(0, 2, size=(t.size, m), dtype=np.uint8)
    blocks[:, -1] = t ^ (blocks[:, :-1].sum(axis=1, dtype=np.int64) & 1).astype(np.uint8)
    return blocks.reshape(-1)


def parity_collapse(x, m: int) -> np.ndarray:
    """XOR of each consecutive m-bit block; works on the last axis of any array."""
    x = to_bits(x) if isinstance(x, str) else np.asarray(x, dtype=np.uint8)
    if m < 1 or x.shape[-1] % m:
        raise ValueError(f"length {x.shape[-1]} is not divisible by block size {m}")
    blocks = x.reshape(x.shape[:-1] + (x.shape[-1] // m, m))
    return (blocks.sum(axis=-1, dtype=np.int64) & 1).astype(np.uint8)


@dataclass(frozen=True)
class EccCode:
    """Repetition code (or no coding). ``r`` copies per information bit."""

    scheme: Literal["repetition", "none"] = "repetition"
    r: int = 3

    def __post_init__(self):
        if self.scheme not in ("repetition", "none"):
            raise ValueError(f"unknown ECC scheme {self.scheme!r}")
        if self.scheme == "none":
            object.__setattr__(self, "r", 1)
        elif self.r < 1:
            raise ValueError("repetition factor must be >= 1")

    @property
    def t(self) -> int:
        """Flips per group that are always corrected."""
        return (self.r - 1) // 2

    @property
    def rate(self) -> float:
        return 1.0 / self.r

    @classmethod
    def parse(cls, text: str) -> "EccCode":
        """``"none"``, ``"repetition"`` or ``"repetition(5)"``."""
        text = text.strip().lower()
        if text == "none":
            return cls("none")
        if text.startswith("repetition"):
            rest = text[len("repetition"):].strip()
            if not rest:
                return cls("repetition", 3)
            if rest.startswith("(") and rest.endswith(")"):
                return cls("repetition", int(rest[1:-1]))
        raise ValueError(f"cannot parse ECC scheme {text!r}")

    def __str__(self) -> str:
        return "none" if self.scheme == "none" else f"repetition({self.r})"


def ecc_encode(p, code: EccCode) -> np.ndarray:
    return np.repeat(to_bits(p), code.r)


@dataclass(frozen=True)
class EccReport:
    bits: np.ndarray
    corrected_groups: int
    failed_groups: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def ok(self) -> bool:
        return self.failed_groups.size == 0


def ecc_decode_report(d, code: EccCode, erased=None) -> EccReport:
    """Majority decoding with erasures at known indices.

    A group fails when all its symbols are erased or the surviving votes tie.
    Groups whose surviving symbols disagree but have a strict majority count
    as corrected.
    """
    d = to_bits(d)
    if d.size % code.r:
        raise ValueError(f"received word of {d.size} bits is not a multiple of r={code.r}")
    groups = d.reshape(-1, code.r).astype(np.int64)
    live = np.ones_like(groups, dtype=bool)
    if erased is not None:
        live.reshape(-1)[np.asarray(erased, dtype=np.int64)] = False
    ones = (groups * live).sum(axis=1)
    votes = live.sum(axis=1)
    zeros = votes - ones
    bits = (ones > zeros).astype(np.uint8)
    failed = np.flatnonzero((votes == 0) | (ones == zeros))
    corrected = int(np.count_nonzero((ones > 0) & (zeros > 0) & (ones != zeros)))
    return EccReport(bits=bits, corrected_groups=corrected, failed_groups=failed)


def ecc_decode(d, code: EccCode, erased=None) -> np.ndarray:
    rep = ecc_decode_report(d, code, erased)
    if not rep.ok:
        raise DecodeError(f"{rep.failed_groups.size} group(s) undecodable")
    return rep.bits


def split_key(K, left: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Split a key into (tag half, pad half); the left half gets the odd bit.

    ``left`` overrides the length of the left part.
    """
    K = to_bits(K)
    if K.size < 2:
        raise ValueError("key must have at least 2 bits to split")
    cut = (K.size + 1) // 2 if left is None else left
    if not 1 <= cut < K.size:
        raise ValueError(f"left length {cut} invalid for a {K.size}-bit key")
    return K[:cut].copy(), K[cut:].copy()


@dataclass(frozen=True)
class KeyBundle:
    """One administrator party's material ``S || M || N || L``."""

    S: np.ndarray
    M: np.ndarray
    N: np.ndarray
    L: np.ndarray

    def __post_init__(self):
        for name in ("S", "M", "N", "L"):
            object.__setattr__(self, name, to_bits(getattr(self, name)))
        l, m = self.l, self.m
        if self.S.size != l * m or self.L.size != l:
            raise ValueError(f"inconsistent bundle lengths for l={l}, m={m}")
        if l <= m:
            raise ValueError(f"need l > m, got l={l}, m={m}")

    @property
    def l(self) -> int:
        return self.M.size

    @property
    def m(self) -> int:
        return self.N.size

    @classmethod
    def random(cls, l: int, m: int, rng: np.random.Generator) -> "KeyBundle":
        return cls(
            S=random_bits(l * m, rng),
            M=random_bits(l, rng),
            N=random_bits(m, rng),
            L=random_bits(l, rng),
        )

    def concat(self) -> np.ndarray:
        return np.concatenate([self.S, self.M, self.N, self.L])
