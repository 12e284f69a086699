"""Single-qubit pure-state engine for conjugate coding.

Every gate the protocols use (I, H, Y) is a real orthogonal 2x2 matrix, so
states are kept as real amplitude pairs. A register is a batch of independent
qubits stored as an ``(n, 2)`` array plus per-position lost flags.

Bit convention for measurement: basis bit 0 is rectilinear ({|0>, |1>}),
basis bit 1 is diagonal ({|+>, |->}); |0> and |+> read as 0, |1> and |-> as 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "GATES",
    "QubitState",
    "QubitRegister",
    "Measurement",
    "RegisterConsumedError",
    "LostQubitError",
    "apply_gate",
    "encode_conjugate",
    "prepare_layered",
    "measure_register",
    "channel_transmit",
    "product_vectors",
    "ensemble_density",
    "trace_distance",
    "is_density_matrix",
    "MAX_DENSITY_DIM",
]

_S = 1.0 / np.sqrt(2.0)

GATES: dict[str, np.ndarray] = {
    "I": np.eye(2),
    "H": np.array([[_S, _S], [_S, -_S]]),
    "Y": np.array([[0.0, -1.0], [1.0, 0.0]]),
}

MAX_DENSITY_DIM = 256
_NORM_TOL = 1e-12


class RegisterConsumedError(RuntimeError):
    """Raised when a register is used after it was measured or handed on."""


class LostQubitError(RuntimeError):
    """Raised when the amplitudes of a lost position are read."""


@dataclass(frozen=True)
class QubitState:
    """A normalized real single-qubit state ``amp0|0> + amp1|1>``."""

    amp0: float
    amp1: float

    def __post_init__(self):
        norm = self.amp0 * self.amp0 + self.amp1 * self.amp1
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"state is not normalized (norm^2={norm!r})")

    @classmethod
    def from_vector(cls, vec) -> "QubitState":
        a0, a1 = (float(x) for x in vec)
        return cls(a0, a1)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1])

    def probability(self, basis: int, outcome: int) -> float:
        """Born probability of reading ``outcome`` in ``basis``."""
        if basis:
            amp = (self.amp0 + (-self.amp1 if outcome else self.amp1)) * _S
        else:
            amp = self.amp1 if outcome else self.amp0
        return amp * amp

    def same_ray(self, other: "QubitState", atol: float = 1e-12) -> bool:
        """True when the two states agree up to global sign."""
        v, w = self.vector, other.vector
        return bool(np.allclose(v, w, atol=atol) or np.allclose(v, -w, atol=atol))


ZERO = QubitState(1.0, 0.0)
ONE = QubitState(0.0, 1.0)
PLUS = QubitState(_S, _S)
MINUS = QubitState(_S, -_S)


def _gate_matrix(gate) -> np.ndarray:
    if isinstance(gate, str):
        try:
            return GATES[gate]
        except KeyError:
            raise ValueError(f"unknown gate {gate!r}; expected one of I, H, Y") from None
    return np.asarray(gate, dtype=float)


def apply_gate(state: QubitState, gate) -> QubitState:
    """Return ``gate @ state``; ``gate`` is a name from :data:`GATES` or a 2x2 matrix."""
    return QubitState.from_vector(_gate_matrix(gate) @ state.vector)


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if arr.size and arr.max() > 1:
        raise ValueError("bit sequence must contain only 0 and 1")
    return arr


class QubitRegister:
    """Ordered product state of independent qubits with lost-position flags.

    A register has single-shot semantics: measuring it, or pushing it through
    :func:`channel_transmit`, consumes it. There is no public copy operation.
    """

    __slots__ = ("_amps", "_lost", "_consumed")

    def __init__(self, amps, lost=None):
        amps = np.array(amps, dtype=float).reshape(-1, 2)
        norms = np.einsum("ij,ij->i", amps, amps)
        if np.abs(norms - 1.0).max(initial=0.0) > 1e-9:
            raise ValueError("every qubit must be normalized")
        self._amps = amps
        n = amps.shape[0]
        self._lost = np.zeros(n, dtype=bool) if lost is None else np.array(lost, dtype=bool).reshape(n)
        self._consumed = False

    @classmethod
    def from_states(cls, states: Iterable[QubitState]) -> "QubitRegister":
        return cls(np.array([s.vector for s in states]).reshape(-1, 2))

    @classmethod
    def zeros(cls, n: int) -> "QubitRegister":
        amps = np.zeros((n, 2))
        amps[:, 0] = 1.0
        return cls(amps)

    def __len__(self) -> int:
        return self._amps.shape[0]

    @property
    def length(self) -> int:
        return len(self)

    @property
    def consumed(self) -> bool:
        return self._consumed

    @property
    def lost(self) -> np.ndarray:
        return self._lost.copy()

    @property
    def lost_positions(self) -> np.ndarray:
        return np.flatnonzero(self._lost)

    @property
    def received_positions(self) -> np.ndarray:
        return np.flatnonzero(~self._lost)

    def _check_live(self):
        if self._consumed:
            raise RegisterConsumedError("register has already been measured or transmitted")

    def state(self, k: int) -> QubitState:
        self._check_live()
        if self._lost[k]:
            raise LostQubitError(f"position {k} was lost in transit")
        return QubitState.from_vector(self._amps[k])

    def states(self) -> list[QubitState]:
        return [self.state(k) for k in range(len(self))]

    def amplitudes(self) -> np.ndarray:
        """Copy of the ``(n, 2)`` amplitude table; lost rows are NaN."""
        self._check_live()
        out = self._amps.copy()
        out[self._lost] = np.nan
        return out

    def apply(self, gate, mask=None) -> None:
        """Apply ``gate`` in place at every received position where ``mask`` is set."""
        self._check_live()
        sel = ~self._lost
        if mask is not None:
            sel &= np.asarray(mask, dtype=bool).reshape(len(self))
        if not sel.any():
            return
        g = _gate_matrix(gate)
        self._amps[sel] = self._amps[sel] @ g.T

    def mark_lost(self, mask) -> None:
        self._check_live()
        self._lost |= np.asarray(mask, dtype=bool).reshape(len(self))

    def _take(self) -> tuple[np.ndarray, np.ndarray]:
        # Hands the raw arrays to a new owner and retires this handle.
        self._check_live()
        self._consumed = True
        return self._amps, self._lost

    def _clone(self) -> "QubitRegister":
        # Physically impossible; reserved for adversary code that is labelled as cheating.
        self._check_live()
        return QubitRegister(self._amps.copy(), self._lost.copy())

    def __repr__(self) -> str:
        state = "consumed" if self._consumed else f"{int(self._lost.sum())} lost"
        return f"QubitRegister(length={len(self)}, {state})"


def _apply_masked(amps: np.ndarray, gate: str, mask: np.ndarray) -> None:
    if gate == "Y":
        a0 = amps[mask, 0].copy()
        amps[mask, 0] = -amps[mask, 1]
        amps[mask, 1] = a0
    elif gate == "H":
        a0 = amps[mask, 0].copy()
        a1 = amps[mask, 1]
        amps[mask, 0] = (a0 + a1) * _S
        amps[mask, 1] = (a0 - a1) * _S
    else:
        raise ValueError(gate)


def encode_conjugate(value_bits, basis_bits) -> QubitRegister:
    """Conjugate coding: position j holds ``H^{basis_j} |value_j>``."""
    v = _as_bits(value_bits)
    b = _as_bits(basis_bits)
    if v.shape != b.shape:
        raise ValueError(f"value and basis lengths differ ({v.size} != {b.size})")
    amps = np.zeros((v.size, 2))
    amps[np.arange(v.size), v] = 1.0
    _apply_masked(amps, "H", b.astype(bool))
    return QubitRegister(amps)


def layered_amplitudes(S1, R1, S2, R2) -> np.ndarray:
    """Amplitudes of ``H^{S2} Y^{R2} H^{S1} Y^{R1} |0>`` for bit arrays of any shape.

    The gates are applied in the written order, one layer at a time; no
    commutation identity is used.
    """
    S1, R1, S2, R2 = (np.asarray(x, dtype=bool) for x in (S1, R1, S2, R2))
    shape = S1.shape
    if not (R1.shape == S2.shape == R2.shape == shape):
        raise ValueError("layer strings must have identical shapes")
    amps = np.zeros(shape + (2,))
    amps[..., 0] = 1.0
    flat = amps.reshape(-1, 2)
    for gate, mask in (("Y", R1), ("H", S1), ("Y", R2), ("H", S2)):
        _apply_masked(flat, gate, mask.reshape(-1))
    return amps


def prepare_layered(S1, R1, S2, R2) -> QubitRegister:
    """Two-party preparation ``H^{S2} Y^{R2} H^{S1} Y^{R1} |0...0>``, positionwise."""
    arrays = [_as_bits(x) for x in (S1, R1, S2, R2)]
    if len({a.size for a in arrays}) != 1:
        raise ValueError("S1, R1, S2, R2 must have identical lengths")
    return QubitRegister(layered_amplitudes(*arrays))


@dataclass(frozen=True)
class Measurement:
    """Outcome bits of a register measurement.

    ``bits`` has one entry per position; entries at ``lost`` positions are
    zero and carry no information.
    """

    bits: np.ndarray
    lost: np.ndarray

    @property
    def received(self) -> np.ndarray:
        mask = np.ones(self.bits.size, dtype=bool)
        mask[self.lost] = False
        return np.flatnonzero(mask)


def outcome_probability_zero(amps: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """P(outcome 0) for each row of ``amps`` measured in the matching basis bit."""
    a0 = amps[..., 0]
    a1 = amps[..., 1]
    diag = 0.5 * (a0 + a1) ** 2
    return np.where(np.asarray(basis, dtype=bool), diag, a0 * a0)


def measure_register(reg: QubitRegister, basis_bits, rng: np.random.Generator) -> Measurement:
    """Born-rule measurement of every received position; consumes ``reg``."""
    basis = _as_bits(basis_bits)
    if basis.size != len(reg):
        raise ValueError(f"basis length {basis.size} != register length {len(reg)}")
    amps, lost = reg._take()
    p0 = np.clip(outcome_probability_zero(amps, basis), 0.0, 1.0)
    draws = rng.random(basis.size)
    bits = (draws >= p0).astype(np.uint8)
    bits[lost] = 0
    return Measurement(bits=bits, lost=np.flatnonzero(lost))


def channel_transmit(reg: QubitRegister, loss_p: float, flip_p: float, rng: np.random.Generator) -> QubitRegister:
    """Lossy, noisy hop: independent loss, then a Y flip on survivors.

    The input handle is consumed and a new register is returned.
    """
    for name, p in (("loss_p", loss_p), ("flip_p", flip_p)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {p!r}")
    amps, lost = reg._take()
    n = amps.shape[0]
    lost = lost | (rng.random(n) < loss_p)
    flips = (rng.random(n) < flip_p) & ~lost
    amps = amps.copy()
    _apply_masked(amps, "Y", flips)
    return QubitRegister(amps, lost)


def product_vectors(amps: np.ndarray) -> np.ndarray:
    """Expand a batch of product states ``(K, n, 2)`` into full vectors ``(K, 2**n)``.

    The first qubit is the most significant tensor factor.
    """
    amps = np.asarray(amps, dtype=float)
    if amps.ndim == 2:
        amps = amps[None]
    vec = amps[:, 0, :]
    for q in range(1, amps.shape[1]):
        vec = (vec[:, :, None] * amps[:, q, None, :]).reshape(amps.shape[0], -1)
    return vec


StateLike = Union[QubitRegister, QubitState, np.ndarray]


def _state_vectors(states) -> np.ndarray:
    if isinstance(states, np.ndarray):
        if states.ndim == 3:
            return product_vectors(states)
        if states.ndim == 2:
            return states.astype(float)
        raise ValueError("state array must be (K, dim) vectors or (K, n, 2) product amplitudes")
    rows = []
    for st in states:
        if isinstance(st, QubitRegister):
            if st.lost.any():
                raise LostQubitError("cannot form the density of a register with lost positions")
            rows.append(product_vectors(st.amplitudes())[0])
        elif isinstance(st, QubitState):
            rows.append(st.vector)
        else:
            rows.append(np.asarray(st, dtype=float).reshape(-1))
    if len({r.size for r in rows}) > 1:
        raise ValueError("all states must have the same dimension")
    return np.array(rows)


def ensemble_density(states: Sequence[StateLike] | np.ndarray, weights=None, *, chunk: int = 4096) -> np.ndarray:
    """Exact weighted mixture ``sum_k w_k |psi_k><psi_k|``.

    ``states`` may be a sequence of registers, single-qubit states or vectors,
    a ``(K, dim)`` array of vectors, or a ``(K, n, 2)`` array of product-state
    amplitudes (expanded chunk by chunk to bound memory).
    """
    if isinstance(states, np.ndarray) and states.ndim == 3:
        K, n = states.shape[:2]
        dim = 2**n
        if dim > MAX_DENSITY_DIM:
            raise ValueError(f"dimension {dim} exceeds the {MAX_DENSITY_DIM} cap")
        w = np.full(K, 1.0 / K) if weights is None else np.asarray(weights, dtype=float)
        _check_weights(w, K)
        rho = np.zeros((dim, dim))
        for start in range(0, K, chunk):
            vec = product_vectors(states[start:start + chunk])
            rho += (vec.T * w[start:start + chunk]) @ vec
        return rho
    vec = _state_vectors(states)
    K, dim = vec.shape
    if dim > MAX_DENSITY_DIM:
        raise ValueError(f"dimension {dim} exceeds the {MAX_DENSITY_DIM} cap")
    w = np.full(K, 1.0 / K) if weights is None else np.asarray(weights, dtype=float)
    _check_weights(w, K)
    return (vec.T * w) @ vec


def _check_weights(w: np.ndarray, K: int) -> None:
    if w.shape != (K,):
        raise ValueError(f"expected {K} weights, got shape {w.shape}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the sum of absolute eigenvalues of ``a - b`` (symmetric inputs)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    diff = 0.5 * (diff + diff.T)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())


def is_density_matrix(rho: np.ndarray, atol: float = 1e-9) -> bool:
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    dim = rho.shape[0]
    if dim & (dim - 1) or dim > MAX_DENSITY_DIM:
        return False
    if not np.allclose(rho, rho.T, atol=atol) or abs(np.trace(rho) - 1.0) > atol:
        return False
    return bool(np.linalg.eigvalsh(rho).min() >= -atol)
