"""Four-phase distributed election and the classical two-administrator baseline.

Phases run strictly forward: ``initial -> keydist -> voting -> counting -> done``.
Every voter obtains ``K = check || K_L || K_R`` through the qubit-string key
distribution; ``check`` is burned during the verification broadcast, ``K_L``
is the public ballot tag and ``K_R`` pads the candidate code.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .aqkd_basic import AnonymityChannel
from .aqkd_string import (
    StringAqkdKeys,
    bob_prepare,
    charlie_decode,
    charlie_decode_ecc,
    setup_keys,
    verification_broadcast,
    voter_randomize,
    voter_randomize_ecc,
)
from .primitives import EccCode, bits_str, otp_decrypt, otp_encrypt, random_bits, split_key, to_bits, xor_combine
from .qubit_sim import QubitRegister, channel_transmit
from .transcript import Transcript

__all__ = [
    "PHASES",
    "ElectionAbort",
    "CandidateSet",
    "sample_candidates",
    "ElectionParams",
    "ChannelConfig",
    "ElectionConfig",
    "VoterRecord",
    "Ballot",
    "BulletinBoard",
    "Verdict",
    "ElectionState",
    "ElectionResult",
    "initialize_election",
    "run_key_distribution_phase",
    "voter_cast",
    "judge_ballot",
    "charlie_receive_count",
    "run_voting_phase",
    "publish_and_verify",
    "run_full_election",
    "fairness_audit",
    "BaselineAdministrator",
    "BaselineResult",
    "classical_baseline_run",
]

PHASES = ("initial", "keydist", "voting", "counting", "done")
TALLY_EVENTS = frozenset({"tally_published", "board_published"})


class ElectionAbort(RuntimeError):
    pass


@dataclass(frozen=True)
class CandidateSet:
    names: tuple[str, ...]
    codes: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.names) != len(self.codes) or len(self.names) < 2:
            raise ValueError("need at least two named candidates")
        if len({bits_str(c) for c in self.codes}) != len(self.codes):
            raise ValueError("candidate codes must be distinct")
        if len({c.size for c in self.codes}) != 1:
            raise ValueError("candidate codes must share one length")

    @property
    def s(self) -> int:
        return self.codes[0].size

    def code_of(self, name: str) -> np.ndarray:
        try:
            return self.codes[self.names.index(name)]
        except ValueError:
            raise ValueError(f"{name!r} is not a candidate") from None

    def name_of(self, bits) -> Optional[str]:
        key = bits_str(bits)
        for name, code in zip(self.names, self.codes):
            if bits_str(code) == key:
                return name
        return None

    def __contains__(self, bits) -> bool:
        return self.name_of(bits) is not None


def _hamming(a: int, b: int) -> int:
    return bin(a ^ b).count("1")


def sample_candidates(names: Sequence[str], s: int, rng: np.random.Generator, *, min_distance: int = 0) -> CandidateSet:
    """Distinct s-bit codes drawn uniformly without replacement.

    With ``min_distance > 0`` draws are rejected until every pair of codes
    differs in at least that many bits.
    """
    n = len(names)
    if n < 2:
        raise ValueError("need at least two candidates")
    if n > 2**s:
        raise ValueError(f"{n} candidates do not fit in {s}-bit codes")
    for _ in range(10_000):
        picks = rng.choice(2**s, size=n, replace=False)
        if min_distance <= 1 or all(_hamming(int(a), int(b)) >= min_distance
                                    for a, b in itertools.combinations(picks, 2)):
            break
    else:
        raise ValueError(f"no code set with minimum distance {min_distance} found")
    codes = tuple(np.array([(int(v) >> (s - 1 - i)) & 1 for i in range(s)], dtype=np.uint8) for v in picks)
    return CandidateSet(tuple(names), codes)


@dataclass(frozen=True)
class ElectionParams:
    """Protocol geometry.

    ``ecc=None`` selects the noiseless key distribution (key length ``l - m``);
    an :class:`EccCode` selects the lossy variant with ``tag_len`` coded
    blocks (key length ``tag_len - m``).
    """

    l: int = 32
    m: int = 8
    s: int = 8
    check_bits: int = 4
    ecc: Optional[EccCode] = None
    tag_len: Optional[int] = None
    flip_mask: bool = False
    max_retries: int = 3
    min_distance: int = 0
    message_budget: Optional[int] = None

    def __post_init__(self):
        self.validate()

    @property
    def key_len(self) -> int:
        return (self.l if self.ecc is None else self.tag_len) - self.m

    @property
    def tag_bits(self) -> int:
        return (self.key_len - self.check_bits + 1) // 2

    @property
    def pad_bits(self) -> int:
        return (self.key_len - self.check_bits) // 2

    def validate(self) -> None:
        if self.m < 2 or self.l <= self.m:
            raise ValueError(f"need l > m >= 2, got l={self.l}, m={self.m}")
        if self.s < 1:
            raise ValueError("candidate code length s must be >= 1")
        if self.check_bits < 1:
            raise ValueError("verification needs at least one check bit")
        if self.ecc is not None:
            if self.tag_len is None:
                raise ValueError("the lossy variant needs tag_len")
            if not self.m < self.tag_len <= self.l:
                raise ValueError(f"need m < tag_len <= l, got tag_len={self.tag_len}")
            if self.ecc.r * self.tag_len > self.l:
                raise ValueError(f"r*tag_len = {self.ecc.r * self.tag_len} exceeds l = {self.l} blocks")
        if self.key_len - self.check_bits < 2 * self.s:
            raise ValueError(
                f"key of {self.key_len} bits minus {self.check_bits} check bits cannot hold a "
                f"tag and a pad of {self.s} bits each"
            )
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def split(self, K) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        K = to_bits(K)
        K_L, K_R = split_key(K[self.check_bits:])
        return K[: self.check_bits], K_L, K_R


@dataclass(frozen=True)
class ChannelConfig:
    """Quantum channel impairments.

    ``loss_p``/``flip_p`` act on the administrator-to-voter hop (losses there
    are seen by the voter); ``relay_loss_p``/``relay_flip_p`` on the
    voter-to-counter hop.
    """

    loss_p: float = 0.0
    flip_p: float = 0.0
    relay_loss_p: float = 0.0
    relay_flip_p: float = 0.0

    @property
    def lossy(self) -> bool:
        return self.loss_p > 0 or self.relay_loss_p > 0


@dataclass
class VoterRecord:
    voter_id: int
    K: Optional[np.ndarray] = None
    check: Optional[np.ndarray] = None
    K_L: Optional[np.ndarray] = None
    K_R: Optional[np.ndarray] = None
    slot: Optional[tuple[int, int]] = None
    attempts: int = 0
    choice: Optional[str] = None
    cast: bool = False
    verified: Optional[bool] = None


@dataclass(frozen=True)
class Ballot:
    ciphertext: np.ndarray
    tag: np.ndarray


@dataclass
class BulletinBoard:
    entries: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    published: bool = False

    def as_strings(self) -> list[tuple[str, str]]:
        return [(bits_str(t), bits_str(v)) for t, v in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


class Verdict(str, Enum):
    ACCEPTED = "accepted"
    UNKNOWN_TAG = "unknown_tag"
    REPLAY = "replay"
    INELIGIBLE = "ineligible"


@dataclass
class CollusionLog:
    """Everything Bob1, Bob2 and Charlie jointly hold after the election.

    ``bob`` maps ``(round, voter_id)`` to the layer strings Bob used for that
    voter. ``charlie`` lists Charlie's accepted sessions with raw outcomes,
    decoded tags and the vote cast under each tag.
    """

    ecc: bool = False
    bob: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    charlie: list[dict] = field(default_factory=list)


@dataclass
class ElectionState:
    params: ElectionParams
    candidates: CandidateSet
    keys: StringAqkdKeys
    voters: list[VoterRecord]
    transcript: Transcript
    phase: str = "initial"
    tags: dict[str, np.ndarray] = field(default_factory=dict)
    used_tags: set[str] = field(default_factory=set)
    board: BulletinBoard = field(default_factory=BulletinBoard)
    tally: dict[str, int] = field(default_factory=dict)
    rounds: int = 0
    collusion: CollusionLog = field(default_factory=CollusionLog)
    # Ground truth for scoring linking attacks; no protocol party reads it.
    truth: dict[tuple[int, int], int] = field(default_factory=dict)

    def advance(self, phase: str) -> None:
        if PHASES.index(phase) != PHASES.index(self.phase) + 1:
            raise RuntimeError(f"illegal phase transition {self.phase} -> {phase}")
        self.phase = phase

    def require(self, phase: str) -> None:
        if self.phase != phase:
            raise RuntimeError(f"operation requires phase {phase!r}, election is in {self.phase!r}")


def initialize_election(
    n_voters: int,
    candidates: Sequence[str] | CandidateSet,
    params: ElectionParams,
    rng: np.random.Generator,
    *,
    transcript: Transcript | None = None,
) -> ElectionState:
    """Trusted setup: administrator bundles, published candidate codes, voter roll."""
    if n_voters < 0:
        raise ValueError("n_voters must be >= 0")
    params.validate()
    tx = transcript if transcript is not None else Transcript()
    if not isinstance(candidates, CandidateSet):
        candidates = sample_candidates(candidates, params.s, rng, min_distance=params.min_distance)
    elif candidates.s != params.s:
        raise ValueError(f"candidate codes have {candidates.s} bits, params say s={params.s}")
    keys = setup_keys(params.l, params.m, rng)
    state = ElectionState(
        params=params,
        candidates=candidates,
        keys=keys,
        voters=[VoterRecord(i) for i in range(n_voters)],
        transcript=tx,
        tally={name: 0 for name in candidates.names},
    )
    state.collusion.ecc = params.ecc is not None
    tx.emit("initial", "bob", "publish_candidates", {"names": list(candidates.names), "codes": list(candidates.codes)})
    for k, bundle in ((1, keys.bundle1), (2, keys.bundle2)):
        tx.emit("initial", f"bob{k}", "share_bundle_with_charlie", {"C": bundle.concat()})
    for v in state.voters:
        tx.emit("initial", "bob", "share_voter_material", {"voter": v.voter_id})
    state.advance("keydist")
    return state


TamperHook = Callable[[int, int, QubitRegister], None]


def run_key_distribution_phase(
    state: ElectionState,
    channel: ChannelConfig,
    rng: np.random.Generator,
    *,
    tamper: TamperHook | None = None,
) -> ElectionState:
    """Key distribution with verification broadcast and bounded restarts.

    ``tamper(voter_id, round, register)`` is a fault-injection hook called on
    the register a voter hands to the anonymity channel.
    """
    state.require("keydist")
    p = state.params
    if channel.lossy and p.ecc is None:
        raise ValueError("lossy channels need the ECC variant (set params.ecc)")
    keys, tx = state.keys, state.transcript
    N, L = keys.voter_material()
    pending = [v for v in state.voters if v.K is None]
    for rnd in range(p.max_retries + 1):
        if not pending:
            break
        state.rounds = rnd + 1
        anon = AnonymityChannel()
        claims: dict[int, np.ndarray] = {}
        owner: dict[int, VoterRecord] = {}
        for v in pending:
            v.attempts += 1
            bob, reg = bob_prepare(keys, rng, flip_mask=p.flip_mask)
            state.collusion.bob[(rnd, v.voter_id)] = (bob.R1, bob.R2)
            tx.emit("keydist", "bob", "issue_register", {"voter": v.voter_id, "round": rnd})
            reg = channel_transmit(reg, channel.loss_p, channel.flip_p, rng)
            try:
                if p.ecc is None:
                    view, reg = voter_randomize(reg, N, L, p.l, p.m, rng, flip_mask=bob.flip_mask)
                    serials = None
                else:
                    view, reg, serials = voter_randomize_ecc(reg, N, L, p.l, p.m, p.ecc, rng,
                                                             tag_len=p.tag_len, flip_mask=bob.flip_mask)
            except ValueError:
                tx.emit("keydist", "voter", "register_unusable", {"round": rnd})
                continue
            if tamper is not None:
                tamper(v.voter_id, rnd, reg)
            reg = channel_transmit(reg, channel.relay_loss_p, channel.relay_flip_p, rng)
            slot = anon.submit((reg, serials))
            claims[slot] = view.K
            owner[slot] = v
            state.truth[(rnd, slot)] = v.voter_id

        charlie_keys: dict[int, Optional[np.ndarray]] = {}
        fresh: dict[int, str] = {}
        outcomes: dict[int, tuple] = {}
        for slot, (reg, serials) in anon.deliver(rng):
            if p.ecc is None:
                res = charlie_decode(reg, keys, rng)
                ok, K, T = res.accepted, res.K, res.T_prime
            else:
                res = charlie_decode_ecc(reg, serials, keys, p.ecc, rng, tag_len=p.tag_len)
                ok, K, T = res.accepted, res.K, res.p
            verdict = "bad_N" if not ok else "accepted"
            if ok:
                _, K_L, _ = p.split(K)
                tag = bits_str(K_L)
                if tag in state.tags or tag in fresh.values():
                    ok, verdict = False, "duplicate_tag"
                else:
                    fresh[slot] = tag
            charlie_keys[slot] = K if ok else None
            outcomes[slot] = (res.outcome, T, K)
            tx.emit("keydist", "charlie", "decode", {"round": rnd, "slot": slot, "verdict": verdict})

        flags = verification_broadcast(charlie_keys, claims, p.check_bits)
        for slot in sorted(charlie_keys):
            pub = charlie_keys[slot]
            tx.emit("keydist", "charlie", "publish_check",
                    {"round": rnd, "slot": slot, "bits": None if pub is None else pub[: p.check_bits]})
        still = []
        for slot in sorted(claims):
            v, ok = owner[slot], flags[slot]
            tx.emit("keydist", "voter", "verification", {"round": rnd, "slot": slot, "ok": ok})
            if ok:
                K = claims[slot]
                v.K = K
                v.check, v.K_L, v.K_R = p.split(K)
                v.slot = (rnd, slot)
                state.tags[fresh[slot]] = p.split(charlie_keys[slot])[2]
                outcome, T, Kc = outcomes[slot]
                state.collusion.charlie.append(
                    {"round": rnd, "slot": slot, "outcome": outcome, "T": T, "K": Kc, "tag": fresh[slot]}
                )
            else:
                still.append(v)
        # Voters whose register never reached the channel also retry.
        still.extend(v for v in pending if v not in owner.values())
        pending = sorted(still, key=lambda v: v.voter_id)
        for v in pending:
            tx.emit("keydist", "bob", "restart", {"voter": v.voter_id, "round": rnd})
    if pending:
        ids = [v.voter_id for v in pending]
        tx.emit("keydist", "bob", "abort", {"voters": ids})
        raise ElectionAbort(f"voters {ids} exhausted {p.max_retries} retries in key distribution")
    state.advance("voting")
    return state


def voter_cast(voter: VoterRecord, choice: str, candidates: CandidateSet) -> Ballot:
    """Encrypt the candidate code under ``K_R`` and attach ``K_L`` as the tag."""
    if voter.K_R is None:
        raise RuntimeError(f"voter {voter.voter_id} has no key")
    if voter.cast:
        raise RuntimeError(f"voter {voter.voter_id} already used K_R")
    code = candidates.code_of(choice)
    voter.cast = True
    voter.choice = choice
    return Ballot(ciphertext=otp_encrypt(voter.K_R, code), tag=voter.K_L.copy())


def judge_ballot(state: ElectionState, ballot: Ballot) -> tuple[Verdict, Optional[str], Optional[np.ndarray]]:
    """Charlie's checks without side effects: ``(verdict, candidate, plaintext)``."""
    tag = bits_str(ballot.tag)
    if tag not in state.tags:
        return Verdict.UNKNOWN_TAG, None, None
    if tag in state.used_tags:
        return Verdict.REPLAY, None, None
    K_R = state.tags[tag]
    ct = to_bits(ballot.ciphertext)
    if ct.size != state.candidates.s:
        return Verdict.INELIGIBLE, None, None
    v = otp_decrypt(K_R, ct)
    name = state.candidates.name_of(v)
    if name is None:
        return Verdict.INELIGIBLE, None, v
    return Verdict.ACCEPTED, name, v


def charlie_receive_count(state: ElectionState, ballot: Ballot) -> Verdict:
    """Tag lookup, replay check, decryption and eligibility check; counts on success."""
    state.require("voting")
    verdict, name, v = judge_ballot(state, ballot)
    if verdict is Verdict.ACCEPTED:
        state.used_tags.add(bits_str(ballot.tag))
        state.board.entries.append((to_bits(ballot.tag).copy(), v))
        state.tally[name] += 1
    state.transcript.emit("voting", "charlie", "ballot_verdict", {"verdict": verdict.value})
    return verdict


def run_voting_phase(
    state: ElectionState,
    choices: Mapping[int, str],
    rng: np.random.Generator,
    *,
    extra_ballots: Sequence[Ballot] = (),
) -> dict[Verdict, int]:
    """Voters cast through the anonymity channel; Charlie processes in delivery order.

    ``extra_ballots`` lets an adversary inject ballots into the same channel.
    Processing stops early once ``params.message_budget`` messages are used.
    """
    state.require("voting")
    anon = AnonymityChannel()
    for v in state.voters:
        if v.voter_id in choices:
            anon.submit(voter_cast(v, choices[v.voter_id], state.candidates))
            state.transcript.emit("voting", "anon", "ballot_sent", None)
    for b in extra_ballots:
        anon.submit(b)
    counts = {verdict: 0 for verdict in Verdict}
    budget = state.params.message_budget
    for i, (_, ballot) in enumerate(anon.deliver(rng)):
        if budget is not None and i >= budget:
            state.transcript.emit("voting", "charlie", "deadline", {"processed": i})
            break
        counts[charlie_receive_count(state, ballot)] += 1
    return counts


def publish_and_verify(
    state: ElectionState,
    rng: np.random.Generator,
    *,
    tamper: Callable[[list], None] | None = None,
) -> tuple[BulletinBoard, dict[int, bool]]:
    """Counting phase: shuffle and publish ``(K_L, v)`` pairs and the tally.

    ``tamper`` may rewrite the entry list before publication (a dishonest
    counter). Each voter that cast checks that its tag appears once with its
    own code.
    """
    state.advance("counting")
    entries = state.board.entries
    order = rng.permutation(len(entries))
    board = BulletinBoard([entries[k] for k in order])
    if tamper is not None:
        tamper(board.entries)
    board.published = True
    state.board = board
    tx = state.transcript
    tx.emit("counting", "charlie", "tally_published", {"tally": dict(state.tally)})
    tx.emit("counting", "charlie", "board_published", {"board": board.as_strings()})
    published = {}
    for t, v in board.entries:
        published.setdefault(bits_str(t), []).append(bits_str(v))
    flags = {}
    for voter in state.voters:
        if not voter.cast:
            continue
        seen = published.get(bits_str(voter.K_L), [])
        ok = seen == [bits_str(state.candidates.code_of(voter.choice))]
        voter.verified = ok
        flags[voter.voter_id] = ok
        tx.emit("counting", "voter", "verify", {"ok": ok})
    state.advance("done")
    return board, flags


def fairness_audit(transcript: Transcript) -> bool:
    """True when no tally-bearing event appears before the counting phase."""
    return all(ev.phase in ("counting", "done") for ev in transcript.events if ev.event in TALLY_EVENTS)


@dataclass(frozen=True)
class ElectionConfig:
    n_voters: int = 5
    candidates: tuple[str, ...] = ("A", "B")
    votes: Optional[tuple[str, ...]] = None
    params: ElectionParams = field(default_factory=ElectionParams)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    run_id: str = "election"

    def __post_init__(self):
        if self.votes is not None:
            if len(self.votes) != self.n_voters:
                raise ValueError(f"{len(self.votes)} votes for {self.n_voters} voters")
            unknown = set(self.votes) - set(self.candidates)
            if unknown:
                raise ValueError(f"votes for unknown candidates {sorted(unknown)}")


@dataclass
class ElectionResult:
    tally: dict[str, int]
    board: BulletinBoard
    transcript: Transcript
    verified: dict[int, bool]
    state: ElectionState


def run_full_election(config: ElectionConfig, rng: np.random.Generator, *, tamper: TamperHook | None = None) -> ElectionResult:
    """All four phases. Without explicit votes each voter picks uniformly."""
    tx = Transcript(run=config.run_id)
    state = initialize_election(config.n_voters, config.candidates, config.params, rng, transcript=tx)
    run_key_distribution_phase(state, config.channel, rng, tamper=tamper)
    if config.votes is None:
        picks = rng.integers(0, len(config.candidates), size=config.n_voters)
        votes = [config.candidates[k] for k in picks]
    else:
        votes = list(config.votes)
    run_voting_phase(state, dict(enumerate(votes)), rng)
    board, flags = publish_and_verify(state, rng)
    return ElectionResult(tally=dict(state.tally), board=board, transcript=tx, verified=flags, state=state)


class BaselineAdministrator:
    """Bob's registration desk: one application per identity, checked secret number."""

    def __init__(self, secrets: Mapping[int, int]):
        self._secrets = dict(secrets)
        self._applied: set[int] = set()

    def register(self, voter_id: int, r: int) -> bool:
        if voter_id in self._applied:
            return False
        if self._secrets.get(voter_id) != r:
            return False
        self._applied.add(voter_id)
        return True


@dataclass
class BaselineResult:
    tally: dict[str, int]
    board: BulletinBoard
    transcript: Transcript
    registrations: dict[int, bool]
    reapplications: dict[int, bool]
    # What Bob1 and Bob2 hold jointly: per-voter (N1, T1, N2, T2).
    bob_records: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]
    truth: dict[str, int]


def classical_baseline_run(
    config: ElectionConfig,
    rng: np.random.Generator,
    *,
    tag_bits: int = 16,
    reapply: Sequence[int] = (),
) -> BaselineResult:
    """Classical scheme with XOR-combined per-voter pads and tags.

    ``reapply`` lists voters who try to register a second time.
    """
    s = config.params.s
    tx = Transcript(run=config.run_id + "-baseline")
    cands = sample_candidates(config.candidates, s, rng, min_distance=config.params.min_distance)
    tx.emit("initial", "bob", "publish_candidates", {"codes": list(cands.codes)})
    secrets = {i: int(rng.integers(0, 2**62)) for i in range(config.n_voters)}
    desk = BaselineAdministrator(secrets)
    registrations: dict[int, bool] = {}
    bob_records = {}
    charlie_table: dict[str, np.ndarray] = {}
    voter_keys = {}
    for i in range(config.n_voters):
        registrations[i] = desk.register(i, secrets[i])
        tx.emit("initial", "bob", "registration", {"voter": i, "ok": registrations[i]})
        if not registrations[i]:
            continue
        N1, T1 = random_bits(s, rng), random_bits(tag_bits, rng)
        N2, T2 = random_bits(s, rng), random_bits(tag_bits, rng)
        N, T = xor_combine(N1, N2), xor_combine(T1, T2)
        bob_records[i] = (N1, T1, N2, T2)
        charlie_table[bits_str(T)] = N
        voter_keys[i] = (N, T)
    reapplications = {}
    for i in reapply:
        reapplications[i] = desk.register(i, secrets.get(i, -1))
        tx.emit("initial", "bob", "registration", {"voter": i, "ok": reapplications[i]})

    if config.votes is None:
        votes = [config.candidates[k] for k in rng.integers(0, len(config.candidates), size=config.n_voters)]
    else:
        votes = list(config.votes)
    anon = AnonymityChannel()
    truth = {}
    for i, (N, T) in voter_keys.items():
        anon.submit((T, otp_encrypt(N, cands.code_of(votes[i]))))
        truth[bits_str(T)] = i
        tx.emit("voting", "anon", "ballot_sent", None)
    tally = {name: 0 for name in cands.names}
    entries = []
    seen: set[str] = set()
    for _, (T, ct) in anon.deliver(rng):
        key = bits_str(T)
        verdict = "accepted"
        if key not in charlie_table:
            verdict = "unknown_tag"
        elif key in seen:
            verdict = "replay"
        else:
            v = otp_decrypt(charlie_table[key], ct)
            name = cands.name_of(v)
            if name is None:
                verdict = "ineligible"
            else:
                seen.add(key)
                tally[name] += 1
                entries.append((T, v))
        tx.emit("voting", "charlie", "ballot_verdict", {"verdict": verdict})
    order = rng.permutation(len(entries))
    board = BulletinBoard([entries[k] for k in order], published=True)
    tx.emit("counting", "charlie", "tally_published", {"tally": tally})
    tx.emit("counting", "charlie", "board_published", {"board": board.as_strings()})
    return BaselineResult(tally=tally, board=board, transcript=tx, registrations=registrations,
                          reapplications=reapplications, bob_records=bob_records, truth=truth)
