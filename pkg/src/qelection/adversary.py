"""Attack models and exact security audits.

Each attack declares the material it uses as a :class:`Capabilities` set.
Monte Carlo estimates come back as :class:`AttackOutcome` records carrying a
binomial (or run-level) standard error and, where one exists, the closed form
the estimate should match.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np

from .aqkd_basic import AqkdAbort, TagRegistry, charlie_measure_announce, voter_prepare, voter_verify_extract
from .aqkd_string import (
    StringAqkdKeys,
    bob_prepare,
    charlie_decode_ecc,
    decode_outcomes,
    round_trip,
    voter_randomize_ecc,
)
from .election import (
    Ballot,
    BaselineResult,
    CollusionLog,
    ElectionConfig,
    ElectionParams,
    ElectionState,
    Verdict,
    judge_ballot,
    classical_baseline_run,
    run_full_election,
)
from .primitives import EccCode, bits_str, ecc_encode, parity_collapse, parity_expand, random_bits, xor_combine
from .qubit_sim import (
    MAX_DENSITY_DIM,
    QubitRegister,
    _apply_masked,
    encode_conjugate,
    ensemble_density,
    layered_amplitudes,
    measure_register,
    trace_distance,
)
from .transcript import trial_rng

__all__ = [
    "ATTACK_KINDS",
    "AttackConfig",
    "AttackOutcome",
    "BudgetExceeded",
    "Capabilities",
    "DensityAuditResult",
    "DENSITY_VIEWS",
    "IncompleteTranscriptError",
    "intercept_resend",
    "intercept_resend_attack",
    "forge_ballot_attack",
    "forged_ballot_injection",
    "basis_collusion_attack",
    "exclusion_simulation",
    "trace_collusion_attack",
    "trace_collusion_baseline",
    "trace_collusion_experiment",
    "density_audit",
    "ecc_forger_attack",
    "run_attack",
]

ATTACK_KINDS = ("intercept_resend", "forge_ballot", "basis_collusion", "trace_collusion", "density_audit", "forger_ecc")
DENSITY_VIEWS = ("outsider", "bob1", "bob2", "charlie")
MAX_ENUMERATION = 2**20


class BudgetExceeded(ValueError):
    """The exact enumeration would exceed the dimension or state-count cap."""


class IncompleteTranscriptError(ValueError):
    pass


@dataclass(frozen=True)
class Capabilities:
    """What an attacker holds: key names, transcript names, and whether cloning is allowed."""

    keys: frozenset[str] = frozenset()
    transcripts: frozenset[str] = frozenset()
    clone: bool = False


EAVESDROPPER = Capabilities(transcripts=frozenset({"public"}))
FORGER = Capabilities(keys=frozenset({"N", "L"}), transcripts=frozenset({"public"}))
COLLUDING_VOTERS = Capabilities(keys=frozenset({"N", "L", "own_register"}), transcripts=frozenset({"public"}))
ADMIN_COLLUSION = Capabilities(
    keys=frozenset({"S1", "M1", "N1", "L1", "S2", "M2", "N2", "L2", "R1", "R2"}),
    transcripts=frozenset({"public", "bob", "charlie_outcomes"}),
)


@dataclass
class AttackOutcome:
    metric: str
    estimate: float
    trials: int
    stderr: float
    closed_form: Optional[float] = None
    capabilities: Capabilities = field(default_factory=Capabilities)
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.estimate <= 1.0:
            raise ValueError(f"estimate {self.estimate} outside [0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    def z_score(self) -> float:
        """Distance from the closed form in standard errors (nan without one)."""
        if self.closed_form is None:
            return float("nan")
        if self.stderr == 0:
            return 0.0 if self.estimate == self.closed_form else float("inf")
        return abs(self.estimate - self.closed_form) / self.stderr

    def within(self, sigmas: float = 4.0) -> bool:
        return self.z_score() <= sigmas


def _binomial(metric: str, hits: int, trials: int, closed_form=None, caps=Capabilities(), **extras) -> AttackOutcome:
    p = hits / trials
    return AttackOutcome(metric, p, trials, math.sqrt(p * (1 - p) / trials), closed_form, caps, dict(extras))


# ---------------------------------------------------------------- intercept-resend


def intercept_resend(reg: QubitRegister, rng: np.random.Generator) -> QubitRegister:
    """Measure every qubit in a random basis and resend the eigenstate that was found."""
    lost = reg.lost
    basis = random_bits(len(reg), rng)
    meas = measure_register(reg, basis, rng)
    out = encode_conjugate(meas.bits, basis)
    out.mark_lost(lost)
    return out


def intercept_resend_attack(
    rng: np.random.Generator,
    *,
    n_qubits: int = 10_000,
    n_check: int = 20,
    detection_trials: int = 10_000,
    attack: bool = True,
) -> tuple[AttackOutcome, AttackOutcome]:
    """Error rate on Charlie's check bits and detection frequency with ``n_check`` checks.

    A session counts as detected when at least one check bit disagrees, so the
    voter runs with a zero mismatch threshold.
    """
    if n_qubits < 1 or n_check < 1 or detection_trials < 1:
        raise ValueError("sizes must be >= 1")
    attacker = intercept_resend if attack else None

    # One long session where every qubit is a check bit.
    N = random_bits(n_qubits, rng)
    R, reg = voter_prepare(N, rng)
    if attacker:
        reg = attacker(reg, rng)
    ann, _ = charlie_measure_announce(reg, N, random_bits(16, rng), rng, registry=TagRegistry(), check_fraction=1.0)
    errors = int(np.count_nonzero(ann.sigma != R[ann.positions]))
    rate = _binomial("intercept_resend_error_rate", errors, ann.positions.size,
                     0.25 if attack else 0.0, EAVESDROPPER)

    registry = TagRegistry()
    detected = 0
    for _ in range(detection_trials):
        N = random_bits(2 * n_check, rng)
        R, reg = voter_prepare(N, rng)
        if attacker:
            reg = attacker(reg, rng)
        ann, _ = charlie_measure_announce(reg, N, random_bits(32, rng), rng, registry=registry, check_fraction=0.5)
        try:
            voter_verify_extract(R, ann, error_threshold=0.0)
        except AqkdAbort:
            detected += 1
    closed = 1 - 0.75**n_check if attack else 0.0
    det = _binomial("intercept_resend_detection", detected, detection_trials, closed, EAVESDROPPER, n_check=n_check)
    return rate, det


# ---------------------------------------------------------------- forged registers


def _random_real_register(n: int, rng: np.random.Generator) -> QubitRegister:
    theta = rng.uniform(0.0, 2 * np.pi, size=n)
    return QubitRegister(np.stack([np.cos(theta), np.sin(theta)], axis=1))


def forge_ballot_attack(
    m: int,
    trials: int,
    rng: np.random.Generator,
    *,
    l: int | None = None,
    honest_trials: int = 200,
    chunk: int = 20_000,
) -> AttackOutcome:
    """Fraction of uniformly random registers that pass Charlie's ``N'`` check.

    Keys are redrawn per chunk; the forger's registers never depend on them.
    ``extras['honest_acceptance']`` is the control arm with real registers.
    """
    if m < 1 or trials < 1:
        raise ValueError("need m >= 1 and trials >= 1")
    l = m + 2 if l is None else l
    n = l * m
    accepted = 0
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        keys = StringAqkdKeys.random(l, m, rng)
        reg = _random_real_register(k * n, rng)
        bits = measure_register(reg, np.tile(keys.s, k), rng).bits.reshape(k, n)
        accepted += int(decode_outcomes(bits, keys)[3].sum())
        done += k
    honest = 0
    for _ in range(honest_trials):
        keys = StringAqkdKeys.random(l, m, rng)
        _, dec, _ = round_trip(keys, rng)
        honest += dec.accepted
    return _binomial("forge_acceptance", accepted, trials, 2.0**-m, FORGER, m=m, l=l,
                     honest_acceptance=honest / honest_trials if honest_trials else float("nan"))


def forged_ballot_injection(state: ElectionState, trials: int, rng: np.random.Generator) -> AttackOutcome:
    """Acceptance rate of uniformly random (tag, ciphertext) ballots against a live election.

    Ballots are judged without being counted. The closed form is
    ``(unused tags / 2**|K_L|) * (|candidates| / 2**s)``.
    """
    state.require("voting")
    p = state.params
    hits = 0
    for _ in range(trials):
        ballot = Ballot(ciphertext=random_bits(p.s, rng), tag=random_bits(p.tag_bits, rng))
        hits += judge_ballot(state, ballot)[0] is Verdict.ACCEPTED
    unused = len(set(state.tags) - state.used_tags)
    closed = unused / 2**p.tag_bits * len(state.candidates.names) / 2**p.s
    return _binomial("forged_ballot_acceptance", hits, trials, closed, FORGER, unused_tags=unused)


# ---------------------------------------------------------------- basis collusion


def _coincidence(m: int, S1, S2, M1, M2, guesses, rng: np.random.Generator) -> np.ndarray:
    """Row k: m fresh voters measure their first block in ``guesses[k]``; True if all parities agree.

    ``S1, S2`` broadcast to ``(k, m)`` and ``M1, M2`` to ``(k,)``.
    """
    guesses = np.atleast_2d(np.asarray(guesses, dtype=np.uint8))
    k = guesses.shape[0]
    S1 = np.broadcast_to(np.asarray(S1, dtype=np.uint8), (k, m))[:, None, :]
    S2 = np.broadcast_to(np.asarray(S2, dtype=np.uint8), (k, m))[:, None, :]
    M1 = np.broadcast_to(np.asarray(M1, dtype=np.uint8), (k,))
    M2 = np.broadcast_to(np.asarray(M2, dtype=np.uint8), (k,))
    R1 = parity_expand(np.repeat(M1, m), m, rng).reshape(k, m, m)
    R2 = parity_expand(np.repeat(M2, m), m, rng).reshape(k, m, m)
    shape = (k, m, m)
    amps = layered_amplitudes(np.broadcast_to(S1, shape), R1, np.broadcast_to(S2, shape), R2)
    basis = np.broadcast_to(guesses[:, None, :], shape).reshape(-1)
    bits = measure_register(QubitRegister(amps.reshape(-1, 2)), basis, rng).bits.reshape(shape)
    par = parity_collapse(bits, m)[..., 0]
    return np.all(par == par[:, :1], axis=1)


def _wrong_guesses(s: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    m = s.shape[-1]
    codes = rng.integers(1, 2**m, size=k)
    e = ((codes[:, None] >> np.arange(m)[::-1]) & 1).astype(np.uint8)
    return s ^ e


def basis_collusion_attack(
    m: int,
    trials: int,
    rng: np.random.Generator,
    *,
    guess: str = "wrong",
    chunk: int = 25_000,
) -> AttackOutcome:
    """m colluders measure their first block in a guessed basis string and compare parities.

    ``guess="wrong"`` draws the guess uniformly from the incorrect strings.
    Each trial uses fresh administrator keys.
    """
    if guess not in ("wrong", "correct"):
        raise ValueError("guess must be 'wrong' or 'correct'")
    if m < 1 or trials < 1:
        raise ValueError("need m >= 1 and trials >= 1")
    hits = 0
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        S1 = random_bits(k * m, rng).reshape(k, m)
        S2 = random_bits(k * m, rng).reshape(k, m)
        s_true = S1 ^ S2
        g = s_true if guess == "correct" else _wrong_guesses(s_true, k, rng)
        hits += int(_coincidence(m, S1, S2, random_bits(k, rng), random_bits(k, rng), g, rng).sum())
        done += k
    closed = 1.0 if guess == "correct" else 1.0 / 2 ** (m - 1)
    return _binomial(f"collusion_coincide_{guess}", hits, trials, closed, COLLUDING_VOTERS,
                     m=m, exclusion_cost=(2**m - 1) * m)


def exclusion_simulation(m: int, runs: int, rng: np.random.Generator) -> dict[str, float]:
    """Voters consumed while colluders eliminate every wrong first-block basis string.

    Survivors are tested once per sweep; a failed coincidence test excludes a
    string. The search ends when one string is left. Limited to ``2 <= m <= 4``:
    at ``m = 1`` a lone colluder always coincides and nothing can be excluded.
    """
    if not 2 <= m <= 4:
        raise ValueError("exclusion simulation is limited to 2 <= m <= 4")
    all_strings = np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.uint8)
    used = np.zeros(runs, dtype=np.int64)
    found = 0
    for r in range(runs):
        S1, S2 = random_bits(m, rng), random_bits(m, rng)
        M1, M2 = int(rng.integers(0, 2)), int(rng.integers(0, 2))
        alive = np.ones(len(all_strings), dtype=bool)
        while alive.sum() > 1:
            idx = np.flatnonzero(alive)
            ok = _coincidence(m, S1, S2, M1, M2, all_strings[idx], rng)
            used[r] += m * idx.size
            alive[idx[~ok]] = False
        found += bool(np.array_equal(all_strings[np.flatnonzero(alive)[0]], S1 ^ S2))
    return {
        "m": m,
        "runs": runs,
        "lower_bound": float((2**m - 1) * m),
        "mean_voters": float(used.mean()),
        "min_voters": float(used.min()),
        "found_rate": found / runs,
    }


# ---------------------------------------------------------------- collusion tracing


def _random_matching(consistent: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish assignment of sessions (rows) to distinct consistent hypotheses (columns)."""
    n_sess, n_hyp = consistent.shape
    guess = np.full(n_sess, -1, dtype=np.int64)
    taken = np.zeros(n_hyp, dtype=bool)
    for i in rng.permutation(n_sess):
        options = np.flatnonzero(consistent[i] & ~taken)
        if options.size == 0:
            options = np.flatnonzero(~taken)
        j = int(rng.choice(options))
        guess[i] = j
        taken[j] = True
    return guess


def trace_collusion_attack(
    log: CollusionLog,
    truth: Mapping[tuple[int, int], int],
    rng: np.random.Generator,
) -> tuple[float, int, bool]:
    """Link Charlie's accepted sessions to voters using all administrator material.

    For every session and every voter hypothesis the colluders rebuild
    ``P = outcome ^ R1 ^ R2`` and test its block parities against the decoded
    tag. Returns ``(accuracy, sessions, all_hypotheses_consistent)``.
    """
    if log.ecc:
        raise IncompleteTranscriptError("tracing is defined for the lossless string path only")
    if not log.charlie:
        raise IncompleteTranscriptError("no accepted sessions in the collusion log")
    rounds: dict[int, list[dict]] = {}
    for rec in log.charlie:
        rounds.setdefault(rec["round"], []).append(rec)
    correct = total = 0
    all_consistent = True
    for rnd, recs in sorted(rounds.items()):
        hyps = sorted(v for (r, v) in log.bob if r == rnd)
        if not hyps:
            raise IncompleteTranscriptError(f"no Bob records for round {rnd}")
        consistent = np.zeros((len(recs), len(hyps)), dtype=bool)
        for i, rec in enumerate(recs):
            m = rec["outcome"].size // rec["T"].size
            for j, v in enumerate(hyps):
                R1, R2 = log.bob[(rnd, v)]
                P_hat = rec["outcome"] ^ R1 ^ R2
                consistent[i, j] = np.array_equal(parity_collapse(P_hat, m), rec["T"])
        all_consistent &= bool(consistent.all())
        guess = _random_matching(consistent, rng)
        for i, rec in enumerate(recs):
            key = (rnd, rec["slot"])
            if key not in truth:
                raise IncompleteTranscriptError(f"no ground truth for session {key}")
            correct += hyps[guess[i]] == truth[key]
            total += 1
    return correct / total, total, all_consistent


def trace_collusion_baseline(result: BaselineResult) -> float:
    """Classical scheme: ``T1 ^ T2`` from Bob's records names the voter behind each board tag."""
    owner = {bits_str(xor_combine(T1, T2)): i for i, (_, T1, _, T2) in result.bob_records.items()}
    entries = result.board.entries
    if not entries:
        raise IncompleteTranscriptError("empty bulletin board")
    hits = sum(owner.get(bits_str(tag)) == result.truth[bits_str(tag)] for tag, _ in entries)
    return hits / len(entries)


TRACE_PARAMS = ElectionParams(l=20, m=2, s=2, check_bits=2)


def trace_collusion_experiment(
    n_voters: int,
    runs: int,
    rng: np.random.Generator,
    *,
    params: ElectionParams = TRACE_PARAMS,
    classical: bool = False,
) -> AttackOutcome:
    """Linking accuracy over ``runs`` independent elections with ``n_voters`` each.

    The standard error is the run-level sample deviation over ``sqrt(runs)``,
    since sessions within one election are linked jointly.
    """
    if n_voters < 1 or runs < 1:
        raise ValueError("need n_voters >= 1 and runs >= 1")
    base = int(rng.integers(0, 2**63))
    acc = np.zeros(runs)
    consistent = True
    cands = ("A", "B", "C", "D")[: 2 ** min(params.s, 2)]
    for r in range(runs):
        trng = trial_rng(base, r)
        cfg = ElectionConfig(n_voters=n_voters, candidates=cands, params=params, run_id=f"trace-{r}")
        if classical:
            acc[r] = trace_collusion_baseline(classical_baseline_run(cfg, trng))
        else:
            res = run_full_election(cfg, trng)
            acc[r], _, ok = trace_collusion_attack(res.state.collusion, res.state.truth, trng)
            consistent &= ok
    stderr = float(acc.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
    closed = 1.0 if classical else 1.0 / n_voters
    kind = "classical" if classical else "quantum"
    return AttackOutcome(f"trace_accuracy_{kind}_n{n_voters}", float(acc.mean()), runs, stderr, closed,
                         ADMIN_COLLUSION, {"n_voters": n_voters, "all_hypotheses_consistent": consistent})


# ---------------------------------------------------------------- density audits


@dataclass(frozen=True)
class DensityAuditResult:
    view: str
    l: int
    m: int
    distance: float
    n_states: int
    dim: int


def _all_strings(n: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.uint8).reshape(-1, n)


def _check_budget(dim: int, count: int) -> None:
    if dim > MAX_DENSITY_DIM:
        raise BudgetExceeded(f"dimension {dim} exceeds {MAX_DENSITY_DIM}")
    if count > MAX_ENUMERATION:
        raise BudgetExceeded(f"{count} states exceed the enumeration budget of {MAX_ENUMERATION}")


def _grid(*arrays: np.ndarray) -> list[np.ndarray]:
    """Cartesian product of row sets; returns one stacked array per input."""
    idx = np.meshgrid(*[np.arange(len(a)) for a in arrays], indexing="ij")
    return [a[i.reshape(-1)] for a, i in zip(arrays, idx)]


def _with_mask(amps: np.ndarray, P: np.ndarray) -> np.ndarray:
    flat = amps.reshape(-1, 2)
    _apply_masked(flat, "Y", P.reshape(-1).astype(bool))
    return amps


def _audit_outsider(l: int, m: int) -> tuple[float, int]:
    n = l * m
    _check_budget(2**n, 4**n)
    strings = _all_strings(n)
    s, r = _grid(strings, strings)
    zeros = np.zeros_like(s)
    rho = ensemble_density(layered_amplitudes(zeros, r, s, zeros))
    return trace_distance(rho, np.eye(2**n) / 2**n), len(s)


def _audit_bob(view: str, l: int, m: int, rng: np.random.Generator) -> tuple[float, int]:
    n = l * m
    _check_budget(2**n, 8**n)
    S_known = random_bits(n, rng)
    R_known = parity_expand(random_bits(l, rng), m, rng)
    strings = _all_strings(n)
    S_u, R_u, P = _grid(strings, strings, strings)
    Sk = np.broadcast_to(S_known, S_u.shape)
    Rk = np.broadcast_to(R_known, R_u.shape)
    if view == "bob1":
        amps = layered_amplitudes(Sk, Rk, S_u, R_u)
    else:
        amps = layered_amplitudes(S_u, R_u, Sk, Rk)
    rho = ensemble_density(_with_mask(amps, P))
    return trace_distance(rho, np.eye(2**n) / 2**n), len(P)


def _audit_charlie(l: int, m: int, rng: np.random.Generator) -> tuple[float, int]:
    """Charlie colluding with both administrators, block by block; returns the worst block."""
    _check_budget(2**m, 2 ** (m - 1))
    strings = _all_strings(m)
    par = strings.sum(axis=1) & 1
    worst = 0.0
    for _ in range(l):
        S1, S2 = random_bits(m, rng), random_bits(m, rng)
        M1, M2, T = (int(x) for x in rng.integers(0, 2, size=3))
        R1 = parity_expand([M1], m, rng)
        R2 = parity_expand([M2], m, rng)
        P = strings[par == T]
        k = len(P)
        amps = layered_amplitudes(*(np.broadcast_to(x, (k, m)) for x in (S1, R1, S2, R2)))
        rho = ensemble_density(_with_mask(amps, P))
        # Reference built directly from conjugate coding of the admissible strings.
        X = strings[par == (M1 ^ M2 ^ T)]
        s = S1 ^ S2
        ref_amps = np.zeros((len(X), m, 2))
        np.put_along_axis(ref_amps, X[..., None].astype(np.int64), 1.0, axis=2)
        _apply_masked(ref_amps.reshape(-1, 2), "H", np.broadcast_to(s, X.shape).reshape(-1).astype(bool))
        worst = max(worst, trace_distance(rho, ensemble_density(ref_amps)))
    return worst, 2 ** (m - 1)


def density_audit(view: str, l: int, m: int, rng: np.random.Generator | None = None) -> DensityAuditResult:
    """Trace distance between a party's averaged state and the reference mixture.

    ``outsider`` enumerates basis and value strings; ``bob1``/``bob2`` fix one
    administrator's layer and enumerate the other layer plus the voter mask;
    ``charlie`` enumerates the voter mask inside each block with its parity fixed.
    Known material is drawn from ``rng``.
    """
    if view not in DENSITY_VIEWS:
        raise ValueError(f"unknown view {view!r}; expected one of {DENSITY_VIEWS}")
    if l < 1 or m < 1:
        raise ValueError("need l >= 1 and m >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    if view == "outsider":
        d, k = _audit_outsider(l, m)
        dim = 2 ** (l * m)
    elif view == "charlie":
        d, k = _audit_charlie(l, m, rng)
        dim = 2**m
    else:
        d, k = _audit_bob(view, l, m, rng)
        dim = 2 ** (l * m)
    return DensityAuditResult(view, l, m, d, k, dim)


# ---------------------------------------------------------------- lossy-path forger


def _group_errors(word: np.ndarray, intended: np.ndarray, code: EccCode) -> np.ndarray:
    return (word != intended).reshape(-1, code.r).sum(axis=1)


def ecc_forger_attack(
    trials: int,
    rng: np.random.Generator,
    *,
    l: int = 72,
    m: int = 2,
    tag_len: int = 24,
    code: EccCode = EccCode("repetition", 3),
    strategy: str = "random",
) -> AttackOutcome:
    """Error rate in the carrier parity word Charlie reads from a forged lossy-path register.

    ``random``: the forger has no Bob register and randomizes a register of
    random conjugate-coded qubits as an honest voter would.
    ``intercept``: the forger captures an honest voter's outgoing register,
    measures it in random bases and resends it with its own mask applied.
    Errors are counted against the forger's intended codeword.
    """
    if strategy not in ("random", "intercept"):
        raise ValueError("strategy must be 'random' or 'intercept'")
    n = l * m
    err_bits = exceed = failures = accepted = 0
    for _ in range(trials):
        keys = StringAqkdKeys.random(l, m, rng)
        N, L = keys.voter_material()
        if strategy == "random":
            own = encode_conjugate(random_bits(n, rng), random_bits(n, rng))
            view, reg, serials = voter_randomize_ecc(own, N, L, l, m, code, rng, tag_len=tag_len)
        else:
            _, honest = bob_prepare(keys, rng)
            _, honest, serials = voter_randomize_ecc(honest, N, L, l, m, code, rng, tag_len=tag_len)
            basis = random_bits(n, rng)
            seen = measure_register(honest, basis, rng).bits
            forged = encode_conjugate(random_bits(n, rng), random_bits(n, rng))
            view, _, _ = voter_randomize_ecc(forged, N, L, l, m, code, rng, tag_len=tag_len)
            reg = encode_conjugate(seen, basis)
            reg.apply("Y", view.D.astype(bool))
        res = charlie_decode_ecc(reg, serials, keys, code, rng, tag_len=tag_len)
        intended = ecc_encode(view.T, code)
        groups = _group_errors(res.parity_word, intended, code)
        err_bits += int(groups.sum())
        exceed += bool((groups > code.t).any())
        failures += res.reason == "decode_failure"
        accepted += res.accepted
    total = trials * tag_len * code.r
    p = err_bits / total
    return AttackOutcome(
        f"forger_ecc_error_rate_{strategy}", p, trials, math.sqrt(p * (1 - p) / total), None, FORGER,
        {"exceed_capability_rate": exceed / trials, "decode_failure_rate": failures / trials,
         "acceptance_rate": accepted / trials, "code": str(code), "tag_len": tag_len, "l": l, "m": m},
    )


# ---------------------------------------------------------------- dispatch


@dataclass(frozen=True)
class AttackConfig:
    kind: str
    trials: int = 1000
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}; expected one of {ATTACK_KINDS}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def run_attack(config: AttackConfig, rng: np.random.Generator) -> list[AttackOutcome]:
    """Run one configured attack and return its outcome rows."""
    p = dict(config.params)
    kind = config.kind
    if kind == "intercept_resend":
        return list(intercept_resend_attack(rng, n_qubits=config.trials, n_check=p.get("n_check", 20),
                                            detection_trials=p.get("detection_trials", config.trials)))
    if kind == "forge_ballot":
        return [forge_ballot_attack(p.get("m", 4), config.trials, rng, l=p.get("l"))]
    if kind == "basis_collusion":
        m = p.get("m", 4)
        return [basis_collusion_attack(m, config.trials, rng, guess=g) for g in ("correct", "wrong")]
    if kind == "trace_collusion":
        n = p.get("n_voters", 2)
        return [trace_collusion_experiment(n, config.trials, rng),
                trace_collusion_experiment(n, max(1, min(config.trials, 100)), rng, classical=True)]
    if kind == "forger_ecc":
        return [ecc_forger_attack(config.trials, rng, strategy=st) for st in ("random", "intercept")]
    raise ValueError("density_audit is not a Monte Carlo attack; call density_audit directly")
