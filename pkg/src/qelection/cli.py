"""Command-line harness.

Every subcommand writes ``transcript.jsonl`` and ``stats.csv`` into the output
directory. Precedence for settings: built-in defaults, then the TOML config
file, then flags. The output directory may also come from
``QELECTION_OUTPUT_DIR``, which sits between the file and the flag.

Exit codes: 0 success, 2 validation error, 3 protocol abort, 4 failed check.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from . import adversary
from .aqkd_basic import TagRegistry, run_basic_session
from .aqkd_string import StringAqkdKeys, bob_prepare, charlie_decode_ecc, round_trip, voter_randomize_ecc
from .election import (
    ChannelConfig,
    ElectionAbort,
    ElectionConfig,
    ElectionParams,
    classical_baseline_run,
    run_full_election,
)
from .primitives import EccCode
from .qubit_sim import channel_transmit
from .transcript import Transcript, make_rng, trial_rng

EXIT_OK, EXIT_VALIDATION, EXIT_ABORT, EXIT_CHECK = 0, 2, 3, 4
OUTPUT_ENV = "QELECTION_OUTPUT_DIR"
SUBCOMMANDS = ("aqkd-basic", "aqkd-string", "election", "baseline", "attack", "density-audit")
ATTACK_CLI_KINDS = ("intercept-resend", "forge-ballot", "basis-collusion", "trace-collusion", "forger-ecc")
DENSITY_TOL = 1e-12


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    seed: int = 0
    l: Optional[int] = None
    m: Optional[int] = None
    s: Optional[int] = None
    check_bits: Optional[int] = None
    voters: int = 5
    candidates: tuple[str, ...] = ("A", "B")
    votes: Optional[tuple[str, ...]] = None
    loss_p: float = 0.0
    flip_p: float = 0.0
    relay_loss_p: float = 0.0
    relay_flip_p: float = 0.0
    trials: int = 1000
    ecc: Optional[str] = None
    tag_len: Optional[int] = None
    kind: Optional[str] = None
    check_fraction: float = 0.5
    error_threshold: float = 0.05
    max_retries: int = 3
    output_dir: str = "qelection-out"
    check: bool = False

    # Geometry defaults differ by subcommand; ``None`` above means "use these".
    _GEOMETRY = {
        "aqkd-basic": dict(l=None, m=32, s=None, check_bits=None),
        "aqkd-string": dict(l=32, m=8, s=None, check_bits=None),
        "election": dict(l=32, m=8, s=8, check_bits=4),
        "baseline": dict(l=32, m=8, s=8, check_bits=4),
        "attack": dict(l=None, m=4, s=None, check_bits=None),
        "density-audit": dict(l=2, m=2, s=None, check_bits=None),
    }

    def filled(self) -> "RunConfig":
        geo = {k: v for k, v in self._GEOMETRY[self.subcommand].items() if getattr(self, k) is None}
        return replace(self, **geo)

    @property
    def ecc_code(self) -> Optional[EccCode]:
        if self.ecc is None or self.ecc == "none":
            return None
        return EccCode.parse(self.ecc)

    def election_params(self) -> ElectionParams:
        code = self.ecc_code
        tag_len = self.tag_len
        if code is not None and tag_len is None:
            tag_len = self.l // code.r
        return ElectionParams(l=self.l, m=self.m, s=self.s, check_bits=self.check_bits, ecc=code,
                              tag_len=tag_len if code is not None else None, max_retries=self.max_retries)

    def channel(self) -> ChannelConfig:
        return ChannelConfig(self.loss_p, self.flip_p, self.relay_loss_p, self.relay_flip_p)

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.trials < 1:
            raise ConfigError("--trials must be >= 1")
        for name in ("loss_p", "flip_p", "relay_loss_p", "relay_flip_p", "check_fraction", "error_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.m is not None and self.m < 1:
            raise ConfigError("--m must be >= 1")
        if self.l is not None and self.subcommand != "density-audit" and self.m is not None and self.l <= self.m:
            raise ConfigError(f"l > m required, got l={self.l}, m={self.m}")
        if self.subcommand == "attack" and self.kind not in ATTACK_CLI_KINDS:
            raise ConfigError(f"--kind must be one of {', '.join(ATTACK_CLI_KINDS)}")
        try:
            self.ecc_code
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.subcommand == "election":
            if self.voters < 1:
                raise ConfigError("--voters must be >= 1")
            try:
                self.election_params()
                ElectionConfig(n_voters=self.voters, candidates=self.candidates, votes=self.votes,
                               params=self.election_params())
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            if self.channel().lossy and self.ecc_code is None:
                raise ConfigError("a lossy channel needs --ecc (for example repetition(3))")


_FILE_KEYS = {f.name for f in fields(RunConfig)} - {"subcommand"}


def _csv_list(text: str) -> tuple[str, ...]:
    items = tuple(x.strip() for x in text.split(",") if x.strip())
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", help="TOML file with run settings (flat keys)")
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--l", type=int, default=S, help="number of parity blocks")
    common.add_argument("--m", type=int, default=S, help="qubits per block")
    common.add_argument("--trials", type=int, default=S)
    common.add_argument("--loss-p", dest="loss_p", type=float, default=S)
    common.add_argument("--flip-p", dest="flip_p", type=float, default=S)
    common.add_argument("--out", dest="output_dir", default=S, help=f"output directory (env {OUTPUT_ENV})")
    common.add_argument("--check", action="store_true", default=S,
                        help="compare estimates with closed forms; exit 4 on failure")

    parser = argparse.ArgumentParser(prog="qelection", description="Quantum election simulator and security harness")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("aqkd-basic", parents=[common], help="qubit-based anonymous key distribution")
    p.add_argument("--check-fraction", dest="check_fraction", type=float, default=S)
    p.add_argument("--error-threshold", dest="error_threshold", type=float, default=S)
    p.add_argument("--max-retries", dest="max_retries", type=int, default=S)

    p = sub.add_parser("aqkd-string", parents=[common], help="qubit-string anonymous key distribution")
    p.add_argument("--ecc", default=S, help="none | repetition | repetition(r)")
    p.add_argument("--tag-len", dest="tag_len", type=int, default=S)
    p.add_argument("--relay-flip-p", dest="relay_flip_p", type=float, default=S)
    p.add_argument("--relay-loss-p", dest="relay_loss_p", type=float, default=S)

    for name, help_ in (("election", "full quantum election"), ("baseline", "classical baseline election")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--voters", type=int, default=S)
        p.add_argument("--candidates", type=_csv_list, default=S)
        p.add_argument("--votes", type=_csv_list, default=S)
        p.add_argument("--s", type=int, default=S, help="candidate code length")
        p.add_argument("--check-bits", dest="check_bits", type=int, default=S)
        p.add_argument("--ecc", default=S)
        p.add_argument("--tag-len", dest="tag_len", type=int, default=S)
        p.add_argument("--relay-flip-p", dest="relay_flip_p", type=float, default=S)
        p.add_argument("--relay-loss-p", dest="relay_loss_p", type=float, default=S)
        p.add_argument("--max-retries", dest="max_retries", type=int, default=S)

    p = sub.add_parser("attack", parents=[common], help="Monte Carlo attack models")
    p.add_argument("--kind", default=S, choices=ATTACK_CLI_KINDS)
    p.add_argument("--voters", type=int, default=S, help="voters per election (trace-collusion)")

    sub.add_parser("density-audit", parents=[common], help="exact density-matrix audits of all four views")
    return parser


def load_config_file(path: str | os.PathLike) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from None
    unknown = sorted(set(data) - _FILE_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s) {unknown}; allowed: {sorted(_FILE_KEYS)}")
    for key in ("candidates", "votes"):
        if key in data and data[key] is not None:
            data[key] = tuple(data[key])
    return data


def parse_config(argv: Sequence[str] | None = None, config_file: str | None = None,
                 env: Optional[dict] = None) -> RunConfig:
    """Merge defaults, file, environment (output dir only) and flags into a validated config."""
    env = os.environ if env is None else env
    ns = vars(build_parser().parse_args(argv))
    sub = ns.pop("subcommand")
    path = ns.pop("config", None) or config_file
    values = load_config_file(path) if path else {}
    if env.get(OUTPUT_ENV):
        values["output_dir"] = env[OUTPUT_ENV]
    values.update(ns)
    try:
        cfg = RunConfig(subcommand=sub, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg = cfg.filled()
    cfg.validate()
    return cfg


# ---------------------------------------------------------------- outputs


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def stats_csv(rows: Sequence[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "estimate", "stderr", "closed_form", "trials"])
    for metric, est, err, closed, trials in rows:
        w.writerow([metric, _fmt(est), _fmt(err), _fmt(closed), _fmt(trials)])
    return buf.getvalue()


def _row(o: adversary.AttackOutcome) -> tuple:
    return (o.metric, o.estimate, o.stderr, o.closed_form, o.trials)


def write_outputs(out: Path, transcript: Transcript, rows: Sequence[tuple]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "transcript.jsonl").write_text(transcript.to_jsonl())
    (out / "stats.csv").write_text(stats_csv(rows))


# ---------------------------------------------------------------- subcommands


def _rate(hits: int, n: int) -> tuple[float, float]:
    p = hits / n
    return p, float(np.sqrt(p * (1 - p) / n))


def cmd_aqkd_basic(cfg: RunConfig, tx: Transcript) -> tuple[list, int]:
    registry = TagRegistry()
    done = agree = 0
    for i in range(cfg.trials):
        rng = trial_rng(cfg.seed, i)
        sess = run_basic_session(cfg.m, rng, registry=registry, loss_p=cfg.loss_p, flip_p=cfg.flip_p,
                                 check_fraction=cfg.check_fraction, error_threshold=cfg.error_threshold,
                                 max_retries=cfg.max_retries, transcript=tx)
        if sess.completed:
            done += 1
            agree += bool(np.array_equal(sess.voter_key.key, sess.charlie_key))
    rows = [("aqkd_basic_completed", *_rate(done, cfg.trials), None, cfg.trials)]
    noiseless = cfg.flip_p == 0
    if done:
        rows.append(("aqkd_basic_key_agreement", *_rate(agree, done), 1.0 if noiseless else None, done))
    status = EXIT_OK
    if done < cfg.trials:
        status = EXIT_ABORT
    if noiseless and agree != done:
        status = EXIT_CHECK
    return rows, status


def cmd_aqkd_string(cfg: RunConfig, tx: Transcript) -> tuple[list, int]:
    code = cfg.ecc_code
    recovered = 0
    for i in range(cfg.trials):
        rng = trial_rng(cfg.seed, i)
        keys = StringAqkdKeys.random(cfg.l, cfg.m, rng)
        if code is None:
            if cfg.loss_p or cfg.relay_loss_p:
                raise ConfigError("a lossy channel needs --ecc")
            view, dec, _ = round_trip(keys, rng)
            ok = dec.accepted and np.array_equal(dec.K, view.K)
        else:
            tag_len = cfg.tag_len or cfg.l // code.r
            _, reg = bob_prepare(keys, rng)
            reg = channel_transmit(reg, cfg.loss_p, cfg.flip_p, rng)
            N, L = keys.voter_material()
            try:
                view, reg, serials = voter_randomize_ecc(reg, N, L, cfg.l, cfg.m, code, rng, tag_len=tag_len)
            except ValueError:
                tx.emit("keydist", "voter", "register_unusable", {"trial": i})
                continue
            reg = channel_transmit(reg, cfg.relay_loss_p, cfg.relay_flip_p, rng)
            dec = charlie_decode_ecc(reg, serials, keys, code, rng, tag_len=tag_len)
            ok = dec.accepted and np.array_equal(dec.K, view.K)
        recovered += bool(ok)
        tx.emit("keydist", "charlie", "decode", {"trial": i, "ok": bool(ok)})
    noiseless = code is None and cfg.flip_p == 0
    rows = [("aqkd_string_recovered", *_rate(recovered, cfg.trials), 1.0 if noiseless else None, cfg.trials)]
    status = EXIT_CHECK if noiseless and recovered != cfg.trials else EXIT_OK
    return rows, status


def _election_config(cfg: RunConfig) -> ElectionConfig:
    return ElectionConfig(n_voters=cfg.voters, candidates=cfg.candidates, votes=cfg.votes,
                          params=cfg.election_params(), channel=cfg.channel(), run_id=f"election-{cfg.seed}")


def cmd_election(cfg: RunConfig, tx: Transcript) -> tuple[list, int]:
    ecfg = _election_config(cfg)
    try:
        res = run_full_election(ecfg, make_rng(cfg.seed))
    except ElectionAbort as exc:
        print(f"election aborted: {exc}", file=sys.stderr)
        return [], EXIT_ABORT
    tx.run = res.transcript.run
    tx.events = res.transcript.events
    n = cfg.voters
    rows = [(f"tally_{name}", count / n, None, None, n) for name, count in res.tally.items()]
    verified = sum(res.verified.values())
    rows.append(("voters_verified", verified / n, None, 1.0, n))
    rows.append(("key_rounds", None, None, None, res.state.rounds))
    print("tally: " + ", ".join(f"{k}={v}" for k, v in res.tally.items()))
    status = EXIT_OK
    if sum(res.tally.values()) != n or verified != n:
        status = EXIT_CHECK
    if cfg.votes is not None:
        expected = {c: list(cfg.votes).count(c) for c in cfg.candidates}
        if expected != res.tally:
            status = EXIT_CHECK
    return rows, status


def cmd_baseline(cfg: RunConfig, tx: Transcript) -> tuple[list, int]:
    ecfg = _election_config(cfg)
    res = classical_baseline_run(ecfg, make_rng(cfg.seed))
    tx.run = res.transcript.run
    tx.events = res.transcript.events
    n = cfg.voters
    rows = [(f"tally_{name}", count / n, None, None, n) for name, count in res.tally.items()]
    acc = adversary.trace_collusion_baseline(res)
    rows.append(("trace_accuracy_classical", acc, 0.0, 1.0, len(res.board)))
    print("tally: " + ", ".join(f"{k}={v}" for k, v in res.tally.items()))
    return rows, EXIT_OK


def cmd_attack(cfg: RunConfig, tx: Transcript) -> tuple[list, int]:
    rng = make_rng(cfg.seed)
    kind = cfg.kind
    if kind == "intercept-resend":
        outs = list(adversary.intercept_resend_attack(rng, n_qubits=cfg.trials, detection_trials=cfg.trials))
    elif kind == "forge-ballot":
        outs = [adversary.forge_ballot_attack(cfg.m, cfg.trials, rng, l=cfg.l)]
    elif kind == "basis-collusion":
        outs = [adversary.basis_collusion_attack(cfg.m, cfg.trials, rng, guess=g) for g in ("correct", "wrong")]
    elif kind == "trace-collusion":
        params = ElectionParams(l=20, m=2, s=2, check_bits=2)
        outs = [adversary.trace_collusion_experiment(cfg.voters, cfg.trials, rng, params=params),
                adversary.trace_collusion_experiment(cfg.voters, min(cfg.trials, 100), rng,
                                                     params=params, classical=True)]
    else:
        outs = [adversary.ecc_forger_attack(cfg.trials, rng, strategy=st) for st in ("random", "intercept")]
    rows = []
    for o in outs:
        tx.emit("attack", "adversary", o.metric, {"estimate": o.estimate, "trials": o.trials})
        rows.append(_row(o))
        closed = "" if o.closed_form is None else f" (closed form {o.closed_form:.6g})"
        print(f"{o.metric}: {o.estimate:.6g} +/- {o.stderr:.2g}{closed}")
        for k, v in o.extras.items():
            tx.emit("attack", "adversary", f"{o.metric}.{k}", {"value": v})
    status = EXIT_OK
    if cfg.check and not all(o.within(4.0) for o in outs if o.closed_form is not None):
        status = EXIT_CHECK
    return rows, status


def cmd_density_audit(cfg: RunConfig, tx: Transcript) -> tuple[list, int]:
    rng = make_rng(cfg.seed)
    rows = []
    worst = 0.0
    for view in adversary.DENSITY_VIEWS:
        try:
            res = adversary.density_audit(view, cfg.l, cfg.m, rng)
        except adversary.BudgetExceeded as exc:
            raise ConfigError(f"{view}: {exc}") from None
        worst = max(worst, res.distance)
        tx.emit("audit", view, "trace_distance", {"distance": res.distance, "states": res.n_states})
        rows.append((f"density_{view}", res.distance, 0.0, 0.0, res.n_states))
        print(f"{view:9s} l={cfg.l} m={cfg.m} dim={res.dim:<4d} states={res.n_states:<7d} distance={res.distance:.3e}")
    return rows, EXIT_CHECK if worst >= DENSITY_TOL else EXIT_OK


COMMANDS = {
    "aqkd-basic": cmd_aqkd_basic,
    "aqkd-string": cmd_aqkd_string,
    "election": cmd_election,
    "baseline": cmd_baseline,
    "attack": cmd_attack,
    "density-audit": cmd_density_audit,
}


def run_subcommand(cfg: RunConfig) -> int:
    tx = Transcript(run=f"{cfg.subcommand}-{cfg.seed}")
    try:
        rows, status = COMMANDS[cfg.subcommand](cfg, tx)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    write_outputs(Path(cfg.output_dir), tx, rows)
    return status


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:
        # argparse exits with 2 on bad flags and 0 on --help.
        return int(exc.code or 0)
    return run_subcommand(cfg)


if __name__ == "__main__":
    sys.exit(main())
