import csv
import json
import subprocess
import sys

import pytest

from qelection.cli import (
    EXIT_ABORT,
    EXIT_CHECK,
    EXIT_OK,
    EXIT_VALIDATION,
    ConfigError,
    main,
    parse_config,
    stats_csv,
)


def rows_of(out):
    with open(out / "stats.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    return main([*argv, "--out", str(out)]), out


class TestParseConfig:
    def test_defaults_filled(self):
        cfg = parse_config(["election", "--voters", "5", "--seed", "42"], env={})
        assert (cfg.voters, cfg.seed) == (5, 42)
        assert (cfg.l, cfg.m, cfg.s, cfg.check_bits) == (32, 8, 8, 4)
        assert cfg.candidates == ("A", "B") and cfg.output_dir == "qelection-out"

    def test_l_not_above_m(self):
        with pytest.raises(ConfigError):
            parse_config(["election", "--l", "2", "--m", "4"], env={})

    def test_flag_beats_file(self, tmp_path):
        f = tmp_path / "run.toml"
        f.write_text("seed = 7\nvoters = 9\n")
        cfg = parse_config(["election", "--config", str(f), "--seed", "11"], env={})
        assert (cfg.seed, cfg.voters) == (11, 9)

    def test_unknown_file_key(self, tmp_path):
        f = tmp_path / "run.toml"
        f.write_text("sed = 7\n")
        with pytest.raises(ConfigError, match="sed"):
            parse_config(["election", "--config", str(f)], env={})

    def test_bad_toml_and_missing_file(self, tmp_path):
        f = tmp_path / "bad.toml"
        f.write_text("seed = = 1\n")
        with pytest.raises(ConfigError):
            parse_config(["election", "--config", str(f)], env={})
        with pytest.raises(ConfigError):
            parse_config(["election", "--config", str(tmp_path / "nope.toml")], env={})

    def test_env_output_dir(self):
        env = {"QELECTION_OUTPUT_DIR": "/tmp/from-env"}
        assert parse_config(["baseline"], env=env).output_dir == "/tmp/from-env"
        assert parse_config(["baseline", "--out", "x"], env=env).output_dir == "x"

    def test_lossy_election_needs_ecc(self):
        with pytest.raises(ConfigError, match="ecc"):
            parse_config(["election", "--loss-p", "0.1"], env={})
        cfg = parse_config(["election", "--loss-p", "0.1", "--ecc", "repetition(3)", "--l", "128", "--m", "2",
                            "--s", "2", "--check-bits", "2", "--tag-len", "28"], env={})
        assert cfg.election_params().tag_len == 28

    @pytest.mark.parametrize("argv", [["attack"], ["election", "--loss-p", "1.5"],
                                      ["aqkd-string", "--ecc", "hamming"], ["election", "--trials", "0"]])
    def test_invalid(self, argv):
        with pytest.raises(ConfigError):
            parse_config(argv, env={})


class TestRuns:
    def test_bad_flags_exit_2(self, tmp_path):
        assert run(tmp_path, "election", "--l", "2", "--m", "4")[0] == EXIT_VALIDATION
        assert main(["election", "--no-such-flag"]) == EXIT_VALIDATION

    def test_election(self, tmp_path, capsys):
        code, out = run(tmp_path, "election", "--voters", "5", "--seed", "42", "--votes", "A,A,B,A,B")
        assert code == EXIT_OK
        assert "tally: A=3, B=2" in capsys.readouterr().out
        lines = (out / "transcript.jsonl").read_text().splitlines()
        rec = json.loads(lines[0])
        assert set(rec) >= {"run", "phase", "actor", "event", "digest"}
        rows = {r["metric"]: r for r in rows_of(out)}
        assert rows["voters_verified"]["estimate"] == "1"

    def test_density_audit(self, tmp_path, capsys):
        code, out = run(tmp_path, "density-audit", "--l", "2", "--m", "2")
        assert code == EXIT_OK
        rows = rows_of(out)
        assert [r["metric"] for r in rows] == ["density_outsider", "density_bob1", "density_bob2", "density_charlie"]
        assert all(float(r["estimate"]) < 1e-12 for r in rows)
        assert len(capsys.readouterr().out.strip().splitlines()) == 4

    def test_density_budget(self, tmp_path):
        assert run(tmp_path, "density-audit", "--l", "4", "--m", "4")[0] == EXIT_VALIDATION

    def test_intercept_resend(self, tmp_path):
        code, out = run(tmp_path, "attack", "--kind", "intercept-resend", "--trials", "10000", "--check")
        assert code == EXIT_OK
        rate = rows_of(out)[0]
        assert rate["metric"] == "intercept_resend_error_rate"
        assert abs(float(rate["estimate"]) - 0.25) <= 0.02
        assert float(rate["closed_form"]) == 0.25

    def test_missing_closed_form_is_empty(self, tmp_path):
        code, out = run(tmp_path, "attack", "--kind", "forger-ecc", "--trials", "20")
        assert code == EXIT_OK
        assert all(r["closed_form"] == "" for r in rows_of(out))
        assert stats_csv([("x", 0.5, None, None, 3)]).splitlines()[1] == "x,0.5,,,3"

    def test_byte_identical_reruns(self, tmp_path):
        for argv in (["election", "--voters", "4", "--seed", "3"],
                     ["aqkd-basic", "--trials", "20", "--seed", "3"],
                     ["attack", "--kind", "basis-collusion", "--trials", "500", "--m", "3"]):
            _, a = run(tmp_path, *argv, name="a")
            _, b = run(tmp_path, *argv, name="b")
            for f in ("transcript.jsonl", "stats.csv"):
                assert (a / f).read_bytes() == (b / f).read_bytes()

    def test_aqkd_string_modes(self, tmp_path):
        assert run(tmp_path, "aqkd-string", "--trials", "50")[0] == EXIT_OK
        code, out = run(tmp_path, "aqkd-string", "--trials", "50", "--l", "48", "--m", "2", "--loss-p", "0.1",
                        "--ecc", "repetition(3)", "--tag-len", "8", name="ecc")
        assert code == EXIT_OK and float(rows_of(out)[0]["estimate"]) >= 0.9
        assert run(tmp_path, "aqkd-string", "--loss-p", "0.1", name="bad")[0] == EXIT_VALIDATION

    def test_aqkd_basic_abort_exit(self, tmp_path):
        assert run(tmp_path, "aqkd-basic", "--trials", "10")[0] == EXIT_OK
        code, _ = run(tmp_path, "aqkd-basic", "--trials", "10", "--flip-p", "0.5", "--max-retries", "0", name="n")
        assert code == EXIT_ABORT

    def test_attack_check_failure(self, tmp_path, monkeypatch):
        from qelection import adversary

        def skewed(m, trials, rng, **kw):
            return adversary.AttackOutcome("forge_acceptance", 0.9, trials, 0.001, 2.0**-m)

        monkeypatch.setattr(adversary, "forge_ballot_attack", skewed)
        code, _ = run(tmp_path, "attack", "--kind", "forge-ballot", "--trials", "10", "--check")
        assert code == EXIT_CHECK

    def test_baseline(self, tmp_path):
        code, out = run(tmp_path, "baseline", "--voters", "6")
        assert code == EXIT_OK
        rows = {r["metric"]: r for r in rows_of(out)}
        assert rows["trace_accuracy_classical"]["estimate"] == "1"

    def test_console_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "qelection.cli", "density-audit", "--out", str(tmp_path / "o")],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and "charlie" in proc.stdout
