"""Command-line interface: subcommands, exit codes, output artifacts."""
import json
import subprocess
import sys

import pytest

from rexfuzz.cli import main
from rexfuzz.fuzzer import read_coverage_csv
from rexfuzz.reports import read_reports

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class TestGenStrings:
    def test_members_printed_one_per_line(self, capsys):
        assert main(["gen-strings", "a*"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out == ["", "a", "aa"]

    def test_negatives_flag_labels_lines(self, capsys):
        assert main(["gen-strings", "(?:a|b)c", "--negatives"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert any(line.startswith("+\t") for line in lines)
        assert any(line.startswith("-\t") for line in lines)

    def test_b64_output(self, capsys):
        assert main(["gen-strings", "ab", "--b64"]) == 0
        assert capsys.readouterr().out.splitlines() == ["YWI="]

    def test_binary_bytes_escaped(self, capsys):
        assert main(["gen-strings", "[\\x00-\\x01]"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines == ["\\x00", "\\x01"]

    def test_unroll_limit_respected(self, capsys):
        assert main(["gen-strings", "a*", "--star-unroll", "1"]) == 0
        assert capsys.readouterr().out.splitlines() == ["", "a"]

    def test_parse_error_is_usage(self, capsys):
        assert main(["gen-strings", "("]) == 2
        assert "error:" in capsys.readouterr().err

    def test_anchored_pattern_is_usage(self, capsys):
        assert main(["gen-strings", "^a$"]) == 2


class TestMtCheck:
    def test_clean_engine_exits_zero(self, capsys):
        rc = main(["mt-check", "--pattern", "a*b", "--pattern", "(?:x|y)z"])
        captured = capsys.readouterr()
        assert rc == 0
        assert captured.out == ""
        assert "failures=0" in captured.err

    def test_faulty_engine_exits_one_with_jsonl(self, capsys):
        rc = main(["mt-check", "--engine", "builtin+fault:STAR_DROP_LAST",
                   "--pattern", "a*b"])
        captured = capsys.readouterr()
        assert rc == 1
        lines = captured.out.splitlines()
        assert lines
        first = json.loads(lines[0])
        assert first["kind"] == "mt"
        assert first["engine"] == "builtin+fault:STAR_DROP_LAST"

    def test_out_file_receives_reports(self, tmp_path, capsys):
        out = tmp_path / "findings.jsonl"
        rc = main(["mt-check", "--engine", "builtin+fault:ALT_FIRST_ONLY",
                   "--pattern", "(?:b|a)+", "--out", str(out)])
        capsys.readouterr()
        assert rc == 1
        reports, errors = read_reports(str(out))
        assert reports and not errors

    def test_patterns_file(self, tmp_path, capsys):
        f = tmp_path / "pats.txt"
        f.write_text("a*b\n(?:x|y)z\n")
        assert main(["mt-check", "--patterns-file", str(f)]) == 0
        assert "patterns=2" in capsys.readouterr().err

    def test_no_patterns_is_usage(self, capsys):
        assert main(["mt-check"]) == 2

    def test_unknown_relation_is_usage(self, capsys):
        rc = main(["mt-check", "--pattern", "a", "--relations", "NOT_A_LAW"])
        assert rc == 2
        assert "unknown relation" in capsys.readouterr().err

    def test_unknown_engine_is_usage(self, capsys):
        assert main(["mt-check", "--pattern", "a", "--engine", "pcre2"]) == 2

    def test_relation_subset_respected(self, capsys):
        rc = main(["mt-check", "--engine", "builtin+fault:STAR_DROP_LAST",
                   "--pattern", "a*b", "--relations", "ALT_COMM"])
        captured = capsys.readouterr()
        # ALT_COMM alone cannot see a star defect on this pattern
        assert rc == 0
        assert "failures=0" in captured.err


class TestFuzz:
    def test_clean_run_writes_artifacts(self, tmp_path, capsys):
        out = tmp_path / "campaign"
        rc = main(["fuzz", "--iterations", "30", "--no-seeds",
                   "--max-strings", "4", "--out", str(out)])
        captured = capsys.readouterr()
        assert rc == 0
        assert "unique bugs: 0" in captured.out
        assert (out / "bugs.jsonl").read_bytes() == b""
        rows = read_coverage_csv(str(out / "coverage.csv"))
        assert rows[0][0] == 0 and rows[-1][0] == 30
        assert (out / "coverage.png").read_bytes()[:8] == PNG_MAGIC

    def test_same_seed_runs_are_byte_identical(self, tmp_path, capsys):
        args = ["fuzz", "--iterations", "40", "--no-seeds", "--max-strings", "4",
                "--rng-seed", "5"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        capsys.readouterr()
        assert (a / "coverage.csv").read_bytes() == (b / "coverage.csv").read_bytes()
        assert (a / "bugs.jsonl").read_bytes() == (b / "bugs.jsonl").read_bytes()

    def test_faulty_engine_exits_one(self, tmp_path, capsys):
        out = tmp_path / "campaign"
        rc = main(["fuzz", "--engine", "builtin+fault:STAR_DROP_LAST",
                   "--iterations", "3000", "--stop-after-bugs", "1",
                   "--max-strings", "4", "--no-seeds", "--out", str(out)])
        capsys.readouterr()
        assert rc == 1
        reports, errors = read_reports(str(out / "bugs.jsonl"))
        assert reports and not errors

    def test_minimize_flag_shrinks_reports(self, tmp_path, capsys):
        out = tmp_path / "campaign"
        rc = main(["fuzz", "--engine", "builtin+fault:STAR_DROP_LAST",
                   "--iterations", "3000", "--stop-after-bugs", "1",
                   "--max-strings", "4", "--no-seeds", "--minimize",
                   "--out", str(out)])
        capsys.readouterr()
        assert rc == 1
        reports, _ = read_reports(str(out / "bugs.jsonl"))
        assert all(r.minimized is not None for r in reports)

    def test_seed_file_and_dialect_note(self, tmp_path, capsys):
        seeds = tmp_path / "seeds.txt"
        seeds.write_text("a*b\n(?<name>x)\n")
        out = tmp_path / "campaign"
        rc = main(["fuzz", "--seeds", str(seeds), "--iterations", "10",
                   "--max-strings", "4", "--out", str(out)])
        captured = capsys.readouterr()
        assert rc == 0
        assert "skipped 1 line(s)" in captured.err

    def test_workers_write_per_worker_csvs(self, tmp_path, capsys):
        out = tmp_path / "campaign"
        rc = main(["fuzz", "--iterations", "15", "--no-seeds", "--workers", "2",
                   "--max-strings", "4", "--out", str(out)])
        capsys.readouterr()
        assert rc == 0
        assert (out / "coverage_w0.csv").exists()
        assert (out / "coverage_w1.csv").exists()
        assert (out / "coverage.png").read_bytes()[:8] == PNG_MAGIC

    def test_missing_external_engine_exits_three(self, tmp_path, capsys):
        rc = main(["fuzz", "--engine", "cmd:/nonexistent-engine-zzz",
                   "--iterations", "1", "--no-seeds",
                   "--out", str(tmp_path / "campaign")])
        assert rc == 3
        assert "error:" in capsys.readouterr().err

    def test_external_adapter_end_to_end(self, tmp_path, capsys, adapter_cmd):
        out = tmp_path / "campaign"
        spec = "cmd:" + " ".join(adapter_cmd)
        rc = main(["fuzz", "--engine", spec, "--iterations", "10", "--no-seeds",
                   "--max-strings", "3", "--out", str(out)])
        captured = capsys.readouterr()
        assert rc == 0
        assert (out / "coverage.csv").exists()
        assert "executions:" in captured.out


class TestMinimizeCommand:
    def _findings_file(self, tmp_path, capsys) -> str:
        path = tmp_path / "found.jsonl"
        rc = main(["mt-check", "--engine", "builtin+fault:STAR_DROP_LAST",
                   "--pattern", "(?:xy)*ab", "--stop-after", "1",
                   "--out", str(path)])
        capsys.readouterr()
        assert rc == 1
        return str(path)

    def test_minimizes_reports_to_file(self, tmp_path, capsys):
        src = self._findings_file(tmp_path, capsys)
        out = tmp_path / "min.jsonl"
        rc = main(["minimize", "--engine", "builtin+fault:STAR_DROP_LAST",
                   "--reports", src, "--out", str(out)])
        capsys.readouterr()
        assert rc == 0
        reports, _ = read_reports(str(out))
        assert reports[0].minimized == "y*"

    def test_stdout_when_no_out(self, tmp_path, capsys):
        src = self._findings_file(tmp_path, capsys)
        rc = main(["minimize", "--engine", "builtin+fault:STAR_DROP_LAST",
                   "--reports", src])
        captured = capsys.readouterr()
        assert rc == 0
        assert json.loads(captured.out.splitlines()[0])["minimized"] == "y*"

    def test_non_reproducible_reports_kept_with_note(self, tmp_path, capsys):
        src = self._findings_file(tmp_path, capsys)
        # replay on the reference engine, where the defect does not exist
        rc = main(["minimize", "--engine", "builtin", "--reports", src])
        captured = capsys.readouterr()
        assert rc == 0
        assert "minimize:" in captured.err
        assert json.loads(captured.out.splitlines()[0])["minimized"] is None

    def test_empty_reports_file_is_usage(self, tmp_path, capsys):
        empty = tmp_path / "none.jsonl"
        empty.write_text("")
        rc = main(["minimize", "--reports", str(empty)])
        assert rc == 2

    def test_missing_reports_file_is_usage(self, tmp_path, capsys):
        rc = main(["minimize", "--reports", str(tmp_path / "ghost.jsonl")])
        assert rc == 2


class TestParserBasics:
    def test_unknown_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_module_entry_point(self):
        p = subprocess.run(
            [sys.executable, "-m", "rexfuzz.cli", "gen-strings", "a*"],
            capture_output=True, text=True, timeout=60,
        )
        assert p.returncode == 0
        assert p.stdout.splitlines() == ["", "a", "aa"]
