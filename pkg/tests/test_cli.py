"""Tests for the command-line interface."""

from __future__ import annotations

from pathlib import Path

import pytest

from irs_nlos.cli import build_parser, main


class TestParser:
    """Tests for build_parser."""

    def test_requires_command(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_run_arguments(self):
        args = build_parser().parse_args(["run", "a.toml", "--seed", "3", "--check"])
        assert args.config == Path("a.toml")
        assert args.seed == 3
        assert args.check is True

    def test_sweep_takes_many_globs(self):
        args = build_parser().parse_args(["sweep", "a/*.toml", "b.toml", "--workers", "2"])
        assert args.configs == ["a/*.toml", "b.toml"]
        assert args.workers == 2

    def test_calibrate_defaults(self):
        args = build_parser().parse_args(["calibrate-slots"])
        assert args.naive_seconds == pytest.approx(7.15)
        assert args.scan_times is False


class TestMain:
    """Tests for main."""

    def test_config(self, settings, capsys: pytest.CaptureFixture[str]):
        with pytest.raises(SystemExit) as info:
            main(["config"])
        assert info.value.code == 0
        assert "irs-nlos Configuration" in capsys.readouterr().out

    def test_conformance(self, settings, capsys: pytest.CaptureFixture[str]):
        with pytest.raises(SystemExit) as info:
            main(["conformance"])
        assert info.value.code == 0
        out = capsys.readouterr().out
        assert "✅" in out
        assert "❌" not in out

    def test_calibrate_slots(self, settings, capsys: pytest.CaptureFixture[str]):
        with pytest.raises(SystemExit) as info:
            main(["calibrate-slots", "--scan-times", "--check"])
        assert info.value.code == 0
        out = capsys.readouterr().out
        assert "slot_seconds = 0.162500" in out
        assert "single_target" in out
        assert "All checks passed" in out

    def test_missing_scenario(self, settings, tmp_path: Path, capsys: pytest.CaptureFixture[str]):
        with pytest.raises(SystemExit) as info:
            main(["run", str(tmp_path / "absent.toml")])
        assert info.value.code == 1
        assert "❌" in capsys.readouterr().out

    def test_invalid_scenario(self, settings, tmp_path: Path, capsys: pytest.CaptureFixture[str]):
        path = tmp_path / "bad.toml"
        path.write_text("schema_version = 2\n", encoding="utf-8")
        with pytest.raises(SystemExit) as info:
            main(["run", str(path)])
        assert info.value.code == 1
        assert "Invalid scenario" in capsys.readouterr().out

    def test_sweep_without_matches(self, settings, tmp_path: Path):
        with pytest.raises(SystemExit) as info:
            main(["sweep", str(tmp_path / "*.toml")])
        assert info.value.code == 1
