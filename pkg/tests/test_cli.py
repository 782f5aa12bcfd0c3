"""
Tests for the command-line entry point.
"""

import json
from unittest.mock import patch

import numpy as np
import pytest

from activespeaker import cli
from activespeaker.cli import build_parser, drop_flags, main, parse_duration, parse_frames, rf_table
from activespeaker.config import model_config
from activespeaker.evaluation import ScoreTable
from activespeaker.exceptions import UsageError
from activespeaker.model import ActiveSpeakerModel
from activespeaker.readers import read_json
from activespeaker.trainer import save_checkpoint
from activespeaker.utils import sha256_file


class TestFlagParsing:
    """Test cases for the flag helpers."""

    def test_frames(self):
        """Test fixed counts and the variable setting."""
        assert parse_frames("variable") is None
        assert parse_frames("25") == 25

    @pytest.mark.parametrize("value", ["7", "ten", "0"])
    def test_bad_frames(self, value):
        """Test that only the listed frame counts are accepted."""
        with pytest.raises(UsageError):
            parse_frames(value)

    def test_duration(self):
        """Test range and single-value forms."""
        assert parse_duration("1,6") == (1.0, 6.0)
        assert parse_duration("2") == (2.0, 2.0)
        with pytest.raises(UsageError):
            parse_duration("1,2,3")

    def test_drop_flags(self):
        """Test the four attention ablations."""
        assert drop_flags("none") == {"use_cross_attention": True, "use_self_attention": True}
        assert drop_flags("cross") == {"use_cross_attention": False, "use_self_attention": True}
        assert drop_flags("both") == {"use_cross_attention": False, "use_self_attention": False}
        with pytest.raises(UsageError):
            drop_flags("audio")


class TestCommands:
    """Test cases for main()."""

    def test_rf_report(self, capsys):
        """Test that the report prints both encoders in frames and milliseconds."""
        assert main(["rf-report"]) == 0
        out = capsys.readouterr().out
        assert "840" in out and "1890" in out
        assert "21" in out and "189" in out

    def test_rf_table_desk(self):
        """Test the desk-scale table."""
        table = rf_table("desk")
        assert list(table["encoder"]) == ["visual", "audio"]
        assert list(table["ms"]) == pytest.approx([840.0, 450.0])

    def test_gen_data_is_reproducible(self, tmp_path, capsys):
        """Test that one seed gives byte-identical manifests."""
        args = ["gen-data", "--n", "4", "--duration", "0.2,0.3", "--seed", "5"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        assert summary["clips"] == 4
        assert sha256_file(tmp_path / "a" / "manifest.csv") == sha256_file(tmp_path / "b" / "manifest.csv")
        assert read_json(tmp_path / "a" / "resolved_config.json")["seed"] == 5

    def test_gen_data_bad_mix(self, tmp_path):
        """Test that an invalid mix is a usage error."""
        assert main(["gen-data", "--n", "4", "--mix", "1:0.3", "--out", str(tmp_path)]) == 2

    def test_train_bad_frames(self, tmp_path):
        """Test that an unsupported --frames value exits with status 2."""
        code = main(["train", "--manifest", str(tmp_path / "m.csv"), "--out", str(tmp_path / "run"),
                     "--frames", "7"])
        assert code == 2

    def test_train_noise_needs_directory(self, tmp_path):
        """Test that the noise arm without --noise-dir is a usage error."""
        code = main(["train", "--manifest", str(tmp_path / "m.csv"), "--out", str(tmp_path / "run"),
                     "--aug", "noise"])
        assert code == 2

    def test_missing_manifest_is_failure(self, tmp_path):
        """Test that an unreadable manifest exits with status 1."""
        code = main(["train", "--manifest", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "run")])
        assert code == 1

    def test_unknown_scale(self):
        """Test that argparse rejects a scale outside the choices."""
        with pytest.raises(SystemExit) as excinfo:
            build_parser().parse_args(["rf-report", "--scale", "huge"])
        assert excinfo.value.code == 2

    def test_grad_check_subset(self, capsys):
        """Test a float64 check of two ops."""
        assert main(["grad-check", "--seeds", "2", "--dtype", "float64", "--ops", "add,relu", "--eps", "1e-6"]) == 0
        out = capsys.readouterr().out
        assert "add" in out and "relu" in out

    def test_grad_check_unknown_op(self):
        """Test that an unknown op name is a usage error."""
        assert main(["grad-check", "--seeds", "1", "--ops", "not_an_op"]) == 2

    def test_eval_from_scores(self, tmp_path, capsys):
        """Test metrics computed from a labeled score CSV."""
        table = ScoreTable.from_arrays(["a", "b"], [np.array([0.9, 0.2]), np.array([0.1, 0.7])],
                                       [np.array([1, 0]), np.array([0, 1])])
        table.save(tmp_path / "scores.csv")
        assert main(["eval", "--scores", str(tmp_path / "scores.csv"), "--out", str(tmp_path / "out")]) == 0
        report = read_json(tmp_path / "out" / "metrics.json")
        assert report["map"] == 1.0
        assert report["n_frames"] == 4
        assert json.loads(capsys.readouterr().out)["auc"] == 1.0

    def test_eval_needs_a_source(self, tmp_path):
        """Test that eval without scores or checkpoint is a usage error."""
        assert main(["eval", "--out", str(tmp_path)]) == 2

    def test_infer_and_eval_checkpoint(self, tiny_dataset, tmp_path):
        """Test scoring a manifest with a freshly saved checkpoint."""
        save_checkpoint(tmp_path / "ckpt", ActiveSpeakerModel(model_config("desk")), None, 0)
        assert main(["infer", "--checkpoint", str(tmp_path / "ckpt"), "--manifest", str(tiny_dataset),
                     "--out", str(tmp_path / "scores.csv")]) == 0
        assert main(["eval", "--checkpoint", str(tmp_path / "ckpt"), "--manifest", str(tiny_dataset),
                     "--out", str(tmp_path / "eval")]) == 0
        assert (tmp_path / "eval" / "scores.csv").exists()
        assert "map" in read_json(tmp_path / "eval" / "metrics.json")

    def test_rf_report_paper_scale(self, capsys):
        """Test the paper preset by name and through its 'full' alias."""
        assert main(["rf-report", "--scale", "paper"]) == 0
        paper = capsys.readouterr().out
        assert "840" in paper and "1890" in paper
        assert main(["rf-report", "--scale", "full"]) == 0
        assert capsys.readouterr().out == paper

    def test_gen_data_bad_mix_writes_nothing(self, tmp_path):
        """Test that an invalid mix is refused before anything is written."""
        for mix in ("1:0.3", "1:0.5,9:0.5"):
            assert main(["gen-data", "--n", "4", "--mix", mix, "--out", str(tmp_path / "out")]) == 2
        assert not (tmp_path / "out").exists()

    def test_gen_data_bad_size(self, tmp_path):
        """Test that a clip count or duration range out of bounds is a usage error."""
        assert main(["gen-data", "--n", "0", "--out", str(tmp_path / "a")]) == 2
        assert main(["gen-data", "--n", "2", "--duration", "3,1", "--out", str(tmp_path / "b")]) == 2
        assert not (tmp_path / "a").exists() and not (tmp_path / "b").exists()

    @pytest.mark.parametrize("argv", [
        ["rf-report", "--scale", "desk"],
        ["grad-check", "--seeds", "1", "--dtype", "float64", "--ops", "add", "--eps", "1e-6"],
    ])
    def test_commands_log_resolved_config(self, argv):
        """Test that commands without a run directory still log their resolved config and seed."""
        with patch.object(cli.logger, "info") as info:
            assert main(argv) == 0
        echoed = [call.args[1] for call in info.call_args_list if call.args[0] == "Resolved config: %s"]
        assert len(echoed) == 1
        resolved = json.loads(echoed[0])
        assert resolved["command"] == argv[0]
        assert "seed" in resolved or "seeds" in resolved

    def test_infer_logs_checkpoint_seed(self, tiny_dataset, tmp_path):
        """Test that inference echoes the seed recorded in the checkpoint."""
        save_checkpoint(tmp_path / "ckpt", ActiveSpeakerModel(model_config("desk", seed=7)), None, 0)
        with patch.object(cli.logger, "info") as info:
            assert main(["infer", "--checkpoint", str(tmp_path / "ckpt"), "--manifest", str(tiny_dataset),
                         "--out", str(tmp_path / "scores.csv")]) == 0
        echoed = [json.loads(call.args[1]) for call in info.call_args_list if call.args[0] == "Resolved config: %s"]
        assert echoed[0]["command"] == "infer"
        assert echoed[0]["seed"] == 7

    def test_metrics_are_identical_on_rerun(self, tmp_path):
        """Test that two evaluations of one score file write byte-identical metrics."""
        rng = np.random.default_rng(2)
        table = ScoreTable.from_arrays(["a", "b", "c"], [rng.random(6), rng.random(4), rng.random(5)],
                                       [rng.integers(0, 2, 6), np.ones(4, dtype=int), np.zeros(5, dtype=int)])
        table.save(tmp_path / "scores.csv")
        for name in ("one", "two"):
            assert main(["eval", "--scores", str(tmp_path / "scores.csv"), "--out", str(tmp_path / name)]) == 0
        assert sha256_file(tmp_path / "one" / "metrics.json") == sha256_file(tmp_path / "two" / "metrics.json")
