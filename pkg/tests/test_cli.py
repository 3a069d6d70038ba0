"""
Command-line tests: exit codes, outputs and pass-through of library results.
"""

import json

import numpy as np
from conftest import minimal_files, write_dataset

from mmkg_align.cli import EXIT_INVARIANT, EXIT_OK, EXIT_USER_ERROR, main
from mmkg_align.evalrank import evaluate
from mmkg_align.kgio import load_kg_pair, read_alignment, write_fmat
from mmkg_align.pipeline import dumps_json


class TestAlign:
    def test_outputs_written(self, small_synth_dir, tmp_path):
        out = tmp_path / "out"
        code = main([
            "align", "--data", str(small_synth_dir), "--modalities", "rel,vis,attr",
            "--sinkhorn-k", "10", "--refine-rounds", "3", "--out", str(out),
        ])
        assert code == EXIT_OK
        for name in ("predictions.tsv", "metrics.json", "manifest.json"):
            assert (out / name).exists()
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["modalities"] == ["rel", "vis", "attr"]
        assert manifest["config"]["modalities"] == ["rel", "vis", "attr"]

    def test_missing_time_file_names_it(self, minimal_dataset, tmp_path, capsys):
        code = main(["align", "--data", str(minimal_dataset), "--modalities", "time", "--out", str(tmp_path / "o")])
        assert code == EXIT_USER_ERROR
        assert "time_ids" in capsys.readouterr().err

    def test_unsupervised_without_seeds(self, tmp_path):
        data = tmp_path / "d"
        assert main(["gen-synth", "--entities", "40", "--seed-ratio", "0", "--out", str(data), "--quiet"]) == EXIT_OK
        assert read_alignment(data / "seeds_train").pairs == []
        code = main(["align", "--data", str(data), "--unsupervised", "--out", str(tmp_path / "o"), "--quiet"])
        assert code == EXIT_OK
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["initial_anchors"] > 0

    def test_flags_override_config_file(self, small_synth_dir, tmp_path):
        cfg = tmp_path / "config.yaml"
        cfg.write_text("pipeline:\n  sinkhorn_k: 3\n  refine_rounds: 2\n", encoding="utf-8")
        out = tmp_path / "o"
        code = main(["align", "--data", str(small_synth_dir), "--config", str(cfg), "--refine-rounds", "1",
                     "--out", str(out), "--quiet"])
        assert code == EXIT_OK
        config = json.loads((out / "manifest.json").read_text(encoding="utf-8"))["config"]
        assert config["sinkhorn_k"] == 3
        assert config["refine_rounds"] == 1

    def test_visual_operator_recorded(self, small_synth_dir, tmp_path):
        out = tmp_path / "o"
        code = main(["align", "--data", str(small_synth_dir), "--visual-operator", "sum", "--max-images", "2",
                     "--out", str(out), "--quiet"])
        assert code == EXIT_OK
        config = json.loads((out / "manifest.json").read_text(encoding="utf-8"))["config"]
        assert config["visual_operator"] == "sum"
        assert config["max_images"] == 2

    def test_undecodable_dataset_file(self, small_synth_dir, tmp_path, capsys):
        data = tmp_path / "d"
        data.mkdir()
        for path in small_synth_dir.iterdir():
            (data / path.name).write_bytes(path.read_bytes())
        (data / "ent_ids_1").write_bytes(b"0\ts\xff0\n")
        code = main(["align", "--data", str(data), "--out", str(tmp_path / "o")])
        assert code == EXIT_USER_ERROR
        err = capsys.readouterr().err
        assert "ent_ids_1:1" in err
        assert "invalid UTF-8" in err

    def test_invalid_flag_value(self, small_synth_dir, tmp_path):
        code = main(["align", "--data", str(small_synth_dir), "--sinkhorn-k", "0", "--out", str(tmp_path / "o")])
        assert code == EXIT_USER_ERROR

    def test_unknown_modality(self, small_synth_dir, tmp_path):
        code = main(["align", "--data", str(small_synth_dir), "--modalities", "text", "--out", str(tmp_path / "o")])
        assert code == EXIT_USER_ERROR

    def test_invariant_violation_exit_code(self, small_synth_dir, tmp_path, monkeypatch):
        from mmkg_align import cli
        from mmkg_align.core.errors import InvariantViolation

        def broken(*args, **kwargs):
            raise InvariantViolation("anchors lost injectivity")

        monkeypatch.setattr(cli, "run_alignment", broken)
        code = main(["align", "--data", str(small_synth_dir), "--out", str(tmp_path / "o")])
        assert code == EXIT_INVARIANT


class TestEval:
    def test_perfect_predictions(self, tmp_path, capsys):
        gold = tmp_path / "gold"
        gold.write_text("0\t1\n1\t0\n2\t2\n", encoding="utf-8")
        preds = tmp_path / "preds.tsv"
        preds.write_text("0\t1\t0.9\n1\t0\t0.8\n2\t2\t0.7\n", encoding="utf-8")
        assert main(["eval", "--gold", str(gold), "--predictions", str(preds)]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["hits"]["1"] == 1.0

    def test_empty_gold(self, tmp_path):
        gold = tmp_path / "gold"
        gold.write_text("", encoding="utf-8")
        preds = tmp_path / "preds.tsv"
        preds.write_text("0\t0\t1.0\n", encoding="utf-8")
        assert main(["eval", "--gold", str(gold), "--predictions", str(preds)]) == EXIT_USER_ERROR

    def test_scores_match_library(self, tmp_path, capsys):
        scores = np.random.default_rng(0).random((6, 6)).astype(np.float32).astype(np.float64)
        write_fmat(scores, tmp_path / "s.fmat")
        gold = tmp_path / "gold"
        gold.write_text("".join(f"{i}\t{(i + 1) % 6}\n" for i in range(6)), encoding="utf-8")
        assert main(["eval", "--gold", str(gold), "--scores", str(tmp_path / "s.fmat")]) == EXIT_OK
        expected = evaluate(scores, read_alignment(gold))
        assert capsys.readouterr().out == dumps_json(expected.to_json_dict())

    def test_malformed_scores(self, tmp_path):
        (tmp_path / "s.fmat").write_bytes(b"FMAT")
        (tmp_path / "gold").write_text("0\t0\n", encoding="utf-8")
        assert main(["eval", "--gold", str(tmp_path / "gold"), "--scores", str(tmp_path / "s.fmat")]) == EXIT_USER_ERROR


class TestGenSynth:
    def test_loadable(self, tmp_path):
        out = tmp_path / "d"
        assert main(["gen-synth", "--entities", "50", "--seed-ratio", "0.2", "--out", str(out), "--quiet"]) == EXIT_OK
        pair = load_kg_pair(out)
        assert len(pair.train_seeds) == 10 and len(pair.test_seeds) == 40

    def test_out_of_range(self, tmp_path):
        assert main(["gen-synth", "--perturbation", "1.5", "--out", str(tmp_path / "d")]) == EXIT_USER_ERROR

    def test_repeatable(self, tmp_path):
        args = ["gen-synth", "--entities", "30", "--perturbation", "0.2", "--feat-noise", "0.1", "--quiet"]
        main([*args, "--out", str(tmp_path / "a")])
        main([*args, "--out", str(tmp_path / "b")])
        for path in sorted((tmp_path / "a").iterdir()):
            assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()


def test_missing_dataset_directory(tmp_path):
    code = main(["align", "--data", str(tmp_path / "absent"), "--out", str(tmp_path / "o")])
    assert code == EXIT_USER_ERROR


def test_minimal_dataset_relational_only(tmp_path):
    root = write_dataset(tmp_path / "d", minimal_files())
    assert main(["align", "--data", str(root), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_OK
    assert not (tmp_path / "o" / "metrics.json").exists()
