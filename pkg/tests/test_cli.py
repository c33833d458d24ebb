import importlib.resources
import json
from pathlib import Path

import pytest

from graphfam.cli import main
from graphfam.imagegen import load_image
from graphfam.centrality import load_profile


def sample_graph_path() -> str:
    return str(importlib.resources.files("graphfam.data").joinpath("sample_callgraph.json"))


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    rc = main(["synth", "--out-dir", str(out), "--families", "3", "--variants", "8",
               "--seed", "5"])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def trained(tmp_path_factory, dataset_dir):
    out = tmp_path_factory.mktemp("ckpt")
    enc = out / "enc.ckpt"
    cls = out / "cls.ckpt"
    rc = main(["train-encoder", "--dataset", str(dataset_dir), "--out", str(enc),
               "--epochs", "2", "--batch-size", "16", "--seed", "1"])
    assert rc == 0
    rc = main(["train-classifier", "--encoder", str(enc), "--dataset", str(dataset_dir),
               "--out", str(cls), "--epochs", "30", "--batch-size", "16", "--seed", "1"])
    assert rc == 0
    return cls


class TestFeaturize:
    def test_sample_graph(self, tmp_path, capsys):
        rc = main(["featurize", sample_graph_path(), "--out-dir", str(tmp_path)])
        assert rc == 0
        text = capsys.readouterr().out
        assert "image_generation" in text
        prof = load_profile(tmp_path / "sample_callgraph.cprof")
        assert (prof.values != 0).any(axis=1).sum() == 3  # three sensitive APIs
        img = load_image(tmp_path / "sample_callgraph.cimg")
        assert img.pixels.shape == (16, 16)
        report = json.loads((tmp_path / "featurize_report.json").read_text())
        assert report["stage_seconds"]["image_generation"] >= 0

    def test_png_and_jobs(self, tmp_path):
        rc = main(["featurize", sample_graph_path(), sample_graph_path(),
                   "--out-dir", str(tmp_path), "--png", "--jobs", "2"])
        assert rc == 0
        assert (tmp_path / "sample_callgraph.png").exists()

    def test_cache_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GRAPHFAM_CACHE_DIR", str(tmp_path / "envcache"))
        rc = main(["featurize", sample_graph_path()])
        assert rc == 0
        assert (tmp_path / "envcache" / "sample_callgraph.cimg").exists()


class TestErrors:
    def test_usage_error_is_exit_1(self):
        assert main(["classify"]) == 1

    def test_bad_document_is_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["featurize", str(bad), "--out-dir", str(tmp_path)]) == 2

    def test_registry_mismatch_is_exit_3(self, tmp_path, dataset_dir, trained):
        other = tmp_path / "other_registry.txt"
        other.write_text("only.One.api\n")
        rc = main(["classify", sample_graph_path(), "--checkpoint", str(trained),
                   "--registry", str(other)])
        assert rc == 3

    def test_unknown_transform_is_exit_2(self, tmp_path):
        rc = main(["obfuscate", sample_graph_path(), "--transform", "warp:9",
                   "--out", str(tmp_path / "x.json")])
        assert rc == 2


class TestObfuscate:
    def test_rename_then_classify_matches_original(self, tmp_path, trained, dataset_dir, capsys):
        manifest = json.loads((Path(dataset_dir) / "manifest.json").read_text())
        graph = Path(dataset_dir) / manifest["items"][0]["path"]
        renamed = tmp_path / "renamed.json"
        rc = main(["obfuscate", str(graph), "--transform", "classrename",
                   "--seed", "3", "--out", str(renamed)])
        assert rc == 0
        capsys.readouterr()
        assert main(["classify", str(graph), "--checkpoint", str(trained)]) == 0
        out1 = capsys.readouterr().out.splitlines()[0].split("\t")[1]
        assert main(["classify", str(renamed), "--checkpoint", str(trained)]) == 0
        out2 = capsys.readouterr().out.splitlines()[0].split("\t")[1]
        assert out1 == out2

    def test_callind_grows_graph(self, tmp_path, capsys):
        out = tmp_path / "grown.json"
        rc = main(["obfuscate", sample_graph_path(), "--transform", "callind:1.0",
                   "--out", str(out)])
        assert rc == 0
        text = capsys.readouterr().out
        assert "287 nodes" in text  # 117 + 170
        assert "340 edges" in text


class TestExplainAndSsim:
    def test_explain_outputs(self, tmp_path, dataset_dir, trained):
        manifest = json.loads((Path(dataset_dir) / "manifest.json").read_text())
        graph = Path(dataset_dir) / manifest["items"][0]["path"]
        other = Path(dataset_dir) / manifest["items"][1]["path"]
        rc = main(["explain", str(graph), str(other), "--checkpoint", str(trained),
                   "--out-dir", str(tmp_path), "--top-k", "5", "--jobs", "2"])
        assert rc == 0
        assert (tmp_path / f"{other.stem}.heatmap.png").exists()
        stem = graph.stem
        assert (tmp_path / f"{stem}.heatmap.png").exists()
        assert (tmp_path / f"{stem}.heatmap_fig.png").exists()
        att = (tmp_path / f"{stem}.attribution.csv").read_text().splitlines()
        assert att[0].startswith("rank,")
        heat_csv = (tmp_path / f"{stem}.heatmap.csv").read_text().splitlines()
        assert len(heat_csv) == 1 + 16 * 16
        report = json.loads((tmp_path / "explain_report.json").read_text())
        assert "interpretation" in report["stage_seconds"]

    def test_ssim_matrix(self, tmp_path, dataset_dir, trained, capsys):
        rc = main(["ssim-matrix", "--checkpoint", str(trained),
                   "--dataset", str(dataset_dir), "--out-dir", str(tmp_path),
                   "--per-family", "3"])
        assert rc == 0
        rows = (tmp_path / "ssim_matrix.csv").read_text().splitlines()
        assert len(rows) == 4  # header + 3 families
        assert (tmp_path / "ssim_matrix.png").exists()
        assert "within-family" in capsys.readouterr().out


class TestSeedReproducibility:
    def test_synth_bit_reproducible(self, tmp_path, capsys):
        args = ["synth", "--families", "2", "--variants", "3", "--seed", "9"]
        assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
        assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
        capsys.readouterr()
        a_manifest = (tmp_path / "a" / "manifest.json").read_bytes()
        b_manifest = (tmp_path / "b" / "manifest.json").read_bytes()
        assert a_manifest == b_manifest
        graph = "graphs/family00_00000.json"
        assert (tmp_path / "a" / graph).read_bytes() == (tmp_path / "b" / graph).read_bytes()


class TestBenchmarkSmoke:
    def test_tiny_benchmark_both_modes(self, tmp_path, dataset_dir, capsys):
        rc = main(["benchmark", "--out-dir", str(tmp_path),
                   "--dataset", str(dataset_dir),
                   "--folds", "4", "--encoder-epochs", "1",
                   "--classifier-epochs", "10", "--seed", "2"])
        assert rc == 0
        assert (tmp_path / "robustness_contrastive.csv").exists()
        assert (tmp_path / "crossval_contrastive.csv").exists()
        assert (tmp_path / "robustness_contrastive.png").exists()
        per_family = (tmp_path / "per_family_contrastive.csv").read_text().splitlines()
        assert per_family[0].startswith("family,TP,FP,TN,FN")
        assert len(per_family) == 1 + 3 + 1  # header + families + accuracy row
        report = json.loads((tmp_path / "benchmark_report_contrastive.json").read_text())
        assert report["stage_seconds"]["familial_classification"] > 0
        capsys.readouterr()
        rc = main(["benchmark", "--out-dir", str(tmp_path),
                   "--dataset", str(dataset_dir),
                   "--folds", "4", "--encoder-epochs", "1",
                   "--classifier-epochs", "10", "--seed", "2", "--no-contrastive"])
        assert rc == 0
        assert (tmp_path / "robustness_no-contrastive.csv").exists()
        rows = (tmp_path / "robustness_no-contrastive.csv").read_text().splitlines()
        assert rows[0] == "obfuscator,macro_f1,accuracy"
        assert len(rows) == 1 + 1 + 13  # header + clean + 12 singles + all12
