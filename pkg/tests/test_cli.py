"""End-to-end CLI workflow: synth -> gen-constraints -> cluster -> evaluate -> report."""

import csv
import json

import pytest

from setclust.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Run the full five-command pipeline once and share the directory."""
    ws = tmp_path_factory.mktemp("cli")
    corpus = str(ws / "corpus.jsonl")
    emb = str(ws / "emb.bin")
    cons = str(ws / "constraints.json")
    results = str(ws / "results")
    report = str(ws / "report.csv")

    assert main(["synth", "--k-true", "3", "--n", "45", "--dim", "3",
                 "--separation", "60", "--seed", "0",
                 "--out-corpus", corpus, "--out-embeddings", emb]) == 0
    assert main(["gen-constraints", "--corpus", corpus, "--embeddings", emb,
                 "--k", "3", "--seed", "0", "--out", cons]) == 0
    assert main(["cluster", "--corpus", corpus, "--embeddings", emb,
                 "--constraints", cons, "--k", "3", "--ratios", "0.5",
                 "--seeds", "0,1", "--out-dir", results]) == 0
    assert main(["evaluate", "--corpus", corpus, "--embeddings", emb,
                 "--results", results]) == 0
    assert main(["report", "--results", results, "--out", report]) == 0
    return ws


class TestPipeline:
    def test_synth_outputs_exist(self, workspace):
        lines = (workspace / "corpus.jsonl").read_text().splitlines()
        assert len(lines) == 45
        first = json.loads(lines[0])
        assert {"id", "text", "label"} <= set(first)
        # 4-byte magic + two u32 header fields + f32 payload
        assert (workspace / "emb.bin").stat().st_size == 12 + 45 * 3 * 4

    def test_constraints_file(self, workspace):
        doc = json.loads((workspace / "constraints.json").read_text())
        assert doc["ml"] and doc["cl"]

    def test_result_files(self, workspace):
        results = sorted((workspace / "results").glob("result_*.json"))
        plain = [p for p in results if not p.name.endswith(".metrics.json")]
        assert len(plain) == 2  # one ratio, two seeds
        doc = json.loads(plain[0].read_text())
        assert len(doc["assignment"]) == 45
        assert len(doc["centers"]) == 3

    def test_metrics_written(self, workspace):
        sides = list((workspace / "results").glob("*.metrics.json"))
        assert len(sides) == 2
        side = json.loads(sides[0].read_text())
        assert side["acc"] >= 0.95

    def test_report_csv(self, workspace):
        with open(workspace / "report.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert any(r["metric"] == "acc" for r in rows)
        assert any(r["metric"] == "query_reduction" for r in rows)


class TestConfigFile:
    def test_config_overrides_flags(self, workspace, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({
            "k": 3, "algorithm": "kmeanspp", "ratios": [0.0],
            "seeds": [7], "penalties": [2.0, 3.0]}))
        out = tmp_path / "out"
        assert main(["cluster", "--corpus", str(workspace / "corpus.jsonl"),
                     "--embeddings", str(workspace / "emb.bin"),
                     "--constraints", str(workspace / "constraints.json"),
                     "--k", "99", "--algorithm", "lsck",
                     "--config", str(config), "--out-dir", str(out)]) == 0
        files = list(out.glob("result_*.json"))
        assert len(files) == 1
        doc = json.loads(files[0].read_text())
        assert doc["config"]["algorithm"] == "kmeanspp"
        assert doc["config"]["k"] == 3
        assert doc["seed"] == 7

    def test_penalty_string_parsing(self, workspace, tmp_path):
        out = tmp_path / "out"
        assert main(["cluster", "--corpus", str(workspace / "corpus.jsonl"),
                     "--embeddings", str(workspace / "emb.bin"),
                     "--constraints", str(workspace / "constraints.json"),
                     "--k", "3", "--ratios", "0.2", "--seeds", "0",
                     "--penalties", "1.5,2.5", "--out-dir", str(out)]) == 0
        doc = json.loads(next(out.glob("result_*.json")).read_text())
        assert doc["config"]["penalties"] == [1.5, 2.5]


class TestDeterminism:
    def test_cli_rerun_byte_identical(self, workspace, tmp_path):
        corpus = str(workspace / "corpus.jsonl")
        emb = str(workspace / "emb.bin")
        outs = []
        for name in ("a", "b"):
            cons = tmp_path / f"cons_{name}.json"
            res = tmp_path / f"res_{name}"
            assert main(["gen-constraints", "--corpus", corpus,
                         "--embeddings", emb, "--k", "3", "--seed", "3",
                         "--out", str(cons)]) == 0
            assert main(["cluster", "--corpus", corpus, "--embeddings", emb,
                         "--constraints", str(cons), "--k", "3",
                         "--ratios", "0.5", "--seeds", "0",
                         "--out-dir", str(res)]) == 0
            outs.append((cons, res))
        (cons_a, res_a), (cons_b, res_b) = outs
        assert cons_a.read_bytes() == cons_b.read_bytes()
        for path in res_a.glob("result_*.json"):
            assert path.read_bytes() == (res_b / path.name).read_bytes()


class TestErrors:
    def test_missing_subcommand(self, capsys):
        with pytest.raises(SystemExit):
            main([])

    def test_unknown_algorithm_flag(self, workspace):
        with pytest.raises(SystemExit):
            main(["cluster", "--corpus", "x", "--embeddings", "y",
                  "--constraints", "z", "--algorithm", "dbscan",
                  "--out-dir", "w"])
