"""Tests for the command line interface.

Commands run in process through main(argv) so exit codes and printed
output can be asserted directly; one subprocess test covers the
installed console script.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import toy_mentions, toy_ontology
from termnorm.cli import main
from termnorm.data import Dataset, Sample, load_dataset, load_split, \
    save_dataset
from termnorm.ontology import load_ontology, save_ontology
from termnorm.rng import derive_seed
from termnorm.version import __version__

TINY_SYNTH = ["--n-pt", "8", "--n-samples", "60", "--n-hlt", "3",
              "--children-min", "2", "--children-max", "3"]


def write_toy(tmp_path):
    onto_path = save_ontology(toy_ontology(), tmp_path / "onto.tsv")
    data_path = save_dataset(toy_mentions(), tmp_path / "mentions.jsonl")
    return onto_path, data_path


@pytest.fixture(scope="module")
def trained_ws(tmp_path_factory):
    """Synthetic workspace with splits, one model per dataset, and
    predictions for synth-a, shared by the chain tests below."""
    root = tmp_path_factory.mktemp("cli_ws")
    assert main(["synth", "--out-dir", str(root), "--seed", "5",
                 *TINY_SYNTH]) == 0
    for name in ("synth-a", "synth-b"):
        assert main(["split", "--ontology", str(root / "ontology.tsv"),
                     "--dataset", str(root / f"{name}.jsonl"),
                     "--seed", "5",
                     "--out-dir", str(root / "splits" / name)]) == 0
        assert main(["train", "--ontology", str(root / "ontology.tsv"),
                     "--dataset", str(root / f"{name}.jsonl"),
                     "--split", str(root / "splits" / name
                                    / "split_0.json"),
                     "--strategy", "finetune", "--epoch-scale", "0.1",
                     "--seed", "5",
                     "--out", str(root / f"{name}.npz")]) == 0
    assert main(["predict", "--ontology", str(root / "ontology.tsv"),
                 "--model", str(root / "synth-a.npz"),
                 "--dataset", str(root / "synth-a.jsonl"),
                 "--split", str(root / "splits" / "synth-a"
                                / "split_0.json"),
                 "--out", str(root / "preds_a.jsonl")]) == 0
    return root


class TestExitCodes:

    def test_version_exits_zero(self, capsys):
        assert main(["--version"]) == 0
        assert capsys.readouterr().out.strip() == __version__

    def test_no_command_prints_help(self, capsys):
        assert main([]) == 1
        assert "usage: termnorm" in capsys.readouterr().out

    def test_unknown_command_is_usage_error(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "invalid choice" in capsys.readouterr().err

    def test_missing_required_flag_is_usage_error(self, capsys):
        assert main(["stats"]) == 1
        assert "required" in capsys.readouterr().err

    def test_missing_file_is_data_error(self, tmp_path, capsys):
        rc = main(["op-corpus", "--ontology", str(tmp_path / "nope.tsv"),
                   "--out", str(tmp_path / "c.jsonl")])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_malformed_dataset_is_data_error(self, tmp_path, capsys):
        onto_path, _ = write_toy(tmp_path)
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"id": "s1", "text": "x", "pt_id": "mystery"}\n')
        rc = main(["ingest", "--ontology", str(onto_path),
                   "--dataset", str(bad),
                   "--out", str(tmp_path / "out.jsonl")])
        assert rc == 2
        assert "unknown pt_id" in capsys.readouterr().err

    def test_divergence_exit_code(self, tmp_path, capsys):
        # identical texts with conflicting labels keep the gradient from
        # saturating, so a huge step size overflows the logits
        onto_path, _ = write_toy(tmp_path)
        clash = Dataset("clash", [Sample("s1", "same text", "asthenia"),
                                  Sample("s2", "same text", "malaise")])
        data_path = save_dataset(clash, tmp_path / "clash.jsonl")
        with np.errstate(all="ignore"):
            rc = main(["train", "--ontology", str(onto_path),
                       "--dataset", str(data_path),
                       "--strategy", "finetune",
                       "--learning-rate", "1e308", "--batch-size", "1",
                       "--out", str(tmp_path / "m.npz")])
        assert rc == 3
        err = capsys.readouterr().err
        assert "training diverged" in err
        assert "phase 'finetune'" in err


class TestConsoleScript:

    def test_version_via_subprocess(self):
        proc = subprocess.run([sys.executable, "-m", "termnorm.cli",
                               "--version"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.strip() == __version__


class TestSynth:

    def test_writes_ontology_and_datasets(self, tmp_path, capsys):
        rc = main(["synth", "--out-dir", str(tmp_path), "--seed", "1",
                   "--n-pt", "4", "--n-samples", "20", "--n-hlt", "2",
                   "--children-min", "2", "--children-max", "2"])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.count("wrote ") == 3
        onto = load_ontology(tmp_path / "ontology.tsv")
        assert len(onto.concepts) == 4
        for name in ("synth-a", "synth-b"):
            ds = load_dataset(tmp_path / f"{name}.jsonl", onto)
            assert len(ds) == 20

    def test_equal_seeds_byte_identical(self, tmp_path):
        args = ["--seed", "9", "--n-pt", "4", "--n-samples", "20",
                "--n-hlt", "2", "--children-min", "2",
                "--children-max", "2"]
        assert main(["synth", "--out-dir", str(tmp_path / "one"),
                     *args]) == 0
        assert main(["synth", "--out-dir", str(tmp_path / "two"),
                     *args]) == 0
        for name in ("ontology.tsv", "synth-a.jsonl", "synth-b.jsonl"):
            assert ((tmp_path / "one" / name).read_bytes()
                    == (tmp_path / "two" / name).read_bytes())

    def test_config_file_and_flag_precedence(self, tmp_path):
        cfg = tmp_path / "bench.cfg"
        cfg.write_text("n_pt = 6\nn_samples = 20\nn_hlt = 2\n"
                       "children_min = 2\nchildren_max = 3\n")
        assert main(["synth", "--config", str(cfg),
                     "--out-dir", str(tmp_path / "a")]) == 0
        assert len(load_ontology(tmp_path / "a" / "ontology.tsv")
                   .concepts) == 6
        # explicit flag wins over the file value
        assert main(["synth", "--config", str(cfg), "--n-pt", "7",
                     "--out-dir", str(tmp_path / "b")]) == 0
        assert len(load_ontology(tmp_path / "b" / "ontology.tsv")
                   .concepts) == 7

    def test_env_var_config(self, tmp_path, monkeypatch):
        cfg = tmp_path / "bench.cfg"
        cfg.write_text("n_pt = 6\nn_samples = 20\nn_hlt = 2\n"
                       "children_min = 2\nchildren_max = 3\n")
        monkeypatch.setenv("TERMNORM_CONFIG", str(cfg))
        assert main(["synth", "--out-dir", str(tmp_path / "c")]) == 0
        assert len(load_ontology(tmp_path / "c" / "ontology.tsv")
                   .concepts) == 6


class TestIngestAndCorpus:

    def test_ingest_normalizes_llt_labels(self, tmp_path, capsys):
        onto_path, _ = write_toy(tmp_path)
        raw = tmp_path / "raw.jsonl"
        raw.write_text(
            '{"id": "x1", "text": "weak knees", "llt_id": "L1"}\n'
            '{"id": "x2", "text": "feel like crap", "llt_id": "L3"}\n')
        out = tmp_path / "normal.jsonl"
        assert main(["ingest", "--ontology", str(onto_path),
                     "--dataset", str(raw), "--out", str(out)]) == 0
        assert "2 samples, 2 distinct concepts" in capsys.readouterr().out
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert [r["pt_id"] for r in rows] == ["asthenia", "malaise"]
        assert all("llt_id" not in r for r in rows)

    def test_op_corpus_counts(self, tmp_path, capsys):
        onto_path, _ = write_toy(tmp_path)
        out = tmp_path / "corpus.jsonl"
        assert main(["op-corpus", "--ontology", str(onto_path),
                     "--out", str(out)]) == 0
        assert "3 samples covering 2 concepts" in capsys.readouterr().out
        onto = load_ontology(onto_path)
        corpus = load_dataset(out, onto)
        assert sorted(s.text for s in corpus.samples) == [
            "feeling unwell", "loss of energy", "weakness"]


class TestPairs:

    def test_pair_triple_mode(self, tmp_path, capsys):
        onto_path, data_path = write_toy(tmp_path)
        rc = main(["pairs", "--mode", "pair-triple",
                   "--ontology", str(onto_path),
                   "--dataset", str(data_path),
                   "--out", str(tmp_path / "pairs.jsonl"),
                   "--triples-out", str(tmp_path / "triples.jsonl")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "1 positive / 2 negative pairs, 2 triples" in out
        pair_lines = (tmp_path / "pairs.jsonl").read_text().splitlines()
        triple_lines = (tmp_path
                        / "triples.jsonl").read_text().splitlines()
        assert len(pair_lines) == 3
        assert len(triple_lines) == 2

    def test_pair_triple_requires_triples_out(self, tmp_path, capsys):
        onto_path, data_path = write_toy(tmp_path)
        rc = main(["pairs", "--mode", "pair-triple",
                   "--ontology", str(onto_path),
                   "--dataset", str(data_path),
                   "--out", str(tmp_path / "pairs.jsonl")])
        assert rc == 1
        assert "--triples-out" in capsys.readouterr().err

    def test_dataset_modes_require_dataset(self, tmp_path, capsys):
        onto_path, _ = write_toy(tmp_path)
        rc = main(["pairs", "--mode", "dataset-synonym",
                   "--ontology", str(onto_path),
                   "--out", str(tmp_path / "pairs.jsonl")])
        assert rc == 1
        assert "requires --dataset" in capsys.readouterr().err

    def test_ontology_synonym_mode(self, tmp_path, capsys):
        onto_path, _ = write_toy(tmp_path)
        out = tmp_path / "pairs.jsonl"
        rc = main(["pairs", "--mode", "ontology-synonym",
                   "--ontology", str(onto_path), "--out", str(out)])
        assert rc == 0
        # only asthenia has two child terms to pair up
        assert "1 positive pairs" in capsys.readouterr().out
        assert len(out.read_text().splitlines()) == 1


class TestChain:

    def test_split_files_and_seed_derivation(self, trained_ws):
        onto = load_ontology(trained_ws / "ontology.tsv")
        ds = load_dataset(trained_ws / "synth-a.jsonl", onto)
        for k in range(3):
            path = trained_ws / "splits" / "synth-a" / f"split_{k}.json"
            split = load_split(path, ds)
            assert split.seed == derive_seed(5, f"split:synth-a:{k}")
            assert len(split.train) + len(split.test) == len(ds)

    def test_split_explicit_seeds(self, tmp_path, capsys):
        onto_path, data_path = write_toy(tmp_path)
        rc = main(["split", "--ontology", str(onto_path),
                   "--dataset", str(data_path), "--seeds", "11",
                   "--out-dir", str(tmp_path / "splits")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "split 0:" in out
        files = sorted(p.name for p in (tmp_path / "splits").iterdir())
        assert files == ["split_0.json"]
        onto = load_ontology(onto_path)
        ds = load_dataset(data_path, onto)
        assert load_split(tmp_path / "splits" / "split_0.json",
                          ds).seed == 11

    def test_predictions_cover_test_side(self, trained_ws):
        onto = load_ontology(trained_ws / "ontology.tsv")
        ds = load_dataset(trained_ws / "synth-a.jsonl", onto)
        split = load_split(trained_ws / "splits" / "synth-a"
                           / "split_0.json", ds)
        rows = [json.loads(line) for line in
                (trained_ws / "preds_a.jsonl").read_text().splitlines()]
        assert sorted(r["id"] for r in rows) == sorted(split.test)
        pt_ids = {c.pt_id for c in onto.concepts}
        assert all(r["predicted"] in pt_ids for r in rows)

    def test_evaluate_single_split(self, trained_ws, tmp_path, capsys):
        out = tmp_path / "eval.json"
        rc = main(["evaluate", "--ontology",
                   str(trained_ws / "ontology.tsv"),
                   "--dataset", str(trained_ws / "synth-a.jsonl"),
                   "--predictions", str(trained_ws / "preds_a.jsonl"),
                   "--split", str(trained_ws / "splits" / "synth-a"
                                  / "split_0.json"),
                   "--out", str(out)])
        assert rc == 0
        assert "split 0:" in capsys.readouterr().out
        payload = json.loads(out.read_text())
        assert payload["header"]["f1_averaging"] == "macro"
        assert payload["header"]["dataset"] == "synth-a"
        assert payload["header"]["tool_version"] == __version__
        assert len(payload["per_split"]) == 1
        assert "aggregate" not in payload

    def test_evaluate_pairing_errors(self, trained_ws, tmp_path, capsys):
        base = ["evaluate", "--ontology",
                str(trained_ws / "ontology.tsv"),
                "--dataset", str(trained_ws / "synth-a.jsonl"),
                "--out", str(tmp_path / "eval.json")]
        pred = str(trained_ws / "preds_a.jsonl")
        split = str(trained_ws / "splits" / "synth-a" / "split_0.json")
        assert main(base + ["--predictions", pred]) == 1
        assert "pair up" in capsys.readouterr().err
        rc = main(base + ["--predictions", pred, "--split", split,
                          "--predictions", pred, "--split", split])
        assert rc == 1
        assert "expected 1 or 3" in capsys.readouterr().err

    def test_cross_eval(self, trained_ws, tmp_path, capsys):
        out_dir = tmp_path / "cross"
        entries = []
        for name in ("synth-a", "synth-b"):
            entries += ["--entry",
                        f"{name}={trained_ws / (name + '.jsonl')}:"
                        f"{trained_ws / 'splits' / name}:"
                        f"{trained_ws / (name + '.npz')}"]
        rc = main(["cross-eval", "--ontology",
                   str(trained_ws / "ontology.tsv"), *entries,
                   "--out-dir", str(out_dir)])
        assert rc == 0
        matrix = json.loads((out_dir / "cross_matrix.json").read_text())
        assert matrix["datasets"] == ["synth-a", "synth-b"]
        for field in ("accuracy_overall", "macro_f1_overall"):
            csv_text = (out_dir / f"cross_{field}.csv").read_text()
            assert csv_text.startswith("train\\test,synth-a,synth-b")

    def test_cross_eval_bad_entry(self, trained_ws, capsys, tmp_path):
        rc = main(["cross-eval", "--ontology",
                   str(trained_ws / "ontology.tsv"),
                   "--entry", "justaname",
                   "--out-dir", str(tmp_path)])
        assert rc == 1
        assert "bad --entry" in capsys.readouterr().err

    def test_prompts_subcommand(self, tmp_path, capsys):
        onto_path, data_path = write_toy(tmp_path)
        out = tmp_path / "prompts.jsonl"
        rc = main(["prompts", "--ontology", str(onto_path),
                   "--dataset", str(data_path), "--style", "gpt2",
                   "--out", str(out)])
        assert rc == 0
        rows = [json.loads(line)
                for line in out.read_text().splitlines()]
        assert [r["id"] for r in rows] == ["a1", "a2", "a3"]
        assert rows[0]["prompt"] == "INPUT: weak knees\nMEANING:"

    def test_stats_subcommand(self, trained_ws, tmp_path, capsys):
        out = tmp_path / "stats.json"
        rc = main(["stats", "--ontology",
                   str(trained_ws / "ontology.tsv"),
                   "--dataset", str(trained_ws / "synth-a.jsonl"),
                   "--dataset", str(trained_ws / "synth-b.jsonl"),
                   "--out", str(out)])
        assert rc == 0
        text = capsys.readouterr().out
        assert "synth-a:" in text
        assert "shared by >=2:" in text
        report = json.loads(out.read_text())
        assert report["dataset_names"] == ["synth-a", "synth-b"]


class TestPipeline:

    def test_end_to_end_report(self, tmp_path, capsys):
        rc = main(["pipeline", "--out-dir", str(tmp_path), "--seed", "3",
                   *TINY_SYNTH, "--epoch-scale", "0.1"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "synth-a finetune: acc in" in out
        assert "synth-b pretrain_finetune: acc in" in out

        report = json.loads((tmp_path / "report.json").read_text())
        header = report["header"]
        assert header["seed"] == 3
        assert len(header["config_hash"]) == 64
        assert header["strategies"] == ["finetune", "pretrain_finetune"]
        for name in ("synth-a", "synth-b"):
            assert len(report["out_fractions"][name]) == 3
            for strategy in header["strategies"]:
                assert "stats" in report["results"][name][strategy]
        assert set(report["cross"]) == {"finetune", "pretrain_finetune"}
        assert report["overlap"]["dataset_names"] == ["synth-a",
                                                      "synth-b"]

        for name in ("ontology.tsv", "synth-a.jsonl", "results.csv",
                     "cross_finetune.csv", "cross_pretrain_finetune.csv"):
            assert (tmp_path / name).exists()
        for name in ("synth-a", "synth-b"):
            for k in range(3):
                assert (tmp_path / "splits" / name
                        / f"split_{k}.json").exists()
        assert not (tmp_path / "models").exists()

    def test_save_models_flag(self, tmp_path):
        rc = main(["pipeline", "--out-dir", str(tmp_path), "--seed", "3",
                   "--n-pt", "4", "--n-samples", "20", "--n-hlt", "2",
                   "--children-min", "2", "--children-max", "2",
                   "--epoch-scale", "0.1", "--save-models"])
        assert rc == 0
        models = sorted(p.name for p in (tmp_path / "models").iterdir())
        assert models == sorted(
            f"{name}.{strategy}.{k}.npz"
            for name in ("synth-a", "synth-b")
            for strategy in ("finetune", "pretrain_finetune")
            for k in range(3))
