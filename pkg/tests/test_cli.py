import json
import time
from pathlib import Path

import pytest

from mlparch.cli import main

BASE_CONFIG = {
    "model": {"beta": 0.3, "a": [1.2], "b": [0.5], "W": [[1.5]]},
    "transfer": "tanh",
    "sigma2": 0.25,
    "space": {"bound": 10.0, "eta": 0.1, "sign_convention": True},
    "input_dist": {"kind": "gaussian", "mean": [0.0], "sd": [1.0]},
    "data": {"n": 150, "seed": 7},
    "fit": {"k": 1, "n_starts": 4, "base_seed": 0},
    "select": {"M": 2, "penalty": {"kind": "bic"}},
}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture
def cfg_path(tmp_path):
    return write_config(tmp_path, BASE_CONFIG)


class TestPipeline:
    def test_gen_fit_select_smoke(self, tmp_path, cfg_path):
        out = str(tmp_path / "out")
        assert main(["gen-data", "--config", cfg_path, "--out", out]) == 0
        dataset = Path(out) / "dataset.csv"
        assert dataset.exists()
        lines = dataset.read_text().splitlines()
        assert lines[0] == "x1,y"
        assert len(lines) == 151

        assert main(["fit", "--config", cfg_path, "--data", str(dataset), "--out", out]) == 0
        fit_doc = json.loads((Path(out) / "fit_result.json").read_text())
        assert fit_doc["k"] == 1 and "loglik" in fit_doc

        assert main(["select", "--config", cfg_path, "--data", str(dataset), "--out", out]) == 0
        sel_doc = json.loads((Path(out) / "selection.json").read_text())
        assert "k_hat" in sel_doc
        table = (Path(out) / "selection_table.csv").read_text().splitlines()
        assert table[0] == "k,loglik,penalty,t_n"
        assert len(table) == 3

    def test_artifacts_reproducible_byte_for_byte(self, tmp_path, cfg_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        for out in (out1, out2):
            assert main(["gen-data", "--config", cfg_path, "--out", out]) == 0
        assert (Path(out1) / "dataset.csv").read_bytes() == (Path(out2) / "dataset.csv").read_bytes()
        for out in (out1, out2):
            assert main(
                ["select", "--config", cfg_path, "--data", str(Path(out1) / "dataset.csv"), "--out", out]
            ) == 0
        for name in ("selection.json", "selection_table.csv"):
            assert (Path(out1) / name).read_bytes() == (Path(out2) / name).read_bytes()

    def test_seed_flag_overrides_config(self, tmp_path, cfg_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(["gen-data", "--config", cfg_path, "--out", out1]) == 0
        assert main(["gen-data", "--config", cfg_path, "--out", out2, "--seed", "8"]) == 0
        assert (Path(out1) / "dataset.csv").read_bytes() != (Path(out2) / "dataset.csv").read_bytes()


class TestValidation:
    def test_unknown_key_rejected_with_line_reference(self, tmp_path, capsys):
        doc = dict(BASE_CONFIG)
        doc["data"] = {"n": 100, "seed": 1, "banana": True}
        path = write_config(tmp_path, doc)
        out = str(tmp_path / "out")
        assert main(["gen-data", "--config", path, "--out", out]) == 1
        err = capsys.readouterr().err
        assert "banana" in err
        line = json.dumps(doc, indent=2).splitlines()
        expected_line = next(i for i, text in enumerate(line, start=1) if "banana" in text)
        assert f":{expected_line}:" in err
        assert not Path(out).exists()  # no partial artifacts

    def test_unknown_section_rejected(self, tmp_path, capsys):
        path = write_config(tmp_path, {**BASE_CONFIG, "extra_section": {}})
        assert main(["gen-data", "--config", path, "--out", str(tmp_path / "o")]) == 1
        assert "extra_section" in capsys.readouterr().err

    def test_malformed_json_reports_line(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "model": {,}\n}\n', encoding="utf-8")
        assert main(["gen-data", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
        assert "line 2" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["gen-data", "--config", str(tmp_path / "nope.json"), "--out", "."]) == 1

    def test_missing_required_section(self, tmp_path, capsys):
        doc = {k: v for k, v in BASE_CONFIG.items() if k != "data"}
        path = write_config(tmp_path, doc)
        assert main(["gen-data", "--config", path, "--out", str(tmp_path / "o")]) == 1
        assert "data" in capsys.readouterr().err

    def test_missing_dataset_file(self, tmp_path, cfg_path):
        assert main(["fit", "--config", cfg_path, "--data", str(tmp_path / "no.csv"), "--out", "."]) == 1

    def test_invalid_sigma2_value(self, tmp_path, capsys):
        path = write_config(tmp_path, {**BASE_CONFIG, "sigma2": -1.0})
        assert main(["gen-data", "--config", path, "--out", str(tmp_path / "o")]) == 1
        assert "sigma2" in capsys.readouterr().err


class TestTheoryCommands:
    def test_check_penalty_verdicts(self, tmp_path, capsys):
        for kind, expect_pass, failing in (
            ({"kind": "bic"}, True, None),
            ({"kind": "aic_like"}, False, "gap_divergence"),
            ({"kind": "custom", "c": 1.0, "alpha": 1.0}, False, "ratio_vanishes"),
        ):
            doc = {
                "penalty_check": {
                    "penalty": kind,
                    "d": 1,
                    "k_pairs": [[2, 1], [3, 1], [4, 2]],
                    "n_grid": [10, 100, 1000, 10000],
                }
            }
            out = tmp_path / f"out_{kind['kind']}"
            path = write_config(tmp_path, doc, name=f"{kind['kind']}.json")
            assert main(["check-penalty", "--config", path, "--out", str(out)]) == 0
            report = json.loads((out / "h4_report.json").read_text())
            assert report["overall_pass"] is expect_pass
            if failing:
                assert report["failed_conditions"] == [failing]

    def test_check_ident_passes_on_generic_model(self, tmp_path):
        doc = {
            "model": {"beta": 0.0, "a": [1.0], "b": [0.3], "W": [[1.2]]},
            "transfer": "tanh",
            "input_dist": {"kind": "gaussian", "mean": [0.0], "sd": [1.0]},
            "gram": {"n_nodes": 200, "tol": 1e-8},
        }
        path = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["check-ident", "--config", path, "--out", str(out)]) == 0
        report = json.loads((out / "h3_report.json").read_text())
        assert report["verdict"] == "pass"
        assert report["min_eigenvalue"] > 1e-8
        gram_lines = (out / "gram_matrix.csv").read_text().splitlines()
        assert gram_lines[0] == "row,col,value"
        assert len(gram_lines) == 1 + report["family_size"] ** 2

    def test_check_ident_fails_on_duplicated_units(self, tmp_path):
        doc = {
            "model": {"beta": 0.0, "a": [1.0, 1.0], "b": [0.3, 0.3], "W": [[1.2], [1.2]]},
            "transfer": "tanh",
            "input_dist": {"kind": "gaussian", "mean": [0.0], "sd": [1.0]},
        }
        path = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["check-ident", "--config", path, "--out", str(out)]) == 0
        assert json.loads((out / "h3_report.json").read_text())["verdict"] == "fail"

    def test_verify_lemma_artifact(self, tmp_path):
        doc = {
            "model": {"beta": 0.0, "a": [1.0], "b": [0.3], "W": [[1.2]]},
            "transfer": "tanh",
            "sigma2": 1.0,
            "input_dist": {"kind": "gaussian", "mean": [0.0], "sd": [1.0]},
            "lemma": {"ambient_k": 2, "delta_grid": [0.1, 0.01, 0.001], "n_mc": 4000, "seed": 3},
        }
        path = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["verify-lemma", "--config", path, "--out", str(out)]) == 0
        lines = (out / "lemma_remainder.csv").read_text().splitlines()
        assert lines[0] == "direction,delta,D,R,R_over_D,flagged"
        assert len(lines) == 1 + 6 * 3  # six identifiable directions, three deltas


class TestMcConsistency:
    def test_tiny_run_emits_artifacts_quickly(self, tmp_path):
        doc = {
            "model": {"beta": 0.3, "a": [1.2], "b": [0.5], "W": [[1.5]]},
            "transfer": "tanh",
            "sigma2": 0.25,
            "input_dist": {"kind": "gaussian", "mean": [0.0], "sd": [1.0]},
            "experiment": {
                "n_grid": [100, 200],
                "replications": 5,
                "M": 2,
                "penalties": [{"kind": "bic"}],
                "base_seed": 11,
                "n_starts": 4,
            },
        }
        path = write_config(tmp_path, doc)
        out = tmp_path / "out"
        start = time.perf_counter()
        assert main(["mc-consistency", "--config", path, "--out", str(out), "--threads", "1"]) == 0
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0
        for artifact in ("experiment.json", "frequencies.csv", "consistency_curve.csv"):
            assert (out / artifact).exists()
        freq_lines = (out / "frequencies.csv").read_text().splitlines()
        assert freq_lines[0] == "penalty,n,k,frequency"
        assert len(freq_lines) == 1 + 2 * 2  # (n, k) combinations
        curve = (out / "consistency_curve.csv").read_text().splitlines()
        assert curve[0] == "penalty,n,p_true_k"

        # Identical run at a different worker count: byte-identical artifacts.
        out2 = tmp_path / "out2"
        assert main(["mc-consistency", "--config", path, "--out", str(out2), "--threads", "2"]) == 0
        for artifact in ("experiment.json", "frequencies.csv", "consistency_curve.csv"):
            assert (out / artifact).read_bytes() == (out2 / artifact).read_bytes()
