import json
import subprocess
import sys

import numpy as np
import pytest

from pgmmpen.cli import main


def run_cli(args):
    return main(list(args))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def strip_wall_clock(path):
    payload = read_json(path)
    payload.pop("wall_clock_seconds", None)
    return json.dumps(payload, sort_keys=True)


@pytest.fixture
def sim(tmp_path):
    prefix = tmp_path / "sim"
    code = run_cli([
        "simulate", "--paper", "--n", "60", "--p", "6", "--seed", "3",
        "--out", str(prefix),
    ])
    assert code == 0
    return {
        "data": str(prefix) + "_data.csv",
        "labels": str(prefix) + "_labels.csv",
        "meta": str(prefix) + "_provenance.json",
    }


class TestSimulate:
    def test_paper_shape(self, tmp_path):
        prefix = tmp_path / "s"
        assert run_cli(["simulate", "--paper", "--n", "10", "--seed", "7",
                        "--out", str(prefix)]) == 0
        values = np.loadtxt(str(prefix) + "_data.csv", delimiter=",")
        assert values.shape == (10, 200)

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for prefix in (a, b):
            run_cli(["simulate", "--paper", "--n", "20", "--p", "5",
                     "--seed", "11", "--out", str(prefix)])
        assert (a.parent / "a_data.csv").read_bytes() == \
            (b.parent / "b_data.csv").read_bytes()
        assert (a.parent / "a_labels.csv").read_bytes() == \
            (b.parent / "b_labels.csv").read_bytes()

    def test_ratio_flag(self, tmp_path):
        prefix = tmp_path / "r"
        run_cli(["simulate", "--paper", "--n", "100", "--p", "4",
                 "--ratios", "3:4:3", "--seed", "0", "--out", str(prefix)])
        labels = np.loadtxt(str(prefix) + "_labels.csv", dtype=int)
        assert np.array_equal(np.bincount(labels), [30, 40, 30])

    def test_sparse_scenario(self, tmp_path):
        prefix = tmp_path / "sp"
        assert run_cli(["simulate", "--sparse", "--n", "30", "--p", "8",
                        "--G", "2", "--zero-fraction", "0.5",
                        "--separation", "3", "--seed", "1",
                        "--out", str(prefix)]) == 0
        meta = read_json(str(prefix) + "_provenance.json")
        means = np.asarray(meta["true_means"])
        assert means.shape == (2, 8)
        assert np.all((means == 0).sum(axis=1) == 4)

    def test_csv_roundtrip_exact(self, tmp_path):
        prefix = tmp_path / "rt"
        run_cli(["simulate", "--paper", "--n", "15", "--p", "4", "--seed", "2",
                 "--out", str(prefix)])
        from pgmmpen.simulate import ScenarioSpec, generate_paper_mixture

        reference = generate_paper_mixture(
            ScenarioSpec(n=15, p=4, ratios=(4, 3, 3), seed=2)
        )
        loaded = np.loadtxt(str(prefix) + "_data.csv", delimiter=",")
        assert np.array_equal(loaded, reference.values)


class TestFit:
    def test_fit_report(self, sim, tmp_path):
        out = tmp_path / "fit.json"
        code = run_cli([
            "fit", "--data", sim["data"], "--labels", sim["labels"],
            "--G", "3", "--q", "1", "--structure", "CUC", "--starts", "2",
            "--seed", "5", "--out", str(out),
        ])
        assert code == 0
        payload = read_json(out)
        assert payload["n"] == 60 and payload["p"] == 6
        assert set(payload["criteria"]) == {"alpbic", "lpbic", "bic", "aic", "caic"}
        assert payload["rho_tilde"] <= payload["rho"]
        assert payload["fits"]["pilot"]["converged"] in (True, False)
        assert "ari" in payload
        assert payload["config"]["G"] == 3

    def test_single_gaussian_converges(self, tmp_path, rng):
        data_path = tmp_path / "g.csv"
        np.savetxt(data_path, rng.normal(size=(80, 3)), delimiter=",", fmt="%.17g")
        out = tmp_path / "fit.json"
        code = run_cli([
            "fit", "--data", str(data_path), "--G", "1", "--q", "1",
            "--structure", "UUU", "--starts", "1", "--out", str(out),
        ])
        assert code == 0
        assert read_json(out)["fits"]["pilot"]["converged"] is True

    def test_penalty_off_equals_lambda_c_zero(self, sim, tmp_path):
        out_off = tmp_path / "off.json"
        out_zero = tmp_path / "zero.json"
        common = ["fit", "--data", sim["data"], "--G", "2", "--q", "1",
                  "--structure", "CCC", "--starts", "2", "--seed", "9"]
        assert run_cli(common + ["--penalty", "off", "--out", str(out_off)]) == 0
        assert run_cli(common + ["--lambda-c", "0", "--out", str(out_zero)]) == 0
        a = read_json(out_off)["criteria"]
        b = read_json(out_zero)["criteria"]
        for name in a:
            assert a[name] == pytest.approx(b[name], abs=1e-9)

    def test_malformed_csv_exits_one(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1.0,2.0\n3.0,oops\n")
        code = run_cli(["fit", "--data", str(bad), "--G", "1", "--q", "1",
                        "--structure", "UUU"])
        assert code == 1

    def test_fit_failure_exits_two(self, tmp_path, rng):
        # more components than points: every start collapses
        data_path = tmp_path / "tiny.csv"
        np.savetxt(data_path, rng.normal(size=(4, 2)), delimiter=",", fmt="%.17g")
        out = tmp_path / "fail.json"
        code = run_cli([
            "fit", "--data", str(data_path), "--G", "4", "--q", "1",
            "--structure", "UUU", "--starts", "1", "--init", "random",
            "--out", str(out),
        ])
        assert code == 2
        assert "error" in read_json(out)

    def test_header_flag(self, sim, tmp_path):
        with_header = tmp_path / "h.csv"
        raw = open(sim["data"], encoding="utf-8").read()
        with_header.write_text("c0,c1,c2,c3,c4,c5\n" + raw)
        out = tmp_path / "fit.json"
        code = run_cli(["fit", "--data", str(with_header), "--header",
                        "--G", "1", "--q", "1", "--structure", "CCC",
                        "--starts", "1", "--out", str(out)])
        assert code == 0
        assert read_json(out)["n"] == 60

    def test_config_file_and_flag_precedence(self, sim, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"G": 1, "q": 1, "structure": "CCC",
                                   "starts": 1, "data": sim["data"]}))
        out = tmp_path / "fit.json"
        code = run_cli(["fit", "--config", str(cfg), "--G", "2",
                        "--out", str(out)])
        assert code == 0
        payload = read_json(out)
        assert payload["config"]["G"] == 2        # flag beats file
        assert payload["config"]["structure"] == "CCC"  # file beats default

    def test_unknown_config_key_rejected(self, sim, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"nonsense": 1}))
        assert run_cli(["fit", "--config", str(cfg), "--data", sim["data"]]) == 1


class TestSearch:
    def test_two_cell_grid(self, sim, tmp_path):
        out = tmp_path / "search.json"
        code = run_cli([
            "search", "--data", sim["data"], "--labels", sim["labels"],
            "--G-values", "1,2", "--q-values", "1", "--structures", "CCC",
            "--starts", "2", "--seed", "1", "--out", str(out),
        ])
        assert code == 0
        payload = read_json(out)
        assert len(payload["cells"]) == 2
        assert set(payload["best_per_criterion"]) == {
            "alpbic", "lpbic", "bic", "aic", "caic"
        }
        assert "ari_per_criterion" in payload

    def test_cells_csv(self, sim, tmp_path):
        out = tmp_path / "search.json"
        table = tmp_path / "cells.csv"
        run_cli([
            "search", "--data", sim["data"], "--G-values", "1,2",
            "--q-values", "1", "--structures", "CCC", "--starts", "1",
            "--out", str(out), "--cells-csv", str(table),
        ])
        lines = table.read_text().strip().splitlines()
        assert len(lines) == 3  # header + 2 cells
        assert lines[0].startswith("G,q,structure,alpbic")

    def test_deterministic_reports(self, sim, tmp_path):
        out = tmp_path / "report.json"
        outs = []
        for _ in range(2):
            run_cli([
                "search", "--data", sim["data"], "--G-values", "1,2",
                "--q-values", "1", "--structures", "CCC", "--starts", "1",
                "--seed", "3", "--out", str(out),
            ])
            outs.append(strip_wall_clock(out))
        assert outs[0] == outs[1]

    def test_best_recomputable_from_cells(self, sim, tmp_path):
        out = tmp_path / "search.json"
        run_cli([
            "search", "--data", sim["data"], "--G-values", "1,2",
            "--q-values", "1,2", "--structures", "CCC,CUC", "--starts", "1",
            "--seed", "6", "--out", str(out),
        ])
        payload = read_json(out)
        for name, best in payload["best_per_criterion"].items():
            values = [c["criteria"][name] for c in payload["cells"] if "criteria" in c]
            assert best["value"] == max(values)

    def test_partial_failures_reported_in_json(self, tmp_path, rng):
        data_path = tmp_path / "tiny.csv"
        np.savetxt(data_path, rng.normal(size=(6, 2)), delimiter=",", fmt="%.17g")
        out = tmp_path / "search.json"
        code = run_cli([
            "search", "--data", str(data_path), "--G-values", "1,5",
            "--q-values", "1", "--structures", "UUU", "--starts", "1",
            "--init", "random", "--seed", "0", "--out", str(out),
        ])
        assert code == 0  # one cell succeeded
        cells = read_json(out)["cells"]
        states = {c["G"]: ("error" in c) for c in cells}
        assert states[5] is True and states[1] is False


class TestReplicate:
    def test_single_setting(self, tmp_path):
        out = tmp_path / "rep.json"
        code = run_cli([
            "replicate", "--replicates", "1", "--n", "40", "--p", "6",
            "--G-values", "1,2", "--q-values", "1", "--structures", "CCC",
            "--starts", "1", "--seed", "2", "--out", str(out),
        ])
        assert code == 0
        payload = read_json(out)
        (key, setting), = payload["settings"].items()
        assert key == "n=40,ratios=4:3:3"
        assert all(v <= 1 for v in setting["correct_G"].values())
        assert len(setting["replicates"]) == 1

    def test_aggregates_match_recount(self, tmp_path):
        out = tmp_path / "rep.json"
        run_cli([
            "replicate", "--replicates", "2", "--n", "40", "--p", "6",
            "--G-values", "2,3", "--q-values", "1", "--structures", "CCC",
            "--starts", "1", "--seed", "4", "--out", str(out),
        ])
        setting = next(iter(read_json(out)["settings"].values()))
        for name, count in setting["correct_G"].items():
            recount = sum(
                1 for rec in setting["replicates"]
                if rec["error"] is None and rec["selections"][name]["G"] == 3
            )
            assert count == recount

    def test_paper_settings_cover_twelve_cells(self, tmp_path):
        out = tmp_path / "rep12.json"
        code = run_cli([
            "replicate", "--replicates", "1", "--p", "4", "--paper-settings",
            "--G-values", "1,2", "--q-values", "1", "--structures", "CCC",
            "--starts", "1", "--seed", "1", "--out", str(out),
        ])
        assert code == 0
        settings = read_json(out)["settings"]
        assert len(settings) == 12
        ns = {key.split(",")[0] for key in settings}
        assert ns == {"n=40", "n=100", "n=200", "n=500"}


class TestAri:
    def test_identical_files(self, tmp_path, capsys):
        path = tmp_path / "l.csv"
        np.savetxt(path, [0, 0, 1, 1, 2], fmt="%d")
        assert run_cli(["ari", str(path), str(path)]) == 0
        assert capsys.readouterr().out.strip() == "1.000000"

    def test_relabeled_files(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        np.savetxt(a, [0, 0, 1, 1], fmt="%d")
        np.savetxt(b, [1, 1, 0, 0], fmt="%d")
        assert run_cli(["ari", str(a), str(b)]) == 0
        assert capsys.readouterr().out.strip() == "1.000000"

    def test_known_pair(self, tmp_path, capsys):
        # 6-element pair checked against the pair-counting oracle value
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        np.savetxt(a, [0, 0, 0, 1, 1, 1], fmt="%d")
        np.savetxt(b, [0, 0, 1, 1, 2, 2], fmt="%d")
        assert run_cli(["ari", str(a), str(b)]) == 0
        from test_metrics import pair_counting_ari

        expected = pair_counting_ari([0, 0, 0, 1, 1, 1], [0, 0, 1, 1, 2, 2])
        assert capsys.readouterr().out.strip() == f"{expected:.6f}"


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        prefix = tmp_path / "m"
        proc = subprocess.run(
            [sys.executable, "-m", "pgmmpen.cli", "simulate", "--paper",
             "--n", "10", "--p", "4", "--seed", "1", "--out", str(prefix)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0

    def test_usage_error_exits_one(self):
        assert run_cli(["fit", "--structure", "BAD"]) == 1
        assert run_cli(["fit"]) == 1  # --data missing


def test_simulate_unwritable_path_fails(tmp_path):
    code = run_cli(["simulate", "--paper", "--n", "10", "--p", "3",
                    "--seed", "0", "--out", "/nonexistent-dir/prefix"])
    assert code == 1
