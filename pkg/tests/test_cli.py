import json

import numpy as np
import pytest

from sure_lab import SmootherFamily, from_matrix, save_family
from sure_lab.cli import main


def base_config(**overrides):
    cfg = {
        "schema_version": 1,
        "model": {"n": 2, "sigma": 1.0,
                  "theta0": {"kind": "sparse", "k": 1, "amplitude": 1.0}},
        "family": {"smoothers": [
            {"label": "a", "kind": "zero", "parameters": {}},
            {"label": "b", "kind": "identity", "parameters": {}},
        ]},
        "n_reps": 500,
        "master_seed": 42,
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_simulate_basic(tmp_path):
    cfg_path = write_config(tmp_path, base_config())
    out = tmp_path / "summary.json"
    code = main(["simulate", "--config", cfg_path, "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["summary"]["n_reps"] == 500
    assert doc["summary"]["identity_pass_rates"] == {
        "edf_decomposition": 1.0, "basic_inequality": 1.0, "exopt_linkage": 1.0}
    assert doc["bounds"]["edf"]["bound"] > 0
    assert len(doc["bounds"]["oracle_gap"]["rows"]) == 3


def test_simulate_deterministic_across_runs_and_threads(tmp_path):
    cfg_path = write_config(tmp_path, base_config())
    outs = []
    for threads, name in [("1", "s1.json"), ("1", "s2.json"), ("8", "s8.json")]:
        out = tmp_path / name
        assert main(["simulate", "--config", cfg_path, "--threads", threads,
                     "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_simulate_seed_override_changes_output(tmp_path):
    cfg_path = write_config(tmp_path, base_config())
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert main(["simulate", "--config", cfg_path, "--out", str(a)]) == 0
    assert main(["simulate", "--config", cfg_path, "--seed", "7", "--out", str(b)]) == 0
    assert a.read_bytes() != b.read_bytes()


def test_simulate_records_csv(tmp_path):
    cfg_path = write_config(tmp_path, base_config(n_reps=20))
    records = tmp_path / "records.csv"
    assert main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "s.json"),
                 "--records", str(records)]) == 0
    lines = records.read_text().strip().split("\n")
    assert len(lines) == 21
    assert lines[0].startswith("replicate_index,selected,sure_min")


def test_simulate_csv_format(tmp_path, capsys):
    cfg_path = write_config(tmp_path, base_config(n_reps=10))
    assert main(["simulate", "--config", cfg_path, "--format", "csv"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("key,value\n")
    assert "summary.n_reps,10" in out


@pytest.mark.parametrize("mutate,needle", [
    (lambda c: c.update(n_reps=0), "n_reps"),
    (lambda c: c.update(unknown_key=1), "unknown_key"),
    (lambda c: c["model"].update(sigma=-1.0), "sigma"),
    (lambda c: c["model"]["theta0"].update(kind="bogus"), "theta0"),
    (lambda c: c.update(master_seed=-1), "master_seed"),
    (lambda c: c.update(bounds={"eta_grid": [0.0]}), "eta_grid"),
])
def test_simulate_validation_errors(tmp_path, capsys, mutate, needle):
    cfg = base_config()
    mutate(cfg)
    cfg_path = write_config(tmp_path, cfg)
    assert main(["simulate", "--config", cfg_path]) == 1
    assert needle in capsys.readouterr().err


def test_simulate_malformed_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["simulate", "--config", str(path)]) == 1
    assert "line" in capsys.readouterr().err


def test_family_info_from_config(tmp_path, capsys):
    cfg_path = write_config(tmp_path, base_config())
    assert main(["family-info", "--config", cfg_path]) == 0
    out = capsys.readouterr().out
    assert "h_op = 1" in out
    assert out.count("\n") == 4  # header + 2 rows + h_op


def test_family_info_round_trip(tmp_path, capsys):
    fam = SmootherFamily.of([
        from_matrix("zero", np.zeros((2, 2))),
        from_matrix("id", np.eye(2)),
    ])
    path = tmp_path / "family.json"
    save_family(fam, path)
    assert main(["family-info", "--family", str(path)]) == 0
    from_file = capsys.readouterr().out

    cfg_path = write_config(tmp_path, base_config(
        family={"path": str(path)}))
    assert main(["family-info", "--config", cfg_path]) == 0
    assert capsys.readouterr().out == from_file


def test_family_info_malformed(tmp_path, capsys):
    path = tmp_path / "family.json"
    path.write_text(json.dumps({"schema_version": 1}))
    assert main(["family-info", "--family", str(path)]) == 1
    assert "error" in capsys.readouterr().err


def test_family_info_krr_grid_df_decreasing(tmp_path, capsys):
    gram = [2.0, 0.0, 0.0, 1.0]
    cfg = base_config(family={"smoothers": [
        {"label": f"lam{lam}", "kind": "krr",
         "parameters": {"gram": gram, "lambda": lam}}
        for lam in (0.1, 1.0, 10.0)
    ]})
    cfg_path = write_config(tmp_path, cfg)
    assert main(["family-info", "--config", cfg_path]) == 0
    rows = capsys.readouterr().out.strip().split("\n")[1:-1]
    dfs = [float(row.split()[1]) for row in rows]
    assert dfs == sorted(dfs, reverse=True)


def test_verify_lemmas_quick(tmp_path):
    cfg = {
        "master_seed": 42,
        "maxima": {"n_samples": 20_000, "n_vars": [1, 10], "k": [1, 2], "tau": [1.0]},
        "quadratic": {"n_samples": 20_000, "n_matrices": 2, "dim": 3},
    }
    cfg_path = write_config(tmp_path, cfg, "lemmas.json")
    out = tmp_path / "report.json"
    code = main(["verify-lemmas", "--config", cfg_path, "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["all_pass"] is True
    assert len(doc["maxima"]) == 4
    assert all(row["passed"] for row in doc["quadratic_exact"])


def test_verify_lemmas_invalid_slack(tmp_path, capsys):
    cfg_path = write_config(tmp_path, {"quadratic": {"slack": -1.0}}, "lemmas.json")
    assert main(["verify-lemmas", "--config", cfg_path]) == 1
    assert "slack" in capsys.readouterr().err


def test_verify_lemmas_rejects_boundary_lambda(tmp_path, capsys):
    cfg_path = write_config(
        tmp_path, {"quadratic": {"lambda_fractions": [1.0]}}, "lemmas.json")
    assert main(["verify-lemmas", "--config", cfg_path]) == 1
    assert "lambda_fractions" in capsys.readouterr().err
