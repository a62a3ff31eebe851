"""Experiment configs, data loading, runners, and report serialization.

Determinism demands are strict here: identical configs must produce byte
identical reports, including across worker counts.
"""

import json
import math

import numpy as np
import pytest

from ebicselect import (
    Dataset,
    EmptyAfterFiltering,
    ExperimentConfig,
    ExperimentReport,
    Family,
    ParseError,
    ValidationError,
    emit_report,
    load_csv,
    make_permuted_design,
    report_from_json_bytes,
    report_to_json_bytes,
    run_consistency_sweep,
    run_equivalence_experiment,
    run_ising_experiment,
    run_regression_experiment,
    simulate_glm,
)
from ebicselect.ising import GraphEstimate, IsingParameters, grid_graph


# CSV loading

def write_csv(tmp_path, name: str, text: str):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_csv_drops_incomplete_rows(tmp_path):
    rows = ["x1,x2,y"]
    for i in range(10):
        if i in (3, 7):
            rows.append(f"{i},,1")  # missing cell
        else:
            rows.append(f"{i},{i * 2},{i % 2}")
    path = write_csv(tmp_path, "d.csv", "\n".join(rows) + "\n")
    res = load_csv(path, "y", "logistic")
    assert res.dropped_count == 2
    assert res.dataset.n == 8
    assert res.feature_names == ("x1", "x2")
    assert res.dataset.family is Family.LOGISTIC


def test_load_csv_accepts_na_tokens(tmp_path):
    path = write_csv(tmp_path, "d.csv", "a,y\n1,0\nNA,1\nnan,0\nnull,1\n2,1\n")
    res = load_csv(path, "y", "logistic")
    assert res.dropped_count == 3
    assert res.dataset.n == 2


def test_load_csv_names_bad_cell(tmp_path):
    path = write_csv(tmp_path, "d.csv", "a,b,y\n1,2,0\n1,oops,1\n")
    with pytest.raises(ParseError, match="row 3.*'b'|'b'.*row 3"):
        load_csv(path, "y", "gaussian")


def test_load_csv_missing_response_column(tmp_path):
    path = write_csv(tmp_path, "d.csv", "a,b\n1,2\n")
    with pytest.raises(ValidationError):
        load_csv(path, "y", "gaussian")


def test_load_csv_all_rows_dropped(tmp_path):
    path = write_csv(tmp_path, "d.csv", "a,y\n,1\n,0\n")
    with pytest.raises(EmptyAfterFiltering):
        load_csv(path, "y", "gaussian")


def test_load_csv_ragged_row(tmp_path):
    path = write_csv(tmp_path, "d.csv", "a,b,y\n1,2,0\n1,0\n")
    with pytest.raises(ParseError, match="row 3"):
        load_csv(path, "y", "gaussian")


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(ValidationError):
        load_csv(tmp_path / "absent.csv", "y", "gaussian")


# permuted designs

def test_permuted_design_shape_and_moments():
    rng = np.random.default_rng(0)
    base = Dataset(
        x=rng.standard_normal((40, 57)),
        y=rng.standard_normal(40),
        family=Family.GAUSSIAN,
    )
    out = make_permuted_design(base, k_blocks=4, seed=1)
    assert out.x.shape == (40, 57 * 5)
    np.testing.assert_array_equal(out.x[:, :57], base.x)
    # Each permuted block holds the same column multisets as the original.
    for b in range(1, 5):
        block = out.x[:, 57 * b : 57 * (b + 1)]
        np.testing.assert_allclose(
            np.sort(block, axis=0), np.sort(base.x, axis=0), atol=0
        )
        assert not np.array_equal(block, base.x)
    np.testing.assert_array_equal(out.y, base.y)


def test_permuted_design_blocks_are_row_permutations():
    # A whole-row permutation per block preserves cross-column structure.
    rng = np.random.default_rng(2)
    base = Dataset(
        x=rng.standard_normal((25, 6)), y=rng.standard_normal(25), family=Family.GAUSSIAN
    )
    out = make_permuted_design(base, k_blocks=2, seed=5)
    for b in range(1, 3):
        block = out.x[:, 6 * b : 6 * (b + 1)]
        # match each block row to exactly one base row
        matches = [
            int(np.flatnonzero((np.abs(base.x - row).max(axis=1) == 0))[0])
            for row in block
        ]
        assert sorted(matches) == list(range(25))


def test_permuted_design_zero_blocks_is_identity():
    rng = np.random.default_rng(3)
    base = Dataset(
        x=rng.standard_normal((10, 4)), y=rng.standard_normal(10), family=Family.GAUSSIAN
    )
    out = make_permuted_design(base, k_blocks=0, seed=9)
    np.testing.assert_array_equal(out.x, base.x)


def test_permuted_design_seeded():
    rng = np.random.default_rng(4)
    base = Dataset(
        x=rng.standard_normal((12, 3)), y=rng.standard_normal(12), family=Family.GAUSSIAN
    )
    a = make_permuted_design(base, 2, seed=7)
    b = make_permuted_design(base, 2, seed=7)
    c = make_permuted_design(base, 2, seed=8)
    assert np.array_equal(a.x, b.x)
    assert not np.array_equal(a.x, c.x)


# simulation

def test_simulate_glm_contract():
    rng = np.random.default_rng(5)
    data, sup, coeffs = simulate_glm(Family.LOGISTIC, 50, 20, 3, 2.0, rng)
    assert data.x.shape == (50, 20)
    assert len(sup) == 3
    assert set(np.unique(coeffs[sup.as_array()])) <= {2.0, -2.0}
    off = np.delete(coeffs, sup.as_array())
    assert np.all(off == 0)
    assert set(np.unique(data.y)) <= {0.0, 1.0}


# configs

def test_config_rejects_unknown_keys():
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict({"kind": "equivalence", "n": 10, "p_or_blocks": 2, "bogus": 1})


def test_config_validates_kind_and_methods():
    with pytest.raises(ValidationError):
        ExperimentConfig(kind="nope", n=10, p_or_blocks=2)
    with pytest.raises(ValidationError):
        ExperimentConfig(kind="equivalence", n=10, p_or_blocks=2, method_list=("magic",))
    with pytest.raises(ValidationError):
        ExperimentConfig(kind="equivalence", n=0, p_or_blocks=2)


def test_config_file_round_trip(tmp_path):
    cfg = {
        "kind": "regression_permuted",
        "n": 30,
        "p_or_blocks": 2,
        "gamma_list": [0.0, 1.0],
        "replicates": 2,
        "seed": 5,
        "family": "gaussian",
    }
    jpath = tmp_path / "c.json"
    jpath.write_text(json.dumps(cfg))
    from_json = ExperimentConfig.from_file(jpath)
    tpath = tmp_path / "c.toml"
    tpath.write_text(
        'kind = "regression_permuted"\nn = 30\np_or_blocks = 2\n'
        "gamma_list = [0.0, 1.0]\nreplicates = 2\nseed = 5\n"
        'family = "gaussian"\n'
    )
    from_toml = ExperimentConfig.from_file(tpath)
    assert from_json == from_toml
    assert from_json.gamma_list == (0.0, 1.0)
    assert ExperimentConfig.from_dict(from_json.to_dict()) == from_json


# runners

def small_regression_config(**overrides):
    base = dict(
        kind="regression_permuted",
        n=80,
        p_or_blocks=15,
        gamma_list=(0.0, 1.0),
        q_cap=5,
        replicates=3,
        seed=11,
        family="gaussian",
        true_support_size=2,
        signal_magnitude=2.0,
        n_rho=25,
        cv_folds=4,
        stability_subsamples=8,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_regression_report_is_deterministic_bytes():
    cfg = small_regression_config()
    a = report_to_json_bytes(run_regression_experiment(cfg))
    b = report_to_json_bytes(run_regression_experiment(cfg))
    assert a == b


def test_regression_report_invariant_to_worker_count():
    serial = small_regression_config(max_workers=1)
    threaded = small_regression_config(max_workers=3)
    assert report_to_json_bytes(run_regression_experiment(serial)) == report_to_json_bytes(
        run_regression_experiment(threaded)
    )


def test_regression_rows_cover_methods():
    cfg = small_regression_config(method_list=("ebic", "bic", "cv"))
    rep = run_regression_experiment(cfg)
    methods = {row["method"] for row in rep.rows}
    assert methods == {"ebic(gamma=0)", "ebic(gamma=1)", "bic", "cv"}
    for row in rep.rows:
        assert row["metrics"]["n_ok"] + row["metrics"]["n_failed"] == 3
        assert 0.0 <= row["metrics"]["fdr_mean"] <= 1.0


def test_larger_gamma_never_raises_mean_fdr_here():
    cfg = small_regression_config(replicates=8, seed=2)
    rep = run_regression_experiment(cfg)
    fdr = {row["method"]: row["metrics"]["fdr_mean"] for row in rep.rows}
    assert fdr["ebic(gamma=1)"] <= fdr["ebic(gamma=0)"]


def test_regression_permuted_blocks_from_base_data():
    rng = np.random.default_rng(6)
    base = Dataset(
        x=rng.standard_normal((60, 8)),
        y=rng.standard_normal(60),
        family=Family.GAUSSIAN,
    )
    cfg = ExperimentConfig(
        kind="regression_permuted", n=40, p_or_blocks=2, gamma_list=(1.0,),
        q_cap=4, replicates=2, seed=3, family="gaussian", n_rho=20,
    )
    rep = run_regression_experiment(cfg, base=base)
    assert rep.settings[0]["p"] == 8 * 3
    assert rep.settings[0]["protocol"] == "permuted_blocks"
    for row in rep.rows:
        assert "psr_mean" in row["metrics"]


def test_consistency_sweep_settings_follow_growth_rule():
    cfg = ExperimentConfig(
        kind="consistency_sweep", n=100, p_or_blocks=0, n_list=(50, 100),
        kappa=0.6, gamma_list=(1.0,), q_cap=4, replicates=2, seed=1,
        family="gaussian", true_support_size=2, signal_magnitude=2.0, n_rho=20,
    )
    rep = run_consistency_sweep(cfg)
    ns = [s["n"] for s in rep.settings]
    ps = [s["p"] for s in rep.settings]
    assert ns == [50, 100]
    assert ps == [math.ceil(50**0.6), math.ceil(100**0.6)]
    assert len(rep.rows) == 2  # one method, two settings


def test_ising_runner_and_rule_no_looser_than_or():
    graph = grid_graph(2, 2)
    params = IsingParameters.from_graph(graph, edge_weight=0.8)
    cfg = ExperimentConfig(
        kind="ising_recovery", n=400, p_or_blocks=4, gamma_list=(0.5,),
        q_cap=3, replicates=3, seed=7, burn_in=100, thin=1,
        rules=("and", "or"), n_rho=20,
    )
    rep = run_ising_experiment(cfg, graph, params)
    by_rule = {row["setting"]["rule"]: row["metrics"] for row in rep.rows}
    assert by_rule["and"]["fdr_mean"] <= by_rule["or"]["fdr_mean"] + 1e-12
    assert set(by_rule) == {"and", "or"}


def test_ising_runner_requires_matching_kind():
    graph = grid_graph(2, 2)
    params = IsingParameters.from_graph(graph, edge_weight=0.5)
    cfg = small_regression_config()
    with pytest.raises(ValidationError):
        run_ising_experiment(cfg, graph, params)


def test_equivalence_runner_reports_agreement_and_gap():
    cfg = ExperimentConfig(
        kind="equivalence", n=150, p_or_blocks=12, gamma_list=(1.0,),
        q_cap=4, replicates=3, seed=5, family="logistic",
        true_support_size=2, signal_magnitude=2.0, prior_sigma=5.0,
        n_rho=25, quad_max_dim=1,
    )
    rep = run_equivalence_experiment(cfg)
    assert len(rep.rows) == 1
    m = rep.rows[0]["metrics"]
    assert 0.0 <= m["agreement_mean"] <= 1.0
    assert m["gap_spread_mean"] >= 0.0
    assert "quad_err_over_rate_mean" in m


# reports

def test_report_round_trip_and_schema():
    cfg = small_regression_config(replicates=1)
    rep = run_regression_experiment(cfg)
    blob = report_to_json_bytes(rep)
    back = report_from_json_bytes(blob)
    assert back.kind == rep.kind
    assert back.rows == rep.rows
    assert back.schema == "ebic-report/1"
    with pytest.raises(ValidationError):
        report_from_json_bytes(json.dumps({"schema": "other/9"}).encode())


def test_report_bytes_exclude_timing_by_default():
    cfg = small_regression_config(replicates=1)
    rep = run_regression_experiment(cfg)
    assert rep.timing_s > 0
    a = report_to_json_bytes(rep)
    assert b"timing_s" not in a
    b = report_to_json_bytes(rep, include_timing=True)
    assert b"timing_s" in b


def test_emit_report_csv_layout(tmp_path):
    cfg = small_regression_config(replicates=2, method_list=("ebic", "cv"))
    rep = run_regression_experiment(cfg)
    out = tmp_path / "r.csv"
    blob = emit_report(rep, fmt="csv_tables", out_path=out)
    text = out.read_bytes()
    assert text == blob
    lines = blob.decode().strip().splitlines()
    # header plus settings x methods rows
    assert len(lines) == 1 + len(rep.rows)
    assert lines[0].split(",")[0] == "method"


def test_emit_report_rejects_unknown_format():
    cfg = small_regression_config(replicates=1)
    rep = run_regression_experiment(cfg)
    with pytest.raises(ValidationError):
        emit_report(rep, fmt="parquet")
