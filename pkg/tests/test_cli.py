import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tetra.cli import RunConfig, decode_matrix, parse_complex, run, to_json


def call(argv, capsys):
    code = run(argv)
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def test_member_origin(capsys):
    code, rep, _ = call(["member", "--x1", "0", "--x2", "0", "--x3", "0", "--no-timestamp"], capsys)
    assert code == 0
    assert rep["schema"] == "tetra/1"
    assert rep["status"] == "interior"
    assert rep["config"]["command"] == "member"
    assert "generated_at" not in rep


def test_timestamp_present_by_default(capsys):
    _, rep, _ = call(["member", "--x1", "0", "--x2", "0", "--x3", "0"], capsys)
    assert "generated_at" in rep


def test_radius(capsys):
    code, rep, _ = call(["radius", "--tol", "1e-6", "--spot-points", "2000", "--no-timestamp"], capsys)
    assert code == 0
    assert abs(rep["radius"] - 1 / 3) <= 1e-6
    assert rep["spot_check"]["failures"] == 0


def test_counterexample(capsys):
    code, rep, _ = call(["counterexample", "--l1", "0.2", "--l2", "0.1", "--l3", "0.15", "--no-timestamp"], capsys)
    assert code == 0
    assert rep["commutator_norm"] == pytest.approx(0.0046563, abs=5e-8)
    assert np.allclose(decode_matrix(rep["F1"]), [[0, 0.2022887], [0, -0.0153453]], atol=5e-8)


def test_counterexample_inadmissible_is_input_error(capsys):
    code, rep, err = call(["counterexample", "--l1", "0.1", "--l2", "0.1", "--l3", "0.15"], capsys)
    assert code == 2 and rep is None
    assert "differ" in err


def test_unknown_flag_exits_2_with_usage(capsys):
    code, rep, err = call(["member", "--x1", "0", "--x2", "0", "--x3", "0", "--bogus"], capsys)
    assert code == 2 and rep is None
    assert "usage:" in err


def test_unknown_command_exits_2(capsys):
    code, _, err = call(["frobnicate"], capsys)
    assert code == 2 and "usage:" in err


def test_bad_complex_exits_2(capsys):
    code, _, err = call(["member", "--x1", "zero", "--x2", "0", "--x3", "0"], capsys)
    assert code == 2 and "complex" in err


def test_certify_exit_codes(capsys):
    code, rep, _ = call(["certify", "--l1", "0.2", "--l2", "0.1", "--l3", "0.15", "--no-timestamp"], capsys)
    assert code == 0 and rep["verdict"] == "certified"
    code, rep, _ = call(["certify", "--l1", "0.5", "--l2", "0.1", "--l3", "0.15", "--method", "schwarz"], capsys)
    assert code == 1 and rep["schwarz"]["verdict"] == "not-certified"
    argv = ["certify", "--l1", "0.9", "--l2", "0.9", "--l3", "0.9", "--method", "sampling", "--psi-probes"]
    code, rep, _ = call(argv, capsys)
    assert code == 1 and rep["sampling"]["verdict"] == "statistical-fail"


def test_verify_dilation_exit_codes(capsys):
    code, rep, _ = call(["verify-dilation", "--l1", "0.1", "--l2", "0.1", "--l3", "0.15"], capsys)
    assert code == 0 and rep["passed"]
    code, rep, _ = call(["verify-dilation", "--l1", "0.2", "--l2", "0.1", "--l3", "0.15"], capsys)
    assert code == 1 and rep["residuals"]["commutation_interior"] >= 1e-4


def test_dilate_and_triple_file(tmp_path, capsys):
    t = {"t1": to_json(np.array([[0, 0.1], [0, 0]], dtype=complex)),
         "t2": to_json(np.array([[0, 0.1j], [0, 0]])),
         "t3": to_json(np.array([[0, 0.15], [0, 0]], dtype=complex))}
    path = tmp_path / "triple.json"
    path.write_text(json.dumps(t))
    code, rep, _ = call(["dilate", "--triple", str(path), "--depth", "4", "--no-timestamp"], capsys)
    assert code == 0
    V3 = decode_matrix(rep["V3"])
    assert V3.shape == (2 + 4 * 2, 2 + 4 * 2)
    np.testing.assert_allclose(V3[:2, :2], [[0, 0.15], [0, 0]])
    code, rep, _ = call(["fundamental", "--triple", str(tmp_path / "missing.json")], capsys)
    assert code == 2


def test_noncommuting_triple_file_is_input_error(tmp_path, capsys):
    t = {"t1": [[0, 1], [0, 0]], "t2": [[0, 0], [1, 0]], "t3": [[0, 0], [0, 0]]}
    path = tmp_path / "t.json"
    path.write_text(json.dumps(t))
    code, _, err = call(["commutator", "--triple", str(path)], capsys)
    assert code == 2 and "commute" in err


def test_commutator_and_fundamental(capsys):
    code, rep, _ = call(["commutator", "--l1", "0.2", "--l2", "0.1", "--l3", "0.15"], capsys)
    assert code == 0
    assert rep["commutator_norm"] == pytest.approx(rep["closed_form_norm"], abs=1e-12)
    code, rep, _ = call(["fundamental", "--l1", "0.2", "--l2", "0.1", "--l3", "0.15"], capsys)
    assert np.allclose(decode_matrix(rep["F2"]), [[0, 0.1011443], [0, -0.0306905]], atol=5e-8)


def test_eval_supnorm_knese_boundary(capsys):
    argv = ["eval", "--term", "1,1,0:1", "--term", "0,0,2:1", "--x1", "0.5", "--x2", "0.2", "--x3", "0.1"]
    code, rep, _ = call(argv, capsys)
    assert code == 0 and rep["value"] == pytest.approx([0.11, 0.0], abs=1e-15)
    code, rep, _ = call(["eval", "--term", "1,0,0:1", "--term", "0,0,1:2", "--l1", "0.2", "--l2", "0.1", "--l3", "0.15"], capsys)
    assert np.allclose(decode_matrix(rep["matrix"]), [[0, 0.5], [0, 0]])
    code, _, _ = call(["eval", "--term", "1,0,0:1"], capsys)
    assert code == 2
    code, rep, _ = call(["supnorm", "--term", "0,0,1:1", "--samples", "100"], capsys)
    assert code == 0 and rep["sup_estimate"] == pytest.approx(1.0, abs=1e-14)
    code, rep, _ = call(["knese", "--count", "2", "--samples", "500"], capsys)
    assert code == 0 and rep["max_violation"] <= 1e-9
    code, rep, _ = call(["boundary-sample", "--n", "20", "--seed", "3"], capsys)
    assert code == 0 and len(rep["points"]) == 20 and rep["max_abs_x3_defect"] <= 1e-10


def test_batch(capsys):
    code, rep, _ = call(["batch", "--count", "4", "--seed", "9", "--no-timestamp"], capsys)
    assert code == 0 and rep["count"] == 4 and rep["min_commutator_norm"] > 0


def test_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("TETRA_SEED", "17")
    _, rep, _ = call(["boundary-sample", "--n", "2"], capsys)
    assert rep["config"]["seed"] == 17
    _, rep2, _ = call(["boundary-sample", "--n", "2", "--seed", "17"], capsys)
    assert rep["points"] == rep2["points"]
    monkeypatch.setenv("TETRA_SEED", "-4")
    code, _, _ = call(["boundary-sample", "--n", "2"], capsys)
    assert code == 2


def test_seed_range_checked(capsys):
    code, _, _ = call(["boundary-sample", "--seed", str(2**64)], capsys)
    assert code == 2
    code, _, _ = call(["boundary-sample", "--n", "1", "--seed", str(2**64 - 1)], capsys)
    assert code == 0


def test_out_file(tmp_path, capsys):
    path = tmp_path / "r.json"
    code = run(["member", "--x1", "0.9", "--x2", "0.9", "--x3", "0", "--out", str(path)])
    assert code == 0 and capsys.readouterr().out == ""
    assert json.loads(path.read_text())["status"] == "outside"


def test_internal_inconsistency_exit_3(monkeypatch, capsys):
    import tetra.domain as domain

    monkeypatch.setattr(domain, "criterion_slack", lambda *a: -1.0)
    code, _, err = call(["member", "--x1", "0", "--x2", "0", "--x3", "0"], capsys)
    assert code == 3 and "inconsisten" in err


@given(st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False))
def test_complex_round_trip(z):
    s = f"{z.real!r}{'+' if z.imag >= 0 or np.isnan(z.imag) else '-'}{abs(z.imag)!r}i"
    assert parse_complex(s) == z


@pytest.mark.parametrize("text, value", [("0.2", 0.2), ("-0.1i", -0.1j), ("i", 1j), ("-i", -1j),
                                         ("0.3-0.4i", 0.3 - 0.4j), ("1e-3+2j", 1e-3 + 2j), (" 2 ", 2)])
def test_parse_complex(text, value):
    assert parse_complex(text) == value


def test_run_config_round_trip(capsys):
    _, rep, _ = call(["certify", "--l1", "0.2+0.1i", "--l2", "0.1", "--l3", "0.15", "--method", "schwarz",
                      "--slack", "0.01"], capsys)
    cfg = rep["config"]
    assert cfg["tolerances"] == {"membership": 1e-9, "residual": 1e-10, "slack": 0.01}
    assert cfg["params"]["l1"] == [0.2, 0.1] and cfg["params"]["npolys"] == 200
    again = RunConfig.from_dict(json.loads(json.dumps(cfg)))
    assert again.to_dict() == cfg


@pytest.mark.parametrize(
    "argv",
    [
        ["boundary-sample", "--n", "30", "--seed", "5"],
        ["certify", "--l1", "0.2", "--l2", "0.1", "--l3", "0.15", "--npolys", "40", "--samples", "800"],
        ["batch", "--count", "5", "--workers", "3", "--seed", "2"],
    ],
)
def test_byte_identical_reports(argv, capsys):
    outs = []
    for _ in range(2):
        run(argv + ["--no-timestamp"])
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]
