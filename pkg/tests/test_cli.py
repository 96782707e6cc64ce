import json
import subprocess
import sys

import pytest

from qsum.cli import (
    PipelineParams,
    bundled_spec_path,
    equations_equal,
    identity_suite,
    load_spec,
    main,
    parse_spec,
    run_pipeline,
    spec_to_json,
)
from qsum.equation import slope_one_equation
from qsum.errors import ParseError, ValidationError


def write_spec(tmp_path, obj, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


@pytest.fixture
def spec_obj():
    return spec_to_json(slope_one_equation(Mt=16, Mz=6), PipelineParams())


@pytest.fixture(scope="module")
def verify_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify")
    code = main(["verify", "--out", str(out), "--emit-plot-data"])
    return code, out


class TestSpecParsing:
    def test_bundled_spec_is_slope_one(self):
        eq, params = load_spec(bundled_spec_path())
        assert equations_equal(eq, slope_one_equation())
        assert params == PipelineParams()

    def test_round_trip(self, spec_obj):
        eq, params = parse_spec(spec_obj)
        again = spec_to_json(eq, params)
        assert again == spec_obj
        assert equations_equal(parse_spec(again)[0], eq)

    def test_fraction_sigma(self, spec_obj):
        spec_obj["sigma"] = "1/2"
        assert str(parse_spec(spec_obj)[0].sigma) == "1/2"
        spec_obj["sigma"] = "3"
        with pytest.raises(ValidationError):
            # the (1, 1) term now violates j + sigma*alpha <= m
            parse_spec(spec_obj)
        spec_obj["sigma"] = "one"
        with pytest.raises(ParseError):
            parse_spec(spec_obj)

    @pytest.mark.parametrize(
        "mutate,err",
        [
            (lambda d: d.pop("q"), ValidationError),
            (lambda d: d.update(q=0.5), ValidationError),
            (lambda d: d.update(extra=1), ParseError),
            (lambda d: d["terms"][0].update(beta=1), ParseError),
            (lambda d: d.update(rhs=[[99, 0, 1.0, 0.0]]), ValidationError),
            (lambda d: d.update(rhs=[[-1, 0, 1.0]]), ParseError),
            (lambda d: d["terms"].append(dict(d["terms"][0])), ValidationError),
            (lambda d: d["pipeline"].update(colour="red"), ParseError),
            (lambda d: d["pipeline"].update(mu=0), ValidationError),
            (lambda d: d["pipeline"].update(eps_list=[0.1, 1.5]), ValidationError),
        ],
    )
    def test_rejects_malformed(self, spec_obj, mutate, err):
        mutate(spec_obj)
        with pytest.raises(err):
            parse_spec(spec_obj)

    def test_json_syntax_error_has_position(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"q": 2.0,\n  "m": }')
        with pytest.raises(ParseError, match=r"bad.json:2:"):
            load_spec(p)


class TestExitCodes:
    def test_validation_error(self, tmp_path, spec_obj, capsys):
        spec_obj.pop("terms")
        p = write_spec(tmp_path, spec_obj)
        assert main(["check", "--spec", str(p), "--out", str(tmp_path / "o")]) == 2
        assert "terms" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["check", "--spec", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2

    def test_slope_condition_failure_suggests_halving(self, tmp_path, capsys):
        p = write_spec(tmp_path, spec_to_json(slope_one_equation(n1=1), PipelineParams()))
        out = tmp_path / "o"
        assert main(["check", "--spec", str(p), "--out", str(out)]) == 4
        assert "qsum halve" in capsys.readouterr().err
        rep = json.loads((out / "check.json").read_text())
        assert rep["A1"] and not rep["order_condition"] and not rep["summable"]

    def test_halve_then_verify(self, tmp_path):
        p = write_spec(tmp_path, spec_to_json(slope_one_equation(n1=1, Mt=12, Mz=6), PipelineParams()))
        out = tmp_path / "h"
        assert main(["halve", "--spec", str(p), "--out", str(out)]) == 0
        tau = out / "tau_spec.json"
        assert main(["check", "--spec", str(tau), "--out", str(out / "c")]) == 0

    def test_singular_direction_is_numeric_failure(self, tmp_path):
        res = run_pipeline(slope_one_equation(), PipelineParams(lam=-1.0), ("continue",))
        assert res.status in (3, 4) and res.error.startswith("[continue]")

    def test_formal_stage_only(self, tmp_path):
        out = tmp_path / "f"
        assert main(["formal", "--out", str(out)]) == 0
        assert sorted(p.name for p in out.iterdir()) == [
            "check.json",
            "formal.json",
            "formal_coefficients.csv",
            "spec.normalized.json",
        ]
        rep = json.loads((out / "formal.json").read_text())
        assert rep["recursion_residual"] < 1e-12 and rep["free_indices"] == [0]

    def test_lambda_flag(self, tmp_path):
        out = tmp_path / "l"
        assert main(["check", "--out", str(out), "--lambda", "0,1"]) == 0
        assert json.loads((out / "check.json").read_text())["lambda"] == [0.0, 1.0]
        with pytest.raises(SystemExit):
            main(["check", "--lambda", "oops"])


class TestVerify:
    def test_passes(self, verify_run):
        code, out = verify_run
        assert code == 0
        rep = json.loads((out / "verify.json").read_text())
        assert rep["passed"] and rep["residual"] < 1e-10
        assert (out / "plot_data.csv").exists() and (out / "grid.csv").exists()

    def test_deterministic(self, verify_run, tmp_path):
        _, first = verify_run
        second = tmp_path / "again"
        assert main(["verify", "--out", str(second), "--emit-plot-data"]) == 0
        for f in sorted(first.iterdir()):
            assert (second / f.name).read_bytes() == f.read_bytes(), f.name

    def test_normalized_spec_reloads(self, verify_run):
        _, out = verify_run
        eq, _ = load_spec(out / "spec.normalized.json")
        assert equations_equal(eq, slope_one_equation())


class TestIdentities:
    def test_suite_is_exact(self):
        rep = identity_suite()
        assert rep["failures"] == {}
        assert sum(rep["counts"].values()) == 896

    def test_module_entry_point(self, tmp_path):
        r = subprocess.run(
            [sys.executable, "-m", "qsum", "identities", "--out", str(tmp_path)], capture_output=True, text=True
        )
        assert r.returncode == 0 and "896/896" in r.stdout
        assert (tmp_path / "identities.json").exists()
