"""End-to-end tests of the command-line interface (in-process)."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from lapdeconv.cli import (
    _resolve_threads,
    check_schema,
    load_sidecar_schema,
    main,
    parse_kernel_spec,
)

G2 = '{"form":"builtin","name":"g2"}'
G3 = '{"form":"builtin","name":"g3"}'
G4 = '{"form":"builtin","name":"g4"}'
G4_EXP_POLY = json.dumps({
    "form": "exp-poly", "a": 1.0, "r": 3,
    "rho": [1.0, 5.5, 14.5625, 6.25, 35.265625],
})


def write_csv(path, rows, header=("t", "y")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return str(path)


def emit_cell(tmp_path, cell="g2,f1,100,0", seed=0, name="data.csv"):
    data = tmp_path / name
    rc = main([
        "simulate", "--cell", cell, "--runs", "1", "--seed", str(seed),
        "--output", str(tmp_path / "cell_report.csv"),
        "--emit-data", str(data),
    ])
    assert rc == 0
    return str(data)


class TestKernelSpecParsing:
    def test_inline_builtin(self):
        g = parse_kernel_spec(G2)
        assert g.r == 1 and g.B_r == 1.0

    def test_rational_form(self):
        g = parse_kernel_spec('{"form":"rational","num":[1],"den":[5,1]}')
        np.testing.assert_allclose(g.den.real_coeffs(), [5.0, 1.0])

    def test_file_path(self, tmp_path):
        spec = tmp_path / "kernel.json"
        spec.write_text(G3)
        g = parse_kernel_spec(str(spec))
        assert g.r == 1

    def test_exp_poly_matches_builtin(self):
        ga = parse_kernel_spec(G4_EXP_POLY)
        gb = parse_kernel_spec(G4)
        np.testing.assert_allclose(ga.num.real_coeffs(), gb.num.real_coeffs(),
                                   atol=1e-10)
        np.testing.assert_allclose(ga.den.real_coeffs(), gb.den.real_coeffs(),
                                   atol=1e-10)

    @pytest.mark.parametrize(
        "spec",
        [
            '{"form":"builtin","name":"g9"}',
            '{"form":"rational","num":[1,1],"den":[2,1]}',
            '{"form":"rational","num":[1],"den":[]}',
            '{"form":"exp-poly","a":1.0,"r":3,"rho":[2.0,1.0]}',
            '{"form":"exp-poly","a":1.0,"r":3}',
            '{"form":"mystery"}',
            '{"num":[1],"den":[5,1]}',
            '{broken json',
            "/nonexistent/kernel.json",
        ],
    )
    def test_bad_specs_exit_3(self, spec):
        assert main(["inspect-kernel", "--kernel", spec]) == 3


class TestDeconvolveCommand:
    def test_happy_path_with_sidecar(self, tmp_path):
        data = emit_cell(tmp_path)
        out = tmp_path / "f.csv"
        rc = main(["deconvolve", "--input", data, "--kernel", G2,
                   "--sigma", "0.01", "--output", str(out)])
        assert rc == 0
        rows = list(csv.reader(open(out)))
        assert rows[0] == ["t", "f_hat"]
        assert len(rows) == 1 + 1024
        side = json.loads((tmp_path / "f.csv.json").read_text())
        assert check_schema(side, load_sidecar_schema()) == []
        assert side["n"] == 100
        assert side["sigma"] == 0.01
        assert side["sigma_estimated"] is False
        assert side["kernel"]["r"] == 1
        assert sorted(side["bandwidths"]) == ["0", "1"]
        assert side["decomposition"]["b"] == [-5.0]

    def test_estimate_sigma_flag(self, tmp_path):
        data = emit_cell(tmp_path)
        out = tmp_path / "f.csv"
        rc = main(["deconvolve", "--input", data, "--kernel", G2,
                   "--estimate-sigma", "--output", str(out)])
        assert rc == 0
        side = json.loads((tmp_path / "f.csv.json").read_text())
        assert side["sigma_estimated"] is True
        assert 0.005 < side["sigma"] < 0.02

    def test_recovers_target(self, tmp_path):
        data = emit_cell(tmp_path)
        out = tmp_path / "f.csv"
        assert main(["deconvolve", "--input", data, "--kernel", G2,
                     "--sigma", "0.01", "--output", str(out)]) == 0
        rows = np.loadtxt(out, delimiter=",", skiprows=1)
        t, f_hat = rows[:, 0], rows[:, 1]
        m = (t >= 1.0) & (t <= 9.0)
        truth = t[m] ** 2 * np.exp(-t[m])
        assert np.mean((f_hat[m] - truth) ** 2) < 5e-3

    def test_custom_sidecar_path(self, tmp_path):
        data = emit_cell(tmp_path)
        side = tmp_path / "meta.json"
        rc = main(["deconvolve", "--input", data, "--kernel", G2,
                   "--sigma", "0.01", "--output", str(tmp_path / "f.csv"),
                   "--sidecar", str(side)])
        assert rc == 0
        assert side.exists()

    def test_fixed_bandwidth_allows_sigma_zero(self, tmp_path):
        data = emit_cell(tmp_path)
        rc = main(["deconvolve", "--input", data, "--kernel", G2,
                   "--sigma", "0", "--output", str(tmp_path / "f.csv"),
                   "--bandwidth", "0.5"])
        assert rc == 0

    def test_sigma_zero_adaptive_exits_4(self, tmp_path):
        data = emit_cell(tmp_path)
        rc = main(["deconvolve", "--input", data, "--kernel", G2,
                   "--sigma", "0", "--output", str(tmp_path / "f.csv")])
        assert rc == 4

    def test_unsorted_input_exits_2(self, tmp_path):
        data = write_csv(tmp_path / "bad.csv",
                         [[2.0, 0.1], [1.0, 0.2], [3.0, 0.3]])
        rc = main(["deconvolve", "--input", data, "--kernel", G2,
                   "--sigma", "0.1", "--output", str(tmp_path / "f.csv")])
        assert rc == 2

    def test_non_numeric_input_exits_2(self, tmp_path):
        data = write_csv(tmp_path / "bad.csv", [[1.0, 0.1], ["x", 0.2]])
        rc = main(["deconvolve", "--input", data, "--kernel", G2,
                   "--sigma", "0.1", "--output", str(tmp_path / "f.csv")])
        assert rc == 2

    def test_wrong_header_exits_2(self, tmp_path):
        data = write_csv(tmp_path / "bad.csv", [[1.0, 0.1], [2.0, 0.2]],
                         header=("time", "value"))
        rc = main(["deconvolve", "--input", data, "--kernel", G2,
                   "--sigma", "0.1", "--output", str(tmp_path / "f.csv")])
        assert rc == 2

    def test_single_row_exits_2(self, tmp_path):
        data = write_csv(tmp_path / "bad.csv", [[1.0, 0.1]])
        rc = main(["deconvolve", "--input", data, "--kernel", G2,
                   "--sigma", "0.1", "--output", str(tmp_path / "f.csv")])
        assert rc == 2

    def test_missing_input_exits_2(self, tmp_path):
        rc = main(["deconvolve", "--input", str(tmp_path / "nope.csv"),
                   "--kernel", G2, "--sigma", "0.1",
                   "--output", str(tmp_path / "f.csv")])
        assert rc == 2

    def test_negative_sigma_exits_2(self, tmp_path):
        data = emit_cell(tmp_path)
        rc = main(["deconvolve", "--input", data, "--kernel", G2,
                   "--sigma", "-1", "--output", str(tmp_path / "f.csv")])
        assert rc == 2

    def test_order_too_low_exits_3(self, tmp_path):
        data = emit_cell(tmp_path)
        rc = main(["deconvolve", "--input", data, "--kernel", G2,
                   "--sigma", "0.01", "--L", "1",
                   "--output", str(tmp_path / "f.csv")])
        assert rc == 3

    def test_diagnostic_on_stderr(self, tmp_path, capsys):
        rc = main(["deconvolve", "--input", str(tmp_path / "nope.csv"),
                   "--kernel", G2, "--sigma", "0.1",
                   "--output", str(tmp_path / "f.csv")])
        assert rc == 2
        err = capsys.readouterr().err
        assert err.startswith("lapdeconv: ")
        assert err.count("\n") == 1


class TestSimulateCommand:
    def test_report_csv(self, tmp_path):
        rep = tmp_path / "rep.csv"
        rc = main(["simulate", "--cell", "g2,f1,60,4", "--runs", "2",
                   "--output", str(rep)])
        assert rc == 0
        rows = list(csv.reader(open(rep)))
        assert rows[0] == ["g", "f", "n", "i", "mean", "std", "runs", "failures"]
        assert rows[1][:4] == ["g2", "f1", "60", "4"]
        assert float(rows[1][4]) > 0

    def test_stdout_default(self, capsys):
        rc = main(["simulate", "--cell", "g2,f1,60,4", "--runs", "1"])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.startswith("g,f,n,i,")

    def test_json_report(self, tmp_path):
        rep = tmp_path / "rep.csv"
        js = tmp_path / "rep.json"
        rc = main(["simulate", "--cell", "g2,f1,60,4", "--runs", "2",
                   "--seed", "7", "--output", str(rep), "--json", str(js)])
        assert rc == 0
        doc = json.loads(js.read_text())
        assert doc["runs"] == 2 and doc["seed"] == 7
        assert len(doc["rows"][0]["per_run_mse"]) == 2

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["simulate", "--cell", "g2,f1,60,3", "--runs", "2", "--seed", "5"]
        assert main(args + ["--output", str(a)]) == 0
        assert main(args + ["--output", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_threads_do_not_change_bytes(self, tmp_path, monkeypatch):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["simulate", "--cell", "g3,f2,60,0", "--runs", "2", "--seed", "1"]
        assert main(args + ["--output", str(a)]) == 0
        monkeypatch.setenv("LAPDECONV_THREADS", "8")
        assert main(args + ["--output", str(b), "--threads", "8"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_report(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        base = ["simulate", "--cell", "g2,f1,60,3", "--runs", "2"]
        assert main(base + ["--seed", "1", "--output", str(a)]) == 0
        assert main(base + ["--seed", "2", "--output", str(b)]) == 0
        assert a.read_bytes() != b.read_bytes()

    def test_emit_data_round_trip(self, tmp_path):
        data = tmp_path / "d.csv"
        rc = main(["simulate", "--cell", "g3,f1,100,0", "--runs", "1",
                   "--output", str(tmp_path / "rep.csv"),
                   "--emit-data", str(data)])
        assert rc == 0
        rows = np.loadtxt(data, delimiter=",", skiprows=1)
        assert rows.shape == (100, 2)
        np.testing.assert_allclose(rows[:, 0], np.arange(1, 101) * 0.1)
        rc = main(["deconvolve", "--input", str(data), "--kernel", G3,
                   "--sigma", "0.1", "--output", str(tmp_path / "f.csv")])
        assert rc == 0

    @pytest.mark.parametrize(
        "cell,code",
        [
            ("g2,f1,100", 2),
            ("g2,f1,5,0", 2),
            ("g2,f1,100,9", 2),
            ("g2,f1,ten,0", 2),
            ("g9,f1,100,0", 3),
            ("g2,f9,100,0", 3),
        ],
    )
    def test_bad_cells(self, tmp_path, cell, code):
        rc = main(["simulate", "--cell", cell, "--runs", "1",
                   "--output", str(tmp_path / "rep.csv")])
        assert rc == code

    def test_zero_runs_exits_2(self, tmp_path):
        rc = main(["simulate", "--cell", "g2,f1,60,0", "--runs", "0",
                   "--output", str(tmp_path / "rep.csv")])
        assert rc == 2

    def test_emit_data_requires_cell(self, tmp_path):
        rc = main(["simulate", "--full", "--runs", "1",
                   "--output", str(tmp_path / "rep.csv"),
                   "--emit-data", str(tmp_path / "d.csv")])
        assert rc == 2


class TestMakeKernel:
    def test_stdout_payload(self, capsys):
        rc = main(["make-kernel", "--L", "4", "--j", "1"])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["L"] == 4 and doc["j"] == 1 and doc["rho"] == 1.0
        assert doc["norm2"] > 0
        assert len(doc["coeffs"]) == doc["degree"] + 1
        assert doc["support"][0] < doc["support"][1]

    def test_profile_csv(self, tmp_path):
        out = tmp_path / "kern.csv"
        rc = main(["make-kernel", "--L", "4", "--j", "0", "--rho", "0.5",
                   "--output", str(out), "--json", str(tmp_path / "kern.json")])
        assert rc == 0
        rows = list(csv.reader(open(out)))
        assert rows[0] == ["t", "K"]
        assert len(rows) == 1 + 1001

    @pytest.mark.parametrize(
        "argv",
        [
            ["make-kernel", "--L", "4", "--j", "4"],
            ["make-kernel", "--L", "0", "--j", "0"],
            ["make-kernel", "--L", "4", "--j", "0", "--rho", "0"],
            ["make-kernel", "--L", "4", "--j", "0", "--rho", "1.5"],
        ],
    )
    def test_invalid_orders_exit_3(self, argv):
        assert main(argv) == 3


class TestInspectKernel:
    def test_pure_derivative_kernel(self, capsys):
        rc = main(["inspect-kernel", "--kernel", G2])
        assert rc == 0
        out = capsys.readouterr().out
        assert "r: 1" in out
        assert "B_r: 1" in out
        assert "b_0=-5" in out
        assert "poles: none" in out

    def test_kernel_with_poles(self, capsys):
        rc = main(["inspect-kernel", "--kernel", G3])
        assert rc == 0
        out = capsys.readouterr().out
        assert "b_0=1" in out
        assert "-3" in out and "mult 1" in out

    def test_exp_poly_equals_builtin(self, capsys):
        assert main(["inspect-kernel", "--kernel", G4_EXP_POLY]) == 0
        out_a = capsys.readouterr().out
        assert main(["inspect-kernel", "--kernel", G4]) == 0
        out_b = capsys.readouterr().out
        assert out_a == out_b


class TestThreadResolution:
    def test_default_is_one(self, monkeypatch):
        monkeypatch.delenv("LAPDECONV_THREADS", raising=False)
        assert _resolve_threads(None) == 1
        assert _resolve_threads(4) == 4

    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv("LAPDECONV_THREADS", "2")
        assert _resolve_threads(None) == 2
        assert _resolve_threads(8) == 2
        assert _resolve_threads(1) == 1

    def test_bad_env_value(self, monkeypatch, tmp_path):
        monkeypatch.setenv("LAPDECONV_THREADS", "many")
        rc = main(["simulate", "--cell", "g2,f1,60,0", "--runs", "1",
                   "--output", str(tmp_path / "rep.csv")])
        assert rc == 2


class TestSchemaChecker:
    def test_shipped_schema_loads(self):
        schema = load_sidecar_schema()
        assert schema["type"] == "object"
        assert "kernel" in schema["properties"]

    def test_type_mismatch(self):
        errs = check_schema({"n": "one hundred"},
                            {"type": "object",
                             "properties": {"n": {"type": "integer"}}})
        assert errs and "expected type" in errs[0]

    def test_missing_required(self):
        errs = check_schema({}, {"type": "object", "required": ["n"]})
        assert errs and "missing required" in errs[0]

    def test_unexpected_member(self):
        errs = check_schema({"x": 1}, {"type": "object", "properties": {},
                                       "additionalProperties": False})
        assert errs and "unexpected member" in errs[0]

    def test_additional_properties_schema(self):
        schema = {"type": "object", "properties": {},
                  "additionalProperties": {"type": "number"}}
        assert check_schema({"0": 1.5}, schema) == []
        assert check_schema({"0": "big"}, schema)

    def test_items(self):
        schema = {"type": "array", "items": {"type": "number"}}
        assert check_schema([1, 2.5], schema) == []
        assert check_schema([1, "x"], schema)


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "lapdeconv.cli", "make-kernel",
         "--L", "2", "--j", "0"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["L"] == 2
