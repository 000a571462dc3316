import json
import subprocess
import sys

import numpy as np
import pytest

from pptedge import cli
from pptedge.certifier import default_params, find_r_hat
from pptedge.construction import extract_D, save_params

import displays
from conftest import quartic_example_params


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_matrix(lines):
    return np.array([[complex(c) for c in line.split()] for line in lines])


class TestParamsMode:
    def test_forms(self, tmp_path):
        assert cli.parse_params_mode("default") == ("default", None)
        assert cli.parse_params_mode("perturbed:1e-4") == ("perturbed", 1e-4)
        assert cli.parse_params_mode(f"file:{tmp_path}/p.json")[0] == "file"
        assert cli.parse_params_mode(f"{tmp_path}/p.json")[0] == "file"

    @pytest.mark.parametrize("bad", ["", "perturbed:", "perturbed:x", "perturbed:-1", "weird"])
    def test_rejects(self, bad):
        with pytest.raises(cli.UsageError):
            cli.parse_params_mode(bad)


class TestCertify:
    def test_default(self, capsys):
        code, out, err = run(capsys, "certify", "--n", "4")
        doc = json.loads(out)
        assert code == cli.EXIT_OK and doc["verdict"] == "CERTIFIED"
        assert "verdict=CERTIFIED" in err

    def test_params_file(self, capsys, tmp_path):
        f = tmp_path / "p.json"
        save_params(quartic_example_params(), f)
        code, out, _ = run(capsys, "certify", "--n", "4", "--params", str(f), "--no-timings")
        doc = json.loads(out)
        assert code == 0 and abs(doc["r_hat"] - 2.7525178219) < 1e-9
        assert "timings" not in doc

    def test_alpha_equals_beta(self, capsys, tmp_path):
        f = tmp_path / "p.json"
        f.write_text(json.dumps({"n": 4, "alpha_angles": [0, 0.4, -1, 2],
                                 "beta_angles": [-2, -1.6, -3, 0]}))
        code, _, err = run(capsys, "certify", "--n", "4", "--params", f"file:{f}")
        assert code == cli.EXIT_ERROR and "generic" in err.lower()

    def test_malformed_file_names_field(self, capsys, tmp_path):
        f = tmp_path / "p.json"
        f.write_text(json.dumps({"n": 4, "alpha_angles": [0, 1], "beta_angles": [0, 0, 0, 0]}))
        code, _, err = run(capsys, "certify", "--n", "4", "--params", str(f))
        assert code == cli.EXIT_ERROR and "alpha_angles" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "certify", "--n", "4", "--params", f"file:{tmp_path}/none.json")
        assert code == cli.EXIT_ERROR

    def test_n_mismatch_with_file(self, capsys, tmp_path):
        f = tmp_path / "p.json"
        save_params(quartic_example_params(), f)
        assert run(capsys, "certify", "--n", "5", "--params", str(f))[0] == cli.EXIT_ERROR

    def test_not_certified_exit(self, capsys):
        code, out, _ = run(capsys, "certify", "--n", "380", "--params", "perturbed:1e-4")
        assert code == cli.EXIT_NOT_CERTIFIED and json.loads(out)["verdict"] == "NOT_CERTIFIED"

    def test_ambiguous_exit(self, capsys):
        # a margin wider than every gap excess leaves star sets in the band
        code, out, _ = run(capsys, "certify", "--n", "4", "--half-plane-margin", "1.0")
        assert code == cli.EXIT_AMBIGUOUS and json.loads(out)["verdict"] == "AMBIGUOUS"

    def test_out_file_and_determinism(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run(capsys, "certify", "--n", "7", "--out", str(a), "--no-timings")
        run(capsys, "certify", "--n", "7", "--out", str(b), "--no-timings")
        assert a.read_bytes() == b.read_bytes()
        assert not list(tmp_path.glob("*.tmp"))

    def test_tolerance_override_recorded(self, capsys):
        _, out, _ = run(capsys, "certify", "--n", "3", "--kernel-threshold", "1e-11")
        assert json.loads(out)["tolerances"]["kernel_threshold"] == 1e-11

    @pytest.mark.parametrize("argv", [["certify"], ["certify", "--n", "2"], ["certify", "--n", "x"],
                                      ["bogus"], [], ["certify", "--n", "4", "--kernel-threshold", "0"]])
    def test_usage_errors(self, capsys, argv):
        assert cli.main(argv) == cli.EXIT_ERROR

    def test_large_n(self, capsys):
        code, out, _ = run(capsys, "certify", "--n", "1000", "--no-timings")
        assert code == 0 and json.loads(out)["verdict"] == "CERTIFIED"


class TestSweep:
    def test_table_and_files(self, capsys, tmp_path):
        code, out, _ = run(capsys, "sweep", "--from", "3", "--to", "12", "--out-dir", str(tmp_path),
                           "--jobs", "1")
        assert code == 0 and "certified 10/10" in out
        assert sorted(p.name for p in tmp_path.iterdir()) == [f"cert_n{n:04d}.json" for n in range(3, 13)]
        for p in tmp_path.iterdir():
            assert json.loads(p.read_text())["verdict"] == "CERTIFIED"

    def test_jobs_do_not_change_results(self, tmp_path):
        tol = cli.Tolerances()
        one = cli.run_sweep(3, 40, ("default", None), tol, 1, tmp_path / "one", timings=False)
        two = cli.run_sweep(3, 40, ("default", None), tol, 2, tmp_path / "two", timings=False)
        assert [r[:4] for r in one] == [r[:4] for r in two]
        for n in range(3, 41):
            name = f"cert_n{n:04d}.json"
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()

    def test_failures_listed(self, capsys):
        code, out, _ = run(capsys, "sweep", "--from", "378", "--to", "381", "--params", "perturbed:1e-4")
        assert code == cli.EXIT_NOT_CERTIFIED
        assert "n=380: NOT_CERTIFIED" in out

    def test_env_jobs(self, monkeypatch):
        monkeypatch.setenv(cli.JOBS_ENV, "3")
        assert cli.default_jobs() == 3
        monkeypatch.setenv(cli.JOBS_ENV, "zero")
        with pytest.raises(cli.UsageError):
            cli.default_jobs()
        monkeypatch.delenv(cli.JOBS_ENV)
        assert cli.default_jobs() == 1

    def test_env_overridden_by_flag(self, capsys, monkeypatch):
        monkeypatch.setenv(cli.JOBS_ENV, "bad")
        code, out, _ = run(capsys, "sweep", "--from", "3", "--to", "4", "--jobs", "1")
        assert code == 0 and "with 1 job(s)" in out

    @pytest.mark.parametrize("argv", [["--from", "5", "--to", "4"], ["--from", "2", "--to", "4"],
                                      ["--from", "3", "--to", "4", "--jobs", "0"],
                                      ["--from", "3", "--to", "4", "--params", "file:x.json"]])
    def test_bad_ranges(self, capsys, argv):
        assert cli.main(["sweep", *argv]) == cli.EXIT_ERROR


class TestOracle:
    def test_floor(self, capsys):
        code, out, _ = run(capsys, "oracle", "--n", "3", "--starts", "200", "--seed", "7")
        assert code == 0

    def test_gate(self, capsys):
        code, _, err = run(capsys, "oracle", "--n", "13")
        assert code == cli.EXIT_ERROR and "12" in err

    def test_broken(self, capsys):
        code, out, _ = run(capsys, "oracle", "--n", "4", "--broken-genericity", "--starts", "50")
        assert code == cli.EXIT_NOT_CERTIFIED


class TestInspect:
    def test_D(self, capsys):
        code, out, _ = run(capsys, "inspect", "--n", "3", "--what", "D")
        lines = out.strip().splitlines()
        p = default_params(3)
        r = find_r_hat(extract_D(p, 0.0))[0]
        want = displays.evaluate(displays.D_3, displays.ratio_symbols(p.alpha, p.beta, r))
        assert code == 0 and np.allclose(parse_matrix(lines[1:]), want, atol=1e-6)

    def test_rho_dense(self, capsys):
        code, out, _ = run(capsys, "inspect", "--n", "3", "--what", "rho", "--dense")
        lines = out.strip().splitlines()
        p = default_params(3)
        r = find_r_hat(extract_D(p, 0.0))[0]
        want = displays.evaluate(displays.RHO_3, displays.ratio_symbols(p.alpha, p.beta, r))
        assert code == 0 and np.allclose(parse_matrix(lines[1:]), want, atol=1e-6)

    def test_blocks(self, capsys):
        code, out, _ = run(capsys, "inspect", "--n", "4", "--what", "blocks")
        tags = [l.split("]")[0].strip(" [") for l in out.splitlines() if l.startswith("  [")]
        assert code == 0 and tags == ["alpha:2", "alpha:3", "alpha:4", "beta:2", "beta:1"]
        assert "labels=(14 23 32 41)" in out

    def test_rho_blocks(self, capsys):
        code, out, _ = run(capsys, "inspect", "--n", "5", "--what", "rho")
        assert code == 0 and "kind=path" in out

    def test_dense_gate(self, capsys):
        assert run(capsys, "inspect", "--n", "13", "--what", "rho", "--dense")[0] == cli.EXIT_ERROR


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "pptedge", "certify", "--n", "3", "--no-timings"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["n"] == 3
