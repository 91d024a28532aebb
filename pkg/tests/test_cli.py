import os
import subprocess
import sys

import pytest

from conerisk import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _values(out):
    return dict(line.split(" = ", 1) for line in out.splitlines())


class TestStatdim:
    def test_monotone(self, capsys):
        code, out, _ = run(capsys, "statdim", "--set", "monotone:n=6",
                           "--samples", "20000", "--seed", "7")
        assert code == 0
        value, se, samples, seed = out.strip().split(",")
        assert abs(float(value) - 2.45) <= 3 * float(se)
        assert (samples, seed) == ("20000", "7")

    def test_orthant(self, capsys):
        code, out, _ = run(capsys, "statdim", "--set", "orthant:n=4", "--samples", "20000")
        value, se = map(float, out.split(",")[:2])
        assert code == 0 and abs(value - 2.0) <= 3 * se

    def test_hyperplane(self, capsys, tmp_path):
        v = tmp_path / "v.csv"
        v.write_text("0\n-1\n")
        code, out, _ = run(capsys, "statdim", "--set", "orthant:n=2", "--hyperplane", str(v),
                           "--samples", "20000")
        value, se = map(float, out.split(",")[:2])
        assert code == 0 and abs(value - 0.5) <= 3 * se

    def test_not_a_cone(self, capsys):
        code, _, err = run(capsys, "statdim", "--set", "ball:n=3")
        assert code == 1 and "not a cone" in err

    @pytest.mark.parametrize("spec", ["monotone", "monotone:n=x", "pyramid:n=3", "orthant:n=0"])
    def test_malformed_spec(self, capsys, spec):
        code, _, _ = run(capsys, "statdim", "--set", spec, "--samples", "200")
        assert code == 1

    def test_bad_flag(self, capsys):
        assert run(capsys, "statdim", "--frobnicate")[0] == 1
        assert run(capsys)[0] == 1


class TestLimits:
    def test_monotone(self, capsys):
        code, out, _ = run(capsys, "limits", "--set", "monotone:n=6",
                           "--theta", "0,-2,1,-3,2,2")
        vals = _values(out)
        assert code == 0
        assert vals["low_sigma"] == "3 (3)"
        assert vals["partition"] == "[(0,-2),(1,-3)],[(2),(2)]"
        assert vals["high_sigma_status"] == "condition unverified"

    def test_ball(self, capsys):
        code, out, _ = run(capsys, "limits", "--set", "ball:n=3", "--theta", "2,0,0")
        vals = _values(out)
        assert (vals["low_sigma"], vals["low_sigma_excess"]) == ("0.5", "1")

    def test_well_specified(self, capsys):
        code, out, _ = run(capsys, "limits", "--set", "orthant:n=3", "--theta", "1,2,3")
        vals = _values(out)
        assert code == 0 and vals["low_sigma"].split()[0] == vals["bellec_bound"].split()[0] == "3"

    def test_theta_file(self, capsys, tmp_path):
        p = tmp_path / "theta.csv"
        p.write_text("1\n-1\n1\n-1\n1\n-1\n")
        code, out, _ = run(capsys, "limits", "--set", "monotone:n=6", "--theta", str(p))
        assert code == 0 and _values(out)["low_sigma"] == "1.8333333333333333 (11/6)"

    def test_exact_decimals(self, capsys):
        code, out, _ = run(capsys, "limits", "--set", "monotone:n=4", "--exact",
                           "--theta", "0.1,-0.1,0.3,-0.3")
        assert code == 0 and _values(out)["partition"] == "[(1/10,-1/10),(3/10,-3/10)]"

    def test_dimension_mismatch(self, capsys):
        code, _, err = run(capsys, "limits", "--set", "orthant:n=3", "--theta", "1,2")
        assert code == 1 and "dimension" in err

    def test_missing_theta_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "limits", "--set", "orthant:n=2",
                         "--theta", str(tmp_path / "nope.csv"))
        assert code == 1


def _scenario(tmp_path, body):
    p = tmp_path / "scenario.txt"
    p.write_text(body)
    return p


class TestSweep:
    ORTHANT = ("# orthant figure\nset = orthant:n=3\ntheta = 1,1,-1\n"
               "sigma_min = 1e-3\nsigma_max = 1e3\nsigma_points = 3\n"
               "samples = 20000\nseed = 5\n")

    def test_orthant_endpoints(self, capsys, tmp_path):
        code, out, _ = run(capsys, "sweep", str(_scenario(tmp_path, self.ORTHANT)))
        lines = out.splitlines()
        assert code == 0
        assert lines[0] == "sigma,m_norm,m_se,e_norm,e_se,samples,seed"
        assert len(lines) == 4
        lo = [float(x) for x in lines[1].split(",")]
        hi = [float(x) for x in lines[3].split(",")]
        assert abs(lo[1] - 2.0) <= 3 * lo[2] + 0.01
        assert abs(hi[1] - 1.5) <= 3 * hi[2] + 0.01
        assert lines[1].endswith(",20000,5")

    def test_ball_endpoints(self, capsys, tmp_path):
        body = ("set = ball:n=3\ntheta = 2,0,0\nsigma_min = 1e-3\nsigma_max = 1e3\n"
                "sigma_points = 2\nsamples = 20000\nseed = 1\n")
        code, out, _ = run(capsys, "sweep", str(_scenario(tmp_path, body)))
        lo = [float(x) for x in out.splitlines()[1].split(",")]
        hi = [float(x) for x in out.splitlines()[2].split(",")]
        assert abs(lo[1] - 0.5) <= 3 * lo[2] + 0.01 and abs(lo[3] - 1.0) <= 3 * lo[4] + 0.01
        assert abs(hi[1]) <= 3 * hi[2] + 0.01 and abs(hi[3]) <= 3 * hi[4] + 0.01

    def test_output_file_and_relative_paths(self, capsys, tmp_path):
        (tmp_path / "theta.csv").write_text("1\n-1\n")
        body = "set = orthant:n=2\ntheta = theta.csv\nsigma_points = 2\nsamples = 200\n"
        out_csv = tmp_path / "curve.csv"
        code, out, _ = run(capsys, "sweep", str(_scenario(tmp_path, body)), "-o", str(out_csv))
        assert code == 0 and out == ""
        assert out_csv.read_text().count("\n") == 3

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "sweep", str(tmp_path / "absent.txt"))[0] == 1

    @pytest.mark.parametrize("body", [
        "theta = 1,2\n",                                   # no set
        "set = orthant:n=2\n",                             # no theta
        "set = orthant:n=2\ntheta = 1,2\ncolour = red\n",  # unknown key
        "set = orthant:n=2\ntheta = 1,2\nsamples = ten\n",
        "set = orthant:n=2\ntheta = 1,2\nno equals sign\n",
    ])
    def test_bad_scenario(self, capsys, tmp_path, body):
        assert run(capsys, "sweep", str(_scenario(tmp_path, body)))[0] == 1

    def test_byte_identical(self, capsys, tmp_path):
        path = str(_scenario(tmp_path, self.ORTHANT.replace("20000", "3000")))
        first = run(capsys, "sweep", path)[1]
        second = run(capsys, "sweep", path)[1]
        assert first == second


class TestTable1:
    def test_analytic(self, capsys):
        code, out, _ = run(capsys, "table1", "--analytic")
        lines = out.splitlines()
        assert code == 0 and len(lines) == 7
        limits = [line.split(" | ")[3] for line in lines[1:]]
        assert limits == ["H6 = 49/20", "H3 = 11/6", "H1 = 1", "H4+H2 = 43/12",
                          "H2+H2 = 3", "H1+H1 = 2"]

    def test_simulated_column(self, capsys):
        code, out, _ = run(capsys, "table1", "--samples", "1000", "--seed", "2")
        row = out.splitlines()[1].split(" | ")
        assert code == 0 and row[5] != "-"


def _only(monkeypatch, criteria):
    from conerisk import verify as V
    full = V.run_verify
    monkeypatch.setattr(V, "run_verify", lambda cfg: full(cfg, criteria(V.CRITERIA)))


class TestVerifyExitCodes:
    def test_negative_control(self, capsys, monkeypatch):
        # zero margins make the Monte Carlo comparisons fail
        _only(monkeypatch, lambda c: c[2:3])
        code, out, _ = run(capsys, "verify", "--quick", "--margin-scale", "0")
        assert code == 3
        assert "FAIL" in out

    def test_subset_passes(self, capsys, monkeypatch):
        _only(monkeypatch, lambda c: c[:1])
        code, out, _ = run(capsys, "verify", "--quick")
        assert code == 0 and out.rstrip().splitlines()[-1].startswith("SUMMARY")


def _module_run(args, env_extra=None):
    env = dict(os.environ)
    env.pop("CONERISK_WORKERS", None)
    env.update(env_extra or {})
    return subprocess.run([sys.executable, "-m", "conerisk", *args], capture_output=True,
                          env=env, check=False)


class TestProcess:
    ARGS = ["statdim", "--set", "monotone:n=5", "--samples", "9000", "--seed", "3"]

    def test_module_entry_and_workers(self):
        one = _module_run(self.ARGS)
        many = _module_run(self.ARGS, {"CONERISK_WORKERS": "8"})
        assert one.returncode == 0
        assert one.stdout == many.stdout

    def test_bad_worker_env(self):
        res = _module_run(self.ARGS, {"CONERISK_WORKERS": "lots"})
        assert res.returncode == 1
