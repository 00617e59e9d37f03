"""End-to-end tests for the command-line interface."""

import math

import numpy as np
import pytest

from deadtime import cli
from deadtime.core import GammaDeadTime, Spectrum, Trace, read_law_csv


def run(argv):
    return cli.main([str(a) for a in argv])


class TestStep:
    def test_analytic_trace_values(self, tmp_path):
        out = tmp_path / "step.csv"
        code = run(
            ["step", "--d", 0.05, "--nu0", 5, "--nu1", 10,
             "--t-max", 0.5, "--dt", 0.001, "--out", out]
        )
        assert code == 0
        trace = Trace.from_csv(out)
        lam0 = 1.0 / (1.0 / 5.0 - 0.05)
        lam1 = 1.0 / (1.0 / 10.0 - 0.05)
        a0 = 1.0 / (1.0 + lam0 * 0.05)
        assert abs(trace.rate[0] - lam1 * a0) < 1e-12
        assert abs(trace.active[0] - a0) < 1e-12
        # settles into the new equilibrium
        assert abs(trace.active[-1] - 1.0 / (1.0 + lam1 * 0.05)) < 1e-6

    def test_ringing_kinks_at_dead_time_multiples(self, tmp_path):
        out = tmp_path / "step.csv"
        run(["step", "--d", 0.05, "--nu0", 5, "--nu1", 10,
             "--t-max", 0.3, "--dt", 0.0005, "--out", out])
        trace = Trace.from_csv(out)
        t = trace.grid.times()
        curvature = np.abs(np.diff(trace.rate, 2))
        # derivative kinks sit at multiples of the dead time
        for target in (0.05, 0.10):
            window = (t[1:-1] > target - 0.02) & (t[1:-1] < target + 0.02)
            spike = t[1:-1][window][np.argmax(curvature[window])]
            assert abs(spike - target) < 0.0011

    def test_zero_dead_time_is_flat(self, tmp_path):
        out = tmp_path / "flat.csv"
        assert run(["step", "--d", 0, "--nu0", 5, "--nu1", 10,
                    "--t-max", 0.2, "--dt", 0.01, "--out", out]) == 0
        trace = Trace.from_csv(out)
        assert np.max(np.abs(trace.rate - 10.0)) < 1e-12
        assert np.max(np.abs(trace.active - 1.0)) < 1e-15

    def test_mc_columns_and_determinism(self, tmp_path):
        args = ["step", "--d", 0.02, "--nu0", 5, "--nu1", 10,
                "--t-max", 0.2, "--dt", 0.005, "--mc", 20000, "--seed", 42]
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(args + ["--out", out1]) == 0
        assert run(args + ["--out", out2]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        data = np.loadtxt(out1, delimiter=",", skiprows=1)
        assert data.shape[1] == 8
        with open(out1) as fh:
            assert fh.readline().strip() == cli.COMBINED_HEADER
        # MC close to analytic: pooled z within a generous band
        ref, nu_hat, nu_se = data[:, 2], data[:, 3], data[:, 4]
        z = (nu_hat - ref) / nu_se
        assert np.mean(np.abs(z) < 4.0) > 0.9

    def test_missing_targets_is_usage_error(self, tmp_path):
        assert run(["step", "--d", 0.05, "--t-max", 0.1, "--dt", 0.01,
                    "--out", tmp_path / "x.csv"]) == 2

    def test_unreachable_target_rate(self, tmp_path):
        # 30 Hz output impossible with 50 ms dead time
        assert run(["step", "--d", 0.05, "--nu0", 30, "--nu1", 10,
                    "--t-max", 0.1, "--dt", 0.01,
                    "--out", tmp_path / "x.csv"]) == 2


class TestPeriodic:
    def test_frequency_doubling_near_half_resonance(self, tmp_path):
        prefix = tmp_path / "per"
        code = run(["periodic", "--d", 0.08, "--nu0", 10, "--mod-depth", 0.9,
                    "--f", 6.25, "--harmonics", 8, "--out-prefix", prefix])
        assert code == 0
        sweep = np.loadtxt(f"{prefix}-sweep.csv", delimiter=",", skiprows=1)
        mags = {int(k): a for _, k, a, _ in sweep}
        assert mags[2] > mags[1]

    def test_resonant_frequency_transmits_undistorted(self, tmp_path):
        prefix = tmp_path / "res"
        run(["periodic", "--d", 0.08, "--nu0", 10, "--mod-depth", 0.9,
             "--f", 12.5, "--harmonics", 8, "--out-prefix", prefix])
        trace = Trace.from_csv(f"{prefix}-trace-f12.5.csv")
        assert np.max(trace.active) - np.min(trace.active) < 1e-8
        beta = Spectrum.from_csv(
            f"{prefix}-beta-f12.5.csv", omega=2 * math.pi * 12.5
        )
        lam0 = 1.0 / (1.0 / 10.0 - 0.08)
        alpha0 = 1.0 / (1.0 + lam0 * 0.08)
        assert abs(beta.coefficient(1) - 0.45 * lam0 * alpha0) < 1e-8

    def test_sweep_deterministic_across_threads(self, tmp_path):
        base = ["periodic", "--d", 0.08, "--nu0", 10, "--mod-depth", 0.9,
                "--f-sweep", "2:14:7", "--harmonics", 8]
        p1, p2 = tmp_path / "t1", tmp_path / "t4"
        assert run(base + ["--out-prefix", p1, "--threads", 1]) == 0
        assert run(base + ["--out-prefix", p2, "--threads", 4]) == 0
        left = (tmp_path / "t1-sweep.csv").read_bytes()
        right = (tmp_path / "t4-sweep.csv").read_bytes()
        assert left == right

    def test_max_rate_column(self, tmp_path):
        prefix = tmp_path / "mx"
        run(["periodic", "--d", 0.08, "--nu0", 10, "--mod-depth", 0.9,
             "--f", 4, "--harmonics", 8, "--max-rate", "--out-prefix", prefix])
        with open(f"{prefix}-sweep.csv") as fh:
            assert fh.readline().strip() == "f,k,abs,phase,max_nu"
        sweep = np.loadtxt(f"{prefix}-sweep.csv", delimiter=",", skiprows=1)
        assert sweep.shape[1] == 5
        trace = Trace.from_csv(f"{prefix}-trace-f4.csv")
        assert abs(sweep[0, 4] - np.max(trace.rate)) < 1e-12

    def test_gamma_law_accepted(self, tmp_path):
        prefix = tmp_path / "gl"
        code = run(["periodic", "--law", "gamma:10,137.5", "--nu0", 5,
                    "--mod-depth", 0.5, "--f", 3, "--harmonics", 8,
                    "--out-prefix", prefix])
        assert code == 0

    def test_requires_frequency(self, tmp_path):
        assert run(["periodic", "--d", 0.08, "--nu0", 10,
                    "--out-prefix", tmp_path / "x"]) == 2


class TestPprdStep:
    def test_analytic_equilibria(self, tmp_path):
        out = tmp_path / "pp.csv"
        code = run(["pprd-step", "--mean", 0.08, "--shape", 10, "--nu0", 5,
                    "--nu1", 10, "--t-max", 1.5, "--dt", 0.005, "--out", out])
        assert code == 0
        trace = Trace.from_csv(out)
        lam0, lam1 = 1.0 / (0.2 - 0.08), 1.0 / (0.1 - 0.08)
        assert abs(trace.rate[0] - lam1 / (1.0 + lam0 * 0.08)) < 1e-9
        assert abs(trace.rate[-1] - 10.0) < 1e-6

    def test_trials_envelope_and_schema(self, tmp_path):
        out = tmp_path / "ppmc.csv"
        code = run(["pprd-step", "--mean", 0.08, "--shape", 10, "--nu0", 5,
                    "--nu1", 10, "--t-max", 0.4, "--dt", 0.02, "--trials", 9,
                    "--mc", 3000, "--seed", 3, "--out", out])
        assert code == 0
        data = np.loadtxt(out, delimiter=",", skiprows=1)
        nu_ref, nu_hat, nu_se = data[:, 2], data[:, 3], data[:, 4]
        z = np.abs(nu_hat - nu_ref) / nu_se
        # SE from 9 trials is noisy; ask only that most bins look sane
        assert np.mean(z < 5.0) > 0.85
        assert run(["validate", out]) == 0

    def test_thread_count_does_not_change_bytes(self, tmp_path, monkeypatch):
        args = ["pprd-step", "--mean", 0.08, "--shape", 10, "--nu0", 5,
                "--nu1", 10, "--t-max", 0.2, "--dt", 0.02, "--trials", 3,
                "--mc", 2000, "--seed", 5]
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        monkeypatch.setenv("DEADTIME_THREADS", "1")
        assert run(args + ["--out", out1]) == 0
        monkeypatch.setenv("DEADTIME_THREADS", "6")
        assert run(args + ["--out", out2]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_trials_without_components_rejected(self, tmp_path):
        assert run(["pprd-step", "--mean", 0.08, "--shape", 10, "--nu0", 5,
                    "--nu1", 10, "--trials", 3, "--out", tmp_path / "x.csv"]) == 2


class TestHazardCmd:
    def test_fixed_law_threshold(self, tmp_path):
        out = tmp_path / "hz.csv"
        run(["hazard", "--law", "fixed:0.05", "--lambda0", 10,
             "--tau-max", 0.1, "--points", 101, "--out", out])
        data = np.loadtxt(out, delimiter=",", skiprows=1)
        tau, h = data[:, 0], data[:, 1]
        assert np.all(h[tau < 0.05] == 0.0)
        assert np.all(h[tau >= 0.05] == 1.0)

    def test_sharper_rise_for_narrower_law(self, tmp_path):
        readings = {}
        for n in (10, 50):
            out = tmp_path / f"hz{n}.csv"
            beta = (n + 1) / 0.08
            run(["hazard", "--law", f"gamma:{n},{beta}", "--lambda0", 8.333,
                 "--tau-max", 0.16, "--points", 161, "--out", out])
            data = np.loadtxt(out, delimiter=",", skiprows=1)
            readings[n] = data
        tau = readings[10][:, 0]
        below = np.searchsorted(tau, 0.06)
        above = np.searchsorted(tau, 0.1)
        assert readings[50][below, 1] < readings[10][below, 1]
        assert readings[50][above, 1] > readings[10][above, 1]

    def test_hazard_saturates(self, tmp_path):
        out = tmp_path / "sat.csv"
        run(["hazard", "--law", "gamma:10,137.5", "--lambda0", 8.333,
             "--tau-max", 0.4, "--points", 801, "--out", out])
        data = np.loadtxt(out, delimiter=",", skiprows=1)
        # ten standard deviations past the mean the memory is gone
        sigma = math.sqrt(11.0) / 137.5
        far = data[:, 0] > 0.08 + 10.0 * sigma
        assert np.all(np.abs(data[far, 1] - 1.0) < 1e-6)


class TestRepresentCmd:
    def test_gamma_law_csv_pointwise(self, tmp_path):
        out = tmp_path / "g3.csv"
        assert run(["represent", "--process", "gamma:3,25", "--out", out]) == 0
        law = read_law_csv(out)
        expected = GammaDeadTime(2, 25.0)
        np.testing.assert_allclose(
            law.pdf, expected.density(law.x), atol=1e-10
        )

    def test_lognormal_report(self, tmp_path, capsys):
        out = tmp_path / "ln.csv"
        assert run(["represent", "--process", "lognormal:0,0.5,0.1",
                    "--out", out]) == 0
        err = capsys.readouterr().err
        fields = dict(
            line.split(" = ") for line in err.strip().splitlines() if " = " in line
        )
        bound = math.exp(-1.0 + 0.25) / (0.1 * 0.25)
        assert abs(float(fields["minimal_rate"]) - bound) / bound < 1e-6
        assert fields["admissible"] == "True"
        assert float(fields["convolution_residual"]) < 1e-6

    def test_below_bound_exits_three(self, tmp_path, capsys):
        bound = math.exp(-1.0 + 0.25) / (0.1 * 0.25)
        code = run(["represent", "--process", "lognormal:0,0.5,0.1",
                    "--lambda", 0.9 * bound, "--out", tmp_path / "x.csv"])
        assert code == 3
        assert "x =" in capsys.readouterr().err

    def test_gamma_rate_too_small_exits_three(self, tmp_path):
        assert run(["represent", "--process", "gamma:3,25", "--lambda", 12,
                    "--out", tmp_path / "x.csv"]) == 3

    def test_unknown_process_kind(self, tmp_path):
        assert run(["represent", "--process", "weird:1,2",
                    "--out", tmp_path / "x.csv"]) == 2

    def test_table_process(self, tmp_path):
        ref = GammaDeadTime(3, 25.0)
        x = np.linspace(0.0, ref.quantile(1 - 1e-12), 20001)
        table = tmp_path / "interval.csv"
        np.savetxt(table, np.column_stack([x, ref.density(x)]), delimiter=",")
        out = tmp_path / "law.csv"
        assert run(["represent", "--process", f"table:{table}",
                    "--lambda", 25, "--out", out]) == 0
        law = read_law_csv(out)
        probe = np.linspace(0.05, 0.3, 20)
        np.testing.assert_allclose(
            law.density(probe), GammaDeadTime(2, 25.0).density(probe),
            rtol=0.02, atol=0.05,
        )


class TestInferInput:
    def test_round_trip_from_periodic(self, tmp_path):
        prefix = tmp_path / "per"
        run(["periodic", "--d", 0.08, "--nu0", 10, "--mod-depth", 0.9,
             "--f", 6.25, "--harmonics", 8, "--out-prefix", prefix])
        out = tmp_path / "lam.csv"
        code = run(["infer-input", "--beta-csv", f"{prefix}-beta-f6.25.csv",
                    "--d", 0.08, "--f", 6.25, "--out", out])
        assert code == 0
        lam = Spectrum.from_csv(out, omega=2 * math.pi * 6.25)
        lam0 = 1.0 / (1.0 / 10.0 - 0.08)
        assert abs(lam.coefficient(0) - lam0) < 1e-8
        assert abs(lam.coefficient(1) - 0.45 * lam0) < 1e-8
        for k in range(2, lam.order + 1):
            assert abs(lam.coefficient(k)) < 1e-8

    def test_constant_rate_scalar_inversion(self, tmp_path):
        beta_csv = tmp_path / "beta.csv"
        beta_csv.write_text("0,5,0\n")
        out = tmp_path / "lam.csv"
        assert run(["infer-input", "--beta-csv", beta_csv, "--d", 0.05,
                    "--f", 1, "--out", out]) == 0
        lam = Spectrum.from_csv(out, omega=2 * math.pi)
        assert abs(lam.coefficient(0) - 5.0 / (1.0 - 0.05 * 5.0)) < 1e-12

    def test_singular_system_exits_four(self, tmp_path):
        beta_csv = tmp_path / "beta.csv"
        # output rate exactly at the saturation ceiling 1/d
        beta_csv.write_text("0,12.5,0\n")
        assert run(["infer-input", "--beta-csv", beta_csv, "--d", 0.08,
                    "--f", 1, "--out", tmp_path / "x.csv"]) == 4


class TestValidateCmd:
    def test_accepts_all_produced_schemas(self, tmp_path):
        produced = []
        out = tmp_path / "tr.csv"
        run(["step", "--d", 0.05, "--nu0", 5, "--nu1", 10, "--t-max", 0.1,
             "--dt", 0.01, "--out", out])
        produced.append(out)
        out = tmp_path / "mc.csv"
        run(["step", "--d", 0.05, "--nu0", 5, "--nu1", 10, "--t-max", 0.1,
             "--dt", 0.01, "--mc", 2000, "--seed", 1, "--out", out])
        produced.append(out)
        prefix = tmp_path / "p"
        run(["periodic", "--d", 0.08, "--nu0", 10, "--mod-depth", 0.9,
             "--f", 4, "--harmonics", 8, "--out-prefix", prefix])
        produced += [f"{prefix}-trace-f4.csv", f"{prefix}-beta-f4.csv",
                     f"{prefix}-sweep.csv"]
        out = tmp_path / "hz.csv"
        run(["hazard", "--law", "fixed:0.05", "--lambda0", 10, "--tau-max",
             0.1, "--out", out])
        produced.append(out)
        out = tmp_path / "law.csv"
        run(["represent", "--process", "gamma:3,25", "--out", out])
        produced.append(out)
        assert run(["validate"] + produced) == 0

    def test_rejects_garbage(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("colour,taste\nred,sweet\n")
        assert run(["validate", bad]) == 2

    def test_rejects_broken_trace(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,A,nu\n0,0.5,10\n0.1,1.7,10\n")
        assert run(["validate", bad]) == 2


class TestScenario:
    def test_file_defaults_and_flag_override(self, tmp_path):
        scen = tmp_path / "scen.txt"
        scen.write_text(
            "d = 0.05\nnu0 = 5\nnu1 = 10\nt-max = 0.1\ndt = 0.01\n"
        )
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(["step", "--scenario", scen, "--out", out1]) == 0
        assert run(["step", "--scenario", scen, "--nu1", 8, "--out", out2]) == 0
        t1, t2 = Trace.from_csv(out1), Trace.from_csv(out2)
        lam0 = 1.0 / (1.0 / 5.0 - 0.05)
        a0 = 1.0 / (1.0 + lam0 * 0.05)
        assert abs(t1.rate[0] - 20.0 * a0) < 1e-12
        lam1b = 1.0 / (1.0 / 8.0 - 0.05)
        assert abs(t2.rate[0] - lam1b * a0) < 1e-12

    def test_missing_scenario_file(self, tmp_path):
        assert run(["step", "--scenario", tmp_path / "nope.txt"]) == 2

    def test_boolean_scenario_value(self, tmp_path):
        scen = tmp_path / "scen.txt"
        scen.write_text(
            "d = 0.08\nnu0 = 10\nmod-depth = 0.9\nf = 4\n"
            "harmonics = 8\nmax-rate = true\n"
        )
        prefix = tmp_path / "pm"
        assert run(["periodic", "--scenario", scen, "--out-prefix", prefix]) == 0
        with open(f"{prefix}-sweep.csv") as fh:
            assert fh.readline().strip().endswith(",max_nu")
