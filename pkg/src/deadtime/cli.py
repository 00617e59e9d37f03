"""Command-line front end: every solver and sampler as a CSV-emitting command.

Commands mirror the library surface: ``step`` for transients after a rate
switch, ``periodic`` for harmonic transmission, ``pprd-step`` for random
dead-time transients, ``hazard`` for the conditional intensity of a law,
``represent`` for the renewal mapping, ``infer-input`` for the inverse
spectral problem, and ``validate`` for schema checks on produced files.

Exit codes: 0 success, 2 usage or malformed input, 3 not representable,
4 numerical failure.  Every command is deterministic given its flags; MC
commands additionally take ``--seed``.  A ``--scenario FILE`` option reads
``key = value`` defaults that explicit flags override.  Worker threads for
sweeps and trial fan-out come from ``--threads`` or the DEADTIME_THREADS
environment variable.
"""

from __future__ import annotations

import argparse
import cmath
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import analytic_ppd, gamma_chain
from .core import (
    Constant,
    Cosine,
    FixedDeadTime,
    GammaDeadTime,
    NotRepresentableError,
    NumericalError,
    Spectrum,
    Step,
    TimeGrid,
    _fmt,
    read_law_csv,
    signal_spectrum,
    write_law_csv,
)
from .mc_sim import SimConfig, hazard_pprd, simulate_generative, simulate_rejection
from .renewal_map import (
    RenewalSpec,
    check_hazard_condition,
    construct_gamma,
    construct_lognormal,
    convolution_residual,
    dead_time_from_interval,
    minimal_lambda,
)
from .spectral import (
    HarmonicSystem,
    output_spectrum,
    periodic_rate,
    solve_active_spectrum,
)

__all__ = ["main"]

TRACE_HEADER = "t,A,nu"
COMBINED_HEADER = "t,A,nu,nu_hat,nu_se,A_hat,A_se,count"
ESTIMATE_HEADER = "t,nu_hat,nu_se,A_hat,A_se,count"
HAZARD_HEADER = "tau,h,rho"
SWEEP_HEADER = "f,k,abs,phase"


# ---------------------------------------------------------------------------
# small plumbing
# ---------------------------------------------------------------------------


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text)


def _report(msg: str) -> None:
    print(msg, file=sys.stderr)


def _thread_count(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("DEADTIME_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _parse_law(text: str):
    """Dead-time law from ``fixed:D``, ``gamma:n,beta``, or ``table:FILE``."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "fixed":
            return FixedDeadTime(float(rest))
        if kind == "gamma":
            n_str, beta_str = rest.split(",")
            return GammaDeadTime(int(n_str), float(beta_str))
        if kind == "table":
            return read_law_csv(rest)
    except (ValueError, OSError) as err:
        raise ValueError(f"bad law spec {text!r}: {err}") from err
    raise ValueError(f"unknown law kind {kind!r} (use fixed:, gamma:, table:)")


def _rate_from_target(nu: float, mean_dead: float, label: str) -> float:
    """Input rate hitting the target equilibrium output rate."""
    if nu <= 0.0:
        raise ValueError(f"{label} must be positive, got {nu}")
    slack = 1.0 / nu - mean_dead
    if slack <= 0.0:
        raise ValueError(
            f"{label} = {nu} Hz is unreachable with mean dead time {mean_dead}"
        )
    return 1.0 / slack


def _load_scenario(path: str) -> list[str]:
    tokens: list[str] = []
    with open(path, "r", encoding="ascii") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"scenario line without '=': {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            flag = "--" + key.replace("_", "-")
            if value.lower() in ("true", "yes", "on"):
                tokens.append(flag)
            elif value.lower() in ("false", "no", "off"):
                pass
            else:
                tokens.extend([flag, value])
    return tokens


def _expand_scenario(argv: list[str]) -> list[str]:
    """Splice scenario-file tokens in front of explicit flags (which win)."""
    if "--scenario" not in argv:
        return argv
    idx = argv.index("--scenario")
    if idx + 1 >= len(argv):
        raise ValueError("--scenario needs a file path")
    path = argv[idx + 1]
    rest = argv[:idx] + argv[idx + 2 :]
    if not rest:
        raise ValueError("--scenario requires a command")
    return [rest[0]] + _load_scenario(path) + rest[1:]


def _combined_rows(centers, ref_active, ref_rate, est_slices) -> str:
    nu_hat, nu_se, a_hat, a_se, count = est_slices
    lines = [COMBINED_HEADER]
    for i, t in enumerate(centers):
        lines.append(
            ",".join(
                [
                    _fmt(t),
                    _fmt(ref_active[i]),
                    _fmt(ref_rate[i]),
                    _fmt(nu_hat[i]),
                    _fmt(nu_se[i]),
                    _fmt(a_hat[i]),
                    _fmt(a_se[i]),
                    str(int(count[i])),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _trace_text(trace) -> str:
    lines = [TRACE_HEADER]
    for t, a, r in zip(trace.grid.times(), trace.active, trace.rate):
        lines.append(f"{_fmt(t)},{_fmt(a)},{_fmt(r)}")
    return "\n".join(lines) + "\n"


def _spectrum_text(spectrum: Spectrum) -> str:
    lines = []
    for k, c in enumerate(spectrum.coeffs):
        lines.append(f"{k - spectrum.order},{_fmt(c.real)},{_fmt(c.imag)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# step
# ---------------------------------------------------------------------------


def _target_or_override(override, nu, mean_dead, label):
    if override is not None:
        if override <= 0.0:
            raise ValueError(f"input rate override must be positive, got {override}")
        return override
    if nu is None:
        raise ValueError(f"{label} (or an input rate override) is required")
    return _rate_from_target(nu, mean_dead, label)


def cmd_step(args) -> int:
    d = args.d
    if d is None:
        raise ValueError("--d is required")
    lam0 = _target_or_override(args.lambda0, args.nu0, d, "--nu0")
    lam1 = _target_or_override(args.lambda1, args.nu1, d, "--nu1")
    if args.t_max <= 0.0 or args.dt <= 0.0:
        raise ValueError("--t-max and --dt must be positive")

    if not args.mc:
        n = int(math.floor(args.t_max / args.dt + 1e-9)) + 1
        trace = analytic_ppd.step_response(lam0, lam1, d, TimeGrid(0.0, args.dt, n))
        _write_text(args.out, _trace_text(trace))
        return 0

    bw = args.bin_width if args.bin_width is not None else args.dt
    n = int(math.floor(args.t_max / bw + 1e-9))
    if n < 1:
        raise ValueError("--t-max shorter than one bin")
    sig = Step(lam0, lam1, 0.0)
    cfg = SimConfig(
        components=args.mc,
        seed=args.seed,
        t_span=(-bw, n * bw),
        bin_width=bw,
        lambda_max=max(lam0, lam1),
    )
    est = simulate_generative(sig, FixedDeadTime(d), cfg)
    centers = TimeGrid(bw / 2.0, bw, n)
    ref = analytic_ppd.step_response(lam0, lam1, d, centers)
    text = _combined_rows(
        centers.times(),
        ref.active,
        ref.rate,
        (
            est.rate_hat[1:],
            est.rate_se[1:],
            est.active_hat[1:],
            est.active_se[1:],
            est.event_count[1:],
        ),
    )
    _write_text(args.out, text)
    return 0


# ---------------------------------------------------------------------------
# periodic
# ---------------------------------------------------------------------------


def _solve_one_frequency(law, lam0, eps, f, harmonics, samples):
    omega = 2.0 * math.pi * f
    drive = signal_spectrum(Cosine(lam0, eps, f), omega, harmonics)
    system = HarmonicSystem(omega, max(harmonics, 4), law, drive)
    alpha = solve_active_spectrum(system)
    beta = output_spectrum(system, alpha)
    grid = TimeGrid(0.0, (1.0 / f) / samples, samples + 1)
    trace = periodic_rate(system, beta, grid)
    return beta, trace


def cmd_periodic(args) -> int:
    if args.law is None and args.d is None:
        raise ValueError("need --d or --law")
    law = _parse_law(args.law) if args.law else FixedDeadTime(args.d)
    if not (0.0 <= args.mod_depth <= 1.0):
        raise ValueError("--mod-depth must lie in [0, 1]")
    lam0 = _target_or_override(args.lambda0, args.nu0, law.mean(), "--nu0")
    eps = args.mod_depth * lam0
    if args.f is not None:
        freqs = [args.f]
    elif args.f_sweep:
        lo_s, hi_s, n_s = args.f_sweep.split(":")
        lo, hi, steps = float(lo_s), float(hi_s), int(n_s)
        if not (0.0 < lo < hi) or steps < 2:
            raise ValueError("--f-sweep must be lo:hi:steps with lo < hi, steps >= 2")
        freqs = list(np.linspace(lo, hi, steps))
    else:
        raise ValueError("need --f or --f-sweep")
    if args.harmonics < 4:
        raise ValueError("--harmonics must be at least 4")

    def work(f):
        return _solve_one_frequency(law, lam0, eps, f, args.harmonics, args.samples)

    with ThreadPoolExecutor(max_workers=_thread_count(args)) as pool:
        results = list(pool.map(work, freqs))

    sweep_lines = [SWEEP_HEADER + (",max_nu" if args.max_rate else "")]
    for f, (beta, trace) in zip(freqs, results):
        tag = f"{f:g}"
        _write_text(f"{args.out_prefix}-trace-f{tag}.csv", _trace_text(trace))
        _write_text(f"{args.out_prefix}-beta-f{tag}.csv", _spectrum_text(beta))
        peak = float(np.max(trace.rate))
        for k in range(-args.harmonics, args.harmonics + 1):
            c = beta.coefficient(k)
            row = f"{_fmt(f)},{k},{_fmt(abs(c))},{_fmt(cmath.phase(c))}"
            if args.max_rate:
                row += f",{_fmt(peak)}"
            sweep_lines.append(row)
    _write_text(f"{args.out_prefix}-sweep.csv", "\n".join(sweep_lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# pprd-step
# ---------------------------------------------------------------------------


def cmd_pprd_step(args) -> int:
    if args.mean is None or args.shape is None:
        raise ValueError("--mean and --shape are required")
    if args.mean <= 0.0 or args.shape < 1:
        raise ValueError("--mean must be positive and --shape at least 1")
    law = GammaDeadTime(args.shape, (args.shape + 1) / args.mean)
    lam0 = _target_or_override(args.lambda0, args.nu0, args.mean, "--nu0")
    lam1 = _target_or_override(args.lambda1, args.nu1, args.mean, "--nu1")
    if args.t_max <= 0.0 or args.dt <= 0.0:
        raise ValueError("--t-max and --dt must be positive")

    if not args.trials:
        n = int(math.floor(args.t_max / args.dt + 1e-9)) + 1
        grid = TimeGrid(0.0, args.dt, n)
        trace = gamma_chain.step_response(args.shape, law.rate, lam0, lam1, grid)
        _write_text(args.out, _trace_text(trace))
        return 0

    if not args.mc:
        raise ValueError("--trials needs --mc for the per-trial component count")
    bw = args.bin_width if args.bin_width is not None else args.dt
    n = int(math.floor(args.t_max / bw + 1e-9))
    if n < 1:
        raise ValueError("--t-max shorter than one bin")
    sig = Step(lam0, lam1, 0.0)

    def one_trial(t):
        cfg = SimConfig(
            components=args.mc,
            seed=args.seed + t,
            t_span=(-bw, n * bw),
            bin_width=bw,
            lambda_max=max(lam0, lam1),
            method="rejection",
        )
        return simulate_rejection(sig, law, cfg)

    with ThreadPoolExecutor(max_workers=_thread_count(args)) as pool:
        trials = list(pool.map(one_trial, range(args.trials)))

    nu = np.stack([tr.rate_hat[1:] for tr in trials])
    act = np.stack([tr.active_hat[1:] for tr in trials])
    count = np.stack([tr.event_count[1:] for tr in trials]).sum(axis=0)
    root_t = math.sqrt(args.trials)
    nu_se = (
        np.std(nu, axis=0, ddof=1) / root_t
        if args.trials > 1
        else np.full(n, math.nan)
    )
    a_se = (
        np.std(act, axis=0, ddof=1) / root_t
        if args.trials > 1
        else np.full(n, math.nan)
    )
    centers = TimeGrid(bw / 2.0, bw, n)
    ref = gamma_chain.step_response(args.shape, law.rate, lam0, lam1, centers)
    text = _combined_rows(
        centers.times(),
        ref.active,
        ref.rate,
        (nu.mean(axis=0), nu_se, act.mean(axis=0), a_se, count),
    )
    _write_text(args.out, text)
    return 0


# ---------------------------------------------------------------------------
# hazard
# ---------------------------------------------------------------------------


def cmd_hazard(args) -> int:
    law = _parse_law(args.law)
    if args.lambda0 <= 0.0 or args.tau_max <= 0.0 or args.points < 2:
        raise ValueError("--lambda0, --tau-max must be positive; --points >= 2")
    tau = np.linspace(0.0, args.tau_max, args.points)
    h = hazard_pprd(Constant(args.lambda0), law, np.zeros_like(tau), tau)
    rho = np.asarray(law.density(tau), dtype=float)
    peak = float(np.max(rho))
    rho_norm = rho / peak if peak > 0.0 else rho
    lines = [HAZARD_HEADER]
    for i in range(tau.size):
        lines.append(
            f"{_fmt(tau[i])},{_fmt(h[i] / args.lambda0)},{_fmt(rho_norm[i])}"
        )
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# represent
# ---------------------------------------------------------------------------


def _read_interval_table(path: str):
    data = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=0, comments="#")
    if data.shape[1] != 2:
        raise ValueError("interval table must have two columns: x, density")
    return data[:, 0], data[:, 1]


def cmd_represent(args) -> int:
    kind, _, rest = args.process.partition(":")
    if kind == "gamma":
        r_str, beta_str = rest.split(",")
        r, beta = int(r_str), float(beta_str)
        if r < 1:
            raise ValueError("gamma interval index must be at least 1")
        spec = RenewalSpec.from_gamma(r, beta)
        rep = (
            construct_gamma(r, beta)
            if args.lam is None
            else dead_time_from_interval(spec, args.lam)
        )
    elif kind == "lognormal":
        mu_str, sigma_str, delta_str = rest.split(",")
        mu, sigma, delta = float(mu_str), float(sigma_str), float(delta_str)
        spec = RenewalSpec.from_lognormal(mu, sigma, delta)
        # the generic route reports the violation location when the rate
        # is too small, instead of rejecting the argument up front
        rep = (
            construct_lognormal(mu, sigma, delta)
            if args.lam is None
            else dead_time_from_interval(spec, args.lam)
        )
    elif kind == "table":
        x, pdf = _read_interval_table(rest)
        spec = RenewalSpec.from_sampled(x, pdf)
        rate = args.lam if args.lam is not None else minimal_lambda(spec)
        rep = dead_time_from_interval(spec, rate)
    else:
        raise ValueError(
            f"unknown process kind {kind!r} (use gamma:, lognormal:, table:)"
        )

    lam_min = minimal_lambda(spec)
    verdict = check_hazard_condition(spec, rep.input_rate)
    residual = convolution_residual(rep, spec)
    if args.out == "-":
        import tempfile

        with tempfile.TemporaryDirectory() as tmpdir:
            scratch = os.path.join(tmpdir, "law.csv")
            write_law_csv(rep.law, scratch)
            with open(scratch, "r", encoding="ascii") as fh:
                sys.stdout.write(fh.read())
    else:
        write_law_csv(rep.law, args.out)
    _report(f"input_rate = {_fmt(rep.input_rate)}")
    _report(f"minimal_rate = {_fmt(lam_min)}")
    _report(f"admissible = {verdict.admissible}")
    _report(f"convolution_residual = {_fmt(residual)}")
    return 0


# ---------------------------------------------------------------------------
# infer-input
# ---------------------------------------------------------------------------


def cmd_infer_input(args) -> int:
    from .spectral import infer_input_spectrum

    if args.law is None and args.d is None:
        raise ValueError("need --d or --law")
    law = _parse_law(args.law) if args.law else FixedDeadTime(args.d)
    if args.f <= 0.0:
        raise ValueError("--f must be positive")
    beta = Spectrum.from_csv(args.beta_csv, omega=2.0 * math.pi * args.f)
    lam_spec, cond = infer_input_spectrum(beta, law)
    _write_text(args.out, _spectrum_text(lam_spec))
    _report(f"condition = {_fmt(cond)}")
    return 0


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


def _validate_file(path: str) -> str:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()

    def load(skip):
        return np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)

    if header == TRACE_HEADER:
        data = load(1)
        _check(data.shape[1] == 3, "trace needs 3 columns")
        _check(bool(np.all(np.isfinite(data))), "trace values must be finite")
        _check(bool(np.all(np.diff(data[:, 0]) > 0)), "times must increase")
        _check(
            bool(np.all((data[:, 1] > -1e-6) & (data[:, 1] < 1 + 1e-6))),
            "active fraction outside [0, 1]",
        )
        _check(bool(np.all(data[:, 2] > -1e-6)), "rate turned negative")
        return "trace"
    if header == COMBINED_HEADER or header == ESTIMATE_HEADER:
        data = load(1)
        ncol = 8 if header == COMBINED_HEADER else 6
        _check(data.shape[1] == ncol, f"expected {ncol} columns")
        _check(bool(np.all(np.diff(data[:, 0]) > 0)), "times must increase")
        off = 3 if ncol == 8 else 1
        nu_hat, nu_se, a_hat, a_se, count = (data[:, off + i] for i in range(5))
        _check(bool(np.all(nu_hat >= 0)), "rate estimate negative")
        _check(bool(np.all(np.isnan(nu_se) | (nu_se >= 0))), "rate SE negative")
        good_a = np.isnan(a_hat) | ((a_hat >= 0) & (a_hat <= 1))
        _check(bool(np.all(good_a)), "active estimate outside [0, 1]")
        _check(bool(np.all(np.isnan(a_se) | (a_se >= 0))), "active SE negative")
        _check(
            bool(np.all((count >= 0) & (count == np.round(count)))),
            "counts must be non-negative integers",
        )
        return "combined" if ncol == 8 else "estimate"
    if header == HAZARD_HEADER:
        data = load(1)
        _check(data.shape[1] == 3, "hazard table needs 3 columns")
        _check(bool(np.all(np.isfinite(data))), "hazard values must be finite")
        _check(bool(np.all(data[:, 1:] >= -1e-12)), "normalized columns negative")
        return "hazard"
    if header.startswith(SWEEP_HEADER):
        data = load(1)
        ncol = 5 if header.endswith(",max_nu") else 4
        _check(data.shape[1] == ncol, f"sweep needs {ncol} columns")
        _check(bool(np.all(np.isfinite(data))), "sweep values must be finite")
        _check(bool(np.all(data[:, 2] >= 0)), "harmonic magnitude negative")
        _check(
            bool(np.all(np.abs(data[:, 3]) <= math.pi + 1e-9)),
            "phase outside (-pi, pi]",
        )
        return "sweep"
    if header.startswith("x,rho"):
        read_law_csv(path)
        return "law"
    # headerless spectrum: integer index, real, imaginary
    try:
        Spectrum.from_csv(path, omega=1.0)
        return "spectrum"
    except Exception as err:
        raise ValueError(f"unrecognized schema (header {header!r}): {err}") from err


def cmd_validate(args) -> int:
    for path in args.files:
        kind = _validate_file(path)
        print(f"ok {path} ({kind})")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common_out(p, default="-"):
    p.add_argument("--out", default=default, help="output file ('-' for stdout)")
    p.add_argument("--threads", type=int, default=None, help="worker thread count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deadtime",
        description="Ensemble statistics of Poisson processes with refractoriness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("step", help="transient after a rate step at t = 0")
    p.add_argument("--d", type=float, help="fixed dead time in seconds")
    p.add_argument("--nu0", type=float, help="pre-step equilibrium output rate (Hz)")
    p.add_argument("--nu1", type=float, help="post-step equilibrium output rate (Hz)")
    p.add_argument("--lambda0", type=float, default=None, help="input rate override")
    p.add_argument("--lambda1", type=float, default=None, help="input rate override")
    p.add_argument("--t-max", type=float, default=0.5)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--mc", type=int, default=0, help="component count for MC columns")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bin-width", type=float, default=None)
    _add_common_out(p)
    p.set_defaults(func=cmd_step)

    p = sub.add_parser("periodic", help="steady-state response to cosine drive")
    p.add_argument("--d", type=float, default=None, help="fixed dead time in seconds")
    p.add_argument("--law", default=None, help="dead-time law, e.g. gamma:10,137.5")
    p.add_argument("--nu0", type=float, help="mean equilibrium output rate (Hz)")
    p.add_argument("--lambda0", type=float, default=None, help="input rate override")
    p.add_argument("--mod-depth", type=float, default=0.9)
    p.add_argument("--f", type=float, default=None, help="drive frequency (Hz)")
    p.add_argument("--f-sweep", default=None, help="lo:hi:steps frequency sweep")
    p.add_argument("--harmonics", type=int, default=16)
    p.add_argument("--samples", type=int, default=512, help="trace points per period")
    p.add_argument("--max-rate", action="store_true", help="append peak rate column")
    p.add_argument("--out-prefix", default="periodic")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_periodic)

    p = sub.add_parser("pprd-step", help="rate-step transient with gamma dead time")
    p.add_argument("--mean", type=float, help="mean dead time in seconds")
    p.add_argument("--shape", type=int, help="gamma stage index (kernel order)")
    p.add_argument("--nu0", type=float)
    p.add_argument("--nu1", type=float)
    p.add_argument("--lambda0", type=float, default=None)
    p.add_argument("--lambda1", type=float, default=None)
    p.add_argument("--t-max", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--trials", type=int, default=0, help="MC trial count")
    p.add_argument("--mc", type=int, default=0, help="components per trial")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bin-width", type=float, default=None)
    _add_common_out(p)
    p.set_defaults(func=cmd_pprd_step)

    p = sub.add_parser("hazard", help="conditional intensity and law density")
    p.add_argument("--law", required=True)
    p.add_argument("--lambda0", type=float, required=True)
    p.add_argument("--tau-max", type=float, required=True)
    p.add_argument("--points", type=int, default=513)
    _add_common_out(p)
    p.set_defaults(func=cmd_hazard)

    p = sub.add_parser("represent", help="map a renewal interval to rate + dead time")
    p.add_argument(
        "--process",
        required=True,
        help="gamma:r,beta | lognormal:mu,sigma,delta | table:FILE",
    )
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    _add_common_out(p, default="law.csv")
    p.set_defaults(func=cmd_represent)

    p = sub.add_parser("infer-input", help="input spectrum from an output spectrum")
    p.add_argument("--beta-csv", required=True)
    p.add_argument("--law", default=None)
    p.add_argument("--d", type=float, default=None)
    p.add_argument("--f", type=float, required=True, help="base frequency (Hz)")
    _add_common_out(p)
    p.set_defaults(func=cmd_infer_input)

    p = sub.add_parser("validate", help="schema-check produced CSV files")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _expand_scenario(argv)
    except (ValueError, OSError) as err:
        _report(f"error: {err}")
        return 2
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NotRepresentableError as err:
        loc = f" at x = {err.x:.6g}" if err.x is not None else ""
        _report(f"not representable{loc}: {err}")
        return 3
    except NumericalError as err:
        _report(f"numerical failure: {err}")
        return 4
    except (ValueError, OSError) as err:
        _report(f"error: {err}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
