"""Command line entry point: ``qpj <task> --config FILE --out DIR [--seed N] [--threads N]``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import (TASKS, RunConfig, default_config_text, parse_config, parse_config_text,
                     to_reduced_units)
from .errors import ConfigError, QpjError, ValidationError
from .junction import DriveParams, driven_admittance, n_max, static_admittance
from .material import LeadParams
from .polarization import GridSpec, JunctionParams, QuadratureSettings, build_table
from .resonator import (g_keldysh_res, g_retarded_res, resonance, resonance_grid, s21, spectrum,
                        sweep_map)
from .stochastic import build_memory_kernel, build_noise_model, estimate_keldysh, run_ensemble

EXTRA_TASKS = ("polarization-cases", "admittance-temperatures", "sideband-ladder", "pair-breaking",
               "cooling-map")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3


class _Context:
    """Parsed configuration plus lazily built tables shared by one run."""

    def __init__(self, cfg: RunConfig, task: str, seed: int, threads: int, out: Path):
        self.cfg, self.task, self.seed, self.threads, self.out = cfg, task, seed, threads, out
        self.params = to_reduced_units(cfg)
        self.units = self.params.units
        self._tables = {}

    @property
    def num(self):
        return self.cfg.numerics

    @property
    def settings(self):
        return QuadratureSettings(rel_tol=self.num.rel_tol)

    def table(self, junction: JunctionParams, omega_max: float):
        omega_max = max(float(omega_max), self.num.table_omega_max)
        key = (junction, round(omega_max, 9))
        if key not in self._tables:
            spec = GridSpec(omega_max=omega_max, step=self.num.table_step,
                            coarse_step=self.num.table_coarse_step)
            self._tables[key] = build_table(junction, spec, self.settings)
        return self._tables[key]

    def write_csv(self, name, header, rows, extra_meta=()):
        path = self.out / name
        with open(path, "w", newline="") as fh:
            self._meta(fh, extra_meta)
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        return path

    def _meta(self, fh, extra_meta=()):
        fh.write(f"# qpj {__version__}\n")
        fh.write(f"# task {self.task}\n")
        fh.write(f"# config_hash {self.cfg.digest()}\n")
        fh.write(f"# seed {self.seed}\n")
        for line in extra_meta:
            fh.write(f"# {line}\n")


def _fmt(x) -> str:
    return repr(float(x))


def required_range(d: DriveParams, span: float) -> float:
    """Table half-width needed to evaluate drive-dressed quantities up to |omega| = span."""
    step = d.drive_freq if d.amplitude > 0 else 0.0
    return span + (2 * n_max(d) + 4) * step + 0.5


def _with_junction(base: JunctionParams, temperature, gap_left=0.5, gap_right=0.5):
    nu = base.left.dynes_rate
    return JunctionParams(LeadParams(gap_left, nu, temperature), LeadParams(gap_right, nu, temperature),
                          base.tunnel_resistance)


def _omega_axis(num, skip_zero=False):
    w = np.linspace(num.omega_min, num.omega_max, num.omega_points)
    return w[w != 0] if skip_zero else w


# -- tasks ---------------------------------------------------------------------------

def task_polarization(ctx: _Context):
    j = ctx.params.junction
    table = ctx.table(j, ctx.num.table_omega_max)
    buf = io.StringIO()
    table.to_csv(buf)
    with open(ctx.out / "polarization.csv", "w", newline="") as fh:
        ctx._meta(fh, ["units omega in Delta_Sigma/hbar, Pi in Delta_Sigma units"])
        fh.write(buf.getvalue())


def task_admittance(ctx: _Context):
    p = ctx.params
    w = _omega_axis(ctx.num, skip_zero=True)
    table = ctx.table(p.junction, required_range(p.drive, float(np.max(np.abs(w)))))
    y = driven_admittance(table, p.drive, 0, w)
    u = ctx.units
    rows = [[_fmt(u.to_hz(a)), _fmt(u.to_siemens(b.real)), _fmt(u.to_siemens(b.imag))] for a, b in zip(w, y)]
    ctx.write_csv("admittance.csv", ["omega", "re_Y", "im_Y"], rows,
                  ["units omega in Hz (ordinary frequency), Y in S"])


def _spectrum_rows(ctx, circuit, table, d, grid):
    u = ctx.units
    gr = spectrum(circuit, table, d, grid=grid)
    t = s21(circuit, table, d, grid)
    rows = [[_fmt(u.to_hz(w)), _fmt(u.to_henry(g.imag)), _fmt(u.to_henry(g.real)), _fmt(abs(s))]
            for w, g, s in zip(grid, gr.g_ret, t)]
    return gr, rows


def task_spectrum(ctx: _Context):
    p = ctx.params
    table = ctx.table(p.junction, required_range(p.drive, 2 * p.circuit.omega_r))
    wt, gamma = resonance(p.circuit, table, p.drive)
    grid = resonance_grid(wt, gamma, n=ctx.num.spectrum_points)
    res, rows = _spectrum_rows(ctx, p.circuit, table, p.drive, grid)
    u = ctx.units
    meta = ["units omega in Hz (ordinary frequency), G^R in H",
            f"stark_freq_hz {_fmt(u.to_hz(res.stark_freq))}",
            f"linewidth_hz {_fmt(u.to_hz(res.linewidth))}",
            f"non_lorentzian {int(res.non_lorentzian)}"]
    ctx.write_csv("spectrum.csv", ["omega", "im_gr", "re_gr", "abs_s21"], rows, meta)


def _sweep(ctx: _Context, phase_bias, name):
    p, num, u = ctx.params, ctx.num, ctx.units
    freqs_ghz = np.linspace(num.sweep_freq_min_ghz, num.sweep_freq_max_ghz, num.sweep_freq_points)
    amps_mv = np.linspace(num.sweep_amp_min_mv, num.sweep_amp_max_mv, num.sweep_amp_points)
    freqs = [u.frequency_hz(f * 1e9) for f in freqs_ghz]
    amps = [u.voltage(a * 1e-3) for a in amps_mv]
    cover = max(required_range(DriveParams(phase_bias, max(amps), f), 0.0) for f in freqs)
    table = ctx.table(p.junction, cover + 1.0)
    bracket = (u.temperature(num.qtemp_min_k), u.temperature(num.qtemp_max_k))
    result = sweep_map(p.circuit, lambda d: table, freqs, amps, phase_bias, bracket,
                       u.temperature(num.qtemp_tol_k), workers=ctx.threads)
    rows = []
    for pt, (fg, am) in zip(result.points, [(f, a) for f in freqs_ghz for a in amps_mv]):
        rows.append([_fmt(fg), _fmt(am), _fmt(u.to_kelvin(pt.temperature)), _fmt(u.to_hz(pt.linewidth)),
                     pt.status])
    ctx.write_csv(name, ["Omega_GHz", "V0_mV", "T_r_K", "gamma_Hz", "status"], rows,
                  [f"phase_bias_pi {_fmt(phase_bias / math.pi)}", "gamma is the FWHM of Im G^R in Hz"])


def task_qtemp_map(ctx: _Context):
    _sweep(ctx, ctx.params.drive.phase_bias, "qtemp_map.csv")


#: frequency band over which the memory kernel is transformed
KERNEL_BAND = 36.0


def task_montecarlo(ctx: _Context):
    p, num = ctx.params, ctx.num
    dt = num.mc_dt
    omega_noise = math.pi / dt
    table = ctx.table(p.junction, required_range(p.drive, max(KERNEL_BAND, omega_noise)))
    wt, gamma = resonance(p.circuit, table, p.drive)
    kernel = build_memory_kernel(table, p.drive, dt, num.mc_memory, wt, omega_max=KERNEL_BAND)
    model = build_noise_model(table, p.drive, np.linspace(-omega_noise, omega_noise, 40001))
    seg = num.mc_segment / gamma
    discard = num.mc_transient / gamma
    trajs = run_ensemble(p.circuit, kernel, model, p.drive, num.mc_trajectories, discard + num.mc_segments * seg,
                         ctx.seed, discard=discard, record_every=4)
    omegas = wt + gamma * np.array([-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0])
    est = estimate_keldysh(trajs, omegas, n_segments=num.mc_segments)

    def s_ref(w):
        return -np.imag(g_keldysh_res(p.circuit, table, p.drive, 0, w))

    u = ctx.units
    rows = []
    for k, w in enumerate(omegas):
        ref = est.smoothed(s_ref, w)
        rows.append([_fmt(u.to_hz(w)), _fmt(-est.value[k].imag), _fmt(est.error[k]), _fmt(ref),
                     _fmt(s_ref(np.array([w]))[0])])
    ctx.write_csv("montecarlo.csv", ["omega", "s_mc", "s_mc_err", "s_ref_windowed", "s_ref"], rows,
                  ["units omega in Hz (ordinary frequency), S = i G^K in reduced inductance units",
                   f"trajectories {num.mc_trajectories}", f"dt {_fmt(dt)}", f"memory_time {_fmt(num.mc_memory)}"])


def task_polarization_cases(ctx: _Context):
    base = ctx.params.junction
    cases = [("cold_symmetric", _with_junction(base, 0.04)),
             ("hot_symmetric", _with_junction(base, 0.32)),
             ("hot_asymmetric", _with_junction(base, 0.32, 0.6, 0.4))]
    rows = []
    for name, j in cases:
        table = ctx.table(j, 3.5)
        w = table.grid[np.abs(table.grid) <= 3.0]
        n, s = table.retarded(w)
        for a, b, c in zip(w, n, s):
            rows.append([name, _fmt(a), _fmt(b.real), _fmt(b.imag), _fmt(c.real), _fmt(c.imag)])
    ctx.write_csv("polarization_cases.csv", ["case", "omega", "re_pi_n", "im_pi_n", "re_pi_s", "im_pi_s"], rows,
                  ["units omega in Delta_Sigma/hbar, Pi in Delta_Sigma units"])


def task_admittance_temperatures(ctx: _Context):
    base = ctx.params.junction
    rows = []
    for temp in (0.04, 0.32):
        table = ctx.table(_with_junction(base, temp), 3.5)
        w = table.grid[(np.abs(table.grid) <= 3.0) & (table.grid != 0)]
        for phi in (0.0, 1.0):
            y = static_admittance(table, phi * math.pi, w)
            rows += [[_fmt(temp), _fmt(phi), _fmt(a), _fmt(b.real), _fmt(b.imag)] for a, b in zip(w, y)]
    ctx.write_csv("admittance_temperatures.csv", ["temperature", "phase_bias_pi", "omega", "re_Y", "im_Y"], rows,
                  ["units temperature in Delta_Sigma/k_B, omega in Delta_Sigma/hbar, Y in 1/R_J"])


LADDER_TEMPERATURE, LADDER_DRIVE, LADDER_AMPLITUDE = 0.04, 0.155, 0.5


def task_sideband_ladder(ctx: _Context):
    j = _with_junction(ctx.params.junction, LADDER_TEMPERATURE)
    drive = DriveParams(0.0, LADDER_AMPLITUDE, LADDER_DRIVE)
    table = ctx.table(j, required_range(drive, 3.0))
    w = np.round(np.arange(-3000, 3001) * 1e-3, 12)
    w = w[w != 0]
    rows = []
    for phi in (0.0, 1.0):
        y = driven_admittance(table, DriveParams(phi * math.pi, LADDER_AMPLITUDE, LADDER_DRIVE), 0, w)
        rows += [[_fmt(phi), _fmt(a), _fmt(b.real), _fmt(b.imag)] for a, b in zip(w, y)]
    ctx.write_csv("sideband_ladder.csv", ["phase_bias_pi", "omega", "re_Y", "im_Y"], rows,
                  [f"temperature {LADDER_TEMPERATURE}", f"drive_freq {LADDER_DRIVE}", f"amplitude {LADDER_AMPLITUDE}",
                   "units Delta_Sigma/k_B, Delta_Sigma/hbar, Delta_Sigma/e, Y in 1/R_J"])
    wm = w[::5]
    rows = []
    for phi in (0.0, 1.0):
        for amp in np.linspace(0.0, LADDER_AMPLITUDE, 26):
            d = DriveParams(phi * math.pi, float(amp), LADDER_DRIVE)
            y = driven_admittance(table, d, 0, wm)
            rows += [[_fmt(phi), _fmt(amp), _fmt(a), _fmt(b.real)] for a, b in zip(wm, y)]
    ctx.write_csv("sideband_ladder_map.csv", ["phase_bias_pi", "amplitude", "omega", "re_Y"], rows,
                  [f"temperature {LADDER_TEMPERATURE}", f"drive_freq {LADDER_DRIVE}"])


PAIR_BREAKING_STEPS = (-1.0, 0.0, 1.0)


def pair_breaking_drive(circuit, table, amplitude, sign, phase_bias=0.0, photons=3, iterations=8):
    """Drive frequency with sign * omega_tilde + photons * Omega = Delta_Sigma.

    The Stark shift makes omega_tilde depend on Omega, so the condition is
    iterated to a fixed point.
    """
    big = table.junction.delta_sigma
    freq = (big - sign * circuit.omega_r) / photons
    for _ in range(iterations):
        wt, _ = resonance(circuit, table, DriveParams(phase_bias, amplitude, freq))
        freq = (big - sign * wt) / photons
    return freq


def pair_breaking_step(circuit, table, amplitude, freq):
    """Drive frequency spacing that moves the pair-breaking edge by about two linewidths."""
    gamma = max(resonance(circuit, table, DriveParams(0.0, amplitude, freq * f))[1] for f in (0.98, 1.02))
    return 2.0 * gamma / 3.0


def task_pair_breaking(ctx: _Context):
    p, u = ctx.params, ctx.units
    amp = p.drive.amplitude
    probe = DriveParams(0.0, amp, (1.0 - p.circuit.omega_r) / 3.0)
    table = ctx.table(p.junction, required_range(probe, 2 * p.circuit.omega_r))
    rows = []
    for label, sign in (("plus", 1.0), ("minus", -1.0)):
        center = pair_breaking_drive(p.circuit, table, amp, sign)
        step = pair_breaking_step(p.circuit, table, amp, center)
        for k in PAIR_BREAKING_STEPS:
            d = DriveParams(0.0, amp, center + k * step)
            wt, gamma = resonance(p.circuit, table, d)
            grid = resonance_grid(wt, max(gamma, step), n=ctx.num.spectrum_points)
            g = g_retarded_res(p.circuit, table, d, grid)
            rows += [[label, _fmt(u.to_hz(d.drive_freq) / 1e9), _fmt(u.to_hz(w)), _fmt(u.to_henry(v.imag))]
                     for w, v in zip(grid, g)]
    ctx.write_csv("pair_breaking.csv", ["branch", "Omega_GHz", "omega", "im_gr"], rows,
                  ["units omega in Hz (ordinary frequency), G^R in H",
                   "branch plus: omega_r + 3 Omega = Delta_Sigma; minus: -omega_r + 3 Omega = Delta_Sigma"])


def task_cooling_map(ctx: _Context):
    _sweep(ctx, 0.0, "cooling_map.csv")


TASK_FUNCS = {
    "polarization": task_polarization, "admittance": task_admittance, "spectrum": task_spectrum,
    "qtemp-map": task_qtemp_map, "montecarlo": task_montecarlo,
    "polarization-cases": task_polarization_cases, "admittance-temperatures": task_admittance_temperatures,
    "sideband-ladder": task_sideband_ladder, "pair-breaking": task_pair_breaking, "cooling-map": task_cooling_map,
}


# -- entry point ---------------------------------------------------------------------

def _error(exc, code, out: Path | None):
    payload = {"status": "error", "exit_code": code, "error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ValidationError):
        payload["problems"] = exc.problems
    text = json.dumps(payload, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get("QPJ_THREADS")
    if env is None:
        return 1
    try:
        n = int(env)
    except ValueError:
        raise ValidationError([f"QPJ_THREADS must be an integer, got {env!r}"])
    return n


def run_task(task: str, cfg: RunConfig, out, seed=None, threads=1) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.numerics.seed if seed is None else seed
    ctx = _Context(cfg, task, seed, max(1, threads), out)
    TASK_FUNCS[task](ctx)
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError([message])


def build_parser():
    ap = _Parser(prog="qpj", description="Driven Josephson junction dissipation and noise.")
    ap.add_argument("task", choices=TASKS + EXTRA_TASKS)
    ap.add_argument("--config", help="INI configuration; the packaged default is used when omitted")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--version", action="version", version=f"qpj {__version__}")
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ValidationError as exc:
        return _error(exc, EXIT_VALIDATION, None)
    out = Path(args.out)
    try:
        threads = _threads(args.threads)
        if threads < 1:
            raise ValidationError(["threads must be at least 1"])
        task_name = args.task if args.task in TASKS else None
        cfg = parse_config(args.config, task_name) if args.config else parse_config_text(default_config_text(),
                                                                                           task_name)
    except (ConfigError, ValidationError) as exc:
        return _error(exc, EXIT_VALIDATION, out)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            run_task(args.task, cfg, out, args.seed, threads)
    except (ConfigError, ValidationError, ValueError) as exc:
        return _error(exc, EXIT_VALIDATION, out)
    except (QpjError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _error(exc, EXIT_NUMERIC, out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
