"""LC resonator shunted by the driven junction.

All quantities are in reduced units (see :mod:`qpj.units`). The flux
response G^R = L / (omega^2 L C + i omega L Y_{J,0} - 1) and its Keldysh
partner give the spectrum, the probe transmission, and the heat exchanged
with a probe line at temperature T_p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, curve_fit
from scipy.special import jv

from .errors import NoSignChange, QpjError, ResonanceNotFound
from .junction import DriveParams, _coefficients, driven_admittance, inductive_pole, n_max
from .material import coth_safe
from .polarization import PolarizationTable
from .quadrature import adaptive_rule

#: Kolmogorov distance above which a line is reported as non-Lorentzian
SHAPE_THRESHOLD = 0.05


@dataclass(frozen=True)
class ResonatorCircuit:
    inductance: float
    capacitance: float
    coupling_capacitance: float = 0.0
    probe_impedance: float = 1.0
    probe_temperature: float = 0.0

    def __post_init__(self):
        if not (self.inductance > 0 and self.capacitance > 0):
            raise ValueError("inductance and capacitance must be positive")
        if not self.coupling_capacitance >= 0:
            raise ValueError("coupling_capacitance must be non-negative")
        if not self.probe_impedance > 0:
            raise ValueError("probe_impedance must be positive")

    @property
    def omega_r(self) -> float:
        return 1.0 / math.sqrt(self.inductance * self.capacitance)

    @property
    def impedance(self) -> float:
        return math.sqrt(self.inductance / self.capacitance)


@dataclass
class SpectralResult:
    grid: np.ndarray
    g_ret: np.ndarray
    g_kel: np.ndarray
    stark_freq: float = float("nan")
    linewidth: float = float("nan")
    non_lorentzian: bool = False
    shape_distance: float = float("nan")


def junction_admittance(table: PolarizationTable, d: DriveParams, omega):
    """Y_{J,0}(omega); at omega = 0 only the pole residue is meaningful, see g_retarded_res."""
    return driven_admittance(table, d, 0, omega)


def g_retarded_res(circuit: ResonatorCircuit, table: PolarizationTable, d: DriveParams, omega):
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    zero = w == 0
    w_safe = np.where(zero, 1.0, w)
    i_omega_y = 1j * w_safe * junction_admittance(table, d, w_safe)
    if np.any(zero):
        # omega Y -> i K with K = 1 / L_J
        i_omega_y = np.where(zero, -inductive_pole(table, d), i_omega_y)
    L, C = circuit.inductance, circuit.capacitance
    g = L / (w * w * L * C + L * i_omega_y - 1.0)
    return g[0] if np.ndim(omega) == 0 else g


def g_advanced_res(circuit, table, d, omega):
    return np.conj(g_retarded_res(circuit, table, d, omega))


def _keldysh_source(table: PolarizationTable, d: DriveParams, n: int, omega):
    """Sideband sum of Pi^K weighted by the drive coefficients."""
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    nm, k, c = _coefficients(d, abs(n))
    off = -k[0]
    total = np.zeros(w.shape, dtype=complex)
    for npr in range(-nm, nm + 1):
        kn, ks = table.keldysh(w + npr * d.drive_freq)
        a, b = np.conj(c[npr - n + off]), c[n - npr + off]
        ra, rb = c[npr + off], np.conj(c[-npr + off])
        total += a * (kn * ra + ks * rb) + b * (ks * ra + kn * rb)
    return total


def g_keldysh_res(circuit: ResonatorCircuit, table: PolarizationTable, d: DriveParams, n: int, omega):
    """Harmonic n of the Keldysh flux correlator."""
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    src = _keldysh_source(table, d, n, w)
    gr_shift = g_retarded_res(circuit, table, d, w + n * d.drive_freq)
    ga = np.conj(g_retarded_res(circuit, table, d, w))
    out = gr_shift * ga * src / 16.0
    return out[0] if np.ndim(omega) == 0 else out


def s21(circuit: ResonatorCircuit, table: PolarizationTable, d: DriveParams, omega):
    """Probe-line transmission to second order in the coupling capacitance."""
    w = np.asarray(omega, dtype=float)
    zc = circuit.probe_impedance * circuit.coupling_capacitance
    if zc == 0:
        return np.ones_like(w, dtype=complex)
    g = g_retarded_res(circuit, table, d, w)
    return 1 + 0.5j * w * zc - 0.25 * (w * zc) ** 2 - 0.5j * w ** 3 * zc * circuit.coupling_capacitance * g


def resonance(circuit: ResonatorCircuit, table: PolarizationTable, d: DriveParams):
    """Dressed resonance (omega_tilde, gamma) from Re D(omega) = 0.

    gamma = Re Y_{J,0}(omega_tilde) / C_eff with C_eff the slope of Re D.
    Used to seed quadrature panels and spectrum windows.
    """
    L, C = circuit.inductance, circuit.capacitance

    def re_d(w):
        y = junction_admittance(table, d, np.array([w]))[0]
        return w * w * L * C - w * L * y.imag - 1.0

    w0 = circuit.omega_r
    lo, hi = 0.2 * w0, 3.0 * w0
    if re_d(lo) * re_d(hi) > 0:
        raise ResonanceNotFound("no zero of Re D near the bare resonance")
    wt = brentq(re_d, lo, hi, xtol=1e-14 * w0, rtol=1e-13)
    h = 1e-6 * w0
    slope = (re_d(wt + h) - re_d(wt - h)) / (2 * h)
    y = junction_admittance(table, d, np.array([wt]))[0]
    gamma = 2.0 * wt * L * y.real / slope
    return wt, abs(gamma)


def _lorentz(w, amp, center, width):
    return amp * (0.5 * width) ** 2 / ((w - center) ** 2 + (0.5 * width) ** 2)


def stark_shifted_freq(spectrum: SpectralResult) -> float:
    """Peak position of |Im G^R| refined by a parabola through the top three points."""
    w = spectrum.grid
    a = np.abs(spectrum.g_ret.imag)
    k = int(np.argmax(a))
    if k == 0 or k == len(w) - 1:
        raise ResonanceNotFound("maximum of |Im G^R| sits on the grid edge")
    x0, x1, x2 = w[k - 1:k + 2]
    y0, y1, y2 = a[k - 1:k + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    B = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
    if A >= 0:
        return float(x1)
    return float(-B / (2 * A))


def _half_crossings(w, a, k):
    half = 0.5 * a[k]
    left = k
    while left > 0 and a[left] > half:
        left -= 1
    right = k
    while right < len(a) - 1 and a[right] > half:
        right += 1
    if a[left] > half or a[right] > half:
        raise ResonanceNotFound("half-maximum not reached inside the window")
    wl = np.interp(half, [a[left], a[left + 1]], [w[left], w[left + 1]])
    wr = np.interp(half, [a[right], a[right - 1]], [w[right], w[right - 1]])
    return wl, wr


def lorentzian_distance(w, a, center, width):
    """Kolmogorov distance between |Im G^R| and its best-fit Lorentzian over ``w``.

    Both curves are normalized to unit area on the window and compared as
    cumulative distributions.
    """
    try:
        popt, _ = curve_fit(_lorentz, w, a, p0=(a.max(), center, width), maxfev=20000)
    except RuntimeError:
        return 1.0
    fit = _lorentz(w, *popt)

    def cdf(y):
        seg = 0.5 * (y[1:] + y[:-1]) * np.diff(w)
        c = np.concatenate([[0.0], np.cumsum(seg)])
        return c / c[-1]

    return float(np.max(np.abs(cdf(a) - cdf(fit))))


def linewidth(spectrum: SpectralResult, window=8.0):
    """FWHM of |Im G^R| around the peak and the Lorentzian-shape flag.

    Returns (gamma, non_lorentzian, distance). The shape test uses the
    window center +- ``window`` * gamma.
    """
    w = spectrum.grid
    a = np.abs(spectrum.g_ret.imag)
    k = int(np.argmax(a))
    if k == 0 or k == len(w) - 1:
        raise ResonanceNotFound("maximum of |Im G^R| sits on the grid edge")
    wl, wr = _half_crossings(w, a, k)
    gamma = wr - wl
    center = 0.5 * (wl + wr)
    sel = np.abs(w - center) <= window * gamma
    dist = lorentzian_distance(w[sel], a[sel], center, gamma) if sel.sum() > 8 else float("nan")
    return float(gamma), bool(dist > SHAPE_THRESHOLD), dist


def resonance_grid(center, gamma, half_width=None, n=2001):
    """Grid centered on a resonance, denser near the center."""
    half_width = half_width if half_width is not None else 30.0 * gamma
    u = np.linspace(-1.0, 1.0, n)
    return center + half_width * np.sinh(4.0 * u) / np.sinh(4.0)


def spectrum(circuit: ResonatorCircuit, table: PolarizationTable, d: DriveParams, grid=None,
             n_points=2001) -> SpectralResult:
    """G^R and G^K on a grid; by default centered on the dressed resonance."""
    if grid is None:
        wt, gamma = resonance(circuit, table, d)
        grid = resonance_grid(wt, gamma, n=n_points)
    grid = np.asarray(grid, dtype=float)
    gr = g_retarded_res(circuit, table, d, grid)
    gk = g_keldysh_res(circuit, table, d, 0, grid)
    res = SpectralResult(grid, gr, gk)
    res.stark_freq = stark_shifted_freq(res)
    res.linewidth, res.non_lorentzian, res.shape_distance = linewidth(res)
    return res


# -- heat flow ---------------------------------------------------------------

def heat_cutoff(table: PolarizationTable, d: DriveParams) -> float:
    return table.junction.delta_sigma + (n_max(d) + 2) * (d.drive_freq if d.amplitude > 0 else 0.0)


def _heat_breakpoints(table, d, wt, gamma, cut):
    pts = [0.0, cut]
    for k in (0.0, 0.5, 1, 2, 4, 8, 16, 32, 64, 128, 512, 2048):
        pts += [wt - k * gamma, wt + k * gamma]
    nm = n_max(d)
    big = table.junction.delta_sigma
    step = d.drive_freq if d.amplitude > 0 else 0.0
    for m in range(-nm - 2, nm + 3):
        for s in (-1.0, 1.0):
            pts.append(abs(s * big + m * step))
        if step == 0:
            break
    pts = np.unique(np.clip(pts, 0.0, cut))
    return pts


def heat_integrand_parts(circuit, table, d, omega):
    """(Im G^K omega^4, Im G^R omega^4) at non-negative omega."""
    w = np.asarray(omega, dtype=float)
    gr = g_retarded_res(circuit, table, d, w)
    gk = g_keldysh_res(circuit, table, d, 0, w)
    w4 = w ** 4
    return gk.imag * w4, gr.imag * w4


@dataclass
class HeatIntegrals:
    """Pieces of the heat-flow integral that do not depend on T_p.

    The probe temperature enters only through coth(omega / 2 T_p) multiplying
    Im G^R, so the integrand is sampled once on a fixed adaptive node set and
    reused for every T_p during root finding.
    """

    nodes: np.ndarray
    weights: np.ndarray
    im_gk: np.ndarray
    im_gr: np.ndarray
    prefactor: float
    error: float = 0.0

    def power(self, t_probe: float) -> float:
        if t_probe <= 0:
            raise ValueError("probe temperature must be positive")
        coth = coth_safe(self.nodes / (2.0 * t_probe))
        f = self.im_gk - self.im_gr * coth
        return float(self.prefactor * np.sum(self.weights * f))


def heat_integrals(circuit: ResonatorCircuit, table: PolarizationTable, d: DriveParams,
                   rel_tol=1e-7) -> HeatIntegrals:
    """Adaptive node set for the heat-flow integral over (0, omega_cut].

    Panels are refined until both Im G^K and Im G^R integrals (each against
    omega^4) and the coth-weighted Im G^R at the junction temperature have
    converged; the integrand is even, so the half line is doubled.
    """
    wt, gamma = resonance(circuit, table, d)
    cut = heat_cutoff(table, d)
    bps = _heat_breakpoints(table, d, wt, max(gamma, 1e-12 * wt), cut)
    t_ref = max(table.junction.left.temperature, 1e-3)

    def func(x, idx):
        x = np.where(x == 0, 1e-300, x)
        gk, gr = heat_integrand_parts(circuit, table, d, x)
        return np.stack([gk, gr, gr * coth_safe(x / (2 * t_ref))])

    nodes, weights, err = adaptive_rule(func, bps, n_out=3, rel_tol=rel_tol, abs_tol=0.0)
    gk, gr = heat_integrand_parts(circuit, table, d, nodes)
    zc2 = circuit.coupling_capacitance ** 2 * circuit.probe_impedance
    # (C_p^2 Z_p / 2) * 2 * int_0^cut (...) d omega / 2 pi
    prefactor = zc2 / (2 * math.pi)
    return HeatIntegrals(nodes, weights, gk, gr, prefactor, err)


def heat_power(circuit: ResonatorCircuit, table: PolarizationTable, d: DriveParams, t_probe: float,
               integrals: HeatIntegrals | None = None) -> float:
    """Period- and noise-averaged power flowing from the probe into the resonator."""
    if not t_probe > 0:
        raise ValueError("t_probe must be positive")
    integrals = integrals or heat_integrals(circuit, table, d)
    return integrals.power(t_probe)


def quasitemperature(circuit: ResonatorCircuit, table: PolarizationTable, d: DriveParams,
                     bracket=(None, None), tol=None, integrals: HeatIntegrals | None = None):
    """Probe temperature at which the heat flow vanishes, by bisection.

    ``bracket`` and ``tol`` are reduced temperatures; defaults are set by the caller
    (1 mK to 10 K and 0.1 mK in SI terms).
    """
    lo, hi = bracket
    if lo is None or hi is None or tol is None:
        raise ValueError("bracket and tol must be given in reduced units")
    integrals = integrals or heat_integrals(circuit, table, d)
    p_lo, p_hi = integrals.power(lo), integrals.power(hi)
    if p_lo * p_hi > 0 or p_lo > p_hi:
        raise NoSignChange("heat flow does not change sign on the bracket", (lo, hi), (p_lo, p_hi))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        p = integrals.power(mid)
        if p > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass
class SweepPoint:
    drive_freq: float
    amplitude: float
    temperature: float = float("nan")
    linewidth: float = float("nan")
    stark_freq: float = float("nan")
    status: str = "ok"


@dataclass
class SweepResult:
    points: list = field(default_factory=list)

    def as_arrays(self):
        keys = ("drive_freq", "amplitude", "temperature", "linewidth", "stark_freq")
        return {k: np.array([getattr(p, k) for p in self.points]) for k in keys} | {
            "status": [p.status for p in self.points]}


def sweep_point(circuit, table, d, bracket, tol, with_spectrum=True) -> SweepPoint:
    pt = SweepPoint(d.drive_freq, d.amplitude)
    try:
        if with_spectrum:
            spec = spectrum(circuit, table, d)
            pt.linewidth, pt.stark_freq = spec.linewidth, spec.stark_freq
        pt.temperature = quasitemperature(circuit, table, d, bracket=bracket, tol=tol)
    except QpjError as exc:
        pt.status = type(exc).__name__
    return pt


def sweep_map(circuit, table_factory, drive_freqs, amplitudes, phase_bias=0.0, bracket=None, tol=None,
              workers=1) -> SweepResult:
    """Quasitemperature and linewidth over a (drive_freq, amplitude) grid.

    ``table_factory(d)`` returns a table covering drive ``d``. Failed points keep
    their error type in ``status``.
    """
    cells = [DriveParams(phase_bias, a, f) for f in drive_freqs for a in amplitudes]

    def run(d):
        try:
            table = table_factory(d)
        except QpjError as exc:
            return SweepPoint(d.drive_freq, d.amplitude, status=type(exc).__name__)
        return sweep_point(circuit, table, d, bracket, tol)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            pts = list(pool.map(run, cells))
    else:
        pts = [run(d) for d in cells]
    return SweepResult(pts)
