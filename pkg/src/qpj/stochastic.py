"""Time-domain Monte Carlo for the resonator flux.

The junction is replaced by its averaged admittance kernel plus a complex
Gaussian noise xi(t) whose correlators follow the Keldysh polarization
operators:

    <xi*(t) xi(t')> = i Pi_n^K(t - t'),    <xi(t) xi(t')> = -i Pi_s^K(t - t').

The resonator obeys

    C phi'' + int Y_{J,0}(t - t') phi'(t') dt' + phi / L = -I(t),
    I(t) = (i/4) [xi* exp(i phi_d / 2) - xi exp(-i phi_d / 2)].

Integration scheme
------------------
Y_{J,0} is split into its zero-frequency pole (an extra inductance), an
instantaneous ohmic part, and a memory remainder sampled with hat-function
product-integration weights over a finite window T_mem. The linear local
part is propagated exactly over each step with a first-order hold on the
force, so the bare oscillator has no phase error at any step size. The
small mismatch between the truncated kernel and the exact admittance at the
reference frequency is moved into the local terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import InsufficientStatistics, KernelNotCausal, NotPositiveSemidefinite, UnstableStep
from .junction import DriveParams, driven_admittance, inductive_pole
from .polarization import PolarizationTable
from .resonator import ResonatorCircuit

#: eigenvalues above -PSD_CLAMP * trace are clamped to zero
PSD_CLAMP = 1e-10
CAUSALITY_LIMIT = 1e-6


# -- noise -------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpectralModel:
    """Spectra of the junction noise on a sorted frequency grid.

    ``s_xx`` is the spectrum of <xi* xi> (real, non-negative) and ``s_xy``
    that of <xi xi>.
    """

    grid: np.ndarray
    s_xx: np.ndarray
    s_xy: np.ndarray

    def at(self, omega):
        """Spectra interpolated at ``omega``; zero outside the grid."""
        w = np.asarray(omega, dtype=float)
        xx = np.interp(w, self.grid, self.s_xx, left=0.0, right=0.0)
        xy = (np.interp(w, self.grid, self.s_xy.real, left=0.0, right=0.0)
              + 1j * np.interp(w, self.grid, self.s_xy.imag, left=0.0, right=0.0))
        return xx, xy


def _check_psd(xx_pos, xx_neg, xy):
    """Clamp per-bin covariance [[xx+, xy], [xy*, xx-]] to be positive semidefinite.

    Returns clamped (xx+, xx-, xy).
    """
    tr = xx_pos + xx_neg
    det = xx_pos * xx_neg - np.abs(xy) ** 2
    disc = np.sqrt(np.maximum((0.5 * (xx_pos - xx_neg)) ** 2 + np.abs(xy) ** 2, 0.0))
    lam_min = 0.5 * tr - disc
    scale = np.maximum(np.abs(tr), 1e-300)
    bad = lam_min < -PSD_CLAMP * scale
    if np.any(bad):
        k = int(np.argmax(bad))
        raise NotPositiveSemidefinite(
            f"noise covariance has eigenvalue {lam_min[k]:.3e} with trace {tr[k]:.3e}")
    # clamp: shrink the cross term so that the determinant is non-negative
    fix = det < 0
    if np.any(fix):
        xx_pos = np.maximum(xx_pos, 0.0)
        xx_neg = np.maximum(xx_neg, 0.0)
        lim = np.sqrt(xx_pos * xx_neg)
        mag = np.abs(xy)
        xy = np.where(fix & (mag > 0), xy * np.minimum(1.0, lim / np.where(mag > 0, mag, 1.0)), xy)
    return np.maximum(xx_pos, 0.0), np.maximum(xx_neg, 0.0), xy


def build_noise_model(table: PolarizationTable, d: DriveParams | None, grid) -> NoiseSpectralModel:
    """Noise spectra from the table's Keldysh components on ``grid``.

    The noise itself is stationary; the drive enters later through the
    phase factors of the current, so ``d`` is accepted only for symmetry
    with the other builders.

    Raises
    ------
    NotPositiveSemidefinite
        If a bin's covariance has a clearly negative eigenvalue.
    """
    grid = np.asarray(grid, dtype=float)
    kn, ks = table.keldysh(grid)
    s_xx = np.real(1j * kn)
    s_xy = -1j * ks
    kn_m, _ = table.keldysh(-grid)
    _check_psd(s_xx, np.real(1j * kn_m), s_xy)
    return NoiseSpectralModel(grid, s_xx, s_xy)


def _fft_frequencies(n, dt):
    return 2 * math.pi * np.fft.fftfreq(n, dt)


def synthesize_noise(model: NoiseSpectralModel, duration: float, dt: float, seed) -> np.ndarray:
    """Stationary complex Gaussian series with the model's correlators.

    Each pair of bins (omega, -omega) receives a 2x2 covariance factor
    applied to two independent circular unit Gaussians; an FFT returns the
    time series. ``seed`` is an int or a numpy SeedSequence.
    """
    if dt > math.pi / np.max(np.abs(model.grid)) * (1 + 1e-12):
        raise ValueError("dt must resolve the model bandwidth: dt <= pi / max|omega|")
    n = int(math.ceil(duration / dt))
    rng = np.random.default_rng(seed)
    w = _fft_frequencies(n, dt)
    xx, xy = model.at(w)
    xx_neg, _ = model.at(-w)
    xx, xx_neg, xy = _check_psd(xx, xx_neg, xy)
    norm = 1.0 / (n * dt)
    amp = np.zeros(n, dtype=complex)

    # bins k and -k (mod n) for 0 < k < n/2
    k = np.arange(1, (n + 1) // 2)
    km = n - k
    p, q, c = xx[k] * norm, xx_neg[k] * norm, xy[k] * norm
    # covariance of (a_k, conj a_-k) is [[p, c], [c*, q]]; lower Cholesky factor
    l11 = np.sqrt(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        l21 = np.where(l11 > 0, np.conj(c) / l11, 0.0)
    l22 = np.sqrt(np.maximum(q - np.abs(l21) ** 2, 0.0))
    z1 = (rng.standard_normal(len(k)) + 1j * rng.standard_normal(len(k))) / math.sqrt(2)
    z2 = (rng.standard_normal(len(k)) + 1j * rng.standard_normal(len(k))) / math.sqrt(2)
    amp[k] = l11 * z1
    amp[km] = np.conj(l21 * z1 + l22 * z2)

    # self-paired bins: omega = 0 and, for even n, the Nyquist bin
    selfs = [0] + ([n // 2] if n % 2 == 0 else [])
    for b in selfs:
        p, c = xx[b] * norm, xy[b].real * norm
        vx = max(0.5 * (p + c), 0.0)
        vy = max(0.5 * (p - c), 0.0)
        amp[b] = math.sqrt(vx) * rng.standard_normal() + 1j * math.sqrt(vy) * rng.standard_normal()

    # xi_j = sum_k a_k exp(-i omega_k t_j)
    return np.fft.fft(amp)


def drive_phase(d: DriveParams, t):
    """phi_d(t) = phi0 + 2 x sin(Omega t), evaluated analytically."""
    t = np.asarray(t, dtype=float)
    if d.amplitude == 0:
        return np.full_like(t, d.phase_bias)
    return d.phase_bias + 2.0 * d.index * np.sin(d.drive_freq * t)


def junction_current_noise(xi, d: DriveParams, dt: float):
    """Real noise current (i/4)[xi* e^{i phi_d/2} - xi e^{-i phi_d/2}] = Im(xi e^{-i phi_d/2}) / 2."""
    t = dt * np.arange(xi.shape[-1])
    rot = np.exp(-0.5j * drive_phase(d, t))
    return 0.5 * np.imag(xi * rot)


# -- kernel --------------------------------------------------------------------

@dataclass(frozen=True)
class MemoryKernel:
    """Discretized junction admittance for a fixed step.

    ``taps[k]`` multiplies phi'(t - k dt); ``inverse_inductance`` and
    ``conductance`` are the local terms handled by the exact propagator.
    """

    dt: float
    taps: np.ndarray
    inverse_inductance: float
    conductance: float
    anticausal_ratio: float = 0.0
    reference_freq: float = float("nan")

    @property
    def memory_time(self) -> float:
        return self.dt * len(self.taps)

    def transfer(self, omega):
        """Admittance realized by the discrete scheme (local part included)."""
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        k = np.arange(len(self.taps))
        mem = np.exp(1j * np.outer(w, k) * self.dt) @ self.taps if len(self.taps) else 0.0
        hold = np.sinc(w * self.dt / (2 * math.pi)) ** 2
        with np.errstate(divide="ignore"):
            return self.conductance + 1j * self.inverse_inductance / w + hold * mem


def ohmic_kernel(dt: float, conductance: float) -> MemoryKernel:
    return MemoryKernel(dt, np.zeros(0), 0.0, conductance)


def build_memory_kernel(table: PolarizationTable, d: DriveParams, dt: float, memory_time: float,
                        reference_freq: float, omega_max: float = 36.0, wrap_factor: int = 64,
                        taper_fraction: float = 0.5) -> MemoryKernel:
    """Discretize Y_{J,0} for the time-stepping scheme.

    Hat-function weights ``w_k = (1/2 pi) int Y_mem(omega) dt sinc^2(omega dt/2)
    exp(-i omega k dt) d omega`` are computed with an FFT on a uniform
    frequency grid out to ``omega_max``. Y_mem = Y_{J,0} - i K / omega - 1
    removes the pole (K = inverse Josephson inductance) and the ohmic
    high-frequency limit. The last ``taper_fraction`` of the window is
    tapered with a raised cosine.

    Raises
    ------
    KernelNotCausal
        If the weights on (-T_mem, 0) carry more than 1e-6 of the energy.
    """
    n_taps = int(round(memory_time / dt))
    pole = inductive_pole(table, d)
    n_fft = int(2 ** math.ceil(math.log2(wrap_factor * max(n_taps, 1))))
    dw = 2 * math.pi / (n_fft * dt)
    w = (np.arange(int(omega_max / dw)) + 0.5) * dw
    y = driven_admittance(table, d, 0, w) - 1j * pole / w - 1.0
    f = y * dt * np.sinc(w * dt / (2 * math.pi)) ** 2
    fold = np.zeros(n_fft, dtype=complex)
    np.add.at(fold, np.arange(len(w)) % n_fft, f)
    k = np.arange(n_fft)
    # negative frequencies contribute the complex conjugate (real kernel)
    full = (dw / math.pi) * np.real(np.exp(-0.5j * dw * k * dt) * np.fft.fft(fold))
    causal = full[:n_taps].copy()
    anti = full[n_fft - n_taps:]
    ratio = float(np.sum(anti ** 2) / max(np.sum(causal ** 2), 1e-300))
    if ratio > CAUSALITY_LIMIT:
        raise KernelNotCausal(f"anticausal weight fraction {ratio:.2e} exceeds {CAUSALITY_LIMIT:.0e}")
    n_flat = int(n_taps * (1 - taper_fraction))
    taper = np.ones(n_taps)
    m = n_taps - n_flat
    if m > 0:
        taper[n_flat:] = 0.5 * (1 + np.cos(math.pi * (np.arange(m) + 1) / (m + 1)))
    taps = causal * taper

    # move the remaining mismatch at the reference frequency into local terms
    trial = MemoryKernel(dt, taps, pole, 1.0)
    exact = driven_admittance(table, d, 0, np.array([reference_freq]))[0]
    delta = exact - trial.transfer(reference_freq)[0]
    return MemoryKernel(dt, taps, pole + reference_freq * delta.imag, 1.0 + delta.real, ratio, reference_freq)


# -- time stepping -----------------------------------------------------------

def _propagator(inv_l, conductance, capacitance, dt):
    """Exact one-step maps for C v' = -phi inv_l - g v + f(t) with linear f."""
    a = np.array([[0.0, 1.0], [-inv_l / capacitance, -conductance / capacitance]])
    m = np.zeros((4, 4))
    m[:2, :2] = a
    m[1, 2] = 1.0 / capacitance
    m[2, 3] = 1.0
    ex = expm(m * dt)
    e = ex[:2, :2]
    phi1 = ex[:2, 2]          # int e^{A(dt-s)} b ds
    phi2 = ex[:2, 3]          # int e^{A(dt-s)} b s ds
    g1 = phi2 / dt
    g0 = phi1 - g1
    return e, g0, g1


@dataclass
class Trajectory:
    """Recorded (flux, flux velocity) samples of a batch of trajectories.

    ``samples`` has shape (n_traj, n_samples, 2); sample j is taken at time
    ``t0 + j * dt``.
    """

    dt: float
    samples: np.ndarray
    seed: object = None
    t0: float = 0.0

    @property
    def flux(self):
        return self.samples[..., 0]


def simulate(circuit: ResonatorCircuit, kernel: MemoryKernel, force, dt: float, *, record_from=0,
             record_every=1, initial=None, seed=None) -> Trajectory:
    """Integrate the flux equation for each row of ``force`` (the current I(t)).

    ``force`` has shape (n_traj, n_steps). Samples are recorded from step
    ``record_from`` on, every ``record_every`` steps.

    Raises
    ------
    UnstableStep
        If the step violates dt < 0.1 / omega_r or the solution blows up.
    """
    if abs(kernel.dt - dt) > 1e-12 * dt:
        raise ValueError("kernel was built for a different step")
    if not dt < 0.1 / circuit.omega_r:
        raise UnstableStep(f"dt = {dt} too large for omega_r = {circuit.omega_r}")
    force = np.atleast_2d(np.asarray(force, dtype=float))
    n_traj, n_steps = force.shape
    inv_l = 1.0 / circuit.inductance + kernel.inverse_inductance
    if inv_l <= 0:
        raise UnstableStep("effective inverse inductance is not positive")
    e, g0, g1 = _propagator(inv_l, kernel.conductance, circuit.capacitance, dt)
    taps = kernel.taps
    n_taps = len(taps)
    w0 = taps[0] if n_taps else 0.0
    hist_w = taps[1:][::-1].copy() if n_taps > 1 else np.zeros(0)
    h = max(n_taps - 1, 0)
    # doubled ring buffer: the last h velocities are always contiguous
    ring = np.zeros((2 * h + 1, n_traj))
    pos = 0

    phi = np.zeros(n_traj)
    vel = np.zeros(n_traj)
    if initial is not None:
        phi[:] = initial[0]
        vel[:] = initial[1]
    mem = w0 * vel
    f_prev = -mem - force[:, 0]
    n_rec = max(0, (n_steps - record_from + record_every - 1) // record_every)
    out = np.empty((n_traj, n_rec, 2))
    rec = 0
    if record_from == 0 and n_rec:
        out[:, 0, 0], out[:, 0, 1] = phi, vel
        rec = 1
    denom = 1.0 + g1[1] * w0
    bound = 1e150
    for n in range(1, n_steps):
        if h:
            ring[pos] = vel
            ring[pos + h] = vel
            pos = (pos + 1) % h
            hist = hist_w @ ring[pos:pos + h]
        else:
            hist = 0.0
        base_phi = e[0, 0] * phi + e[0, 1] * vel + g0[0] * f_prev
        base_vel = e[1, 0] * phi + e[1, 1] * vel + g0[1] * f_prev
        rhs = -hist - force[:, n]
        vel = (base_vel + g1[1] * rhs) / denom
        f_next = rhs - w0 * vel
        phi = base_phi + g1[0] * f_next
        f_prev = f_next
        if n >= record_from and (n - record_from) % record_every == 0 and rec < n_rec:
            out[:, rec, 0] = phi
            out[:, rec, 1] = vel
            rec += 1
        if n % 4096 == 0 and not np.all(np.abs(phi) < bound):
            raise UnstableStep(f"solution diverged at step {n}")
    if not np.all(np.isfinite(out[:, :rec])):
        raise UnstableStep("non-finite samples")
    return Trajectory(dt * record_every, out[:, :rec], seed, t0=record_from * dt)


# -- estimation --------------------------------------------------------------

@dataclass
class KeldyshEstimate:
    """Flux correlator estimate G^K(omega) = -i S_phi(omega) with jackknife errors.

    ``window_kernel(omega_offset)`` is the spectral window the estimate is
    convolved with; compare against an equally smoothed reference.
    """

    omega: np.ndarray
    value: np.ndarray
    error: np.ndarray
    n_traj: int
    segment_time: float
    dt: float
    n_segment_samples: int

    def window_kernel(self, offset):
        """Normalized spectral window (unit area in d omega / 2 pi)."""
        n = self.n_segment_samples
        win = np.hanning(n)
        t = self.dt * np.arange(n)
        off = np.atleast_1d(offset)
        out = np.empty(len(off))
        for i in range(0, len(off), 256):
            ph = np.exp(1j * np.outer(off[i:i + 256], t))
            out[i:i + 256] = np.abs(ph @ win) ** 2
        return out * self.dt / np.sum(win ** 2)

    def smoothed(self, spectrum_func, omega, span=None, n=4001):
        """Reference spectrum ``spectrum_func`` convolved with the estimator window."""
        span = span if span is not None else 40 * 2 * math.pi / self.segment_time
        off = np.linspace(-span, span, n)
        k = self.window_kernel(off)
        vals = spectrum_func(omega - off)
        return np.trapezoid(vals * k, off) / (2 * math.pi)


def estimate_keldysh(traj: Trajectory | list, omegas, n_segments=1, min_traj=100) -> KeldyshEstimate:
    """Period-averaged flux correlator at ``omegas`` from stationary samples.

    Each trajectory is split into ``n_segments`` segments; every segment
    gives a Hann-windowed periodogram. Trajectory averages are combined with
    a leave-one-out jackknife.

    Raises
    ------
    InsufficientStatistics
        If fewer than ``min_traj`` trajectories are supplied.
    """
    trajs = traj if isinstance(traj, list) else [traj]
    flux = np.concatenate([t.flux for t in trajs], axis=0)
    dt = trajs[0].dt
    n_traj, n_samp = flux.shape
    if n_traj < min_traj:
        raise InsufficientStatistics(f"{n_traj} trajectories, need at least {min_traj}")
    seg = n_samp // n_segments
    if seg < 16:
        raise InsufficientStatistics("segments too short")
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    win = np.hanning(seg)
    t = dt * np.arange(seg)
    ph = np.exp(1j * np.outer(t, omegas)) * win[:, None]
    norm = dt / np.sum(win ** 2)
    per_traj = np.zeros((n_traj, len(omegas)))
    for s in range(n_segments):
        block = flux[:, s * seg:(s + 1) * seg]
        block = block - block.mean(axis=1, keepdims=True)
        per_traj += np.abs(block @ ph) ** 2 * norm
    per_traj /= n_segments
    mean = per_traj.mean(axis=0)
    loo = (per_traj.sum(axis=0)[None, :] - per_traj) / (n_traj - 1)
    err = np.sqrt((n_traj - 1) / n_traj * np.sum((loo - mean) ** 2, axis=0))
    return KeldyshEstimate(omegas, -1j * mean, err, n_traj, seg * dt, dt, seg)


# -- ensembles ---------------------------------------------------------------

def run_ensemble(circuit: ResonatorCircuit, kernel: MemoryKernel, model: NoiseSpectralModel | None,
                 d: DriveParams, n_traj: int, duration: float, seed: int, *, discard: float = 0.0,
                 record_every: int = 1, batch: int = 50, white_noise: float | None = None):
    """Simulate ``n_traj`` trajectories in batches and return their recordings.

    The force is the junction noise current built from ``model`` or, if
    ``white_noise`` is given, classical white noise of spectral density
    ``white_noise`` (so <I(t) I(t')> = white_noise * delta(t - t')).
    """
    dt = kernel.dt
    if not dt < 0.1 / circuit.omega_r:
        raise UnstableStep(f"dt = {dt} too large for omega_r = {circuit.omega_r}")
    n_steps = int(math.ceil(duration / dt))
    record_from = int(math.ceil(discard / dt))
    seeds = np.random.SeedSequence(seed).spawn(n_traj)
    out = []
    for b0 in range(0, n_traj, batch):
        idx = range(b0, min(n_traj, b0 + batch))
        force = np.empty((len(idx), n_steps))
        for row, i in enumerate(idx):
            if white_noise is not None:
                rng = np.random.default_rng(seeds[i])
                force[row] = rng.standard_normal(n_steps) * math.sqrt(white_noise / dt)
            else:
                xi = synthesize_noise(model, n_steps * dt, dt, seeds[i])
                force[row] = junction_current_noise(xi, d, dt)
        out.append(simulate(circuit, kernel, force, dt, record_from=record_from,
                            record_every=record_every, seed=seed))
        del force
    return out
