"""Static and harmonically driven junction response.

Admittances are in units of 1/R_J, currents in units of Delta_Sigma/(2e R_J),
energies in units of Delta_Sigma. The drive enters through the phase
phi_d(t) = phi0 + 2x sin(Omega t) with x = e V0 / (hbar Omega).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import constants
from scipy.special import jv

from .errors import TruncationWarning
from .polarization import PolarizationTable, pi_tilde

#: resistance quantum h / (2e)^2 in ohms
R_QUANTUM = constants.h / (2 * constants.e) ** 2

TRUNCATION_LIMIT = 1e-12


@dataclass(frozen=True)
class DriveParams:
    """Drive of the junction phase.

    ``amplitude`` is e V0 in units of Delta_Sigma and ``drive_freq`` is
    hbar Omega in the same unit, so their ratio is the drive index x.
    """

    phase_bias: float = 0.0
    amplitude: float = 0.0
    drive_freq: float = 1.0

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValueError("amplitude must be non-negative")
        if self.amplitude > 0 and not self.drive_freq > 0:
            raise ValueError("drive_freq must be positive when the drive is on")

    @property
    def index(self) -> float:
        if self.amplitude == 0:
            return 0.0
        return self.amplitude / self.drive_freq


def n_max(d: DriveParams) -> int:
    """Number of sidebands kept on each side of the harmonic sums."""
    x = d.index
    if x == 0:
        return 0
    return int(math.ceil(x + 10.0 * x ** (1.0 / 3.0) + 12.0))


def fourier_coeff(d: DriveParams, n):
    """c_n = exp(i phi0 / 2) J_n(-x)."""
    n = np.asarray(n)
    return np.exp(0.5j * d.phase_bias) * jv(n, -d.index)


def _coefficients(d: DriveParams, n_extra=0):
    """Sideband orders and coefficients c_k for |k| <= 2 N + n_extra."""
    nm = n_max(d)
    k = np.arange(-2 * nm - n_extra, 2 * nm + n_extra + 1)
    c = fourier_coeff(d, k)
    if nm > 0:
        edge = abs(jv(nm, d.index)) ** 2
        if edge > TRUNCATION_LIMIT:
            warnings.warn(f"|c_N|^2 = {edge:.3e} at N = {nm}", TruncationWarning, stacklevel=3)
    return nm, k, c


def static_admittance(table: PolarizationTable, phase_bias, omega):
    """Admittance of the undriven junction at phase bias ``phase_bias``.

    ``omega`` must be non-zero; see :func:`inductive_pole` for the limit.
    """
    omega = np.asarray(omega, dtype=float)
    tn = pi_tilde(table, omega, 0.0, "normal")
    ts = pi_tilde(table, omega, 0.0, "anomalous")
    return 1j / omega * (tn + ts * np.cos(phase_bias))


def driven_admittance(table: PolarizationTable, d: DriveParams, n: int, omega):
    """Harmonic n of the admittance under drive: probe at omega, response at omega + n Omega."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    nm, k, c = _coefficients(d, abs(n))
    offset = -k[0]

    def coeff(m):
        return c[m + offset]

    total = np.zeros(omega.shape, dtype=complex)
    for npr in range(-nm, nm + 1):
        wp = npr * d.drive_freq
        tn = pi_tilde(table, omega, wp, "normal")
        ts = pi_tilde(table, omega, wp, "anomalous")
        left_a = np.conj(coeff(npr - n))
        left_b = coeff(n - npr)
        right_a = coeff(npr)
        right_b = np.conj(coeff(-npr))
        total += left_a * (tn * right_a + ts * right_b) + left_b * (ts * right_a + tn * right_b)
    out = 0.5j / omega * total
    return out


def inductive_pole(table: PolarizationTable, d: DriveParams) -> float:
    """Real K with omega * Y_{J,0} -> i K as omega -> 0.

    K equals 1/L_J in reduced units (inverse Josephson inductance).
    """
    nm = n_max(d)
    npr = np.arange(-nm, nm + 1)
    j2 = jv(npr, -d.index) ** 2
    _, s = table.retarded(npr * d.drive_freq)
    val = 0.5 * np.cos(d.phase_bias) * np.sum((-1.0) ** npr * j2 * s)
    return float(val.real)


def dc_josephson_current(table: PolarizationTable, phase_bias) -> float:
    _, s0 = table.retarded(0.0)
    return 0.5 * float(np.real(s0)) * math.sin(phase_bias)


def drive_current_harmonics(table: PolarizationTable, d: DriveParams, n_range):
    """Complex amplitudes a_n of the drive-only current I(t) = Im sum_n a_n exp(-i n Omega t)."""
    nm, k, c = _coefficients(d, max(abs(int(n)) for n in n_range) if len(n_range) else 0)
    offset = -k[0]
    npr = np.arange(-nm, nm + 1)
    n_ret, s_ret = table.retarded(npr * d.drive_freq)
    out = []
    for n in n_range:
        cn = c[npr + offset]
        a = cn * (c[n - npr + offset] * s_ret + np.conj(c[npr - n + offset]) * n_ret)
        out.append(0.5 * np.sum(a))
    return np.array(out)


def josephson_energy(table: PolarizationTable) -> float:
    """E_J in units of Delta_Sigma, using the table's R_J in ohms."""
    _, s0 = table.retarded(0.0)
    return 0.5 * R_QUANTUM / (2 * math.pi * table.junction.tunnel_resistance) * float(np.real(s0))


def ambegaokar_baratoff(gap, temperature, tunnel_resistance) -> float:
    """Closed-form E_J = (R_Q / 2R_J) Delta tanh(Delta / 2T) for a symmetric junction."""
    t = 1.0 if temperature == 0 else math.tanh(gap / (2 * temperature))
    return R_QUANTUM / (2 * tunnel_resistance) * gap * t


def admittance_csv_rows(omega, values, n=0):
    """Rows for admittance CSV output; the harmonic column appears only for n != 0."""
    header = ["omega", "re_Y", "im_Y"] + (["n"] if n != 0 else [])
    rows = []
    for w, y in zip(np.atleast_1d(omega), np.atleast_1d(values)):
        row = [repr(float(w)), repr(float(y.real)), repr(float(y.imag))]
        if n != 0:
            row.append(str(n))
        rows.append(row)
    return header, rows
