"""BCS quasiclassical Green's functions of a single superconducting lead.

Reduced units throughout: hbar = 1, energies and angular frequencies in
units of the total gap Delta_Sigma, temperatures as k_B T in the same unit.
All functions broadcast over numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

#: Dynes-rate floor substituted whenever a lead is configured with zero rate.
NU_MIN = 1e-6

#: Below this |x| coth is evaluated from its Laurent series.
COTH_SERIES_CUTOFF = 1e-4


@dataclass(frozen=True)
class LeadParams:
    """One superconducting lead.

    Parameters
    ----------
    gap : float
        Gap parameter Delta (> 0).
    dynes_rate : float
        Subgap broadening rate nu (>= 0). Zero is replaced by ``NU_MIN``.
    temperature : float
        k_B T of the quasiparticles (>= 0).
    """

    gap: float
    dynes_rate: float = 0.0
    temperature: float = 0.0

    def __post_init__(self):
        if not self.gap > 0:
            raise ValueError(f"gap must be positive, got {self.gap}")
        if not self.dynes_rate >= 0:
            raise ValueError(f"dynes_rate must be non-negative, got {self.dynes_rate}")
        if not self.temperature >= 0:
            raise ValueError(f"temperature must be non-negative, got {self.temperature}")

    @property
    def nu(self) -> float:
        """Effective broadening actually used in the Green's functions."""
        return self.dynes_rate if self.dynes_rate > 0 else NU_MIN


class GreensValue(NamedTuple):
    g: np.ndarray | complex
    f: np.ndarray | complex


def _denominator(lead: LeadParams, z):
    # principal branch; Im z != 0 keeps the argument off the cut
    return np.sqrt(lead.gap**2 - z * z)


def green_retarded(lead: LeadParams, omega) -> GreensValue:
    z = np.asarray(omega, dtype=float) + 1j * lead.nu
    root = _denominator(lead, z)
    return GreensValue(-z / root, -lead.gap / root)


def green_advanced(lead: LeadParams, omega) -> GreensValue:
    g, f = green_retarded(lead, omega)
    return GreensValue(np.conj(g), np.conj(f))


def occupation(lead: LeadParams, energy):
    """Fermi-Dirac occupation; an exact step function at zero temperature."""
    e = np.asarray(energy, dtype=float)
    if lead.temperature == 0:
        return np.where(e < 0, 1.0, np.where(e > 0, 0.0, 0.5))
    # 1/(1+exp(x)) written via tanh to avoid overflow
    return 0.5 * (1.0 - np.tanh(e / (2.0 * lead.temperature)))


def thermal_factor(lead: LeadParams, energy):
    """1 - 2 n(energy) = tanh(energy / 2T), sign(energy) at T = 0."""
    e = np.asarray(energy, dtype=float)
    if lead.temperature == 0:
        return np.sign(e)
    return np.tanh(e / (2.0 * lead.temperature))


def green_keldysh(lead: LeadParams, omega) -> GreensValue:
    gr, fr = green_retarded(lead, omega)
    t = thermal_factor(lead, omega)
    return GreensValue((gr - np.conj(gr)) * t, (fr - np.conj(fr)) * t)


def spectral_pair(lead: LeadParams, omega):
    """Return (g^R, f^R, g^R - g^A, f^R - f^A, 1 - 2n) evaluated at ``omega``.

    Shared by the polarization integrands so each sqrt is computed once.
    """
    z = np.asarray(omega, dtype=float) + 1j * lead.nu
    root = _denominator(lead, z)
    gr = -z / root
    fr = -lead.gap / root
    return gr, fr, 2j * gr.imag, 2j * fr.imag, thermal_factor(lead, omega)


def coth_safe(x):
    """coth(x) with the 1/x + x/3 series near the origin."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) <= COTH_SERIES_CUTOFF
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(small, 1.0 / x + x / 3.0, 1.0 / np.tanh(np.where(small, 1.0, x)))
    return out[()] if out.ndim == 0 else out
