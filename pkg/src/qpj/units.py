"""Conversion between SI quantities and the reduced units used internally.

Reduced units: hbar = 1, energies and angular frequencies in Delta_Sigma
(sum of both gaps), conductances in 1/R_J. Derived units follow:
capacitance hbar/(Delta_Sigma R_J), inductance hbar R_J/Delta_Sigma,
power Delta_Sigma^2/hbar.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import constants

HBAR = constants.hbar
E = constants.e
K_B = constants.k
MEV = 1e-3 * constants.e


@dataclass(frozen=True)
class UnitSystem:
    """Scale factors for one (Delta_Sigma, R_J) pair.

    ``delta_sigma`` in joules, ``tunnel_resistance`` in ohms.
    """

    delta_sigma: float
    tunnel_resistance: float

    @classmethod
    def from_mev(cls, gap_left_mev, gap_right_mev, tunnel_resistance_ohm):
        return cls((gap_left_mev + gap_right_mev) * MEV, tunnel_resistance_ohm)

    @property
    def omega_unit(self):
        """rad/s per reduced frequency unit."""
        return self.delta_sigma / HBAR

    @property
    def capacitance_unit(self):
        return HBAR / (self.delta_sigma * self.tunnel_resistance)

    @property
    def inductance_unit(self):
        return HBAR * self.tunnel_resistance / self.delta_sigma

    @property
    def power_unit(self):
        return self.delta_sigma ** 2 / HBAR

    # SI -> reduced
    def energy(self, joules):
        return joules / self.delta_sigma

    def energy_mev(self, mev):
        return mev * MEV / self.delta_sigma

    def temperature(self, kelvin):
        return K_B * kelvin / self.delta_sigma

    def angular_frequency(self, rad_per_s):
        return rad_per_s / self.omega_unit

    def frequency_hz(self, hz):
        return 2 * math.pi * hz / self.omega_unit

    def voltage(self, volts):
        """e V in units of Delta_Sigma."""
        return E * volts / self.delta_sigma

    def capacitance(self, farad):
        return farad / self.capacitance_unit

    def inductance(self, henry):
        return henry / self.inductance_unit

    def resistance(self, ohm):
        return ohm / self.tunnel_resistance

    # reduced -> SI
    def to_joules(self, x):
        return x * self.delta_sigma

    def to_kelvin(self, x):
        return x * self.delta_sigma / K_B

    def to_rad_per_s(self, x):
        return x * self.omega_unit

    def to_hz(self, x):
        return x * self.omega_unit / (2 * math.pi)

    def to_volts(self, x):
        return x * self.delta_sigma / E

    def to_farad(self, x):
        return x * self.capacitance_unit

    def to_henry(self, x):
        return x * self.inductance_unit

    def to_ohm(self, x):
        return x * self.tunnel_resistance

    def to_siemens(self, x):
        return x / self.tunnel_resistance

    def to_watt(self, x):
        return x * self.power_unit
