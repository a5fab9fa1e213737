import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bessel_series
from qpj.errors import OutOfTableRange, TruncationWarning
from qpj.junction import (DriveParams, ambegaokar_baratoff, admittance_csv_rows, dc_josephson_current,
                          drive_current_harmonics, driven_admittance, fourier_coeff, inductive_pole,
                          josephson_energy, n_max, static_admittance, R_QUANTUM)
from qpj.polarization import GridSpec, JunctionParams, build_table
from qpj.units import UnitSystem

LADDER = dict(amplitude=0.5, drive_freq=0.155)


def test_undriven_coefficients():
    d = DriveParams(phase_bias=0.8)
    c = fourier_coeff(d, np.arange(-3, 4))
    expected = np.zeros(7, complex)
    expected[3] = np.exp(0.4j)
    assert np.allclose(c, expected, atol=0)
    assert n_max(d) == 0


@given(st.floats(0.0, 30.0), st.floats(0.05, 2.0), st.floats(0, 2 * math.pi))
@settings(max_examples=40)
def test_bessel_sum_rule(amp, freq, phi):
    d = DriveParams(phi, amp, freq)
    nm = n_max(d)
    c = fourier_coeff(d, np.arange(-nm, nm + 1))
    assert np.sum(np.abs(c) ** 2) == pytest.approx(1.0, abs=1e-10)
    assert np.all(np.abs(c) <= 1 + 1e-15)


def test_ladder_central_coefficient_against_series():
    d = DriveParams(0.0, **LADDER)
    x = 0.5 / 0.155
    assert fourier_coeff(d, 0) == pytest.approx(bessel_series(0, -x), abs=1e-12)
    for n in (-4, -1, 1, 3, 7):
        assert fourier_coeff(d, n).real == pytest.approx(bessel_series(n, -x), abs=1e-12)
    d_pi = DriveParams(math.pi, **LADDER)
    assert fourier_coeff(d_pi, 0) == pytest.approx(1j * bessel_series(0, -x), abs=1e-12)


def test_truncation_warning(cold_table):
    d = DriveParams(0.0, 0.5, 0.155)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        driven_admittance(cold_table, DriveParams(0.0, 0.05, 0.3), 0, np.array([0.5]))
    import qpj.junction as jn
    old = jn.TRUNCATION_LIMIT
    try:
        jn.TRUNCATION_LIMIT = 0.0
        with pytest.warns(TruncationWarning):
            driven_admittance(cold_table, DriveParams(0.0, 0.05, 0.3), 0, np.array([0.5]))
    finally:
        jn.TRUNCATION_LIMIT = old


@pytest.mark.parametrize("phi", [0.0, 0.7, math.pi])
def test_drive_off_collapse(cold_table, phi):
    w = np.linspace(-2.9, 2.9, 116)
    y0 = driven_admittance(cold_table, DriveParams(phi), 0, w)
    ys = static_admittance(cold_table, phi, w)
    assert np.max(np.abs(y0 - ys)) < 1e-12


def test_cold_subgap_is_inductive(cold_table):
    w = np.array([0.05, 0.1, 0.2, 0.4])
    y = static_admittance(cold_table, 0.0, w)
    assert np.max(np.abs(y.real)) < 1e-3 * np.min(np.abs(y.imag))
    # Im Y ~ K / w: w Im Y nearly constant
    assert np.ptp(w * y.imag) < 0.1 * abs(w[0] * y.imag[0])
    y_pi = static_admittance(cold_table, math.pi, w)
    assert np.all(np.sign(y_pi.imag) == -np.sign(y.imag))


def test_hot_phase_pi_suppresses_dissipation(hot_table):
    w = np.array([0.05, 0.1, 0.2])
    re0 = static_admittance(hot_table, 0.0, w).real
    re_pi = static_admittance(hot_table, math.pi, w).real
    ratio = re_pi / re0
    assert np.all(ratio < 0.5) and np.all(np.diff(ratio) > 0)


@pytest.mark.parametrize("phi", [0.0, math.pi / 4, math.pi / 2, math.pi])
def test_passivity(cold_table, hot_table, phi):
    w = np.linspace(-5.9, 5.9, 400)
    w = w[w != 0]
    for table in (cold_table, hot_table):
        assert np.min(static_admittance(table, phi, w).real) >= -1e-6


def test_driven_reality(cold_table):
    d = DriveParams(0.3, 0.2, 0.2)
    w = np.array([0.07, 0.6, 1.3])
    assert np.allclose(driven_admittance(cold_table, d, 0, -w), np.conj(driven_admittance(cold_table, d, 0, w)),
                       atol=1e-8)


def test_drive_reduces_inductive_response(cold_table):
    k0 = inductive_pole(cold_table, DriveParams())
    assert k0 > 0
    for amp in (0.05, 0.1, 0.3):
        assert abs(inductive_pole(cold_table, DriveParams(0.0, amp, 0.155))) < k0


def test_inductive_pole_matches_low_frequency_limit(cold_table):
    d = DriveParams(0.0, 0.1, 0.1)
    w = 1e-4
    y = driven_admittance(cold_table, d, 0, np.array([w]))[0]
    assert w * y.imag == pytest.approx(inductive_pole(cold_table, d), rel=1e-3)


def test_out_of_range(cold_table):
    with pytest.raises(OutOfTableRange):
        driven_admittance(cold_table, DriveParams(0.0, 0.5, 0.155), 0, np.array([2.9]))


def test_dc_current(cold_table):
    assert dc_josephson_current(cold_table, 0.0) == 0.0
    assert abs(dc_josephson_current(cold_table, math.pi)) < 1e-12
    # E_J = (Phi0 / 2 pi) I_c / 2 links the two
    i_c = dc_josephson_current(cold_table, math.pi / 2)
    e_j = josephson_energy(cold_table)
    assert e_j == pytest.approx(0.5 * R_QUANTUM / (2 * math.pi * 30e3) * 2 * i_c, rel=1e-12)


def test_drive_current_harmonics(cold_table):
    phi = 0.9
    a = drive_current_harmonics(cold_table, DriveParams(phi), [-1, 0, 1])
    assert abs(a[0]) < 1e-14 and abs(a[2]) < 1e-14
    assert a[1].imag == pytest.approx(dc_josephson_current(cold_table, phi), rel=1e-12)
    # the current is the imaginary part of the harmonic sum
    assert abs(drive_current_harmonics(cold_table, DriveParams(0.0), [0])[0].imag) < 1e-14


def test_drive_current_harmonics_decay(cold_table):
    d = DriveParams(0.4, 0.5, 0.155)
    x = 0.5 / 0.155
    n = np.arange(0, 16)
    amp = np.abs(drive_current_harmonics(cold_table, d, list(n)))
    beyond = amp[n > 2 * x + 3]
    assert np.all(np.diff(beyond) < 0)
    assert beyond[-1] < 1e-3 * amp.max()


def test_ambegaokar_baratoff_table1():
    u = UnitSystem.from_mev(0.2, 0.2, 30e3)
    temp = u.temperature(0.2)
    table = build_table(JunctionParams.symmetric(temp), GridSpec(omega_max=1.0, step=0.05))
    expected = (6.4532 / 60.0) * 0.5 * math.tanh(0.5 / (2 * temp))
    assert josephson_energy(table) == pytest.approx(expected, rel=5e-3)
    assert ambegaokar_baratoff(0.5, temp, 30e3) == pytest.approx(expected, rel=1e-3)


def test_josephson_energy_vanishes_when_hot():
    table = build_table(JunctionParams.symmetric(50.0), GridSpec(omega_max=1.0, step=0.05))
    assert abs(josephson_energy(table)) < 2e-2 * ambegaokar_baratoff(0.5, 0.0, 30e3)


def test_csv_rows():
    header, rows = admittance_csv_rows([0.1, 0.2], np.array([1 + 2j, 3 - 1j]))
    assert header == ["omega", "re_Y", "im_Y"] and rows[1] == ["0.2", "3.0", "-1.0"]
    header, rows = admittance_csv_rows([0.1], np.array([1j]), n=2)
    assert header[-1] == "n" and rows[0][-1] == "2"
