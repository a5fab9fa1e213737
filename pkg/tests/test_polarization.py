import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import pi_oracle
from qpj.errors import OutOfTableRange, TemperatureMismatch
from qpj.material import LeadParams
from qpj.polarization import (GridSpec, JunctionParams, PolarizationTable, build_table,
                              hilbert_real_part, kramers_kronig_residual, pi_advanced, pi_keldysh_direct,
                              pi_keldysh_fdt, pi_retarded, pi_tilde, singular_frequencies)


@pytest.mark.parametrize("temp,omega", [(0.04, 1.2), (0.32, 0.5), (0.04, -1.7), (0.32, 2.6), (0.04, 0.3)])
def test_matches_brute_force_trapezoid(temp, omega):
    j = JunctionParams.symmetric(temp)
    ref = pi_oracle(0.5, 0.5, temp, omega)
    got = pi_retarded(j, omega) + pi_keldysh_direct(j, omega)
    scale = max(abs(v) for v in ref)
    for a, b in zip(got, ref):
        assert abs(a - b) <= 1e-4 * scale


def test_asymmetric_gaps_match_oracle():
    j = JunctionParams(LeadParams(0.6, 0.0, 0.32), LeadParams(0.4, 0.0, 0.32))
    ref = pi_oracle(0.6, 0.4, 0.32, 0.2)
    got = pi_retarded(j, 0.2)
    for a, b in zip(got, ref[:2]):
        assert abs(a - b) <= 1e-4 * max(abs(b), 1e-3)


def test_reality_and_advanced(hot_junction):
    w = np.array([0.1, 0.7, 1.3, 2.9])
    n, s = pi_retarded(hot_junction, w)
    nm, sm = pi_retarded(hot_junction, -w)
    assert np.allclose(nm, np.conj(n), atol=1e-8) and np.allclose(sm, np.conj(s), atol=1e-8)
    na, sa = pi_advanced(hot_junction, w)
    assert np.array_equal(na, np.conj(n))


def test_sign_convention_is_frozen(cold_table):
    w = np.linspace(1.05, 5.0, 40)
    n, _ = cold_table.retarded(w)
    assert np.all(n.imag < 1e-6)


def test_cold_gap(cold_table):
    ref = abs(cold_table.retarded(1.5)[0].imag)
    w = np.linspace(-0.9, 0.9, 181)
    n, s = cold_table.retarded(w)
    assert np.max(np.abs(n.imag)) < 1e-3 * ref
    assert np.max(np.abs(s.imag)) < 1e-3 * ref


def test_zero_temperature_keldysh_vanishes_at_origin():
    j = JunctionParams.symmetric(0.0)
    kn, _ = pi_keldysh_direct(j, 1e-3)
    assert abs(kn) < 1e-6


def test_fdt_matches_direct_on_random_points(hot_junction):
    rng = np.random.default_rng(1)
    w = rng.uniform(-3, 3, 50)
    dn, ds = pi_keldysh_direct(hot_junction, w)
    fn, fs = pi_keldysh_fdt(hot_junction, w)
    scale = max(np.max(np.abs(dn)), np.max(np.abs(ds)))
    assert np.max(np.abs(dn - fn)) < 1e-4 * scale
    assert np.max(np.abs(ds - fs)) < 1e-4 * scale


def test_fdt_low_frequency_growth_is_logarithmic(hot_junction):
    # Im Pi^R ~ w ln w for thermal quasiparticles, so Pi^K ~ ln w until the
    # broadening floor cuts it off; the value at zero stays finite
    n0, _ = pi_keldysh_fdt(hot_junction, 0.0)
    vals = [abs(pi_keldysh_fdt(hot_junction, w)[0]) for w in (1e-2, 1e-3, 1e-4)]
    assert np.isfinite(n0) and abs(n0) > vals[-1]
    steps = np.diff(vals)
    assert np.all(steps > 0) and steps[1] == pytest.approx(steps[0], rel=0.1)


def test_fdt_requires_equal_temperatures():
    j = JunctionParams(LeadParams(0.5, 0.0, 0.1), LeadParams(0.5, 0.0, 0.2))
    with pytest.raises(TemperatureMismatch):
        pi_keldysh_fdt(j, 0.3)


def test_grid_clusters_at_singularities():
    j = JunctionParams(LeadParams(0.6), LeadParams(0.4))
    grid = GridSpec(omega_max=3.0).nodes(singular_frequencies(j))
    assert np.all(np.diff(grid) > 0)
    assert np.allclose(grid, -grid[::-1])
    for c in (1.0, 0.2):
        near = grid[np.abs(grid - c) < 1e-3]
        assert len(near) > 20 and np.min(np.abs(near - c)) == 0


def test_table_interpolation(cold_junction, cold_table):
    node = cold_table.grid[700]
    n, s = cold_table.retarded(node)
    assert n == cold_table.pi_n_ret[700] and s == cold_table.pi_s_ret[700]
    mids = 0.5 * (cold_table.grid[1:] + cold_table.grid[:-1])
    pick = mids[(np.abs(mids) > 0.2) & (np.abs(np.abs(mids) - 1) > 0.06)][::97]
    n_i, s_i = cold_table.retarded(pick)
    n_d, s_d = pi_retarded(cold_junction, pick)
    scale = np.max(np.abs(cold_table.pi_n_ret))
    assert np.max(np.abs(n_i - n_d)) < 1e-3 * scale
    assert np.max(np.abs(s_i - s_d)) < 1e-3 * scale


def test_table_range_is_enforced(cold_table):
    with pytest.raises(OutOfTableRange):
        cold_table.retarded(7.0)


def test_table_csv_round_trip(cold_table):
    buf = io.StringIO()
    cold_table.to_csv(buf)
    buf.seek(0)
    back = PolarizationTable.from_csv(buf)
    assert np.array_equal(back.grid, cold_table.grid)
    assert np.array_equal(back.pi_s_kel, cold_table.pi_s_kel)
    assert back.meta_hash == cold_table.meta_hash


def test_table_csv_tamper_detected(cold_table):
    buf = io.StringIO()
    cold_table.to_csv(buf)
    text = buf.getvalue().replace('"temperature": 0.04', '"temperature": 0.05')
    with pytest.raises(ValueError):
        PolarizationTable.from_csv(io.StringIO(text))


def test_table_keldysh_follows_fdt_between_nodes(hot_table, hot_junction):
    w = np.array([0.123, 1.011, 2.345])
    kn, ks = hot_table.keldysh(w)
    fn, fs = pi_keldysh_fdt(hot_junction, w)
    assert np.allclose(kn, fn, rtol=2e-3) and np.allclose(ks, fs, rtol=2e-3)


def test_pi_tilde_shorthand(cold_table):
    assert pi_tilde(cold_table, 0.0, 0.7, "normal") == 0
    s0 = cold_table.retarded(0.0)[1]
    assert pi_tilde(cold_table, 0.0, 0.0, "anomalous") == pytest.approx(s0 / 2)
    n12, _ = cold_table.retarded(1.2)
    n0, _ = cold_table.retarded(0.0)
    assert pi_tilde(cold_table, 1.2, 0.0, "normal") == pytest.approx((n12 - n0) / 4)
    with pytest.raises(ValueError):
        pi_tilde(cold_table, 1.0, 0.0, "other")


def test_hilbert_of_zero_is_zero():
    grid = np.linspace(-5, 5, 101)
    assert np.array_equal(hilbert_real_part(grid, np.zeros_like(grid)), np.zeros_like(grid))


def test_hilbert_of_lorentzian():
    # 1/(w0 - w - i) has its pole in the lower half plane, so its real part
    # is the Hilbert transform of its imaginary part
    grid = np.linspace(-400, 400, 40001)
    resp = 1 / (0.3 - grid - 1j)
    recon = hilbert_real_part(grid, resp.imag)
    core = np.abs(grid) < 5
    assert np.max(np.abs(recon[core] - resp.real[core])) < 5e-3


def test_kk_flags_inconsistent_table(cold_table):
    fake = PolarizationTable(cold_table.grid, cold_table.pi_n_ret.real + 0j, cold_table.pi_s_ret.real + 0j,
                             cold_table.pi_n_kel, cold_table.pi_s_kel, cold_table.junction)
    assert kramers_kronig_residual(fake) > 0.5
    assert kramers_kronig_residual(cold_table) < 0.05
