import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpj.material import (NU_MIN, LeadParams, coth_safe, green_advanced, green_keldysh,
                          green_retarded, occupation)

LEAD = LeadParams(0.5)
omegas = st.floats(-5.0, 5.0, allow_nan=False)


def test_zero_frequency_values():
    g, f = green_retarded(LEAD, 0.0)
    assert abs(g) < 1e-5
    assert f == pytest.approx(-1.0, abs=1e-10)
    ga, fa = green_advanced(LEAD, 0.0)
    assert abs(ga) < 1e-5 and fa == pytest.approx(-1.0, abs=1e-10)


@pytest.mark.parametrize("nu", [1e-4, 1e-5, 1e-6])
def test_above_gap_value_converges_with_broadening(nu):
    g, _ = green_retarded(LeadParams(0.5, nu), 1.0)
    assert g == pytest.approx(-2j / math.sqrt(3), abs=10 * nu)
    ga, _ = green_advanced(LeadParams(0.5, nu), 1.0)
    assert ga == pytest.approx(2j / math.sqrt(3), abs=10 * nu)


def test_subgap_branch_is_real():
    g, _ = green_retarded(LEAD, 0.15)
    assert abs(g.imag) < 10 * NU_MIN
    assert abs(g) == pytest.approx(0.3 / math.sqrt(1 - 0.09), rel=1e-9)


def test_zero_rate_uses_floor():
    assert LEAD.nu == NU_MIN
    assert LeadParams(0.5, 1e-3).nu == 1e-3


@pytest.mark.parametrize("kw", [dict(gap=0), dict(gap=0.5, dynes_rate=-1), dict(gap=0.5, temperature=-1)])
def test_invalid_lead_rejected(kw):
    with pytest.raises(ValueError):
        LeadParams(**kw)


@given(omegas)
def test_advanced_is_conjugate(w):
    g, f = green_retarded(LEAD, w)
    ga, fa = green_advanced(LEAD, w)
    assert ga == np.conj(g) and fa == np.conj(f)


@given(omegas)
def test_parity(w):
    g, f = green_retarded(LEAD, w)
    gm, fm = green_retarded(LEAD, -w)
    assert abs(gm + np.conj(g)) < 1e-10
    assert abs(fm - np.conj(f)) < 1e-10


@given(st.floats(-0.499, 0.499))
def test_subgap_imaginary_part_small(w):
    g, f = green_retarded(LEAD, w)
    # sqrt(Delta^2 - w^2) is tiny only right at the gap edge
    bound = 10 * NU_MIN / math.sqrt(1 - (w / 0.5) ** 2) ** 3
    assert abs(g.imag) < bound and abs(f.imag) < bound


@given(omegas, st.floats(0.0, 1.0))
def test_keldysh_mirror_relations(w, t):
    # follows from the retarded parity: g^K is odd and f^K even, both imaginary
    lead = LeadParams(0.5, 0.0, t)
    gk, fk = green_keldysh(lead, w)
    gkm, fkm = green_keldysh(lead, -w)
    assert abs(fk + np.conj(fkm)) < 1e-10
    assert abs(gk - np.conj(gkm)) < 1e-10
    assert gk.real == 0 and fk.real == 0


def test_keldysh_examples():
    cold = LeadParams(0.5, 0.0, 0.0)
    assert abs(green_keldysh(cold, 0.2).g) < 1e-5
    hot = LeadParams(0.5, 0.0, 0.3)
    gk, fk = green_keldysh(hot, 0.0)
    assert gk == 0 and fk == 0
    lead = LeadParams(0.5, 0.0, 0.04)
    w = 0.75
    gr, fr = green_retarded(lead, w)
    expected = math.tanh(w / (2 * 0.04)) * (gr - np.conj(gr))
    assert green_keldysh(lead, w).g == pytest.approx(expected, rel=1e-12)


def test_occupation():
    lead = LeadParams(0.5, 0.0, 0.1)
    assert occupation(lead, 0.0) == 0.5
    assert occupation(lead, 1e3) == pytest.approx(0.0, abs=1e-300)
    assert occupation(lead, 0.1) == pytest.approx(1 / (1 + math.e), rel=1e-12)
    zero = LeadParams(0.5)
    assert list(occupation(zero, np.array([-1.0, 0.0, 1.0]))) == [1.0, 0.5, 0.0]


def test_coth_safe():
    assert coth_safe(1.0) == pytest.approx(1 / math.tanh(1.0), rel=1e-14)
    assert coth_safe(1e3) == 1.0
    x = 1e-12
    assert coth_safe(x) == pytest.approx(1 / x + x / 3, rel=1e-9)
    assert coth_safe(-2.0) == pytest.approx(-coth_safe(2.0))
