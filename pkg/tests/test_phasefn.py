"""Fields, actions and exponent adapters against independent references."""

import cmath
import math

import numpy as np
import pytest

from plflow.phasefn import (
    AtiAction,
    AtiPhase,
    CoincidentTimes,
    DomainWindow,
    HhgAction,
    HhgPhase,
    LaserField,
    PolynomialPhase,
    SeparablePhase,
    SwitchoverConfig,
    action_of,
    ev_to_au,
    omega_from_nm,
    ponderomotive_and_cutoff,
    stationary_momentum,
)

from .conftest import E0, IP, OMEGA
from . import oracles


def test_unit_conversions():
    assert ev_to_au(27.211386245988) == pytest.approx(1.0, abs=1e-12)
    # 1030 nm fundamental
    assert omega_from_nm(1030.0) == pytest.approx(0.044237, abs=1e-5)


def test_monochromatic_field_closed_forms(mono_field):
    t = np.linspace(-3.0, 200.0, 57)
    np.testing.assert_allclose(mono_field.electric(t).real,
                               E0 * np.sin(OMEGA * t), atol=1e-14)
    np.testing.assert_allclose(mono_field.vector_potential(t).real,
                               (E0 / OMEGA) * np.cos(OMEGA * t), atol=1e-13)


def test_two_colour_field_closed_forms(two_colour_field):
    t = np.linspace(0.0, 150.0, 41)
    expect = 0.05 * np.cos(OMEGA * t) + 0.015 * np.cos(2 * OMEGA * t + 0.65)
    np.testing.assert_allclose(two_colour_field.electric(t).real, expect,
                               atol=1e-14)


def test_field_is_minus_da_dt(two_colour_field):
    # E = -dA/dt, checked by finite differences at complex times too
    for t in (7.3, 40.0 + 2.5j, 100.0 - 4.0j):
        d = 1e-6
        fd = (two_colour_field.vector_potential(t + d)
              - two_colour_field.vector_potential(t - d)) / (2 * d)
        assert complex(fd) == pytest.approx(-complex(two_colour_field.electric(t)),
                                            abs=1e-7)


def test_integral_a_matches_quadrature(two_colour_field):
    f = two_colour_field
    for t in (11.0, 95.5):
        ref = oracles.quad_real_complexfn(lambda s: f.vector_potential(s), 0.0, t,
                                          limit=200)
        assert complex(f.integral_a(t)) == pytest.approx(ref, abs=1e-9)
    # complex endpoint via a straight path from the origin
    zt = 60.0 + 9.0j
    ref = oracles.gauss_path(lambda z: f.vector_potential(z), [0.0, zt])
    assert complex(f.integral_a(zt)) == pytest.approx(ref, abs=1e-10)


def test_integral_a2_matches_quadrature(switchover_45):
    f = switchover_45
    for t in (23.0, 130.0):
        ref = oracles.quad_real_complexfn(lambda s: f.vector_potential(s) ** 2,
                                          0.0, t, limit=200)
        assert complex(f.integral_a2(t)) == pytest.approx(ref, abs=1e-9)
    zt = 30.0 - 6.0j
    ref = oracles.gauss_path(lambda z: f.vector_potential(z) ** 2, [0.0, zt])
    assert complex(f.integral_a2(zt)) == pytest.approx(ref, abs=1e-10)


def test_quiver_energy_and_cutoff(mono_field):
    up, q_cut = ponderomotive_and_cutoff(mono_field, IP)
    assert up == pytest.approx(E0 ** 2 / (4 * OMEGA ** 2), rel=1e-12)
    assert q_cut == pytest.approx((IP + 3.17 * up) / OMEGA, rel=1e-12)
    assert q_cut == pytest.approx(36.455, abs=5e-3)


def test_switchover_amplitudes_and_up_invariance():
    thetas = np.linspace(0.0, math.pi / 2, 7)
    ups = []
    for th in thetas:
        cfg = SwitchoverConfig(th, E0, OMEGA)
        fld = cfg.field()
        assert cfg.e1 == pytest.approx(E0 * math.cos(th), abs=1e-15)
        assert cfg.e2 == pytest.approx(2 * E0 * math.sin(th), abs=1e-15)
        assert cfg.a2 == pytest.approx(E0 * math.sin(th) / OMEGA, abs=1e-15)
        t = np.linspace(0.0, 90.0, 31)
        expect = cfg.e1 * np.sin(OMEGA * t) + cfg.e2 * np.sin(2 * OMEGA * t)
        np.testing.assert_allclose(fld.electric(t).real, expect, atol=1e-13)
        ups.append(fld.up())
    np.testing.assert_allclose(ups, E0 ** 2 / (4 * OMEGA ** 2), rtol=1e-12)


def test_ati_action_derivatives_by_fd(mono_field):
    act = AtiAction(mono_field, IP, 0.3)
    ph = AtiPhase(act)
    for z in (20.0 + 11.0j, 70.0 - 3.0j, 5.0):
        z = complex(z)
        assert complex(ph.grad(z)) == pytest.approx(oracles.fd_grad(ph, [z]),
                                                    rel=1e-6, abs=1e-9)
        assert complex(ph.hess(z)) == pytest.approx(oracles.fd_hess(ph, [z]),
                                                    rel=1e-5, abs=1e-7)


def test_ati_gradient_is_envelope_form(mono_field):
    # dS/dt must equal Ip + (p + A)^2 / 2
    act = AtiAction(mono_field, IP, -0.4)
    z = 33.0 + 6.0j
    v = -0.4 + complex(mono_field.vector_potential(z))
    assert complex(act.grad(z)) == pytest.approx(IP + 0.5 * v * v, rel=1e-12)


def test_mono_saddle_closed_form(mono_field):
    # p = 0 tunnelling saddle: omega ts = pi/2 + i asinh(gamma)
    gamma = OMEGA * math.sqrt(2 * IP) / E0
    ts = (0.5 * math.pi + 1j * math.asinh(gamma)) / OMEGA
    act = AtiAction(mono_field, IP, 0.0)
    assert abs(complex(act.grad(ts))) < 1e-12
    # Im S at the saddle sets the tunnelling suppression; three routes:
    # direct closed form, path quadrature of dS/dt, and the textbook
    # gamma-expression for the monochromatic field.
    s_direct = complex(act.value(ts))
    s_path = oracles.gauss_path(lambda z: act.grad(z), [0.0, ts.real, ts])
    assert s_direct == pytest.approx(s_path, abs=1e-10)
    g2 = gamma * gamma
    closed = (IP / OMEGA) * ((1 + 1 / (2 * g2)) * math.asinh(gamma)
                             - math.sqrt(1 + g2) / (2 * gamma))
    assert s_direct.imag == pytest.approx(closed, rel=1e-12)
    assert s_direct.imag == pytest.approx(7.748432083155, abs=1e-9)
    # with exponent i S, the upper saddle is exponentially suppressed
    h_saddle = complex(AtiPhase(act).exponent(ts)).real
    assert h_saddle == pytest.approx(-7.748432083155, abs=1e-9)


def test_stationary_momentum_and_raises(mono_field):
    ti, tr = 20.0, 80.0
    ps = stationary_momentum(mono_field, ti, tr)
    excursion = (mono_field.integral_a(tr) - mono_field.integral_a(ti)
                 + ps * (tr - ti))
    assert abs(complex(excursion)) < 1e-12
    with pytest.raises(CoincidentTimes):
        stationary_momentum(mono_field, 5.0, 5.0 + 1e-15)


def test_hhg_action_equals_ati_difference(mono_field):
    # S(ti, tr) must coincide with S_ati(ps; tr) - S_ati(ps; ti) - q w tr
    q = 25.0
    hhg = HhgAction(mono_field, IP, q)
    for ti, tr in ((15.0, 90.0), (10.0 + 4.0j, 95.0 - 7.0j)):
        ps = complex(hhg.momentum(ti, tr))
        ati = AtiAction(mono_field, IP, ps)
        expect = (complex(ati.value(tr)) - complex(ati.value(ti))
                  - q * OMEGA * tr)
        assert complex(hhg.value(ti, tr)) == pytest.approx(expect, rel=1e-11)


def test_hhg_gradient_closed_forms(mono_field):
    q = 25.0
    hhg = HhgAction(mono_field, IP, q)
    ti, tr = 12.0 + 5.0j, 88.0 - 2.0j
    ps = complex(hhg.momentum(ti, tr))
    ki = ps + complex(mono_field.vector_potential(ti))
    kr = ps + complex(mono_field.vector_potential(tr))
    gi, gr = hhg.grad(ti, tr)
    assert complex(gi) == pytest.approx(-0.5 * ki * ki - IP, rel=1e-11)
    assert complex(gr) == pytest.approx(0.5 * kr * kr + IP - q * OMEGA, rel=1e-11)


def test_hhg_derivatives_by_fd(two_colour_field):
    hhg = HhgAction(two_colour_field, IP, 23.0)
    ph = HhgPhase(hhg)
    pts = [(18.0 + 6.0j, 95.0 - 4.0j), (40.0, 120.0)]
    for ti, tr in pts:
        gi, gr = ph.grad(ti, tr)
        fgi, fgr = oracles.fd_grad(ph, [ti, tr])
        assert complex(gi) == pytest.approx(fgi, rel=1e-6, abs=1e-9)
        assert complex(gr) == pytest.approx(fgr, rel=1e-6, abs=1e-9)
        h11, h12, h22 = ph.hess(ti, tr)
        f11, f12, f22 = oracles.fd_hess(ph, [ti, tr])
        assert complex(h11) == pytest.approx(f11, rel=1e-4, abs=1e-7)
        assert complex(h12) == pytest.approx(f12, rel=1e-4, abs=1e-7)
        assert complex(h22) == pytest.approx(f22, rel=1e-4, abs=1e-7)


def test_hhg_periodicity_shift(mono_field):
    # shifting both times by one period changes S by exactly -2 pi q
    q = 25.0
    hhg = HhgAction(mono_field, IP, q)
    T = mono_field.period
    ti, tr = 14.0 + 3.0j, 101.0 - 6.0j
    delta = complex(hhg.value(ti + T, tr + T)) - complex(hhg.value(ti, tr))
    assert delta == pytest.approx(-2 * math.pi * q, abs=1e-9)


def test_polynomial_phase_airy():
    # phi = z^3/3 + a z
    ph = PolynomialPhase((0.0, 2.0, 0.0, 1.0 / 3.0))
    z = 0.7 - 1.1j
    assert complex(ph.exponent(z)) == pytest.approx(1j * (z ** 3 / 3 + 2 * z),
                                                    rel=1e-12)
    assert complex(ph.grad(z)) == pytest.approx(oracles.fd_grad(ph, [z]),
                                                rel=1e-8)
    assert complex(ph.hess(z)) == pytest.approx(oracles.fd_hess(ph, [z]),
                                                rel=1e-6)


def test_separable_phase_and_action_sign(mono_field):
    fresnel = PolynomialPhase((0.0, 0.0, 1.0))
    two = SeparablePhase(fresnel, fresnel)
    z1, z2 = 0.4 + 0.2j, -0.3 + 0.5j
    assert complex(two.exponent(z1, z2)) == pytest.approx(
        1j * (z1 ** 2 + z2 ** 2), rel=1e-12)
    g1, g2 = two.grad(z1, z2)
    assert complex(g1) == pytest.approx(2j * z1, rel=1e-12)
    assert complex(g2) == pytest.approx(2j * z2, rel=1e-12)
    # action_of undoes the i of the adapters
    act = AtiAction(mono_field, IP, 0.1)
    z = 25.0 + 8.0j
    assert action_of(AtiPhase(act), (z,)) == pytest.approx(
        complex(act.value(z)), rel=1e-12)


def test_domain_window():
    win = DomainWindow(OMEGA)
    T = win.period
    assert T == pytest.approx(2 * math.pi / OMEGA, rel=1e-14)
    assert win.contains_time(0.5 * T)
    assert win.contains_time(-0.02 * T)
    assert not win.contains_time(1.2 * T)
    assert win.contains_pair(10.0, 10.0 + 0.8 * T)
    assert not win.contains_pair(10.0, 10.0 + 1.4 * T)
    assert not win.contains_pair(10.0, 9.0)
