"""Contour flow, flowed quadrature, and 1D relevance decisions."""

import cmath
import math

import numpy as np
import pytest

from plflow.phasefn import (
    AtiAction,
    AtiPhase,
    DomainWindow,
    LaserField,
    PolynomialPhase,
)
from plflow.flow1d import (
    BlowUp,
    Contour1D,
    FlowParams,
    Inconclusive,
    _ascend_ray,
    default_flow_params,
    flow_contour,
    oscillation_spread,
    quadrature_1d,
    relevance_1d,
)
from plflow.saddle import find_saddles, make_saddle, newton_refine, spm_contribution

from .conftest import E0, IP, OMEGA, label_quartet
from . import oracles

FRESNEL = PolynomialPhase((0.0, 0.0, 1.0))          # exponent i z^2
FRESNEL_VALUE = cmath.sqrt(math.pi) * cmath.exp(1j * math.pi / 4)
T = 2.0 * math.pi / OMEGA


def toy_params(**overrides):
    base = dict(delta_flow=2e-3, l_thresh=0.05, blowup_radius=100.0)
    base.update(overrides)
    return FlowParams(**base)


def flowed(phase, a, b, params, n_iter):
    c = Contour1D.from_segment(a, b, params.l_thresh)
    return flow_contour(phase, c, params, n_iter=n_iter)


# ---------------------------------------------------------------------------
# Toy phase: the thimble of e^{i z^2} is the diagonal line through 0
# ---------------------------------------------------------------------------


def test_fresnel_flow_matches_exact_value():
    c, _ = flowed(FRESNEL, -4.0, 4.0, toy_params(), 2200)
    v = quadrature_1d(FRESNEL, c)
    assert abs(v - FRESNEL_VALUE) / abs(FRESNEL_VALUE) < 1e-4


def test_flowed_contour_hugs_diagonal_line():
    c, _ = flowed(FRESNEL, -6.0, 6.0, toy_params(), 500)
    act = c.nodes[c.active]
    far = act[np.abs(act) > 0.5]
    assert far.size > 50
    ang = np.angle(far)
    # distance to the full line arg z = pi/4 (mod pi covers both rays)
    dist = np.abs((ang - math.pi / 4 + math.pi / 2) % math.pi - math.pi / 2)
    assert np.max(dist) < 0.05


def test_phase_drift_stays_small_on_live_nodes():
    params = toy_params()
    c, diag = flowed(FRESNEL, -6.0, 6.0, params, 500)
    assert diag.max_h_increase == 0.0
    w = np.asarray(FRESNEL.exponent(c.nodes[c.active]))
    live_drift = np.max(np.abs(w.imag - c.birth_H[c.active]))
    assert live_drift < 10.0 * params.delta_flow
    # frozen nodes accumulated drift before deactivating; the cumulative
    # figure only has to stay far below the per-step budget
    assert diag.max_H_drift < 10.0 * params.delta_flow * diag.steps


def test_live_segments_stay_short_and_dead_nodes_deep():
    params = toy_params()
    c, _ = flowed(FRESNEL, -6.0, 6.0, params, 500)
    gaps = np.abs(np.diff(c.nodes))
    both = c.active[:-1] & c.active[1:]
    assert np.all(gaps[both] <= params.l_thresh * (1.0 + 1e-12))
    dead_h = np.asarray(FRESNEL.exponent(c.nodes[~c.active])).real
    assert np.all(dead_h <= params.h_thresh + 1e-9)


def test_quadrature_invariant_under_extra_iterations_toy():
    params = toy_params(delta_flow=0.02)
    vals, spreads = [], []
    for n_iter in (10, 30, 70):
        c, _ = flowed(FRESNEL, -6.0, 6.0, params, n_iter)
        vals.append(quadrature_1d(FRESNEL, c))
        spreads.append(oscillation_spread(FRESNEL, c))
    for i in range(3):
        for j in range(i + 1, 3):
            assert abs(vals[i] - vals[j]) / abs(FRESNEL_VALUE) < 1e-3
    # the contour sheds its oscillation as it settles onto the thimble
    assert spreads[0] > 4.0 * spreads[1] > 0.0
    assert spreads[2] < 1e-3


def test_quadrature_with_prefactor_matches_rotated_line():
    pref = lambda z: 1.0 / (1.0 + 0.02 * np.asarray(z) ** 2)
    c, _ = flowed(FRESNEL, -4.0, 4.0, toy_params(), 2200)
    v = quadrature_1d(FRESNEL, c, prefactor=pref)
    rot = cmath.exp(1j * math.pi / 4)
    ref = oracles.gauss_path(lambda z: np.exp(1j * z ** 2) * pref(z),
                             [-9.0 * rot, 0.0, 9.0 * rot],
                             order=120, panels=8)
    assert abs(v - ref) / abs(ref) < 1e-3


def test_blowup_guard_on_runaway_nodes():
    params = toy_params(delta_flow=0.01, blowup_radius=30.0)
    c = Contour1D.from_segment(1.0, 2.0, params.l_thresh)
    with pytest.raises(BlowUp):
        flow_contour(FRESNEL, c, params, n_iter=2000, direction=+1.0)


# ---------------------------------------------------------------------------
# Ionisation amplitude over one period: flow vs independent quadrature
# ---------------------------------------------------------------------------


def test_windowed_amplitude_matches_bruteforce_mono(mono_field):
    phase = AtiPhase(AtiAction(mono_field, IP, 0.0))
    params = default_flow_params(OMEGA)
    c, _ = flowed(phase, 0.0, T, params, 400)
    v = quadrature_1d(phase, c)
    ref = oracles.periodic_window_amplitude(mono_field, IP, 0.0)
    assert abs(v - ref) / abs(ref) < 1e-2
    assert v == pytest.approx(5.249118e-3 * cmath.exp(1.675745j), rel=1e-4)


def test_windowed_amplitude_matches_bruteforce_two_colour():
    field = LaserField.two_colour_cos(E0, 0.0075, 0.5, OMEGA)
    phase = AtiPhase(AtiAction(field, IP, 1.2))
    params = default_flow_params(OMEGA)
    c, _ = flowed(phase, 0.0, T, params, 400)
    v = quadrature_1d(phase, c)
    ref = oracles.periodic_window_amplitude(field, IP, 1.2)
    assert abs(v - ref) / abs(ref) < 1e-2
    assert v == pytest.approx(2.056798e-4 * cmath.exp(2.457712j), rel=1e-4)


def test_quadrature_invariant_under_extra_iterations_field():
    field = LaserField.two_colour_cos(E0, 0.0075, 0.5, OMEGA)
    phase = AtiPhase(AtiAction(field, IP, 1.2))
    params = default_flow_params(OMEGA, delta_flow=5e-3 / OMEGA ** 2)
    vals = []
    for n_iter in (20, 60, 140):
        c, _ = flowed(phase, 0.0, T, params, n_iter)
        vals.append(quadrature_1d(phase, c))
    scale = abs(vals[-1])
    for i in range(3):
        for j in range(i + 1, 3):
            assert abs(vals[i] - vals[j]) / scale < 1e-3


def test_damped_phase_flow_equals_real_axis_quadrature(mono_field):
    # with a Gaussian factor the window edges carry no weight, so the
    # flowed value must reproduce the plain real-axis integral exactly
    phase = oracles.DampedPhase(AtiPhase(AtiAction(mono_field, IP, 0.0)),
                                2e-4, T / 2)
    half = math.sqrt(30.0 / 2e-4)
    t = np.linspace(T / 2 - half, T / 2 + half, 60_001)
    brute = oracles.trapz(np.exp(np.asarray(phase.exponent(t.astype(complex)))), t)
    params = default_flow_params(OMEGA)
    c, _ = flowed(phase, T / 2 - half, T / 2 + half, params, 400)
    v = quadrature_1d(phase, c)
    assert abs(v - brute) / abs(brute) < 1e-3


def test_relevant_saddle_sum_tracks_flowed_value(mono_field):
    phase = AtiPhase(AtiAction(mono_field, IP, 0.0))
    params = default_flow_params(OMEGA)
    window = DomainWindow(OMEGA)
    sads = find_saddles(phase, [(x + 0.8j) / OMEGA for x in (1.5, 4.7)])
    assert all(
        relevance_1d(phase, s, params, window=window,
                     other_saddles=[o for o in sads if o is not s]) == 1
        for s in sads)
    total = sum(spm_contribution(phase, s) for s in sads)
    c, _ = flowed(phase, 0.0, T, params, 400)
    v = quadrature_1d(phase, c)
    assert abs(total - v) / abs(v) < 5e-2


def test_contour_passes_through_contributing_saddles_only():
    field = LaserField.two_colour_cos(E0, 0.0075, 0.5, OMEGA)
    phase = AtiPhase(AtiAction(field, IP, 1.2))
    params = default_flow_params(OMEGA)
    guesses = [(x + 1j * y) / OMEGA
               for x in np.linspace(0.2, 6.0, 24)
               for y in (0.6, 1.2, 2.2, 2.9)]
    keep = (lambda c: 0 <= c[0].real * OMEGA < 2 * math.pi
            and c[0].imag * OMEGA > 0.05)
    labels = label_quartet(find_saddles(phase, guesses, keep=keep))
    c, _ = flowed(phase, 0.0, T, params, 400)
    act = c.nodes[c.active]
    dist = {k: np.min(np.abs(act - s.coords[0])) * OMEGA
            for k, s in labels.items()}
    assert dist["A"] < 0.05 and dist["D"] < 0.05
    assert dist["B"] > 0.5 and dist["C"] > 0.5
    # the pair the contour ignores includes the least suppressed saddle
    assert labels["C"].h > labels["A"].h
    total = spm_contribution(phase, labels["A"]) + spm_contribution(
        phase, labels["D"])
    v = quadrature_1d(phase, c)
    assert abs(total - v) / abs(v) < 5e-2


# ---------------------------------------------------------------------------
# Relevance by steepest ascent
# ---------------------------------------------------------------------------


def test_relevance_monochromatic(mono_field):
    phase = AtiPhase(AtiAction(mono_field, IP, 0.0))
    params = default_flow_params(OMEGA)
    window = DomainWindow(OMEGA)
    sads = find_saddles(phase, [(x + 1j * y) / OMEGA
                                for x in (1.5, 4.7) for y in (0.8, -0.8)])
    got = {}
    for s in sads:
        wt = s.coords[0] * OMEGA
        got[round(wt.real, 3), round(wt.imag, 3)] = relevance_1d(
            phase, s, params, window=window,
            other_saddles=[o for o in sads if o is not s])
    half = round(math.pi / 2, 3)
    three_half = round(3 * math.pi / 2, 3)
    im = round(math.asinh(math.sqrt(2 * IP) * OMEGA / E0), 3)
    assert got == {(half, im): 1, (half, -im): 0,
                   (three_half, im): 1, (three_half, -im): 0}


def test_relevance_rejects_saddle_outside_window(mono_field):
    phase = AtiPhase(AtiAction(mono_field, IP, 0.0))
    params = default_flow_params(OMEGA)
    window = DomainWindow(OMEGA)
    (translate,) = find_saddles(phase, [(-1.5 + 0.8j) / OMEGA])
    assert translate.coords[0].real < 0
    assert relevance_1d(phase, translate, params, window=window) == 0


def test_relevance_two_colour_quartet():
    field = LaserField.two_colour_cos(E0, 0.0075, 0.5, OMEGA)
    phase = AtiPhase(AtiAction(field, IP, 1.2))
    params = default_flow_params(OMEGA)
    window = DomainWindow(OMEGA)
    guesses = [(x + 1j * y) / OMEGA
               for x in np.linspace(0.2, 6.0, 24)
               for y in (0.6, 1.2, 2.2, 2.9)]
    keep = (lambda c: 0 <= c[0].real * OMEGA < 2 * math.pi
            and c[0].imag * OMEGA > 0.05)
    sads = find_saddles(phase, guesses, keep=keep)
    labels = label_quartet(sads)
    got = {k: relevance_1d(phase, s, params, window=window,
                           other_saddles=[o for o in sads if o is not s])
           for k, s in labels.items()}
    assert got == {"A": 1, "B": 0, "C": 0, "D": 1}


def test_relevance_inconclusive_when_levels_coincide():
    # cubic tuned so both saddles share H = 0 with distinct depths: the
    # ascent line out of the deep saddle runs straight into the other one
    c3 = cmath.exp(1j * math.pi / 3)
    phase = PolynomialPhase((0.7j, -c3, 0.0, 1.0 / 3.0))
    params = toy_params(blowup_radius=50.0, delta_flow=1e-3)
    lo = make_saddle(phase, newton_refine(phase, -cmath.sqrt(c3) - 0.01j))
    hi = make_saddle(phase, newton_refine(phase, cmath.sqrt(c3) + 0.01j))
    assert lo.H == pytest.approx(hi.H, abs=1e-12)
    assert lo.h < hi.h < 0
    with pytest.raises(Inconclusive):
        relevance_1d(phase, lo, params, other_saddles=[hi])


def test_relevance_inconclusive_for_equal_weight_twins():
    # symmetric double well: both saddles share h and H exactly
    phase = PolynomialPhase((1.0, 0.0, -2.0, 0.0, 1.0))
    params = toy_params(delta_flow=1e-3, blowup_radius=50.0)
    plus = make_saddle(phase, newton_refine(phase, 0.9 + 0.05j))
    minus = make_saddle(phase, newton_refine(phase, -0.9 - 0.05j))
    with pytest.raises(Inconclusive):
        relevance_1d(phase, plus, params, other_saddles=[minus])


def test_ascent_ray_reports_stall_when_level_is_unreachable():
    class Saturating:
        ndim = 1

        def exponent(self, z):
            return -0.5 - np.exp(-np.asarray(z, dtype=complex))

        def grad(self, z):
            return np.exp(-np.asarray(z, dtype=complex))

        def hess(self, z):
            return -np.exp(-np.asarray(z, dtype=complex))

    ray = _ascend_ray(Saturating(), 0.0 + 0.0j,
                      toy_params(delta_flow=1e-3, max_iter=40000))
    assert ray.status == "stalled"
    assert complex(Saturating().exponent(ray.endpoint)).real < -0.4
