"""Downward contour flow in one complex variable.

The real integration interval is discretised into an ordered polyline of
complex nodes. Each iteration moves every active node a step
-delta_flow * conj(grad f), which is the steepest-descent direction of
h = Re f; the analytic phase H = Im f is conserved by the exact flow, so
its drift measures discretisation error. Nodes falling below h_thresh are
frozen (their integrand weight is at most e^{h_thresh}); segments between
live nodes are subdivided whenever they stretch beyond l_thresh. The
polyline converges onto the union of steepest-descent manifolds through
the contributing saddles, where the integrand no longer oscillates, plus
monotone tails from the window endpoints which reproduce the truncated
parts of the original integral exactly (the flow is a homotopy, so the
quadrature value is independent of the iteration count).

Saddle relevance in 1D is decided by the reverse map: the two steepest-
ascent rays leaving a saddle either climb back to the original real
window (the saddle's descent path is part of the deformed contour) or
they surface elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


class BlowUp(RuntimeError):
    """A node left the configured safety disc; likely a singularity."""


class Inconclusive(RuntimeError):
    """Relevance undecidable here: the configuration is too close to a
    Stokes transition for the ascent/necklace test to separate saddles."""


@dataclass(frozen=True)
class FlowParams:
    """Knobs of the discrete flow.

    delta_flow is dimensionless: the step is delta_flow * |grad h| long,
    except that gradients smaller than grad_norm_floor are normalised so
    the step length is exactly delta_flow (keeps nodes moving near the
    flat saddle neighbourhoods without overshooting the descent lines).
    """

    delta_flow: float
    l_thresh: float
    h_thresh: float = -30.0
    grad_norm_floor: float = 1.0
    max_iter: int = 20000
    refine_every: int = 5
    blowup_radius: float = 1e6
    displacement_tol: float = 0.0
    h0_tol: float = 1e-6
    stokes_tol: float = 1e-3
    max_halvings: int = 25
    #: surface refinement (2D flow only) grades the length threshold with
    #: depth below the crest (the shallowest live node): an edge sitting
    #: a depth d below it may stretch to l_thresh * exp(-d / refine_h_scale)
    #: before splitting, since its relative weight is down by e^d; more
    #: than refine_h_floor below the crest edges never split (the region
    #: is draining, resolving it is pure churn)
    refine_h_floor: float = -15.0
    refine_h_scale: float = 3.0
    #: surface drain (2D flow only): vertices more than drain_depth below
    #: the crest deactivate early, on top of the absolute h_thresh cut.
    #: The truncated skirt carries relative weight under e^-drain_depth,
    #: far below the quadrature tolerances, and the live band stays thin
    #: enough that transiting vertices do not pile up
    drain_depth: float = 15.0
    #: surface coarsening (2D flow only): the flow contracts the two
    #: transverse directions, so vertices crowd onto the limit surface;
    #: interior edges shorter than collapse_frac times the local allowed
    #: length are merged away to keep the vertex count proportional to
    #: the live area instead of the swept volume.  Only edges whose
    #: exponent values agree to collapse_df may merge: stacked sheets
    #: that still differ in phase carry cancellation structure
    collapse_frac: float = 0.3
    collapse_df: float = 0.3


def default_flow_params(omega=1.0, **overrides):
    """Defaults scaled to a fundamental frequency (1 for the toy phases)."""
    base = dict(delta_flow=1e-3 / omega ** 2,
                l_thresh=0.05 / omega,
                h_thresh=-30.0,
                grad_norm_floor=1.0,
                blowup_radius=200.0 / omega,
                displacement_tol=1e-8 / omega)
    base.update(overrides)
    return FlowParams(**base)


@dataclass
class Contour1D:
    """Ordered polyline with activity flags and per-node birth records."""

    nodes: np.ndarray
    active: np.ndarray
    provenance: np.ndarray      # 0 = original, 1 = inserted
    birth_H: np.ndarray | None = None

    @classmethod
    def from_segment(cls, a, b, spacing):
        n = max(2, int(math.ceil(abs(b - a) / spacing)) + 1)
        nodes = np.linspace(complex(a), complex(b), n).astype(complex)
        return cls(nodes=nodes,
                   active=np.ones(n, dtype=bool),
                   provenance=np.zeros(n, dtype=np.uint8))

    def copy(self):
        return Contour1D(self.nodes.copy(), self.active.copy(),
                         self.provenance.copy(),
                         None if self.birth_H is None else self.birth_H.copy())


@dataclass
class FlowDiag:
    """Per-call flow diagnostics, accumulated over the iterations run."""

    steps: int = 0
    max_h_increase: float = 0.0
    max_H_drift: float = 0.0
    n_nodes: int = 0
    n_active: int = 0
    converged: bool = False
    last_displacement: float = math.inf


def _step_vectors(grads, delta, floor):
    """Euler displacement for every gradient: -delta * conj(grad), with
    sub-floor gradients normalised to unit magnitude first."""
    mag = np.abs(grads)
    scale = np.where((mag > 0.0) & (mag < floor), 1.0 / np.maximum(mag, 1e-300),
                     1.0)
    return -delta * scale * np.conj(grads)


def flow_contour(phase, contour, params, n_iter=None, direction=-1.0):
    """Advance the flow n_iter iterations (params.max_iter by default).

    Returns (contour, diagnostics). The input contour is not modified.
    direction=-1 descends in h; +1 ascends (used by the relevance rays).
    Every accepted step is h-monotone in the flow direction: a step that
    would move h the wrong way is halved up to max_halvings times and
    finally frozen for that iteration, so the monotonicity property holds
    exactly, not just to leading order.
    """
    c = contour.copy()
    w = np.asarray(phase.exponent(c.nodes))
    h = w.real.copy()
    if c.birth_H is None:
        c.birth_H = w.imag.copy()
    diag = FlowDiag(n_nodes=len(c.nodes))
    total = params.max_iter if n_iter is None else n_iter
    sgn = 1.0 if direction > 0 else -1.0
    with np.errstate(all="ignore"):
        for _ in range(total):
            idx = np.flatnonzero(c.active)
            diag.n_active = len(idx)
            if len(idx) == 0:
                diag.converged = True
                break
            z = c.nodes[idx]
            step = _step_vectors(np.asarray(phase.grad(z)),
                                 params.delta_flow, params.grad_norm_floor)
            if sgn > 0:
                step = -step
            h_old = h[idx]
            trial = z + step
            wt = np.asarray(phase.exponent(trial))
            # enforce monotone h along the flow direction
            for _ in range(params.max_halvings):
                bad = (sgn * (wt.real - h_old) < 0.0) | ~np.isfinite(wt.real)
                bad &= np.abs(step) > 0.0
                if not np.any(bad):
                    break
                step = np.where(bad, 0.5 * step, step)
                trial = z + step
                wt = np.asarray(phase.exponent(trial))
            still = (sgn * (wt.real - h_old) < 0.0) | ~np.isfinite(wt.real)
            if np.any(still):
                trial = np.where(still, z, trial)
                wt = np.where(still, h_old + 1j * np.imag(
                    np.asarray(phase.exponent(z))), wt)
                step = np.where(still, 0.0, step)
            if np.any(np.abs(trial) > params.blowup_radius):
                worst = trial[int(np.argmax(np.abs(trial)))]
                raise BlowUp(f"node reached {worst} beyond radius "
                             f"{params.blowup_radius}")
            c.nodes[idx] = trial
            h[idx] = wt.real
            diag.steps += 1
            diag.max_h_increase = max(diag.max_h_increase,
                                      float(np.max(sgn * -(wt.real - h_old),
                                                   initial=-math.inf)))
            drift = np.abs(wt.imag - c.birth_H[idx])
            diag.max_H_drift = max(diag.max_H_drift,
                                   float(np.max(drift, initial=0.0)))
            diag.last_displacement = float(np.max(np.abs(step), initial=0.0))
            # freeze nodes that sank below threshold (descent only)
            if sgn < 0:
                dead = wt.real < params.h_thresh
                if np.any(dead):
                    c.active[idx[dead]] = False
            if params.refine_every and diag.steps % params.refine_every == 0:
                c, h = _refine(phase, c, h, params.l_thresh)
            if (params.displacement_tol > 0.0
                    and diag.last_displacement < params.displacement_tol):
                diag.converged = True
                break
    diag.n_nodes = len(c.nodes)
    diag.n_active = int(np.sum(c.active))
    return c, diag


def _refine(phase, c, h, l_thresh):
    """Insert evenly spaced midpoints on over-stretched live segments."""
    gaps = np.abs(np.diff(c.nodes))
    both = c.active[:-1] & c.active[1:]
    need = both & (gaps > l_thresh)
    if not np.any(need):
        return c, h
    nodes, act, prov, births, hs = [], [], [], [], []
    w_birth = c.birth_H
    for k in range(len(c.nodes) - 1):
        nodes.append(c.nodes[k])
        act.append(c.active[k])
        prov.append(c.provenance[k])
        births.append(w_birth[k])
        hs.append(h[k])
        if need[k]:
            extra = min(64, int(gaps[k] / l_thresh))
            fresh = c.nodes[k] + (c.nodes[k + 1] - c.nodes[k]) * (
                np.arange(1, extra + 1) / (extra + 1))
            wf = np.asarray(phase.exponent(fresh))
            nodes.extend(fresh)
            act.extend([True] * extra)
            prov.extend([1] * extra)
            births.extend(wf.imag)
            hs.extend(wf.real)
    nodes.append(c.nodes[-1])
    act.append(c.active[-1])
    prov.append(c.provenance[-1])
    births.append(w_birth[-1])
    hs.append(h[-1])
    c2 = Contour1D(np.asarray(nodes, dtype=complex),
                   np.asarray(act, dtype=bool),
                   np.asarray(prov, dtype=np.uint8),
                   np.asarray(births, dtype=float))
    return c2, np.asarray(hs, dtype=float)


def quadrature_1d(phase, contour, prefactor=None):
    """Composite trapezoid of prefactor * e^f along the polyline.

    Deactivated nodes carry zero weight: their h is below h_thresh, so
    dropping them changes the value by at most e^{h_thresh} per segment.
    """
    z = contour.nodes
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        w = np.exp(np.asarray(phase.exponent(z)))
        if prefactor is not None:
            w = w * np.asarray(prefactor(z))
    w = np.where(contour.active, w, 0.0)
    w = np.where(np.isfinite(w), w, 0.0)
    return complex(np.sum(0.5 * (w[:-1] + w[1:]) * np.diff(z)))


def oscillation_spread(phase, contour):
    """Weighted spread of the phase H along the live contour (radians).

    Computed per contiguous run of active nodes and maximised over runs:
    each run hugs one descent path with its own constant H, so runs must
    not be mixed. Within a run this is an e^h-weighted standard
    deviation: large while the polyline still crosses oscillation
    fringes, settling once it follows the constant-H paths.
    """
    worst = 0.0
    for run in _active_runs(contour.active):
        w = np.asarray(phase.exponent(contour.nodes[run]))
        weight = np.exp(w.real - np.max(w.real))
        mean = np.sum(weight * w.imag) / np.sum(weight)
        var = np.sum(weight * (w.imag - mean) ** 2) / np.sum(weight)
        worst = max(worst, float(math.sqrt(max(var, 0.0))))
    return worst


def _active_runs(active):
    """Index arrays of the maximal runs of consecutive active nodes."""
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    return np.split(idx, breaks + 1)


# ---------------------------------------------------------------------------
# Relevance by steepest ascent
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RayResult:
    status: str          # arrived | outside | runaway | stalled
    endpoint: complex
    steps: int


def _ascend_ray(phase, z0, params, h_target=0.0, stagnation_window=256):
    """Flow one point upward in h until it crosses h_target.

    The final step is bisected so the endpoint lands within h0_tol of the
    target level. A stall, meaning near-zero gain in h over a whole
    window of steps, can only happen where the gradient nearly vanishes:
    the ray is pinned at another saddle sharing this ray's H value, a
    Stokes configuration.
    """
    z = complex(z0)
    h = complex(phase.exponent(z)).real
    floor = 1e-9 * (abs(h) + 1.0)
    checkpoint = h
    with np.errstate(all="ignore"):
        for n in range(params.max_iter):
            if h >= -params.h0_tol:
                return RayResult("arrived", z, n)
            g = complex(phase.grad(z))
            step = complex(_step_vectors(np.asarray([g]), params.delta_flow,
                                         params.grad_norm_floor)[0])
            step = -step      # ascend
            moved = False
            for _ in range(params.max_halvings):
                trial = z + step
                ht = complex(phase.exponent(trial)).real
                if math.isfinite(ht) and ht > h:
                    if ht > params.h0_tol:
                        step *= 0.5
                        continue
                    z, h = trial, ht
                    moved = True
                    break
                step *= 0.5
            if not moved:
                return RayResult("stalled", z, n)
            if n % stagnation_window == stagnation_window - 1:
                if h - checkpoint < floor:
                    return RayResult("stalled", z, n)
                checkpoint = h
            if abs(z) > params.blowup_radius:
                return RayResult("runaway", z, n)
    return RayResult("runaway", z, params.max_iter)


def relevance_1d(phase, saddle, params, window=None, other_saddles=(),
                 epsilon=None, im_tol=None):
    """Intersection number (0 or 1) of a 1D saddle's descent path with the
    original real contour.

    The two steepest-ascent rays seeded at +-epsilon along the ascent
    eigendirection are flowed up to h = 0. The saddle contributes when
    either ray surfaces on the real axis inside the window. Saddles with
    h > 0 are dismissed outright: no ascent from the real contour can
    reach them. Raises Inconclusive when a ray stalls in the flattened
    gradient around another saddle, or on the matching precheck: another
    listed saddle shares this one's H within stokes_tol while sitting
    between this one's level and h = 0, which is where an ascent ray can
    be captured. A Stokes transition is exactly such an H coincidence, so
    the rays cannot be trusted there either way.
    """
    if saddle.h > params.h0_tol:
        return 0
    if saddle.eigen is None:
        raise Inconclusive(f"degenerate saddle at {saddle.coords}")
    for other in other_saddles:
        same = max(abs(a - b) for a, b in zip(other.coords, saddle.coords)) \
            < 1e-9
        if (not same and abs(other.H - saddle.H) < params.stokes_tol
                and other.h > saddle.h - params.stokes_tol
                and other.h < params.stokes_tol):
            raise Inconclusive(
                f"saddle at {other.coords} shares H with {saddle.coords} "
                f"within {params.stokes_tol} and lies on the ascent range")
    eps = params.l_thresh * 0.02 if epsilon is None else epsilon
    tol_im = params.l_thresh if im_tol is None else im_tol
    direction = saddle.eigen.ascent[0][0]
    z0 = saddle.coords[0]
    hits = 0
    for sign in (+1.0, -1.0):
        ray = _ascend_ray(phase, z0 + sign * eps * direction, params)
        if ray.status == "stalled":
            raise Inconclusive(
                f"ascent ray from {z0} stalled at {ray.endpoint}; "
                f"another saddle shares H = {saddle.H:.6f}")
        if ray.status != "arrived":
            continue
        on_axis = abs(ray.endpoint.imag) <= tol_im
        in_window = True
        if window is not None:
            in_window = window.contains_time(ray.endpoint.real)
        if on_axis and in_window:
            hits += 1
    return 1 if hits > 0 else 0
