"""Saddle relevance in two complex times via a bead loop over the plane.

A saddle contributes to a flowed two-time integral exactly when the
manifold ascending from it pierces the original real domain. Building
that two-dimensional manifold is as costly as the full surface flow, so
the test used here is one-dimensional: seed a small loop of beads around
the saddle in its two ascent eigendirections (a vanishing cycle, constant
oscillation phase to quadratic order), then flow every bead uphill in h
until it clears a level just above the real domain, which lies in h = 0.
The crossings are then strictly interior to the swept surface, and the
settled loop winds once around the origin of the (Im ti, Im tr) plane
per crossing. Stopping at h = 0 itself would not do: a crossing is a
regular point of h on the ascending manifold, so the h = 0 slice runs
straight through it instead of encircling it. Saddles already above the
clearance level never move their beads, which dismisses the ascent side
of each conjugate pair by the same mechanism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .flow1d import Inconclusive
from .saddle import DegenerateHessian, SaddlePoint

__all__ = [
    "Ambiguous", "Necklace", "RelevanceResult", "init_necklace",
    "flow_necklace_up", "intersection_number", "relevance_2d",
]


class Ambiguous(RuntimeError):
    """Projected bead loop grazes the origin; the winding is undecidable."""


@dataclass
class Necklace:
    """Closed loop of beads around one saddle, before or after uphill flow.

    beads is an (n, 2) complex array whose row order is the loop order;
    the loop closes from the last row back to the first. converged marks
    beads that reached the clearance band just above h = 0, runaway those
    that left the window bound first, stalled those pinned mid-ascent (a
    Stokes symptom). ids give each bead a persistent identity across
    loop refinement, for trajectory export. birth_H is the oscillation
    phase at creation, the reference for the per-bead conservation
    check. wind_level records the
    clearance the flow aimed for: settled beads sit at h = wind_level
    within h0_tol, so the loop passes every real-plane crossing at a
    finite height and its winding is well defined. slipped collects
    (bead index, saddle coordinates) events where a live bead passed
    close to a different saddle sharing the source's H.
    """

    beads: np.ndarray
    converged: np.ndarray
    runaway: np.ndarray
    stalled: np.ndarray
    angles: np.ndarray
    birth_H: np.ndarray
    ids: np.ndarray
    source: SaddlePoint
    epsilon: float
    wind_level: float = 0.0
    steps: int = 0
    max_H_drift: float = 0.0
    slipped: tuple = ()

    def copy(self):
        return replace(
            self, beads=self.beads.copy(), converged=self.converged.copy(),
            runaway=self.runaway.copy(), stalled=self.stalled.copy(),
            angles=self.angles.copy(), birth_H=self.birth_H.copy(),
            ids=self.ids.copy())


@dataclass(frozen=True)
class RelevanceResult:
    """Intersection count of one saddle with the real domain.

    winding keeps the signed raw value; n_sigma is its magnitude, the
    orientation of the seed loop being an eigenvector sign convention.
    """

    n_sigma: int
    winding: int
    shortcut: bool
    necklace: Necklace | None
    warning: str = ""


def init_necklace(saddle, epsilon, n_beads=64):
    """Seed the vanishing cycle: beads on the ascent eigenplane circle.

    The loop sits at radius epsilon around the saddle, spanned by the two
    ascent eigenvectors of the realified h-Hessian, so every bead starts
    higher in h than the saddle and shares its H to quadratic order;
    birth_H is therefore seeded with the saddle's H, and the conservation
    budget carries the quadratic seeding error.
    """
    if saddle.eigen is None or saddle.degenerate:
        raise DegenerateHessian(f"no ascent frame at {saddle.coords}")
    if len(saddle.eigen.ascent) != 2:
        raise ValueError("necklace needs a two-complex-dimensional saddle")
    a0 = np.asarray(saddle.eigen.ascent[0])
    a1 = np.asarray(saddle.eigen.ascent[1])
    gamma = np.linspace(0.0, 2.0 * math.pi, n_beads, endpoint=False)
    beads = (np.asarray(saddle.coords)[None, :]
             + epsilon * (np.cos(gamma)[:, None] * a0[None, :]
                          + np.sin(gamma)[:, None] * a1[None, :]))
    flags = np.zeros(n_beads, dtype=bool)
    return Necklace(beads=beads, converged=flags.copy(),
                    runaway=flags.copy(), stalled=flags.copy(),
                    angles=gamma, birth_H=np.full(n_beads, saddle.H),
                    ids=np.arange(n_beads), source=saddle, epsilon=epsilon)


def _refine_loop(phase, neck, l_thresh):
    """Insert chord midpoints wherever adjacent beads drifted apart.

    Metric spacing is kept below l_thresh everywhere; near the origin of
    the (Im ti, Im tr) projection the winding needs angular resolution
    on top of that, so projected chords are also kept short against the
    distance at which the segment passes the plane, down to a floor that
    stops runaway subdivision when a loop genuinely touches the origin.
    Segments with a runaway endpoint are left alone: they stretch toward
    the window bound by construction and carry no crossing information.
    """
    n = len(neck.beads)
    nxt = np.roll(np.arange(n), -1)
    gap = np.sqrt(np.abs(neck.beads[:, 0] - neck.beads[nxt, 0]) ** 2
                  + np.abs(neck.beads[:, 1] - neck.beads[nxt, 1]) ** 2)
    need = gap > l_thresh
    x = neck.beads[:, 0].imag
    y = neck.beads[:, 1].imag
    r = np.hypot(x, y)
    pgap = np.hypot(x[nxt] - x, y[nxt] - y)
    floor = max(0.05 * neck.wind_level, 1e-12)
    need |= pgap > np.maximum(0.3 * np.minimum(r, r[nxt]), floor)
    need &= ~neck.runaway & ~neck.runaway[nxt]
    if not np.any(need):
        return neck
    beads, conv, run, stal, ang, bH, ids = [], [], [], [], [], [], []
    next_id = int(neck.ids.max()) + 1
    for k in range(n):
        beads.append(neck.beads[k])
        conv.append(neck.converged[k])
        run.append(neck.runaway[k])
        stal.append(neck.stalled[k])
        ang.append(neck.angles[k])
        bH.append(neck.birth_H[k])
        ids.append(neck.ids[k])
        if not need[k]:
            continue
        j = nxt[k]
        mid = 0.5 * (neck.beads[k] + neck.beads[j])
        beads.append(mid)
        conv.append(False)
        run.append(False)
        stal.append(False)
        step = neck.angles[j] - neck.angles[k]
        if step <= 0.0:
            step += 2.0 * math.pi
        ang.append((neck.angles[k] + 0.5 * step) % (2.0 * math.pi))
        bH.append(complex(phase.exponent(mid[0], mid[1])).imag)
        ids.append(next_id)
        next_id += 1
    neck.beads = np.asarray(beads)
    neck.converged = np.asarray(conv, dtype=bool)
    neck.runaway = np.asarray(run, dtype=bool)
    neck.stalled = np.asarray(stal, dtype=bool)
    neck.angles = np.asarray(ang)
    neck.birth_H = np.asarray(bH)
    neck.ids = np.asarray(ids)
    return neck


def flow_necklace_up(phase, necklace, params, other_saddles=(),
                     slip_tol=None, wind_level=1e-2, history=None):
    """Flow every bead uphill in h until it clears the real-plane level.

    Returns a new Necklace; the input is not modified. Steps follow the
    surface-flow rule (fixed length once the gradient drops below the
    normalisation floor) with ascent-monotone halvings, and the final
    step is bisected so beads land on the clearance level wind_level
    within h0_tol. Beads leaving the window bound are marked runaway and
    frozen, beads that cannot ascend at all are marked stalled, and live
    beads passing within slip_tol of a different saddle that shares the
    source's H within stokes_tol are recorded as slipped. The loop is
    re-subdivided alongside the flow, and again once all beads have
    settled, so that both the metric and the angular spacing rules hold
    on the final loop. Pass a list as history to collect per-iteration
    (step, ids, beads, exponent) snapshots for trajectory export.
    """
    neck = necklace.copy()
    neck.wind_level = wind_level
    if slip_tol is None:
        slip_tol = 0.25 * params.l_thresh
    land = wind_level - params.h0_tol
    others = [np.asarray(s.coords) for s in other_saddles
              if (max(abs(a - b) for a, b in
                      zip(s.coords, neck.source.coords)) > 1e-9
                  and abs(s.H - neck.source.H) < params.stokes_tol)]
    slipped = list(neck.slipped)
    w = np.asarray(phase.exponent(neck.beads[:, 0], neck.beads[:, 1]))
    h = w.real.copy()
    neck.converged |= h >= land

    def snap():
        if history is not None:
            history.append((neck.steps, neck.ids.copy(),
                            neck.beads.copy(), w.copy()))

    snap()
    with np.errstate(all="ignore"):
        while neck.steps < params.max_iter:
            live = ~(neck.converged | neck.runaway | neck.stalled)
            if not np.any(live):
                n_before = len(neck.beads)
                neck = _refine_loop(phase, neck, params.l_thresh)
                if len(neck.beads) == n_before:
                    break
                w = np.asarray(phase.exponent(neck.beads[:, 0],
                                              neck.beads[:, 1]))
                h = w.real.copy()
                neck.converged |= h >= land
                snap()
                if len(neck.beads) > 8192:
                    raise RuntimeError("bead loop refinement does not "
                                       "settle; the brim is being torn "
                                       "apart")
                continue
            idx = np.flatnonzero(live)
            z1 = neck.beads[idx, 0]
            z2 = neck.beads[idx, 1]
            g1, g2 = phase.grad(z1, z2)
            g1, g2 = np.asarray(g1), np.asarray(g2)
            gnorm = np.sqrt(np.abs(g1) ** 2 + np.abs(g2) ** 2)
            scale = np.where((gnorm > 0.0) & (gnorm < params.grad_norm_floor),
                             1.0 / np.maximum(gnorm, 1e-300), 1.0)
            s1 = params.delta_flow * scale * np.conj(g1)
            s2 = params.delta_flow * scale * np.conj(g2)
            h_old = h[idx]
            t1, t2 = z1 + s1, z2 + s2
            wt = np.asarray(phase.exponent(t1, t2))
            for _ in range(params.max_halvings):
                # reject both descending moves and overshoots past the
                # clearance band
                bad = (wt.real <= h_old) | ~np.isfinite(wt.real) \
                    | (wt.real > wind_level + params.h0_tol)
                bad &= (np.abs(s1) + np.abs(s2)) > 0.0
                if not np.any(bad):
                    break
                s1[bad] *= 0.5
                s2[bad] *= 0.5
                t1[bad] = z1[bad] + s1[bad]
                t2[bad] = z2[bad] + s2[bad]
                wt[bad] = np.asarray(phase.exponent(t1[bad], t2[bad]))
            frozen = (wt.real <= h_old) | ~np.isfinite(wt.real) \
                | (wt.real > wind_level + params.h0_tol)
            if np.any(frozen):
                t1[frozen] = z1[frozen]
                t2[frozen] = z2[frozen]
                wt[frozen] = h_old[frozen] + 1j * w[idx[frozen]].imag
                neck.stalled[idx[frozen]] = True
            neck.beads[idx, 0] = t1
            neck.beads[idx, 1] = t2
            w[idx] = wt
            h[idx] = wt.real
            neck.steps += 1
            drift = np.abs(wt.imag - neck.birth_H[idx])
            neck.max_H_drift = max(neck.max_H_drift,
                                   float(np.max(drift, initial=0.0)))
            neck.converged[idx] |= wt.real >= land
            far = np.maximum(np.abs(t1), np.abs(t2)) > params.blowup_radius
            if np.any(far):
                neck.runaway[idx[far]] = True
                neck.converged[idx[far]] = False
            for other in others:
                d = np.sqrt(np.abs(t1 - other[0]) ** 2
                            + np.abs(t2 - other[1]) ** 2)
                for k in np.flatnonzero(d < slip_tol):
                    slipped.append((int(idx[k]), tuple(other)))
            if params.refine_every \
                    and neck.steps % params.refine_every == 0:
                neck = _refine_loop(phase, neck, params.l_thresh)
                w = np.asarray(phase.exponent(neck.beads[:, 0],
                                              neck.beads[:, 1]))
                h = w.real.copy()
                neck.converged |= h >= land
            snap()
            if len(neck.beads) > 8192:
                raise RuntimeError("bead loop refinement does not settle; "
                                   "the brim is being torn apart")
    neck.slipped = tuple(slipped)
    return neck


def intersection_number(necklace, domain_window, proj_tol=None,
                        graze_tol=None):
    """Signed winding of the settled bead loop around the real plane.

    The loop sits on the clearance level just above h = 0, so every
    point where the ascending manifold pierced the real plane lies
    strictly inside the surface it swept, and the projection of the loop
    to (Im ti, Im tr) winds about the origin once per crossing. A
    nonzero winding only counts if the crossing region (the bead nearest
    the real plane) also lands inside the real window: ionisation time
    within the fundamental cycle and return after ionisation. Pass
    domain_window=None to skip that confirmation for integrals over a
    full real plane.

    Two degeneracies are refused rather than guessed at. A loop whose
    projection passes within proj_tol of the origin leaves the winding
    numerically undecidable, and a zero winding whose loop nevertheless
    lands on the real plane (within graze_tol) inside the window means
    the plane meets the loop itself rather than its interior (separable
    phases whose factor manifolds end on the real axis produce these).
    """
    x = necklace.beads[:, 0].imag
    y = necklace.beads[:, 1].imag
    r = np.hypot(x, y)
    if proj_tol is None:
        # numerical-degeneracy guard only: grazing Stokes geometries are
        # caught upstream by the slip and stall flags. The clearance
        # level bounds how close a healthy loop can pass, so the guard
        # never exceeds half that height.
        proj_tol = 1e-3 * float(np.median(r))
        if necklace.wind_level > 0.0:
            proj_tol = min(proj_tol, 0.5 * necklace.wind_level)
    if graze_tol is None:
        graze_tol = (0.5 * necklace.wind_level
                     if necklace.wind_level > 0.0 else 1e-3)
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    dx, dy = x2 - x, y2 - y
    seg2 = dx * dx + dy * dy
    t = np.clip(np.divide(-(x * dx + y * dy), seg2,
                          out=np.zeros_like(seg2), where=seg2 > 0.0),
                0.0, 1.0)
    gap = np.hypot(x + t * dx, y + t * dy)
    if float(gap.min()) < proj_tol:
        raise Ambiguous(
            f"bead loop passes within {proj_tol:g} of the real plane "
            f"projection origin; near a Stokes transition")
    ang = np.arctan2(y, x)
    turn = np.diff(np.concatenate([ang, ang[:1]]))
    turn = (turn + math.pi) % (2.0 * math.pi) - math.pi
    total = float(np.sum(turn)) / (2.0 * math.pi)
    winding = int(round(total))
    if abs(total - winding) > 0.05:
        raise Ambiguous(f"non-integer winding {total:.3f}; a loop segment "
                        f"straddles the origin")
    k = int(np.argmin(r))
    ti, tr = necklace.beads[k]
    inside = (domain_window is None
              or (domain_window.contains_time(ti.real)
                  and tr.real > ti.real))
    if winding == 0:
        if inside and float(r[k]) < graze_tol:
            raise Ambiguous(
                f"settled loop lands on the real plane near "
                f"({ti.real:.4f}, {tr.real:.4f}) without encircling it; "
                f"the touch is boundary-degenerate")
        return 0
    return winding if inside else 0


def relevance_2d(phase, saddle, params, window=None, other_saddles=(),
                 epsilon=None, n_beads=64, force_flow=False,
                 wind_level=1e-2):
    """Necklace pipeline for one saddle: seed, flow up, count crossings.

    Saddles above the real-domain level are dismissed without flowing
    (nothing ascends to them), unless force_flow demands the full
    computation. Raises Inconclusive when the bead flow stalls, slips
    near an H-sharing saddle, or fails to settle, and Ambiguous when the
    settled loop passes too close to the projection origin to call:
    all are near-Stokes symptoms, resolved by scanning for the
    transition parameter rather than by this test.
    """
    if saddle.h > params.h0_tol and not force_flow:
        return RelevanceResult(n_sigma=0, winding=0, shortcut=True,
                               necklace=None)
    if saddle.eigen is None:
        raise Inconclusive(f"degenerate saddle at {saddle.coords}")
    for other in other_saddles:
        same = max(abs(a - b) for a, b in
                   zip(other.coords, saddle.coords)) < 1e-9
        if (not same and abs(other.H - saddle.H) < params.stokes_tol
                and other.h > saddle.h - params.stokes_tol
                and other.h < wind_level + params.stokes_tol):
            raise Inconclusive(
                f"saddle at {other.coords} shares H with {saddle.coords} "
                f"within {params.stokes_tol} and lies on the ascent range")
    eps = 0.02 * params.l_thresh if epsilon is None else epsilon
    neck = init_necklace(saddle, eps, n_beads=n_beads)
    neck = flow_necklace_up(phase, neck, params,
                            other_saddles=other_saddles,
                            wind_level=wind_level)
    if neck.slipped:
        raise Inconclusive(
            f"{len(neck.slipped)} bead passes within slip range of an "
            f"H-sharing saddle; near a Stokes transition")
    if np.any(neck.stalled):
        raise Inconclusive(
            f"{int(neck.stalled.sum())} beads stalled mid-ascent from "
            f"{saddle.coords}; another saddle shares H = {saddle.H:.6f}")
    if not np.all(neck.converged | neck.runaway):
        raise Inconclusive(
            f"bead flow from {saddle.coords} did not settle within "
            f"{params.max_iter} iterations")
    winding = intersection_number(neck, window)
    warning = ""
    if abs(winding) > 1:
        warning = f"winding {winding} exceeds a single crossing"
    return RelevanceResult(n_sigma=abs(winding), winding=winding,
                           shortcut=False, necklace=neck, warning=warning)
