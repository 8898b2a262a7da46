"""Saddle points of holomorphic exponents: location, local frames, weights.

A saddle is a zero of grad f for an exponent f = i*phi supplied by one of
the phase adapters. Each saddle carries the real Hessian of h = Re f over
the realified coordinates, whose eigenpairs split into ascent and descent
directions; the descent pair spans the tangent of the steepest-descent
manifold and feeds both the stationary-phase weight and the necklace
construction. Holomorphy forces the eigenvalues into opposite-sign pairs
with the partner eigenvector obtained by multiplying the complex direction
by -i; this structure is exposed, not recomputed downstream.

Coordinates are tuples of complex numbers; the realification order is
(Re z1, Im z1, Re z2, Im z2).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from .phasefn import action_of


class NewtonFailed(RuntimeError):
    """Newton iteration did not reach the gradient tolerance."""


class DegenerateHessian(RuntimeError):
    """Hessian eigenvalue vanishingly small; no isolated descent frame."""


class LostTrack(RuntimeError):
    """Parameter continuation failed even after step bisection."""


@dataclass(frozen=True)
class EigenBasis:
    """Eigenstructure of the realified h-Hessian at a saddle.

    values holds all 2N real eigenvalues in ascending order; ascent and
    descent hold one complex N-vector per positive eigenvalue (ascending),
    with descent[k] = -i * ascent[k].
    """

    values: tuple
    ascent: tuple
    descent: tuple


@dataclass(frozen=True)
class SaddlePoint:
    coords: tuple
    action: complex
    h: float
    H: float
    eigen: EigenBasis | None
    degenerate: bool = False
    n_sigma: int | None = None
    window_label: str = ""

    @property
    def ndim(self):
        return len(self.coords)

    def with_relevance(self, n_sigma):
        return replace(self, n_sigma=n_sigma)


def _as_coords(point):
    if isinstance(point, (tuple, list)):
        return tuple(complex(c) for c in point)
    return (complex(point),)


def _grad_tuple(phase, coords):
    g = phase.grad(*coords)
    if len(coords) == 1:
        g = (g,)
    return tuple(complex(v) for v in g)


def _hess_matrix(phase, coords):
    """Complex symmetric Hessian of f as an (N, N) array."""
    if len(coords) == 1:
        return np.array([[complex(phase.hess(*coords))]])
    f11, f12, f22 = (complex(v) for v in phase.hess(*coords))
    return np.array([[f11, f12], [f12, f22]])


def real_hessian(phase, point):
    """Hessian of h = Re f over realified coordinates.

    For holomorphic f with complex Hessian F, the (j, k) coordinate block
    is [[Re F_jk, -Im F_jk], [-Im F_jk, -Re F_jk]]; the result is a real
    symmetric (2N, 2N) matrix that anticommutes with the complex structure,
    which is what pairs the eigenvalues as (-xi, xi).
    """
    coords = _as_coords(point)
    F = _hess_matrix(phase, coords)
    n = len(coords)
    M = np.empty((2 * n, 2 * n))
    for j in range(n):
        for k in range(n):
            re, im = F[j, k].real, F[j, k].imag
            M[2 * j, 2 * k] = re
            M[2 * j, 2 * k + 1] = -im
            M[2 * j + 1, 2 * k] = -im
            M[2 * j + 1, 2 * k + 1] = -re
    return M


def _canonical_sign(vec):
    """Fix the overall +-1 of a complex vector deterministically."""
    lead = vec[int(np.argmax(np.abs(vec)))]
    if lead.real < -1e-15 or (abs(lead.real) <= 1e-15 and lead.imag < 0.0):
        return -vec
    return vec


def eigen_basis(phase, point, degeneracy_tol=1e-10):
    """Ascent/descent frame of the h-Hessian at a point.

    Raises DegenerateHessian when the smallest eigenvalue magnitude falls
    below degeneracy_tol relative to the largest (a caustic; the quadratic
    model has no isolated steepest directions there).
    """
    coords = _as_coords(point)
    M = real_hessian(phase, coords)
    vals, vecs = np.linalg.eigh(M)
    top = float(np.max(np.abs(vals)))
    if top == 0.0 or float(np.min(np.abs(vals))) < degeneracy_tol * top:
        raise DegenerateHessian(
            f"eigenvalue ratio below {degeneracy_tol} at {coords}")
    ascent = []
    for idx in np.argsort(vals):
        if vals[idx] <= 0.0:
            continue
        v = vecs[:, idx]
        u = v[0::2] + 1j * v[1::2]
        ascent.append(_canonical_sign(u))
    descent = tuple(-1j * u for u in ascent)
    return EigenBasis(tuple(float(v) for v in np.sort(vals)),
                      tuple(ascent), descent)


def make_saddle(phase, point, window_label="", degeneracy_tol=1e-10):
    """Assemble a SaddlePoint record (no refinement; point taken as-is)."""
    coords = _as_coords(point)
    f = complex(phase.exponent(*coords))
    try:
        basis = eigen_basis(phase, coords, degeneracy_tol)
        degenerate = False
    except DegenerateHessian:
        basis = None
        degenerate = True
    return SaddlePoint(coords=coords, action=complex(action_of(phase, coords)),
                       h=f.real, H=f.imag, eigen=basis, degenerate=degenerate,
                       window_label=window_label)


def newton_refine(phase, guess, tol=1e-10, max_iter=60):
    """Damped Newton iteration on grad f = 0 from a starting point.

    The step is halved (up to ten times) whenever the gradient norm does
    not decrease, which keeps the iteration from shooting across basins;
    raises NewtonFailed if the tolerance is not met.
    """
    coords = np.array(_as_coords(guess))
    n = len(coords)
    gnorm = math.inf
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            g = np.array(_grad_tuple(phase, coords))
            gnorm = float(np.linalg.norm(g))
            if not math.isfinite(gnorm):
                raise NewtonFailed(f"gradient not finite at {coords}")
            if gnorm < tol:
                return tuple(coords)
            F = _hess_matrix(phase, coords)
            try:
                step = np.linalg.solve(F, g)
            except np.linalg.LinAlgError as exc:
                raise NewtonFailed(f"singular Hessian at {coords}") from exc
            if not np.all(np.isfinite(step.view(float))):
                raise NewtonFailed(f"non-finite step at {coords}")
            alpha = 1.0
            for _ in range(10):
                trial = coords - alpha * step
                gt = np.array(_grad_tuple(phase, trial))
                tnorm = float(np.linalg.norm(gt))
                if math.isfinite(tnorm) and tnorm < gnorm:
                    coords = trial
                    break
                alpha *= 0.5
            else:
                raise NewtonFailed(f"stalled at {coords} with |grad| = {gnorm}")
    raise NewtonFailed(f"no convergence after {max_iter} steps, "
                       f"|grad| = {gnorm}")


def _sort_key(coords):
    return tuple(x for c in coords for x in (round(c.real, 12), round(c.imag, 12)))


def find_saddles(phase, guesses, dedup_tol=1e-6, keep=None, tol=1e-10,
                 max_iter=60, window_label="", canonical=None):
    """Newton search from every guess, deduplicated and sorted.

    canonical, if given, maps a converged coordinate tuple to a normal
    form before any filtering (e.g. translate a periodic problem into its
    fundamental cell, so roots found in neighbouring cells collapse into
    one). keep, if given, is a predicate on the (canonical) coordinate
    tuple applied before deduplication (e.g. restrict to one half-plane).
    Guesses that fail to converge are dropped silently; the point of a
    guess grid is redundancy.
    """
    found = []
    for guess in guesses:
        try:
            coords = newton_refine(phase, guess, tol=tol, max_iter=max_iter)
        except NewtonFailed:
            continue
        if canonical is not None:
            coords = tuple(canonical(coords))
        if keep is not None and not keep(coords):
            continue
        found.append(coords)
    found.sort(key=_sort_key)
    unique = []
    for coords in found:
        if any(max(abs(a - b) for a, b in zip(coords, prev)) < dedup_tol
               for prev in unique):
            continue
        unique.append(coords)
    return [make_saddle(phase, c, window_label=window_label) for c in unique]


# ---------------------------------------------------------------------------
# Stationary-phase weights
# ---------------------------------------------------------------------------


def _orient_1d(u):
    if u.real < -1e-12 or (abs(u.real) <= 1e-12 and u.imag < 0.0):
        return -u
    return u


def spm_contribution(phase, saddle, prefactor=None):
    """Gaussian (stationary-phase) weight of one saddle.

    1D: exp(f) * pref * u * sqrt(2 pi / k) with k = -u^2 f'' along the
    unit descent direction u, oriented toward positive real traversal.

    2D: exp(f) * pref * det(W) * 2 pi / sqrt(det K), K = -W^T F W with W
    the two descent columns, oriented so arg det W lies in (-pi/2, pi/2].
    """
    if saddle.eigen is None:
        raise DegenerateHessian(f"no frame at {saddle.coords}")
    coords = saddle.coords
    f = complex(phase.exponent(*coords))
    pref = 1.0 + 0.0j if prefactor is None else complex(prefactor(*coords))
    if len(coords) == 1:
        u = _orient_1d(saddle.eigen.descent[0][0])
        k = -u * u * complex(phase.hess(*coords))
        return cmath.exp(f) * pref * u * cmath.sqrt(2.0 * math.pi / k)
    W = np.column_stack(saddle.eigen.descent)
    d = complex(np.linalg.det(W))
    if d.real < -1e-12 or (abs(d.real) <= 1e-12 * abs(d) and d.imag < 0.0):
        d = -d
    F = _hess_matrix(phase, coords)
    K = -W.T @ F @ W
    detk = complex(np.linalg.det(K))
    return cmath.exp(f) * pref * d * 2.0 * math.pi / cmath.sqrt(detk)


# ---------------------------------------------------------------------------
# Continuation in an external parameter
# ---------------------------------------------------------------------------


@dataclass
class SaddleTrack:
    """One saddle followed along a parameter sweep.

    saddles[k] is the refined SaddlePoint at params[k] (None past a lost
    track); jumped[k] marks steps where the converged point moved further
    than jump_tol even after bisecting the parameter step, which usually
    means the branch was switched at a near-degeneracy.
    """

    params: np.ndarray
    saddles: list
    jumped: list
    lost_at: int | None = None


def track_saddle(make_phase, params, seed, jump_tol=1.0, tol=1e-10,
                 max_bisect=6):
    """Follow a saddle of make_phase(param) along params by continuation.

    A linear predictor extrapolates the last two positions; failed or
    jumping steps are retried by bisecting the parameter interval. The
    track survives branch-switch jumps (flagged) but stops at outright
    Newton failure.
    """
    params = np.asarray(params, dtype=float)
    saddles: list = []
    jumped: list = []
    lost_at = None

    def refine_at(p, guess):
        return newton_refine(make_phase(p), guess, tol=tol)

    prev_coords = None
    prev_param = None
    slope = None
    for k, p in enumerate(params):
        if lost_at is not None:
            saddles.append(None)
            jumped.append(False)
            continue
        if prev_coords is None:
            guess = _as_coords(seed)
        else:
            guess = prev_coords
            if slope is not None:
                dp = p - prev_param
                guess = tuple(c + s * dp for c, s in zip(prev_coords, slope))
        try:
            coords = refine_at(p, guess)
            moved = (prev_coords is not None and
                     max(abs(a - b) for a, b in zip(coords, prev_coords))
                     > jump_tol)
            if moved:
                coords = _walk_bisect(refine_at, prev_param, prev_coords, p,
                                      jump_tol, max_bisect)
        except NewtonFailed:
            if prev_coords is None:
                lost_at = k
                saddles.append(None)
                jumped.append(False)
                continue
            try:
                coords = _walk_bisect(refine_at, prev_param, prev_coords, p,
                                      jump_tol, max_bisect)
            except (NewtonFailed, LostTrack):
                lost_at = k
                saddles.append(None)
                jumped.append(False)
                continue
        jump = (prev_coords is not None and
                max(abs(a - b) for a, b in zip(coords, prev_coords))
                > jump_tol)
        if prev_coords is not None and p != prev_param:
            slope = tuple((a - b) / (p - prev_param)
                          for a, b in zip(coords, prev_coords))
        saddles.append(make_saddle(make_phase(p), coords))
        jumped.append(bool(jump))
        prev_coords = coords
        prev_param = p
    return SaddleTrack(params=params, saddles=saddles, jumped=jumped,
                       lost_at=lost_at)


def _walk_bisect(refine_at, p0, coords0, p1, jump_tol, max_bisect):
    """March from a converged (p0, coords0) to p1 by halving the step."""
    n_steps = 2
    for _ in range(max_bisect):
        try:
            coords = coords0
            p_prev = p0
            for p in np.linspace(p0, p1, n_steps + 1)[1:]:
                nxt = refine_at(p, coords)
                coords = nxt
                p_prev = p
            return coords
        except NewtonFailed:
            n_steps *= 2
    raise LostTrack(f"continuation {p0} -> {p1} failed at {n_steps//2} cuts")
