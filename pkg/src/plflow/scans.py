"""Parameter sweeps over the strong-field saddle landscape.

The single-point machinery (saddle search, relevance, flowed quadrature)
answers questions at one set of laser parameters. Everything observable,
though, is a scan: harmonic spectra run over emission order, caustic maps
over two-colour delay, the colour switchover over a mixing angle. This
module provides those sweeps with deterministic ordering, per-cell error
capture (one failed cell must not void an hour-long grid), and branch
identity maintained by continuation rather than by re-matching roots.

Contents
--------
* saddle landscapes for the two physical integrals (``ati_saddles``,
  ``hhg_saddles``) on multi-start grids covering one field cycle;
* relevance sweeps wrapping the 1D ray test and the 2D bead-loop test
  with shared oscillation-phase context (``ati_relevance``,
  ``hhg_relevance``);
* ``spectrum``: harmonic intensity by Gaussian saddle sum restricted to
  the relevant orbits, by flowed quadrature, or both side by side;
* ``caustic_grid``: intensity over (order, two-colour phase) where
  coalescing orbits make the Gaussian sum meaningless;
* ``stokes_candidates``: roots of the oscillation-phase coincidence
  H(sigma1) = H(sigma2) along a tracked one-parameter family, the
  necessary condition for a relevance flip;
* ``switchover_scan`` and ``ionisation_bursts``: relevance maps over the
  mixing angle that interpolates between an omega and a 2*omega driver;
* ``trajectory``: the real-space excursion of one quantum orbit, with
  the closure at the return time as a built-in consistency check;
* ``cusp_locator``: Newton solve for the parameter point where three
  orbits coalesce, which requires leaving the real parameter slice.

Workers
-------
Scan cells are independent; ``workers=N`` runs them in a process pool.
Results are reduced by cell index, so the output does not depend on the
pool's scheduling and repeated runs are bit-identical.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .flow1d import Inconclusive, default_flow_params, relevance_1d
from .flow2d import hhg_dipole, hhg_prefactor
from .necklace import Ambiguous, relevance_2d
from .phasefn import (
    AtiAction,
    AtiPhase,
    DomainWindow,
    HhgAction,
    HhgPhase,
    LaserField,
    stationary_momentum,
)
from .saddle import (
    DegenerateHessian,
    LostTrack,
    NewtonFailed,
    _hess_matrix,
    find_saddles,
    make_saddle,
    newton_refine,
    spm_contribution,
    track_saddle,
)


class NoConvergence(RuntimeError):
    """The augmented Newton solve did not reach the residual tolerance."""


class WrongStratum(RuntimeError):
    """The solve converged, but not onto a genuine three-orbit coalescence."""


# ---------------------------------------------------------------------------
# Saddle landscapes
# ---------------------------------------------------------------------------


def _wrap_to_cycle(coords, period):
    """Translate all times by whole periods so the first lands in [0, T)."""
    k = math.floor(coords[0].real / period)
    if k == 0:
        return coords
    return tuple(c - k * period for c in coords)


def _times_where_a_equals(field, target):
    """All t in one cycle with A(t) = target, via the resolvent polynomial.

    A periodic field is a trigonometric polynomial, so in u = e^(i w t)
    the condition A(t) = target is an algebraic equation; its roots give
    one time per period each (complex times included, which is the point:
    the ionisation condition has no real solutions).
    """
    n_max = max(n for n, _, _ in field.components)
    coeffs = np.zeros(2 * n_max + 1, dtype=complex)
    for n, a, x in field.components:
        coeffs[n_max - n] += 0.5 * a * cmath.exp(1j * x)
        coeffs[n_max + n] += 0.5 * a * cmath.exp(-1j * x)
    coeffs[n_max] -= target
    times = []
    for u in np.roots(coeffs):
        if abs(u) < 1e-12:
            continue
        times.append(complex(-1j * cmath.log(u) / field.omega))
    return times


def ati_saddles(field, ip, p, *, im_max=4.0, tol=1e-10):
    """All ionisation-time saddles with Re(w t) in one cycle.

    Saddles solve (p + A(t))^2 / 2 = -Ip, i.e. A(t) = -p +- i sqrt(2 Ip),
    which the resolvent polynomial answers exactly; the roots seed Newton
    on the action gradient, with a coarse grid added for redundancy.
    Both half-planes are returned; physically only Im(t) > 0 corresponds
    to tunnelling, but the mirrors are needed as context for the
    relevance tests (they carry the same oscillation phases). im_max
    bounds |Im(w t)|: weak field components place some algebraic roots
    arbitrarily deep, where the integrand is dead beyond reason.
    """
    phase = AtiPhase(AtiAction(field, ip, p))
    w, period = field.omega, field.period
    root = cmath.sqrt(2.0 * ip)
    guesses = [(t,) for target in (-p + 1j * root, -p - 1j * root)
               for t in _times_where_a_equals(field, target)]
    guesses += [((re + 1j * im) / w,)
                for re in np.linspace(0.25, 6.0, 10)
                for im in (-1.6, -0.9, -0.35, 0.35, 0.9, 1.6)]
    return find_saddles(
        phase, guesses, dedup_tol=1e-6 / w, tol=tol,
        canonical=lambda c: _wrap_to_cycle(c, period),
        keep=lambda c: abs(c[0].imag) * w <= im_max)


def hhg_saddles(field, ip, q, *, im_ti_max=2.0, im_tau_max=3.0,
                travel_slack=0.3, tol=1e-10):
    """All two-time quantum-orbit saddles with ionisation in one cycle.

    The travel time tau = tr - ti is kept positive and at most one cycle
    (plus slack): an orbit that drifts longer re-enters as the translate
    of a shorter one. Ionisation times are wrapped into the fundamental
    cycle before deduplication, so roots caught in neighbouring cells
    collapse onto their in-window representative.
    """
    phase = HhgPhase(HhgAction(field, ip, q))
    w, period = field.omega, field.period
    guesses = []
    for re_ti in np.linspace(0.3, 6.1, 8):
        for im_ti in (-1.2, -0.6, 0.6, 1.2):
            for re_tau in np.linspace(0.5, 6.0, 7):
                for im_tau in (-2.4, -1.2, 0.0, 1.2, 2.4):
                    ti = (re_ti + 1j * im_ti) / w
                    guesses.append((ti, ti + (re_tau + 1j * im_tau) / w))

    def keep(coords):
        ti, tr = coords
        tau = tr - ti
        return (0.0 < tau.real * w <= 2.0 * math.pi + travel_slack
                and abs(ti.imag) * w <= im_ti_max
                and abs(tau.imag) * w <= im_tau_max)

    return find_saddles(
        phase, guesses, dedup_tol=1e-6 / w, tol=tol,
        canonical=lambda c: _wrap_to_cycle(c, period), keep=keep)


def label_windows(saddles, omega, *, gap=0.35):
    """Letter tags grouping saddles by their real ionisation time.

    Saddles whose Re(w ti) fall within ``gap`` of each other share a
    letter; letters run alphabetically with increasing time. This is the
    ionisation-window bookkeeping used to colour spectra: it is a
    heuristic label, not an invariant of the saddle.
    """
    if not saddles:
        return []
    order = sorted(range(len(saddles)),
                   key=lambda k: saddles[k].coords[0].real)
    labels = [""] * len(saddles)
    letter = 0
    prev = None
    for k in order:
        re_wti = saddles[k].coords[0].real * omega
        if prev is not None and re_wti - prev > gap:
            letter += 1
        labels[k] = chr(ord("A") + letter % 26)
        prev = re_wti
    return labels


# ---------------------------------------------------------------------------
# Relevance sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RelevanceRecord:
    """One saddle's contribution status inside a scan cell.

    n_sigma is None when the test refused to decide (a Stokes
    configuration was detected); the reason then sits in note and the
    caller is expected to consult ``stokes_candidates`` nearby.
    """

    saddle: object
    n_sigma: int | None
    label: str = ""
    note: str = ""


def ati_relevance(field, ip, p, *, params=None, window=None, saddles=None):
    """Relevance of every ionisation-time saddle of one field at drift p."""
    phase = AtiPhase(AtiAction(field, ip, p))
    if params is None:
        params = default_flow_params(field.omega)
    if window is None:
        window = DomainWindow(field.omega)
    if saddles is None:
        saddles = ati_saddles(field, ip, p)
    labels = label_windows(saddles, field.omega)
    records = []
    for k, s in enumerate(saddles):
        others = [o for o in saddles if o is not s]
        try:
            n = relevance_1d(phase, s, params, window=window,
                             other_saddles=others)
            records.append(RelevanceRecord(s, n, labels[k]))
        except Inconclusive as exc:
            records.append(RelevanceRecord(s, None, labels[k], str(exc)))
    return records


def hhg_relevance(field, ip, q, *, params=None, window=None, saddles=None,
                  epsilon=None, n_beads=64, wind_level=1e-2):
    """Relevance of every quantum-orbit saddle at one harmonic order."""
    phase = HhgPhase(HhgAction(field, ip, q))
    if params is None:
        params = default_flow_params(field.omega)
    if window is None:
        window = DomainWindow(field.omega)
    if saddles is None:
        saddles = hhg_saddles(field, ip, q)
    labels = label_windows(saddles, field.omega)
    records = []
    for k, s in enumerate(saddles):
        others = [o for o in saddles if o is not s]
        try:
            res = relevance_2d(phase, s, params, window=window,
                               other_saddles=others, epsilon=epsilon,
                               n_beads=n_beads, wind_level=wind_level)
            records.append(RelevanceRecord(s, res.n_sigma, labels[k],
                                           res.warning))
        except (Inconclusive, Ambiguous) as exc:
            records.append(RelevanceRecord(s, None, labels[k], str(exc)))
    return records


# ---------------------------------------------------------------------------
# Harmonic spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Spectrum:
    """Harmonic response over a range of orders, by one or both methods.

    Branch arrays are indexed [order, branch]; a branch is one saddle
    followed across orders by nearest-neighbour matching, padded with NaN
    where it has no representative. n_sigma is NaN where the saddle was
    absent or the relevance test refused (see errors for the reasons).
    The Gaussian total intensity is (q w)^2 |sum of n_sigma * amplitude|^2
    over the decided branches; the flowed total comes from the deformed
    surface and needs no relevance input at all.
    """

    q: np.ndarray
    intensity_spm: np.ndarray
    intensity_plf: np.ndarray
    coords: np.ndarray        # complex, [order, branch, 2]
    amplitude: np.ndarray     # complex, [order, branch]
    n_sigma: np.ndarray       # float, [order, branch]
    labels: tuple             # window letter per branch, at first sighting
    errors: tuple             # (q, message) pairs
    omega: float


def _spm_records(field, ip, q, params, window, epsilon, n_beads):
    """Per-saddle amplitude and relevance at one harmonic order."""
    phase = HhgPhase(HhgAction(field, ip, q))
    saddles = hhg_saddles(field, ip, q)
    labels = label_windows(saddles, field.omega)
    pref = hhg_prefactor(1e-3 / field.omega)
    records = []
    for k, s in enumerate(saddles):
        others = [o for o in saddles if o is not s]
        note = ""
        try:
            res = relevance_2d(phase, s, params, window=window,
                               other_saddles=others, epsilon=epsilon,
                               n_beads=n_beads)
            n = res.n_sigma
        except (Inconclusive, Ambiguous) as exc:
            n, note = None, str(exc)
        try:
            amp = complex(spm_contribution(phase, s, prefactor=pref))
        except DegenerateHessian as exc:
            amp, note = complex("nan+nanj"), str(exc)
        records.append((s.coords, amp, n, labels[k], note))
    return records


def _spectrum_job(payload):
    """One harmonic order of a spectrum scan (process-pool entry point)."""
    (field, ip, q, want_spm, want_plf, params, window,
     epsilon, n_beads, dipole_kwargs) = payload
    errors = []
    records = None
    plf = math.nan
    if want_spm:
        try:
            records = _spm_records(field, ip, q, params, window,
                                   epsilon, n_beads)
        except (NewtonFailed, DegenerateHessian, RuntimeError) as exc:
            errors.append(f"q={q:g}: saddle sum failed: {exc}")
    if want_plf:
        try:
            result = hhg_dipole(field, ip, q, params=params, **dipole_kwargs)
            plf = result.intensity
        except (RuntimeError, ValueError) as exc:
            errors.append(f"q={q:g}: flowed quadrature failed: {exc}")
    return q, records, plf, errors


def _match_branch(coords, branches, radius):
    """Index of the nearest known branch within radius, or None."""
    best, best_d = None, radius
    for j, ref in enumerate(branches):
        if ref is None:
            continue
        d = max(abs(a - b) for a, b in zip(coords, ref))
        if d < best_d:
            best, best_d = j, d
    return best


def spectrum(field, ip, q_values, method="both", *, params=None,
             window=None, epsilon=None, n_beads=64, workers=None,
             match_radius=None, **dipole_kwargs):
    """Harmonic spectrum over q_values by saddle sum, flow, or both.

    The saddle sum re-finds the landscape at every order and keeps branch
    identity by matching each saddle to the nearest branch position from
    the previous order; a saddle with no close predecessor opens a new
    branch. Cell failures are recorded and leave NaN entries rather than
    aborting the scan.
    """
    if method not in ("SPM", "PLF", "both"):
        raise ValueError(f"unknown method {method!r}")
    want_spm = method in ("SPM", "both")
    want_plf = method in ("PLF", "both")
    omega = field.omega
    if params is None:
        params = default_flow_params(omega)
    if window is None:
        window = DomainWindow(omega)
    if match_radius is None:
        match_radius = 0.5 / omega
    q_values = np.asarray(q_values, dtype=float)

    payloads = [(field, ip, float(q), want_spm, want_plf, params, window,
                 epsilon, n_beads, dipole_kwargs) for q in q_values]
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_spectrum_job, payloads))
    else:
        results = [_spectrum_job(p) for p in payloads]

    branches = []       # last seen coords per branch (None once lost)
    labels = []
    rows = []           # per order: dict branch -> (coords, amp, n, note)
    errors = []
    intensity_plf = np.full(len(q_values), math.nan)
    for i, (q, records, plf, errs) in enumerate(results):
        errors.extend((q, m) for m in errs)
        intensity_plf[i] = plf
        row = {}
        seen = set()
        if records is not None:
            for coords, amp, n, label, note in records:
                j = _match_branch(coords, branches, match_radius)
                if j is None or j in seen:
                    branches.append(coords)
                    labels.append(label)
                    j = len(branches) - 1
                else:
                    branches[j] = coords
                seen.add(j)
                row[j] = (coords, amp, n, note)
                if note:
                    errors.append((q, f"branch {j}: {note}"))
        rows.append(row)

    nq, nb = len(q_values), len(branches)
    coords = np.full((nq, nb, 2), complex("nan+nanj"))
    amplitude = np.full((nq, nb), complex("nan+nanj"))
    n_sigma = np.full((nq, nb), math.nan)
    for i, row in enumerate(rows):
        for j, (c, amp, n, _) in row.items():
            coords[i, j] = c
            amplitude[i, j] = amp
            if n is not None:
                n_sigma[i, j] = n

    intensity_spm = np.full(nq, math.nan)
    if want_spm:
        weight = np.where(np.isnan(n_sigma), 0.0, n_sigma)
        total = np.nansum(weight * amplitude, axis=1)
        computed = np.array([bool(row) for row in rows])
        intensity_spm = np.where(
            computed, (q_values * omega) ** 2 * np.abs(total) ** 2, math.nan)

    return Spectrum(q=q_values, intensity_spm=intensity_spm,
                    intensity_plf=intensity_plf, coords=coords,
                    amplitude=amplitude, n_sigma=n_sigma,
                    labels=tuple(labels), errors=tuple(errors), omega=omega)


# ---------------------------------------------------------------------------
# Caustic grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScanGrid:
    """Flowed intensity over (harmonic order, two-colour phase delay)."""

    q: np.ndarray
    phase2: np.ndarray
    intensity: np.ndarray     # [order, phase], NaN where a cell failed
    errors: tuple             # (q, phase2, message)

    @property
    def peak(self):
        """(q, phase2) of the largest finite cell."""
        flat = np.where(np.isfinite(self.intensity), self.intensity, -np.inf)
        i, j = np.unravel_index(int(np.argmax(flat)), flat.shape)
        return float(self.q[i]), float(self.phase2[j])


def _caustic_cell(payload):
    """One (order, phase delay) cell of a caustic grid."""
    e1, e2, phi2, omega, ip, q, params, dipole_kwargs = payload
    field = LaserField.two_colour_cos(e1, e2, phi2, omega)
    try:
        return hhg_dipole(field, ip, q, params=params,
                          **dipole_kwargs).intensity, ""
    except (RuntimeError, ValueError) as exc:
        return math.nan, str(exc)


def caustic_grid(e1, e_ratio, ip, omega, q_values, phase2_values, *,
                 params=None, workers=None, **dipole_kwargs):
    """Flowed intensity over a (q, phase2) grid at fixed amplitude ratio.

    Near the enhancement the orbits coalesce and the Gaussian sum is
    meaningless, so every cell uses the flowed quadrature. Cells are
    independent jobs; failures leave NaN and are reported per cell.
    """
    if params is None:
        params = default_flow_params(omega)
    q_values = np.asarray(q_values, dtype=float)
    phase2_values = np.asarray(phase2_values, dtype=float)
    payloads = [(e1, e_ratio * e1, float(phi2), omega, ip, float(q),
                 params, dipole_kwargs)
                for q in q_values for phi2 in phase2_values]
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_caustic_cell, payloads))
    else:
        cells = [_caustic_cell(p) for p in payloads]

    nq, np2 = len(q_values), len(phase2_values)
    intensity = np.full((nq, np2), math.nan)
    errors = []
    for k, (value, message) in enumerate(cells):
        i, j = divmod(k, np2)
        intensity[i, j] = value
        if message:
            errors.append((float(q_values[i]), float(phase2_values[j]),
                           message))
    return ScanGrid(q=q_values, phase2=phase2_values, intensity=intensity,
                    errors=tuple(errors))


# ---------------------------------------------------------------------------
# Stokes-transition roots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StokesCandidate:
    """A parameter value where two tracked saddles share Im f.

    Equal oscillation phase is the necessary condition for a relevance
    flip; each candidate should be confronted with the relevance tests on
    both sides. A degenerate candidate means the difference vanished
    identically along the whole track (a symmetry), which is a property
    of the pair, not a discrete transition; its value is NaN.
    """

    param_name: str
    value: float
    pair: tuple
    residual: float
    degenerate: bool = False


def _h_imag(phase, coords):
    return complex(phase.exponent(*coords)).imag


def stokes_candidates(make_phase, param_values, seeds, *, param_name="q",
                      labels=None, jump_tol=1.0, root_tol=1e-6,
                      degenerate_tol=1e-9, max_bisect=100, tol=1e-10):
    """Roots of H(sigma_i) = H(sigma_j) along tracked saddle pairs.

    Every seed is continued across param_values; for each pair of tracks
    the difference of oscillation phases is scanned for sign changes and
    each change is bisected, re-converging both branches at every probe
    so branch identity survives the refinement. A lost track raises: the
    roots of a partial track would silently miss transitions.
    """
    param_values = np.asarray(param_values, dtype=float)
    if labels is None:
        labels = tuple(str(k) for k in range(len(seeds)))
    tracks = []
    for k, seed in enumerate(seeds):
        track = track_saddle(make_phase, param_values, seed,
                             jump_tol=jump_tol, tol=tol)
        if track.lost_at is not None:
            raise LostTrack(
                f"track {labels[k]} lost at {param_name}="
                f"{param_values[track.lost_at]:g}")
        tracks.append(track)

    span = float(param_values[-1] - param_values[0]) or 1.0
    found = []
    for i in range(len(tracks)):
        for j in range(i + 1, len(tracks)):
            dh = np.array([tracks[i].saddles[k].H - tracks[j].saddles[k].H
                           for k in range(len(param_values))])
            if np.max(np.abs(dh)) < degenerate_tol:
                found.append(StokesCandidate(
                    param_name, math.nan, (labels[i], labels[j]),
                    float(np.max(np.abs(dh))), degenerate=True))
                continue
            for k in np.flatnonzero(np.sign(dh[:-1]) != np.sign(dh[1:])):
                root = _bisect_phase_match(
                    make_phase, param_values[k], param_values[k + 1],
                    tracks[i].saddles[k].coords, tracks[j].saddles[k].coords,
                    dh[k], root_tol, abs(span) * 1e-13, max_bisect, tol)
                if root is not None:
                    found.append(StokesCandidate(
                        param_name, root[0], (labels[i], labels[j]), root[1]))
    found.sort(key=lambda c: (math.inf if math.isnan(c.value) else c.value))
    return found


def _bisect_phase_match(make_phase, pa, pb, coords_i, coords_j, dha,
                        root_tol, param_tol, max_bisect, tol):
    """Refine one sign change of the phase difference by bisection.

    Both branches are re-converged at each midpoint from the bracket-edge
    coordinates, which keeps them on their sheets through the narrowing
    interval. Returns (parameter, residual) or None if a probe loses a
    branch (the caller's tracks were healthy, so this is a coalescence
    sitting inside the bracket, not a transition)."""
    ci, cj = coords_i, coords_j
    for _ in range(max_bisect):
        pm = 0.5 * (pa + pb)
        phase = make_phase(pm)
        try:
            mi = newton_refine(phase, ci, tol=tol)
            mj = newton_refine(phase, cj, tol=tol)
        except NewtonFailed:
            return None
        dhm = _h_imag(phase, mi) - _h_imag(phase, mj)
        if abs(dhm) < root_tol or (pb - pa) < param_tol:
            return pm, abs(dhm)
        if (dhm > 0) == (dha > 0):
            pa, ci, cj, dha = pm, mi, mj, dhm
        else:
            pb = pm
    return pm, abs(dhm)


# ---------------------------------------------------------------------------
# Colour switchover
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SwitchoverCell:
    """One (mixing angle, order, saddle) entry of a switchover map."""

    theta: float
    q: float
    coords: tuple
    h: float
    H: float
    n_sigma: int | None
    label: str
    amplitude: complex
    note: str = ""


@dataclass(frozen=True)
class SwitchoverScan:
    """Relevance map and saddle sum across the colour switchover."""

    theta: np.ndarray
    q: np.ndarray
    omega: float
    cells: tuple              # SwitchoverCell, ordered by (theta, q, saddle)
    marked: tuple             # (theta, q, label, Trajectory) at marked cells
    errors: tuple             # (theta, q, message)


def _switchover_point(payload):
    """All saddle records at one (mixing angle, order) cell."""
    e0, omega, ip, theta, q, params, window, epsilon, n_beads = payload
    field = LaserField.switchover_sin(e0, theta, omega)
    try:
        saddles = hhg_saddles(field, ip, q)
        records = hhg_relevance(field, ip, q, params=params, window=window,
                                saddles=saddles, epsilon=epsilon,
                                n_beads=n_beads)
    except (NewtonFailed, DegenerateHessian, RuntimeError) as exc:
        return theta, q, None, [f"saddle landscape failed: {exc}"]
    phase = HhgPhase(HhgAction(field, ip, q))
    pref = hhg_prefactor(1e-3 / omega)
    cells, errors = [], []
    for rec in records:
        try:
            amp = complex(spm_contribution(phase, rec.saddle, prefactor=pref))
        except DegenerateHessian:
            amp = complex("nan+nanj")
        if rec.note:
            errors.append(f"saddle at {rec.saddle.coords}: {rec.note}")
        cells.append(SwitchoverCell(
            theta=theta, q=q, coords=rec.saddle.coords, h=rec.saddle.h,
            H=rec.saddle.H, n_sigma=rec.n_sigma, label=rec.label,
            amplitude=amp, note=rec.note))
    return theta, q, cells, errors


def switchover_scan(e0, omega, ip, theta_values, q_values, *, params=None,
                    window=None, epsilon=None, n_beads=64, workers=None,
                    mark=()):
    """Saddle relevance and Gaussian weights across the colour switchover.

    For every (theta, q) cell the full saddle landscape is classified;
    window letters restart at each mixing angle (the landscape
    reorganises, carrying letters across would suggest an identification
    the scan does not make). Cells listed in ``mark`` additionally get
    the real-space trajectories of their relevant orbits.
    """
    if params is None:
        params = default_flow_params(omega)
    if window is None:
        window = DomainWindow(omega)
    theta_values = np.asarray(theta_values, dtype=float)
    q_values = np.asarray(q_values, dtype=float)
    payloads = [(e0, omega, ip, float(th), float(q), params, window,
                 epsilon, n_beads)
                for th in theta_values for q in q_values]
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_switchover_point, payloads))
    else:
        results = [_switchover_point(p) for p in payloads]

    cells, errors = [], []
    for theta, q, point_cells, errs in results:
        errors.extend((theta, q, m) for m in errs)
        if point_cells is not None:
            cells.extend(point_cells)

    marked = []
    for theta, q in mark:
        field = LaserField.switchover_sin(e0, float(theta), omega)
        for cell in cells:
            if (abs(cell.theta - theta) < 1e-12 and abs(cell.q - q) < 1e-12
                    and cell.n_sigma):
                phase = HhgPhase(HhgAction(field, ip, float(q)))
                saddle = make_saddle(phase, cell.coords,
                                     window_label=cell.label)
                marked.append((float(theta), float(q), cell.label,
                               trajectory(field, saddle)))
    return SwitchoverScan(theta=theta_values, q=q_values, omega=omega,
                          cells=tuple(cells), marked=tuple(marked),
                          errors=tuple(errors))


def ionisation_bursts(scan, theta, *, gap=0.5):
    """Centres of the relevant ionisation windows at one mixing angle.

    Collects Re(w ti) of every relevant saddle at that angle (all orders
    pooled), clusters values closer than ``gap`` (in units of the field
    phase), and returns the cluster means in increasing order. Clusters
    touching across the period seam are merged.
    """
    times = [cell.coords[0].real * scan.omega % (2.0 * math.pi)
             for cell in scan.cells
             if abs(cell.theta - theta) < 1e-12 and cell.n_sigma]
    if not times:
        return np.array([])
    return _cluster_circular(np.sort(np.asarray(times)), gap)


def _cluster_circular(values, gap):
    """Means of gap-separated clusters of angles in [0, 2 pi)."""
    clusters = [[values[0]]]
    for v in values[1:]:
        if v - clusters[-1][-1] <= gap:
            clusters[-1].append(v)
        else:
            clusters.append([v])
    if len(clusters) > 1 and (values[0] + 2.0 * math.pi - values[-1]) <= gap:
        first = clusters.pop(0)
        clusters[-1].extend(v + 2.0 * math.pi for v in first)
    means = np.array(sorted(np.mean(c) % (2.0 * math.pi) for c in clusters))
    return means


# ---------------------------------------------------------------------------
# Quantum-orbit trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Real-space excursion of one quantum orbit.

    The contour drops from the complex ionisation time to the real axis,
    runs along it, and closes at the complex return time; x(t) is the
    exact antiderivative of the kinematic momentum p + A along that path,
    so the closure |x(tr)| is a pure consistency statement about the
    stationary momentum, not about step sizes.
    """

    coords: tuple
    p: complex
    t: np.ndarray             # sample times along the contour
    x: np.ndarray             # displacement at those times
    t_real: np.ndarray        # real-leg times
    energy: np.ndarray        # kinetic energy (p + A)^2 / 2 on the real leg
    closure: float


def trajectory(field, saddle, samples=256):
    """Displacement along the two-leg contour of one (ti, tr) saddle."""
    ti, tr = saddle.coords
    p = complex(stationary_momentum(field, ti, tr))
    n_vert = max(16, samples // 8)
    leg_down = ti + (ti.real - ti) * np.linspace(0.0, 1.0, n_vert)
    leg_real = np.linspace(ti.real, tr.real, samples).astype(complex)
    t = np.concatenate([leg_down, leg_real[1:], [tr]])

    def x_of(times):
        return (p * (times - ti)
                + field.integral_a(times) - field.integral_a(ti))

    x = x_of(t)
    t_real = leg_real.real
    v = p + field.vector_potential(t_real)
    return Trajectory(coords=saddle.coords, p=p, t=t, x=x, t_real=t_real,
                      energy=0.5 * v * v, closure=float(abs(x_of(tr))))


# ---------------------------------------------------------------------------
# Cusp locator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CuspPoint:
    """A three-orbit coalescence in complexified control parameters."""

    coords: tuple
    params: tuple
    residual: float
    steps: int


def _kernel_direction(hess):
    """Unit null direction of a (near-)singular complex symmetric 2x2."""
    rows = ((hess[0, 1], -hess[0, 0]), (hess[1, 1], -hess[0, 1]))
    v = max(rows, key=lambda r: abs(r[0]) ** 2 + abs(r[1]) ** 2)
    norm = math.sqrt(abs(v[0]) ** 2 + abs(v[1]) ** 2)
    if norm == 0.0:
        raise NoConvergence("curvature matrix vanished; no kernel direction")
    v = np.array(v) / norm
    lead = v[int(np.argmax(np.abs(v)))]
    return v * (lead.conjugate() / abs(lead))


def _cusp_residual(make_phase, u, n, fd):
    """Saddle equations, Hessian determinant, and kernel third derivative."""
    coords, pars = tuple(u[:n]), tuple(u[n:])
    phase = make_phase(*pars)
    g = phase.grad(*coords)
    grads = [complex(g)] if n == 1 else [complex(c) for c in g]
    if n == 1:
        z = coords[0]
        det = complex(phase.hess(z))
        third = (complex(phase.hess(z + fd))
                 - complex(phase.hess(z - fd))) / (2.0 * fd)
    else:
        hess = _hess_matrix(phase, coords)
        det = hess[0, 0] * hess[1, 1] - hess[0, 1] * hess[1, 0]
        v = _kernel_direction(hess)

        def quad(s):
            shifted = (coords[0] + s * v[0], coords[1] + s * v[1])
            m = _hess_matrix(phase, shifted)
            return complex(v @ m @ v)

        third = (quad(fd) - quad(-fd)) / (2.0 * fd)
    return np.array(grads + [det, third])


def cusp_locator(make_phase, coords, params, *, tol=1e-9, max_iter=100,
                 fd_scale=1e-5, quartic_floor=1e-6):
    """Newton solve for the point where three stationary points coalesce.

    Unknowns are the stationary coordinates plus two complexified control
    parameters; the equations are the saddle conditions, a vanishing
    Hessian determinant, and a vanishing third derivative along the
    Hessian kernel. Exact coalescence generally sits off the real
    parameter slice, which is why the controls must be complex. Raises
    NoConvergence if the residual never meets tol, and WrongStratum if
    the solution's degeneracy is of the wrong kind (kernel of dimension
    two, or a vanishing fourth derivative: a worse catastrophe, for
    which these conditions are necessary but not defining).
    """
    u = np.array([complex(c) for c in coords]
                 + [complex(p) for p in params])
    n = len(coords)
    if len(u) != n + 2:
        raise ValueError("exactly two control parameters are required")
    fd = fd_scale * max(1.0, float(np.max(np.abs(u[:n]))))

    res = _cusp_residual(make_phase, u, n, fd)
    best = float(np.max(np.abs(res)))
    for step in range(max_iter):
        if best < tol:
            return _certify_cusp(make_phase, u, n, fd, best, step,
                                 quartic_floor)
        jac = np.empty((n + 2, n + 2), dtype=complex)
        for k in range(n + 2):
            dk = fd_scale * max(1.0, abs(u[k]))
            up, um = u.copy(), u.copy()
            up[k] += dk
            um[k] -= dk
            jac[:, k] = (_cusp_residual(make_phase, up, n, fd)
                         - _cusp_residual(make_phase, um, n, fd)) / (2.0 * dk)
        try:
            delta = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular system at step {step}") from exc
        alpha = 1.0
        for _ in range(12):
            trial = u - alpha * delta
            trial_res = _cusp_residual(make_phase, trial, n, fd)
            trial_best = float(np.max(np.abs(trial_res)))
            if math.isfinite(trial_best) and trial_best < best:
                u, res, best = trial, trial_res, trial_best
                break
            alpha *= 0.5
        else:
            raise NoConvergence(
                f"stalled at step {step} with residual {best:.3e}")
    raise NoConvergence(f"residual {best:.3e} after {max_iter} steps")


def _certify_cusp(make_phase, u, n, fd, residual, steps, quartic_floor):
    """Check the converged point is a cusp and not a deeper degeneracy."""
    coords, pars = tuple(u[:n]), tuple(u[n:])
    phase = make_phase(*pars)
    if n == 1:
        z = coords[0]
        quartic = (complex(phase.hess(z + fd)) - 2.0 * complex(phase.hess(z))
                   + complex(phase.hess(z - fd))) / fd ** 2
    else:
        hess = _hess_matrix(phase, coords)
        scale = float(np.max(np.abs(hess)))
        if scale < quartic_floor:
            raise WrongStratum(
                "curvature matrix vanishes entirely; the kernel is not "
                "one-dimensional")
        v = _kernel_direction(hess)

        def quad(s):
            shifted = (coords[0] + s * v[0], coords[1] + s * v[1])
            return complex(v @ _hess_matrix(phase, shifted) @ v)

        quartic = (quad(fd) - 2.0 * quad(0.0) + quad(-fd)) / fd ** 2
    if abs(quartic) < quartic_floor:
        raise WrongStratum(
            f"fourth derivative along the kernel is {abs(quartic):.3e}; "
            "the coalescence is deeper than three orbits")
    return CuspPoint(coords=coords, params=pars, residual=residual,
                     steps=steps)
