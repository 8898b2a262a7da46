"""Downward flow of a two-time integration domain as an embedded surface.

The real (ti, tr) integration domain is discretised into a triangle mesh
whose vertices live in two complex dimensions. Each iteration moves every
active vertex by -delta_flow * (conj(df/dti), conj(df/dtr)), the steepest-
descent direction of h = Re f in the four-real-dimensional embedding; the
exact flow conserves H = Im f, so its drift measures discretisation error.
Vertices sinking below h_thresh freeze, stretched triangles are re-meshed
in their own plane, and the surviving surface hugs the union of descent
manifolds through the contributing saddles, where the integrand no longer
oscillates.

Surface quadrature uses the holomorphic area form: for a triangle whose
corner displacements are (a1, b1) and (a2, b2) in the two complex
coordinates, the integral of dti ^ dtr over the flat triangle is
(a1*b2 - a2*b1)/2, and the integrand is approximated by its vertex mean.
Deactivated vertices carry zero weight, exactly as in the one-variable
flow; disconnected live regions are labelled so each one's partial sum
can be reported as a separate orbit family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Delaunay, QhullError

from .flow1d import BlowUp, FlowDiag, FlowParams, default_flow_params

__all__ = [
    "MeshDegenerate", "TriMesh", "DipoleResult", "grid_mesh", "init_domain",
    "flow_mesh", "quadrature_2d", "active_components", "hhg_prefactor",
    "hhg_dipole", "mesh_snapshot", "nearest_active_distance",
]


class MeshDegenerate(RuntimeError):
    """Re-meshing produced unusable triangles; l_thresh is too coarse for
    the local stretching of the flow."""


@dataclass
class TriMesh:
    """Triangulated surface in two complex time variables.

    vertices is (n, 2) complex, triangles (m, 3) vertex indices with a
    consistent orientation (positive area form on the initial real
    domain), active a per-vertex flag, provenance 0 for original vertices
    and 1 for inserted ones, birth_H the oscillation phase at insertion.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    active: np.ndarray
    provenance: np.ndarray
    birth_H: np.ndarray | None = None

    def copy(self):
        return TriMesh(self.vertices.copy(), self.triangles.copy(),
                       self.active.copy(), self.provenance.copy(),
                       None if self.birth_H is None else self.birth_H.copy())


@dataclass(frozen=True)
class DipoleResult:
    """Value of a flowed two-time integral at one emission frequency.

    per_component holds (live-region label, partial sum) pairs; freq is
    the emitted angular frequency, zero for toy integrals.
    """

    value: complex
    freq: float = 0.0
    per_component: tuple = ()

    @property
    def intensity(self):
        return self.freq ** 2 * abs(self.value) ** 2


def _structured(first, second):
    """Vertices and consistently oriented triangles of a structured grid."""
    nx, ny = len(first), len(second)
    x, y = np.meshgrid(np.asarray(first, dtype=complex),
                       np.asarray(second, dtype=complex), indexing="ij")
    vertices = np.column_stack([x.ravel(), y.ravel()])
    i, j = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="ij")
    v00 = (i * ny + j).ravel()
    v10 = ((i + 1) * ny + j).ravel()
    v01 = (i * ny + j + 1).ravel()
    v11 = ((i + 1) * ny + j + 1).ravel()
    tris = np.vstack([np.column_stack([v00, v10, v11]),
                      np.column_stack([v00, v11, v01])]).astype(np.int64)
    return vertices, tris


def grid_mesh(x0, x1, y0, y1, spacing):
    """Structured triangulation of a real rectangle embedded in C^2."""
    nx = max(1, int(math.ceil((x1 - x0) / spacing)))
    ny = max(1, int(math.ceil((y1 - y0) / spacing)))
    vertices, tris = _structured(np.linspace(x0, x1, nx + 1),
                                 np.linspace(y0, y1, ny + 1))
    n = len(vertices)
    return TriMesh(vertices=vertices, triangles=tris,
                   active=np.ones(n, dtype=bool),
                   provenance=np.zeros(n, dtype=np.uint8))


def init_domain(omega, resolution=24, cycles=1.0, max_travel_cycles=1.0,
                diag_eps=None):
    """Triangulated (ti, tr) strip: ionisation times spanning the given
    number of fundamental cycles, travel times tr - ti from diag_eps (the
    prefactor is singular at zero travel) up to max_travel_cycles.

    resolution counts grid points per cycle per axis; the strip is built
    in (ti, travel) coordinates and sheared, so triangle orientation and
    the area form match the plain rectangle case.
    """
    if resolution < 8:
        raise ValueError("resolution below 8 points per cycle per axis")
    period = 2.0 * math.pi / omega
    if diag_eps is None:
        diag_eps = 1e-3 / omega
    n_ti = max(1, int(round(resolution * cycles)))
    n_u = max(1, int(round(resolution * max_travel_cycles)))
    ti = np.linspace(0.0, cycles * period, n_ti + 1)
    travel = np.linspace(diag_eps, max_travel_cycles * period, n_u + 1)
    vertices, tris = _structured(ti, travel)
    vertices[:, 1] = vertices[:, 0] + vertices[:, 1]
    n = len(vertices)
    return TriMesh(vertices=vertices, triangles=tris,
                   active=np.ones(n, dtype=bool),
                   provenance=np.zeros(n, dtype=np.uint8))


def flow_mesh(phase, mesh, params, n_iter=None, direction=-1.0):
    """Advance the surface flow n_iter iterations (params.max_iter default).

    Returns (mesh, diagnostics); the input mesh is not modified. Accepted
    steps are h-monotone in the flow direction per vertex: a step that
    would move h the wrong way is halved up to max_halvings times and the
    vertex is frozen for the iteration if that fails, so monotonicity
    holds exactly.
    """
    m = mesh.copy()
    w = np.asarray(phase.exponent(m.vertices[:, 0], m.vertices[:, 1]))
    h = w.real.copy()
    if m.birth_H is None:
        m.birth_H = w.imag.copy()
    diag = FlowDiag(n_nodes=len(m.vertices))
    total = params.max_iter if n_iter is None else n_iter
    sgn = 1.0 if direction > 0 else -1.0
    with np.errstate(all="ignore"):
        for _ in range(total):
            idx = np.flatnonzero(m.active)
            diag.n_active = len(idx)
            if len(idx) == 0:
                diag.converged = True
                break
            z1 = m.vertices[idx, 0]
            z2 = m.vertices[idx, 1]
            g1, g2 = phase.grad(z1, z2)
            g1, g2 = np.asarray(g1), np.asarray(g2)
            gnorm = np.sqrt(np.abs(g1) ** 2 + np.abs(g2) ** 2)
            scale = np.where((gnorm > 0.0) & (gnorm < params.grad_norm_floor),
                             1.0 / np.maximum(gnorm, 1e-300), 1.0)
            s1 = sgn * params.delta_flow * scale * np.conj(g1)
            s2 = sgn * params.delta_flow * scale * np.conj(g2)
            h_old = h[idx]
            t1 = z1 + s1
            t2 = z2 + s2
            wt = np.asarray(phase.exponent(t1, t2))
            # enforce monotone h along the flow direction
            for _ in range(params.max_halvings):
                bad = (sgn * (wt.real - h_old) < 0.0) | ~np.isfinite(wt.real)
                bad &= (np.abs(s1) + np.abs(s2)) > 0.0
                if not np.any(bad):
                    break
                s1[bad] *= 0.5
                s2[bad] *= 0.5
                t1[bad] = z1[bad] + s1[bad]
                t2[bad] = z2[bad] + s2[bad]
                wt[bad] = np.asarray(phase.exponent(t1[bad], t2[bad]))
            still = (sgn * (wt.real - h_old) < 0.0) | ~np.isfinite(wt.real)
            if np.any(still):
                t1[still] = z1[still]
                t2[still] = z2[still]
                w0 = np.asarray(phase.exponent(z1[still], z2[still]))
                wt[still] = h_old[still] + 1j * w0.imag
                s1[still] = 0.0
                s2[still] = 0.0
            reach = np.maximum(np.abs(t1), np.abs(t2))
            if np.any(reach > params.blowup_radius):
                worst = int(np.argmax(reach))
                raise BlowUp(f"vertex reached ({t1[worst]}, {t2[worst]}) "
                             f"beyond radius {params.blowup_radius}")
            m.vertices[idx, 0] = t1
            m.vertices[idx, 1] = t2
            h[idx] = wt.real
            diag.steps += 1
            diag.max_h_increase = max(diag.max_h_increase,
                                      float(np.max(sgn * -(wt.real - h_old),
                                                   initial=-math.inf)))
            drift = np.abs(wt.imag - m.birth_H[idx])
            diag.max_H_drift = max(diag.max_H_drift,
                                   float(np.max(drift, initial=0.0)))
            disp = np.sqrt(np.abs(s1) ** 2 + np.abs(s2) ** 2)
            diag.last_displacement = float(np.max(disp, initial=0.0))
            if sgn < 0:
                level = params.h_thresh
                if params.drain_depth is not None:
                    level = max(level, float(np.max(wt.real))
                                - params.drain_depth)
                dead = wt.real < level
                if np.any(dead):
                    m.active[idx[dead]] = False
            if params.refine_every and diag.steps % params.refine_every == 0:
                if params.collapse_frac:
                    m, _ = _coarsen_round(phase, m, h, params)
                m, h = _refine_mesh(phase, m, h, params)
            if (params.displacement_tol > 0.0
                    and diag.last_displacement < params.displacement_tol):
                diag.converged = True
                break
    diag.n_nodes = len(m.vertices)
    diag.n_active = int(np.sum(m.active))
    return m, diag


def _edges_of(tris):
    pairs = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    pairs.sort(axis=1)
    return np.unique(pairs, axis=0)


def _coarsen_round(phase, mesh, h, params):
    """Collapse crowded live interior edges onto their shallower endpoint.

    The descent flow squeezes the two off-surface directions, so vertices
    arriving from different heights stack up nearly on top of each other.
    Edges much shorter than the local refinement threshold carry no
    resolution once their exponent values agree; merging them keeps the
    vertex count proportional to the live area instead of the swept
    volume.  Edges whose endpoints still differ in phase are left alone,
    they belong to distinct sheets whose contributions must cancel.
    """
    V, A, tris = mesh.vertices, mesh.active, mesh.triangles
    pairs = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    pairs.sort(axis=1)
    edges, counts = np.unique(pairs, axis=0, return_counts=True)
    boundary = np.zeros(len(V), dtype=bool)
    boundary[edges[counts != 2]] = True

    e0, e1 = edges[:, 0], edges[:, 1]
    d = V[e0] - V[e1]
    length = np.sqrt(np.abs(d[:, 0]) ** 2 + np.abs(d[:, 1]) ** 2)
    crest = float(np.max(h[A])) if np.any(A) else 0.0
    depth = np.maximum(h[e0], h[e1]) - crest
    allowed = params.l_thresh * np.exp(
        -np.clip(depth, params.refine_h_floor, 0.0) / params.refine_h_scale)
    short = ((counts == 2) & A[e0] & A[e1] & ~boundary[e0] & ~boundary[e1]
             & (length < params.collapse_frac * allowed))
    if not np.any(short):
        return mesh, 0

    cand = np.flatnonzero(short)
    verts = np.unique(edges[cand])
    w = np.full(len(V), np.nan + 0j, dtype=complex)
    w[verts] = np.asarray(phase.exponent(V[verts, 0], V[verts, 1]))
    df = np.abs(w[edges[cand, 0]] - w[edges[cand, 1]])
    cand = cand[df < params.collapse_df]
    if cand.size == 0:
        return mesh, 0
    cand = cand[np.argsort(length[cand], kind="stable")]
    used = np.zeros(len(V), dtype=bool)
    gone, kept = [], []
    for k in cand:
        a, b = int(edges[k, 0]), int(edges[k, 1])
        if used[a] or used[b]:
            continue
        used[a] = used[b] = True
        if h[a] >= h[b]:
            gone.append(b), kept.append(a)
        else:
            gone.append(a), kept.append(b)
    if not gone:
        return mesh, 0

    amap = np.arange(len(V))
    amap[np.asarray(gone)] = np.asarray(kept)
    t2 = amap[tris]
    degen = ((t2[:, 0] == t2[:, 1]) | (t2[:, 1] == t2[:, 2])
             | (t2[:, 2] == t2[:, 0]))
    mesh.triangles = t2[~degen]
    mesh.active[np.asarray(gone)] = False
    return mesh, len(gone)


def _refine_mesh(phase, mesh, h, params, max_rounds=40):
    """Split over-stretched live edges and re-mesh the touched triangles.

    Runs in rounds because re-meshing a triangle in its own plane can
    create interior edges slightly above l_thresh; each round splits the
    survivors, so the pass ends with no live edge over the threshold.
    """
    for _ in range(max_rounds):
        mesh, h, n_split = _refine_round(phase, mesh, h, params)
        if n_split == 0:
            return mesh, h
    raise MeshDegenerate(f"refinement did not settle in {max_rounds} rounds")


def _refine_round(phase, mesh, h, params):
    V, A, tris = mesh.vertices, mesh.active, mesh.triangles
    edges = _edges_of(tris)
    d = V[edges[:, 0]] - V[edges[:, 1]]
    length = np.sqrt(np.abs(d[:, 0]) ** 2 + np.abs(d[:, 1]) ** 2)
    # the length threshold is graded with depth below the crest (the
    # shallowest live node, which settles at the dominant stationary
    # level): an edge that sits a depth d below the crest carries
    # relative weight e^d, so it may grow correspondingly longer before
    # its discretisation error matters; beyond refine_h_floor the
    # region is draining and resolving it is wasted motion
    crest = float(np.max(h[A])) if np.any(A) else 0.0
    shallower = np.maximum(h[edges[:, 0]], h[edges[:, 1]])
    depth = shallower - crest
    allowed = params.l_thresh * np.exp(
        -np.clip(depth, params.refine_h_floor, 0.0)
        / params.refine_h_scale)
    need = (A[edges[:, 0]] & A[edges[:, 1]] & (length > allowed)
            & (depth > params.refine_h_floor))
    if not np.any(need):
        return mesh, h, 0

    new_rows = []
    next_id = len(V)
    split = {}
    for (a, b), gap, cap in zip(edges[need], length[need], allowed[need]):
        extra = min(64, int(gap / cap))
        frac = np.arange(1, extra + 1) / (extra + 1.0)
        pts = V[a][None, :] + (V[b] - V[a])[None, :] * frac[:, None]
        split[(a, b)] = list(range(next_id, next_id + extra))
        new_rows.extend(pts)
        next_id += extra

    def point(i):
        return V[i] if i < len(V) else new_rows[i - len(V)]

    # pick out the triangles owning a split edge without touching the rest
    stride = len(V) + 1
    codes = edges[:, 0] * stride + edges[:, 1]
    lo = np.minimum.reduce([tris[:, 0], tris[:, 1], tris[:, 2]])
    hi = np.maximum.reduce([tris[:, 0], tris[:, 1], tris[:, 2]])
    mid = tris[:, 0] + tris[:, 1] + tris[:, 2] - lo - hi
    rows = np.searchsorted(
        codes, np.stack([lo * stride + mid, mid * stride + hi,
                         lo * stride + hi], axis=1))
    touched = need[rows[:, 0]] | need[rows[:, 1]] | need[rows[:, 2]]

    new_tris = []
    for a, b, c in tris[touched]:
        keys = [(a, b) if a < b else (b, a),
                (b, c) if b < c else (c, b),
                (c, a) if c < a else (a, c)]
        on_ab, on_bc, on_ca = (split.get(k) for k in keys)
        counts = [0 if p is None else len(p) for p in (on_ab, on_bc, on_ca)]
        if max(counts) == 1:
            # midpoint subdivision: pure index surgery, no projection
            new_tris.extend(_midpoint_children(a, b, c, on_ab, on_bc, on_ca))
            continue
        ids = [a, b, c]
        for p in (on_ab, on_bc, on_ca):
            if p:
                ids.extend(p)
        boundary = _boundary_cycle(a, b, c, on_ab, on_bc, on_ca)
        lattice = max(counts) if (A[a] and A[b] and A[c]) else 0
        children, next_id = _replan_triangle(
            point, ids, boundary, lattice, next_id, new_rows)
        new_tris.extend(children)

    fresh = np.asarray(new_rows)
    wf = np.asarray(phase.exponent(fresh[:, 0], fresh[:, 1]))
    k = len(fresh)
    mesh2 = TriMesh(
        vertices=np.vstack([V, fresh]),
        triangles=np.vstack([tris[~touched],
                             np.asarray(new_tris, dtype=np.int64)]),
        active=np.concatenate([A, np.ones(k, dtype=bool)]),
        provenance=np.concatenate([mesh.provenance,
                                   np.ones(k, dtype=np.uint8)]),
        birth_H=np.concatenate([mesh.birth_H, wf.imag]))
    return mesh2, np.concatenate([h, wf.real]), int(np.sum(need))


def _midpoint_children(a, b, c, on_ab, on_bc, on_ca):
    """Subdivide using one midpoint per split edge, orientation kept."""
    mab = on_ab[0] if on_ab else None
    mbc = on_bc[0] if on_bc else None
    mca = on_ca[0] if on_ca else None
    if mab is not None and mbc is not None and mca is not None:
        return [(a, mab, mca), (mab, b, mbc), (mca, mbc, c),
                (mab, mbc, mca)]
    if mab is not None and mbc is not None:
        return [(a, mab, mbc), (mab, b, mbc), (a, mbc, c)]
    if mbc is not None and mca is not None:
        return [(b, mbc, mca), (mbc, c, mca), (b, mca, a)]
    if mca is not None and mab is not None:
        return [(c, mca, mab), (mca, a, mab), (c, mab, b)]
    if mab is not None:
        return [(a, mab, c), (mab, b, c)]
    if mbc is not None:
        return [(b, mbc, a), (mbc, c, a)]
    return [(c, mca, b), (mca, a, b)]


def _boundary_cycle(a, b, c, on_ab, on_bc, on_ca):
    """Boundary vertex ids in the parent's cyclic order a -> b -> c.

    Cached edge points run from the lower to the higher vertex id, so they
    are reversed when the triangle traverses the edge the other way.
    """
    cycle = [a]
    if on_ab:
        cycle.extend(on_ab if a < b else list(reversed(on_ab)))
    cycle.append(b)
    if on_bc:
        cycle.extend(on_bc if b < c else list(reversed(on_bc)))
    cycle.append(c)
    if on_ca:
        cycle.extend(on_ca if c < a else list(reversed(on_ca)))
    return cycle


def _fan(boundary):
    return [(boundary[0], boundary[i], boundary[i + 1])
            for i in range(1, len(boundary) - 1)]


def _replan_triangle(point, ids, boundary, max_count, next_id, new_rows):
    """Re-mesh one triangle in its own plane by Delaunay triangulation.

    An interior barycentric lattice keeps the children fat (the boundary
    points alone would leave long interior chords). Falls back to a fan
    over the boundary cycle when the parent is flattened to a line (the
    flow shears triangles hard near the freeze depth) or when the
    Delaunay cover misses area; the fan keeps the shared-edge points, so
    the surface stays crack-free either way.
    """
    corners = np.array([point(i) for i in ids[:3]])
    flat3 = np.column_stack([corners[:, 0].real, corners[:, 0].imag,
                             corners[:, 1].real, corners[:, 1].imag])
    e1 = flat3[1] - flat3[0]
    e2 = flat3[2] - flat3[0]
    n1 = float(np.linalg.norm(e1))
    u1 = e1 / n1 if n1 > 0.0 else e1
    w2 = e2 - float(e2 @ u1) * u1
    n2 = float(np.linalg.norm(w2))
    if n1 == 0.0 or n2 < 1e-9 * n1:
        return _fan(boundary), next_id
    u2 = w2 / n2
    level = 1 + max_count
    ids = list(ids)
    for i in range(1, level - 1):
        for j in range(1, level - i):
            k = level - i - j
            if k < 1:
                continue
            new_rows.append((i * corners[0] + j * corners[1]
                             + k * corners[2]) / level)
            ids.append(next_id)
            next_id += 1
    pts = np.array([point(i) for i in ids])
    flat = np.column_stack([pts[:, 0].real, pts[:, 0].imag,
                            pts[:, 1].real, pts[:, 1].imag])
    rel = flat - flat3[0]
    xy = np.column_stack([rel @ u1, rel @ u2])
    parent_area = 0.5 * n1 * n2
    try:
        cover = Delaunay(xy)
    except QhullError:
        return _fan(boundary), next_id
    children = []
    covered = 0.0
    for s in cover.simplices:
        (x0, y0), (x1, y1), (x2, y2) = xy[s]
        area = 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
        if area < 0.0:
            s = s[[0, 2, 1]]
            area = -area
        if area < 1e-12 * parent_area:
            continue            # sliver; the coverage check guards us
        covered += area
        children.append((ids[s[0]], ids[s[1]], ids[s[2]]))
    if abs(covered - parent_area) > 1e-9 * parent_area:
        return _fan(boundary), next_id
    return children, next_id


def active_components(mesh):
    """Connected-component label per vertex (-1 for inactive vertices).

    Components are connected through edges whose endpoints are both
    active, and labels are renumbered by smallest member index so the
    labelling is deterministic.
    """
    n = len(mesh.vertices)
    pairs = np.vstack([mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]],
                       mesh.triangles[:, [2, 0]]])
    keep = mesh.active[pairs[:, 0]] & mesh.active[pairs[:, 1]]
    pairs = pairs[keep]
    graph = sparse.coo_matrix(
        (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, raw = connected_components(graph, directed=False)
    labels = np.full(n, -1, dtype=np.int64)
    lookup = {}
    for v in np.flatnonzero(mesh.active):
        labels[v] = lookup.setdefault(raw[v], len(lookup))
    return labels


def quadrature_2d(phase, mesh, prefactor=None, freq=0.0):
    """Vertex-mean quadrature of prefactor * e^f over the embedded surface.

    Inactive vertices carry zero weight (their h is below h_thresh); a
    triangle's contribution is its vertex-mean integrand times the complex
    area form of its flat embedding. Partial sums are reported per
    connected live region.
    """
    v = mesh.vertices
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        w = np.exp(np.asarray(phase.exponent(v[:, 0], v[:, 1])))
        if prefactor is not None:
            w = w * np.asarray(prefactor(v[:, 0], v[:, 1]))
    w = np.where(mesh.active, w, 0.0)
    w = np.where(np.isfinite(w), w, 0.0)
    tris = mesh.triangles
    d1 = v[tris[:, 1]] - v[tris[:, 0]]
    d2 = v[tris[:, 2]] - v[tris[:, 0]]
    form = 0.5 * (d1[:, 0] * d2[:, 1] - d2[:, 0] * d1[:, 1])
    mean = (w[tris[:, 0]] + w[tris[:, 1]] + w[tris[:, 2]]) / 3.0
    contrib = mean * form
    labels = active_components(mesh)
    tri_label = np.max(labels[tris], axis=1)
    parts = []
    for comp in np.unique(tri_label[tri_label >= 0]):
        parts.append((int(comp),
                      complex(np.sum(contrib[tri_label == comp]))))
    return DipoleResult(value=complex(np.sum(contrib)), freq=freq,
                        per_component=tuple(parts))


def nearest_active_distance(mesh, coords):
    """Distance (4-real-dimensional metric) from a point to the live mesh."""
    z1, z2 = coords
    act = mesh.active
    if not np.any(act):
        return math.inf
    d = np.sqrt(np.abs(mesh.vertices[act, 0] - z1) ** 2
                + np.abs(mesh.vertices[act, 1] - z2) ** 2)
    return float(np.min(d))


def mesh_snapshot(mesh, iteration=0):
    """JSON-ready dict of the mesh state (vertices as four reals)."""
    v = mesh.vertices
    return {
        "iteration": int(iteration),
        "vertices": [[float(a.real), float(a.imag),
                      float(b.real), float(b.imag)] for a, b in v],
        "triangles": [[int(a), int(b), int(c)] for a, b, c in mesh.triangles],
        "active": [bool(x) for x in mesh.active],
    }


# ---------------------------------------------------------------------------
# Emission dipole pipeline
# ---------------------------------------------------------------------------


def hhg_prefactor(diag_eps):
    """Spreading factor (2 pi / (i (tr - ti + i eps)))^(3/2).

    The additive i*eps regularises the singularity at zero travel time;
    the action itself is regular there, so only the prefactor needs it.
    Principal branch of the 3/2 power.
    """
    def pref(ti, tr):
        tau = np.asarray(tr) - np.asarray(ti)
        return (2.0 * np.pi / (1j * (tau + 1j * diag_eps))) ** 1.5
    return pref


def hhg_dipole(field, ip, q, params=None, resolution=None,
               max_travel_cycles=1.0, n_iter=400, diag_eps=None):
    """Emission dipole at harmonic order q by surface flow and quadrature.

    The initial grid is sized so even cell diagonals respect l_thresh,
    which makes the first refinement pass a no-op; dipole transition
    factors are taken as 1 (smooth prefactors shift the spectral shape
    only weakly), so spectra are shape-accurate rather than absolutely
    calibrated.
    """
    from .phasefn import HhgAction, HhgPhase

    omega = field.omega
    if params is None:
        # a thinner live band than the library default: the skirt below
        # the stationary levels carries exponentially small weight, and
        # keeping it shallow stops transit vertices from accumulating.
        # Steps are normalised to fixed length so the surface crosses
        # the slow neighbourhood of each stationary point in bounded
        # time instead of stacking up there
        params = default_flow_params(omega, refine_h_floor=-6.0,
                                     drain_depth=10.0,
                                     grad_norm_floor=1e-6)
    if diag_eps is None:
        diag_eps = 1e-3 / omega
    if resolution is None:
        resolution = max(8, int(math.ceil(
            math.sqrt(2.0) * field.period / params.l_thresh)))
    mesh = init_domain(omega, resolution=resolution,
                       max_travel_cycles=max_travel_cycles,
                       diag_eps=diag_eps)
    phase = HhgPhase(HhgAction(field, ip, q))
    mesh, _ = flow_mesh(phase, mesh, params, n_iter=n_iter)
    return quadrature_2d(phase, mesh, prefactor=hhg_prefactor(diag_eps),
                         freq=q * omega)
