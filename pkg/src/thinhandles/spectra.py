"""Weighted-graph models of flat surfaces with thin handles.

A :class:`DiscreteManifold` is a vertex set with measures ``mu_x`` and
symmetric edge conductances ``c_xy``. Its energy is
``sum c_xy |u_x - u_y|^2 + sum k_x |u_x|^2`` (the optional killing term
``k_x`` encodes Dirichlet conditions), its norm is ``sum mu_x |u_x|^2``,
and the spectrum is that of ``L v = lambda M v``.

Bases are cell-centred grids with conductance 1 per edge and measure
``h^2`` per vertex, so the 5-point stencil reproduces the flat Laplacian
to second order. Disks are removed by deleting the grid vertices inside
them. The retained neighbours form the boundary circle, and a handle is
a discrete product cylinder whose end rings are those circles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._errors import DomainError, NumericalError, RangeError, ValidationError

DENSE_LIMIT = 400
RESIDUAL_TOL = 1e-8
MIN_CIRCLE = 8

__all__ = [
    "DiscreteManifold",
    "Hole",
    "Handle",
    "WormholeModel",
    "LimitModel",
    "ConvergenceStudy",
    "build_base",
    "remove_balls",
    "attach_handles",
    "dirichlet_cylinder",
    "build_identified_limit",
    "fading_limit",
    "eigenvalues",
    "sector_eigenvalues",
    "sweep",
    "fit_loglog_slope",
    "resolvent_distance",
    "hausdorff_spectral_distance",
    "adhering_two_tori",
    "fading_torus",
]


# ---------------------------------------------------------------- the graph


@dataclass(frozen=True)
class DiscreteManifold:
    """Weighted graph with vertex positions ``(x, y, sheet)``.

    ``site`` holds, for each vertex, the index of the base-grid vertex it
    came from (``-1`` for vertices added on handles). ``swap`` optionally
    records an involutive vertex symmetry.
    """

    positions: np.ndarray
    edges: np.ndarray
    conductances: np.ndarray
    measures: np.ndarray
    site: np.ndarray
    killing: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    swap: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.measures)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", edges)
        if self.positions.shape != (n, 3) or self.site.shape != (n,):
            raise DomainError("positions/site arrays do not match the vertex count")
        if not np.all(self.measures > 0):
            raise DomainError("vertex measures must be positive")
        if len(self.conductances) != len(edges) or not np.all(self.conductances > 0):
            raise DomainError("edge conductances must be positive, one per edge")
        if len(edges) and (edges.min() < 0 or edges.max() >= n or np.any(edges[:, 0] == edges[:, 1])):
            raise DomainError("edges must join two distinct existing vertices")
        if self.killing is not None and (self.killing.shape != (n,) or np.any(self.killing < 0)):
            raise DomainError("killing weights must be nonnegative, one per vertex")

    @property
    def n_vertices(self) -> int:
        return len(self.measures)

    @property
    def closed(self) -> bool:
        return self.killing is None or not np.any(self.killing > 0)

    def laplacian(self) -> sp.csr_matrix:
        n = self.n_vertices
        i, j = self.edges[:, 0], self.edges[:, 1]
        c = self.conductances
        off = sp.coo_matrix((np.concatenate([-c, -c]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
        diag = np.bincount(i, c, n) + np.bincount(j, c, n)
        if self.killing is not None:
            diag = diag + self.killing
        return (off + sp.diags(diag)).tocsr()

    def mass(self) -> sp.dia_matrix:
        return sp.diags(self.measures)

    def energy(self, u) -> float:
        u = np.asarray(u)
        d = u[self.edges[:, 0]] - u[self.edges[:, 1]]
        e = float(np.sum(self.conductances * np.abs(d) ** 2))
        if self.killing is not None:
            e += float(np.sum(self.killing * np.abs(u) ** 2))
        return e

    def norm_sq(self, u) -> float:
        return float(np.sum(self.measures * np.abs(np.asarray(u)) ** 2))

    def total_measure(self) -> float:
        return float(math.fsum(self.measures))


def _check_n(n):
    if isinstance(n, bool) or int(n) != n or n < 8:
        raise RangeError(f"grid resolution must be an integer >= 8, got {n!r}", parameter="n", value=n, limit=8)
    return int(n)


def _grid(nx, ny, h, periodic, sheets):
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ix, iy = ix.ravel(), iy.ravel()
    per = nx * ny
    pos, edges = [], []
    for s in range(sheets):
        off = s * per
        idx = off + iy * nx + ix
        pos.append(np.column_stack([(ix + 0.5) * h if not periodic else ix * h,
                                    (iy + 0.5) * h if not periodic else iy * h,
                                    np.full(per, s, float)]))
        right = ix + 1 < nx
        up = iy + 1 < ny
        edges.append(np.column_stack([idx[right], idx[right] + 1]))
        edges.append(np.column_stack([idx[up], idx[up] + nx]))
        if periodic:
            edges.append(np.column_stack([idx[ix == nx - 1], idx[ix == nx - 1] - (nx - 1)]))
            edges.append(np.column_stack([idx[iy == ny - 1], idx[iy == ny - 1] - (ny - 1) * nx]))
    return np.vstack(pos), np.vstack(edges)


def build_base(kind: str, n: int, *, width: float = 2.0) -> DiscreteManifold:
    """Flat grid: ``torus`` and ``two_tori`` are unit periodic squares with
    ``n x n`` vertices; ``rectangle_neumann`` is ``[0, width] x [0, 1]``
    with ``n`` cells per unit length and reflecting sides.
    """
    n = _check_n(n)
    h = 1.0 / n
    if kind in ("torus", "two_tori"):
        sheets = 1 if kind == "torus" else 2
        pos, edges = _grid(n, n, h, True, sheets)
        meta = {"kind": kind, "nx": n, "ny": n, "h": h, "periodic": True, "lengths": (1.0, 1.0), "sheets": sheets}
    elif kind == "rectangle_neumann":
        nx = int(round(width * n))
        if abs(nx * h - width) > 1e-12:
            raise ValidationError("width", "width times n must be an integer")
        pos, edges = _grid(nx, n, h, False, 1)
        meta = {"kind": kind, "nx": nx, "ny": n, "h": h, "periodic": False, "lengths": (width, 1.0), "sheets": 1}
    else:
        raise ValidationError("kind", f"unknown base {kind!r}; expected torus, two_tori or rectangle_neumann")
    nv = len(pos)
    return DiscreteManifold(
        positions=pos,
        edges=edges,
        conductances=np.ones(len(edges)),
        measures=np.full(nv, h * h),
        site=np.arange(nv),
        meta=meta,
    )


# ---------------------------------------------------------------- holes


@dataclass(frozen=True)
class Hole:
    center: tuple
    sheet: int
    circle: np.ndarray
    angles: np.ndarray


def _displacement(pos, center, meta):
    d = pos[:, :2] - np.asarray(center[:2], float)
    if meta.get("periodic"):
        lengths = np.asarray(meta["lengths"])
        d = d - lengths * np.round(d / lengths)
    return d


def _subgraph(m: DiscreteManifold, keep: np.ndarray, **meta_updates):
    new_index = -np.ones(m.n_vertices, dtype=np.int64)
    new_index[keep] = np.arange(len(keep))
    e = new_index[m.edges]
    ok = np.all(e >= 0, axis=1)
    meta = dict(m.meta, **meta_updates)
    out = DiscreteManifold(
        positions=m.positions[keep],
        edges=e[ok],
        conductances=m.conductances[ok],
        measures=m.measures[keep],
        site=m.site[keep],
        killing=None if m.killing is None else m.killing[keep],
        meta=meta,
    )
    return out, new_index


def _as_center(c):
    c = tuple(float(v) for v in c)
    if len(c) == 2:
        return (c[0], c[1]), 0
    if len(c) == 3:
        return (c[0], c[1]), int(c[2])
    raise ValidationError("centers", f"expected (x, y) or (x, y, sheet), got {c!r}")


def remove_balls(base: DiscreteManifold, centers: Sequence, eps: float) -> DiscreteManifold:
    """Delete the vertices strictly inside each disk of radius ``eps``.

    The retained vertices adjacent to a removed one form the boundary
    circle of that disk; circles are stored in ``meta["holes"]`` ordered
    by angle around the centre.
    """
    centers = [_as_center(c) for c in centers]
    if not centers:
        return base
    if not eps > 0:
        raise DomainError(f"eps must be > 0, got {eps}")
    meta = base.meta
    for a in range(len(centers)):
        for b in range(a + 1, len(centers)):
            (pa, sa), (pb, sb) = centers[a], centers[b]
            if sa != sb:
                continue
            d = _displacement(np.array([[pa[0], pa[1], 0.0]]), pb, meta)[0]
            if math.hypot(*d) < 2 * eps:
                raise DomainError(f"centres {pa} and {pb} are closer than 2 eps")

    removed = np.zeros(base.n_vertices, bool)
    owner = -np.ones(base.n_vertices, dtype=np.int64)
    sheet = base.positions[:, 2].astype(int)
    for k, (p, s) in enumerate(centers):
        d = _displacement(base.positions, p, meta)
        inside = (np.hypot(d[:, 0], d[:, 1]) < eps) & (sheet == s)
        if not inside.any():
            raise RangeError(f"no grid vertex inside the disk at {p}; eps below resolution",
                             parameter="eps", value=eps, limit=meta.get("h"))
        removed |= inside
        owner[inside] = k

    i, j = base.edges[:, 0], base.edges[:, 1]
    cut = removed[i] ^ removed[j]
    outside = np.where(removed[i], j, i)[cut]
    hole_of = np.where(removed[i], owner[i], owner[j])[cut]
    keep = np.flatnonzero(~removed)
    sub, new_index = _subgraph(base, keep)

    holes, seen = [], set()
    for k, (p, s) in enumerate(centers):
        verts = np.unique(outside[hole_of == k])
        if len(verts) < MIN_CIRCLE:
            raise RangeError(
                f"boundary circle at {p} has {len(verts)} vertices (< {MIN_CIRCLE}); resolution insufficient",
                parameter="eps", value=eps, limit=MIN_CIRCLE,
            )
        if seen.intersection(verts.tolist()):
            raise DomainError(f"boundary circle at {p} touches another hole at this resolution")
        seen.update(verts.tolist())
        d = _displacement(base.positions[verts], p, meta)
        ang = np.mod(np.arctan2(d[:, 1], d[:, 0]), 2 * np.pi)
        order = np.argsort(ang, kind="stable")
        holes.append(Hole(p, s, new_index[verts[order]], ang[order]))
    prior = list(base.meta.get("holes", []))
    return replace(sub, meta=dict(sub.meta, holes=prior + holes, eps=eps))


# ---------------------------------------------------------------- handles


@dataclass(frozen=True)
class Handle:
    ends: tuple
    rings: np.ndarray
    permutation: np.ndarray


@dataclass(frozen=True)
class WormholeModel:
    manifold: DiscreteManifold
    handles: tuple
    eps: float
    ell: float
    n_long: int
    base_measure: float


def _match_hole(holes, point):
    p, s = _as_center(point)
    for k, hole in enumerate(holes):
        if hole.sheet == s and math.hypot(hole.center[0] - p[0], hole.center[1] - p[1]) < 1e-12:
            return k
    raise ValidationError("pairs", f"no removed disk centred at {point!r}")


def _alignment(a, b):
    """Cyclic shift of circle ``b`` whose angles best match circle ``a``."""
    n = len(a)
    best, best_cost = 0, math.inf
    for shift in range(n):
        diff = np.angle(np.exp(1j * (np.roll(b, -shift) - a)))
        cost = float(np.sum(diff * diff))
        if cost < best_cost - 1e-12:
            best, best_cost = shift, cost
    return (np.arange(n) + best) % n


def _cylinder_weights(eps, ell, n_long, n_trans):
    arc = eps * 2.0 * math.pi / n_trans
    ds = ell / n_long
    return arc / ds, ds / arc, arc * ds


def attach_handles(manifold: DiscreteManifold, pairs: Sequence, eps: float, ell: float,
                   n_long: int, n_trans: int | None = None, *, swap_sheets: bool = False) -> WormholeModel:
    """Glue a discrete cylinder ``[0, ell] x eps S^1`` between each pair of removed disks.

    ``pairs`` lists ``(p, p_bar)`` centres of disks already removed with
    :func:`remove_balls`. Ring ``0`` of the cylinder is the circle at ``p``,
    ring ``n_long`` the circle at ``p_bar`` under the recorded angular
    permutation. With ``swap_sheets`` the model also records the symmetry
    exchanging sheets 0 and 1 (used for sector decompositions).
    """
    if not (ell > 0 and eps > 0):
        raise DomainError("eps and ell must be > 0")
    if int(n_long) != n_long or n_long < 4:
        raise ValidationError("n_long", f"need an integer >= 4, got {n_long!r}")
    holes = manifold.meta.get("holes", [])
    base_measure = manifold.total_measure()
    pos = [manifold.positions]
    site = [manifold.site]
    measures = manifold.measures.copy()
    new_meas = []
    edges = [manifold.edges]
    cond = [manifold.conductances]
    nv = manifold.n_vertices
    handles = []
    used = set()
    for p, q in pairs:
        a, b = _match_hole(holes, p), _match_hole(holes, q)
        if a == b or a in used or b in used:
            raise ValidationError("pairs", "each disk carries exactly one handle end")
        used.update((a, b))
        ca, cb = holes[a].circle, holes[b].circle
        nt = len(ca)
        if len(cb) != nt or (n_trans is not None and n_trans != nt):
            raise ValidationError(
                "n_trans", f"gluing count mismatch: circles have {len(ca)} and {len(cb)} vertices, n_trans={n_trans}"
            )
        perm = _alignment(holes[a].angles, holes[b].angles)
        c_long, c_trans, cell = _cylinder_weights(eps, ell, n_long, nt)
        rings = np.empty((n_long + 1, nt), dtype=np.int64)
        rings[0] = ca
        rings[n_long] = cb[perm]
        inner = nv + np.arange((n_long - 1) * nt).reshape(n_long - 1, nt)
        rings[1:n_long] = inner
        nv += inner.size
        ca_pos = manifold.positions[ca]
        for k in range(1, n_long):
            frac = k / n_long
            ring_pos = np.column_stack([
                np.full(nt, np.nan), np.full(nt, np.nan), np.full(nt, float(holes[a].sheet) + frac)
            ])
            ring_pos[:, 0] = ca_pos[:, 0]
            ring_pos[:, 1] = ca_pos[:, 1]
            pos.append(ring_pos)
        site.append(-np.ones(inner.size, dtype=np.int64))
        new_meas.append(np.full(inner.size, cell))
        measures[ca] += 0.5 * cell
        measures[cb] += 0.5 * cell
        long_e = np.column_stack([rings[:-1].ravel(), rings[1:].ravel()])
        nxt = np.roll(rings, -1, axis=1)
        trans_e = np.column_stack([rings.ravel(), nxt.ravel()])
        trans_c = np.full((n_long + 1, nt), c_trans)
        trans_c[0] *= 0.5
        trans_c[-1] *= 0.5
        edges += [long_e, trans_e]
        cond += [np.full(len(long_e), c_long), trans_c.ravel()]
        handles.append(Handle((a, b), rings, perm))
    all_meas = np.concatenate([measures] + new_meas)
    m = DiscreteManifold(
        positions=np.vstack(pos),
        edges=np.vstack(edges),
        conductances=np.concatenate(cond),
        measures=all_meas,
        site=np.concatenate(site),
        meta=dict(manifold.meta, ell=ell, n_long=n_long),
    )
    if swap_sheets:
        m = replace(m, swap=_sheet_swap(m, handles, n_long))
    return WormholeModel(m, tuple(handles), eps, ell, int(n_long), base_measure)


def _sheet_swap(m, handles, n_long):
    per = m.meta["nx"] * m.meta["ny"]
    swap = np.arange(m.n_vertices)
    base = m.site >= 0
    target_site = np.where(m.site < per, m.site + per, m.site - per)
    lookup = -np.ones(2 * per, dtype=np.int64)
    lookup[m.site[base]] = np.flatnonzero(base)
    swap[base] = lookup[target_site[base]]
    for hd in handles:
        rings = hd.rings
        for k in range(n_long + 1):
            swap[rings[k]] = rings[n_long - k]
    if np.any(swap < 0) or not np.array_equal(swap[swap], np.arange(m.n_vertices)):
        raise DomainError("model is not symmetric under exchanging the sheets")
    return swap


def dirichlet_cylinder(eps: float, ell: float, n_long: int, n_trans: int) -> DiscreteManifold:
    """Discrete cylinder with both end rings held at zero."""
    if not (eps > 0 and ell > 0):
        raise DomainError("eps and ell must be > 0")
    if n_long < 2 or n_trans < 3:
        raise ValidationError("n_long", "need n_long >= 2 and n_trans >= 3")
    c_long, c_trans, cell = _cylinder_weights(eps, ell, n_long, n_trans)
    rings = np.arange((n_long - 1) * n_trans).reshape(n_long - 1, n_trans)
    long_e = np.column_stack([rings[:-1].ravel(), rings[1:].ravel()])
    trans_e = np.column_stack([rings.ravel(), np.roll(rings, -1, axis=1).ravel()])
    killing = np.zeros(rings.size)
    killing[rings[0]] += c_long
    killing[rings[-1]] += c_long
    ds = ell / n_long
    s = (np.arange(1, n_long) * ds).repeat(n_trans)
    th = np.tile(np.arange(n_trans) * 2 * np.pi / n_trans, n_long - 1)
    return DiscreteManifold(
        positions=np.column_stack([s, eps * th, np.zeros(rings.size)]),
        edges=np.vstack([long_e, trans_e]),
        conductances=np.concatenate([np.full(len(long_e), c_long), np.full(len(trans_e), c_trans)]),
        measures=np.full(rings.size, cell),
        site=-np.ones(rings.size, dtype=np.int64),
        killing=killing,
        meta={"kind": "dirichlet_cylinder", "eps": eps, "ell": ell},
    )


# ---------------------------------------------------------------- limits


@dataclass(frozen=True)
class LimitModel:
    """Limit operator; ``labels[site]`` is the limit vertex carrying base vertex ``site``."""

    kind: str
    manifold: DiscreteManifold
    labels: np.ndarray
    omega_minus: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    omega_plus: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))


def fading_limit(base: DiscreteManifold) -> LimitModel:
    labels = -np.ones(int(base.site.max()) + 1, dtype=np.int64)
    labels[base.site] = np.arange(base.n_vertices)
    return LimitModel("fading", base, labels)


def build_identified_limit(base: DiscreteManifold, omega_minus, omega_plus, phi=None) -> LimitModel:
    """Quotient of ``base`` identifying ``omega_minus[k]`` with ``phi(omega_minus[k])``.

    ``phi`` defaults to ``omega_minus[k] -> omega_plus[k]``; otherwise it is
    a mapping or callable on vertex indices. Identified vertices carry the
    summed measure and parallel edges merge with summed conductance, which
    is the discrete form of the doubled interior weight and the balanced
    flux across the seam.
    """
    om = np.asarray(omega_minus, dtype=np.int64).ravel()
    op = np.asarray(omega_plus, dtype=np.int64).ravel()
    if phi is None:
        image = op
    elif callable(phi):
        image = np.array([phi(int(v)) for v in om], dtype=np.int64)
    else:
        image = np.array([phi[int(v)] for v in om], dtype=np.int64)
    if len(image) != len(om) or set(image.tolist()) != set(op.tolist()) or len(set(op.tolist())) != len(op):
        raise ValidationError("phi", "must be a bijection from omega_minus onto omega_plus")
    if set(om.tolist()) & set(op.tolist()):
        raise ValidationError("omega_plus", "the two regions must be disjoint")
    if len(om) == 0:
        return fading_limit(base)
    n = base.n_vertices
    fwd = -np.ones(n, dtype=np.int64)
    fwd[om] = image
    _check_isometry(base, om, fwd)

    rep = np.arange(n)
    rep[image] = om
    keep = np.flatnonzero(rep == np.arange(n))
    new_index = -np.ones(n, dtype=np.int64)
    new_index[keep] = np.arange(len(keep))
    label_of = new_index[rep]
    e = label_of[base.edges]
    e.sort(axis=1)
    nonloop = e[:, 0] != e[:, 1]
    e, c = e[nonloop], base.conductances[nonloop]
    key = e[:, 0] * len(keep) + e[:, 1]
    uniq, inv = np.unique(key, return_inverse=True)
    merged_c = np.bincount(inv, c)
    merged_e = np.column_stack([uniq // len(keep), uniq % len(keep)])
    meas = np.bincount(label_of, base.measures, len(keep))
    q = DiscreteManifold(
        positions=base.positions[keep],
        edges=merged_e,
        conductances=merged_c,
        measures=meas,
        site=base.site[keep],
        killing=None if base.killing is None else np.bincount(label_of, base.killing, len(keep)),
        meta=dict(base.meta, kind="identified"),
    )
    labels = -np.ones(int(base.site.max()) + 1, dtype=np.int64)
    labels[base.site] = label_of
    return LimitModel("identified", q, labels, om, op)


def _check_isometry(base, om, fwd):
    if not np.allclose(base.measures[om], base.measures[fwd[om]], rtol=1e-12, atol=0):
        raise ValidationError("phi", "regions are not isometric: vertex measures differ")
    inside = fwd >= 0
    i, j = base.edges[:, 0], base.edges[:, 1]
    both = inside[i] & inside[j]
    table = {}
    for (a, b), c in zip(base.edges, base.conductances):
        table[(min(a, b), max(a, b))] = table.get((min(a, b), max(a, b)), 0.0) + c
    for a, b, c in zip(i[both], j[both], base.conductances[both]):
        fa, fb = fwd[a], fwd[b]
        if abs(table.get((min(fa, fb), max(fa, fb)), 0.0) - c) > 1e-12 * c:
            raise ValidationError("phi", f"regions are not isometric: edge ({a},{b}) has no matching image")


# ---------------------------------------------------------------- eigenvalues


def _graph(model):
    if isinstance(model, DiscreteManifold):
        return model
    if isinstance(model, (WormholeModel, LimitModel)):
        return model.manifold
    raise ValidationError("model", f"unsupported model type {type(model).__name__}")


def _residuals(L, M, vals, vecs):
    r = L @ vecs - (M @ vecs) * vals
    return np.linalg.norm(r, axis=0) / np.linalg.norm(M @ vecs, axis=0)


def _solve_pencil(L, M, k, dense):
    n = L.shape[0]
    if dense or n <= DENSE_LIMIT or k >= n - 1:
        vals, vecs = scipy.linalg.eigh(L.toarray(), M.toarray(), subset_by_index=[0, k - 1])
        return vals, vecs
    shift = -1.0
    lu = spla.splu((L - shift * M).tocsc())
    root = np.sqrt(M.diagonal())
    # M^(1/2) (L - shift M)^(-1) M^(1/2) is symmetric with the same spectrum map
    op = spla.LinearOperator((n, n), matvec=lambda y: root * lu.solve(root * y), dtype=float)
    v0 = np.random.default_rng(0).standard_normal(n)
    mu, ys = spla.eigsh(op, k=k, which="LA", ncv=min(n, max(2 * k + 1, 20)), tol=0, v0=v0)
    vecs = ys / root[:, None]
    vals = shift + 1.0 / mu
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    # Rayleigh-Ritz on the returned block sharpens clustered pairs
    a = vecs.T @ (L @ vecs)
    b = vecs.T @ (M @ vecs)
    rv, rw = scipy.linalg.eigh((a + a.T) / 2, (b + b.T) / 2)
    return rv, vecs @ rw


def eigenvalues(model, k: int, *, return_vectors: bool = False, dense: bool = False):
    """The ``k`` lowest eigenvalues of ``L v = lambda M v``, ascending.

    Dense diagonalisation below ``DENSE_LIMIT`` vertices, shift-invert
    Lanczos otherwise. Every pair must satisfy
    ``||L v - lambda M v|| <= 1e-8 ||M v||``.
    """
    g = _graph(model)
    k = int(k)
    if not 1 <= k <= g.n_vertices:
        raise ValidationError("k", f"need 1 <= k <= {g.n_vertices}, got {k}")
    L, M = g.laplacian(), g.mass()
    vals, vecs = _solve_pencil(L, M, k, dense)
    res = _residuals(L, M, vals, vecs)
    if np.any(res > RESIDUAL_TOL):
        raise NumericalError(f"eigen-residual {res.max():.3e} above {RESIDUAL_TOL}", achieved=float(res.max()))
    vals = np.maximum(vals, 0.0) if g.closed else vals
    if np.any(vals < -1e-9 * max(1.0, abs(vals).max())):
        raise NumericalError("negative eigenvalue from a positive form", achieved=float(vals.min()))
    vals = np.maximum(vals, 0.0)
    return (vals, vecs) if return_vectors else vals


def sector_eigenvalues(model, k: int, sector: str) -> np.ndarray:
    """Eigenvalues restricted to functions even (``"symmetric"``) or odd (``"antisymmetric"``) under ``swap``."""
    g = _graph(model)
    if g.swap is None:
        raise ValidationError("model", "no symmetry recorded on this model")
    n = g.n_vertices
    idx = np.arange(n)
    lo = idx[idx < g.swap]
    fixed = idx[idx == g.swap]
    s = 1.0 / math.sqrt(2.0)
    if sector == "symmetric":
        rows = np.concatenate([lo, g.swap[lo], fixed])
        cols = np.concatenate([np.arange(len(lo)), np.arange(len(lo)), len(lo) + np.arange(len(fixed))])
        data = np.concatenate([np.full(2 * len(lo), s), np.ones(len(fixed))])
        width = len(lo) + len(fixed)
    elif sector == "antisymmetric":
        rows = np.concatenate([lo, g.swap[lo]])
        cols = np.concatenate([np.arange(len(lo)), np.arange(len(lo))])
        data = np.concatenate([np.full(len(lo), s), np.full(len(lo), -s)])
        width = len(lo)
    else:
        raise ValidationError("sector", f"expected symmetric or antisymmetric, got {sector!r}")
    Q = sp.csr_matrix((data, (rows, cols)), shape=(n, width))
    L = (Q.T @ g.laplacian() @ Q).tocsr()
    M = (Q.T @ g.mass() @ Q).tocsr()
    M = sp.diags(M.diagonal())
    vals, vecs = _solve_pencil(L, M, k, False)
    res = _residuals(L, M, vals, vecs)
    if np.any(res > RESIDUAL_TOL):
        raise NumericalError(f"eigen-residual {res.max():.3e} above {RESIDUAL_TOL}", achieved=float(res.max()))
    return np.maximum(vals, 0.0)


# ---------------------------------------------------------------- resolvents


def _embedding(model_graph: DiscreteManifold, limit: LimitModel):
    rows = np.flatnonzero(model_graph.site >= 0)
    sites = model_graph.site[rows]
    if sites.max(initial=-1) >= len(limit.labels):
        raise DomainError("dimension mismatch: model refers to sites unknown to the limit")
    cols = limit.labels[sites]
    if np.any(cols < 0):
        raise DomainError("dimension mismatch: model site without a limit vertex")
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(model_graph.n_vertices, limit.manifold.n_vertices))


def resolvent_distance(model_eps, limit: LimitModel, coupling: float = 1.0, *, tol: float = 1e-10) -> float:
    """Operator norm of ``J (D_0 + z)^-1 - (D_eps + z)^-1 J`` between the weighted spaces, ``z = coupling``.

    ``J`` copies a limit function onto every model vertex that descends
    from a base vertex (both copies of an identified vertex) and is zero on
    handle interiors. The norm is found by Lanczos iteration on
    ``B^T B`` with ``B = M_eps^(1/2) A M_0^(-1/2)``.
    """
    if not coupling > 0:
        raise ValidationError("coupling", f"must be > 0, got {coupling}")
    g = _graph(model_eps)
    g0 = limit.manifold
    J = _embedding(g, limit)
    L1, M1 = g.laplacian(), g.measures
    L0, M0 = g0.laplacian(), g0.measures
    lu1 = spla.splu((L1 + coupling * sp.diags(M1)).tocsc())
    lu0 = spla.splu((L0 + coupling * sp.diags(M0)).tocsc())
    s1, s0 = np.sqrt(M1), np.sqrt(M0)

    def apply_a(f):
        return J @ lu0.solve(M0 * f) - lu1.solve(M1 * (J @ f))

    def apply_at(u):
        # transpose of apply_a in the Euclidean inner product
        return M0 * lu0.solve(J.T @ u) - J.T @ (M1 * lu1.solve(u))

    def normal(x):
        y = s1 * apply_a(x / s0)
        return apply_at(s1 * y) / s0

    n0 = g0.n_vertices
    if n0 <= 2:
        dense = np.column_stack([normal(e) for e in np.eye(n0)])
        return float(math.sqrt(max(np.linalg.eigvalsh((dense + dense.T) / 2).max(), 0.0)))
    op = spla.LinearOperator((n0, n0), matvec=normal, dtype=float)
    v0 = np.random.default_rng(1).standard_normal(n0)
    if np.linalg.norm(normal(v0)) <= 1e-15 * np.linalg.norm(v0):
        return 0.0  # identical resolvents; Lanczos cannot start from a null image
    top = spla.eigsh(op, k=1, which="LA", tol=tol, v0=v0, return_eigenvectors=False)
    return float(math.sqrt(max(top[0], 0.0)))


def hausdorff_spectral_distance(spec_a, spec_b, window: tuple = (0.0, math.inf)) -> float:
    """Hausdorff distance of ``{1/(lambda+1)}`` over eigenvalues inside ``window``."""
    lo, hi = window
    a = np.asarray([x for x in spec_a if lo <= x <= hi], float)
    b = np.asarray([x for x in spec_b if lo <= x <= hi], float)
    if len(a) == 0 or len(b) == 0:
        raise ValidationError("window", "no eigenvalues of one spectrum fall inside the window")
    ta, tb = 1.0 / (a + 1.0), 1.0 / (b + 1.0)
    d = np.abs(ta[:, None] - tb[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


# ---------------------------------------------------------------- sweeps


def fit_loglog_slope(x, y) -> tuple[float, float]:
    """Least-squares slope of ``log y`` against ``log x`` and the RMS residual; zero slope for constant ``x``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if np.ptp(lx) == 0:
        return 0.0, float(np.std(ly))
    coef = np.polyfit(lx, ly, 1)
    resid = ly - np.polyval(coef, lx)
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)))


@dataclass
class ConvergenceStudy:
    eps_values: list
    eigenvalues: list
    limit_eigenvalues: list
    distances: list
    resolvent_distances: list
    fitted_rates: list
    fit_residuals: list
    vertex_counts: list
    meta: dict = field(default_factory=dict)

    def error_reduction(self, j: int | None = None) -> list:
        """Ratios ``err(eps_i) / err(eps_{i+1})`` of the max (or ``j``-th) eigenvalue error."""
        d = np.asarray(self.distances)
        e = d.max(axis=1) if j is None else d[:, j]
        return [float(e[i] / e[i + 1]) for i in range(len(e) - 1)]

    def as_dict(self) -> dict:
        return {
            "eps_values": list(map(float, self.eps_values)),
            "eigenvalues": [list(map(float, v)) for v in self.eigenvalues],
            "limit_eigenvalues": [list(map(float, v)) for v in self.limit_eigenvalues],
            "distances": [list(map(float, v)) for v in self.distances],
            "resolvent_distances": [None if r is None else float(r) for r in self.resolvent_distances],
            "fitted_rates": list(map(float, self.fitted_rates)),
            "fit_residuals": list(map(float, self.fit_residuals)),
            "vertex_counts": list(map(int, self.vertex_counts)),
            "meta": self.meta,
        }


def _tracked(vals, skip_zero, k):
    return vals[skip_zero:skip_zero + k]


def sweep(builder: Callable, eps_list: Sequence[float], k: int, *, skip: int = 1,
          resolvent: bool = False, coupling: float = 1.0) -> ConvergenceStudy:
    """Run ``builder(eps) -> (model, limit)`` along a decreasing ``eps_list``.

    The first ``skip`` eigenvalues (the zero mode by default) are dropped;
    the next ``k`` are compared index-wise with the limit's. Rates are
    fitted over the last decade of ``eps`` (or the whole sweep if shorter).
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValidationError("eps_list", "must be strictly decreasing")
    eigs, lims, dists, res, counts = [], [], [], [], []
    for eps in eps_list:
        model, limit = builder(eps)
        g = _graph(model)
        v = _tracked(eigenvalues(model, skip + k), skip, k)
        lv = _tracked(eigenvalues(limit, skip + k), skip, k)
        eigs.append(v)
        lims.append(lv)
        dists.append(np.abs(v - lv))
        res.append(resolvent_distance(model, limit, coupling) if resolvent else None)
        counts.append(g.n_vertices)
    e = np.asarray(eps_list)
    tail = e <= e[-1] * 10.0 if e[0] >= 10 * e[-1] else np.ones_like(e, bool)
    rates, resid = [], []
    for j in range(k):
        y = np.asarray([d[j] for d in dists])
        if np.any(y[tail] <= 0):
            rates.append(math.nan)
            resid.append(math.nan)
            continue
        s, r = fit_loglog_slope(e[tail], y[tail])
        rates.append(s)
        resid.append(r)
    return ConvergenceStudy(eps_list, eigs, lims, dists, res, rates, resid, counts)


# ---------------------------------------------------------------- experiment families


def _grid_point(x, n):
    return round(x * n) / n


def adhering_two_tori(eps: float, *, alpha: float = 0.9, lam: float = 1.0, prefactor: float = 12.0,
                      eps_per_h: float = 1.6, n_long: int = 4):
    """Two unit tori joined by a periodic lattice of short handles, and their identified limit.

    Grid spacing ``h = eps / eps_per_h``; cover distance ``eta = prefactor
    eps^alpha``; lattice spacing ``1 / floor(1 / (a eta))`` with
    ``a = 1/(2 sqrt 2)``; handle length ``eps^lam``. Every handle joins a
    point to its copy on the other torus. The limit glues the two tori
    completely.
    """
    n = int(round(eps_per_h / eps))
    eps = eps_per_h / n
    base = build_base("two_tori", n)
    eta = prefactor * eps**alpha
    a = 1.0 / (2.0 * math.sqrt(2.0))
    n_h = max(1, int(math.floor(1.0 / (a * eta))))
    pts = sorted({_grid_point(i / n_h, n) for i in range(n_h)})
    centers = [(x, y, s) for s in (0, 1) for x in pts for y in pts]
    holed = remove_balls(base, centers, eps)
    pairs = [((x, y, 0), (x, y, 1)) for x in pts for y in pts]
    model = attach_handles(holed, pairs, eps, eps**lam, n_long, swap_sheets=True)
    per = n * n
    limit = build_identified_limit(base, np.arange(per), np.arange(per, 2 * per))
    model.manifold.meta.update(n=n, eta=eta, handles=len(pairs), lattice=n_h)
    return model, limit


FADING_PAIRS = (((0.25, 0.25), (0.625, 0.5)), ((0.75, 0.125), (0.375, 0.875)))


def fading_torus(eps: float, *, lam: float = 0.5, pairs=FADING_PAIRS, eps_per_h: float = 1.6, n_long: int = 4):
    """A unit torus with a fixed sparse set of handles, and the intact torus as limit."""
    n = int(round(eps_per_h / eps))
    eps = eps_per_h / n
    base = build_base("torus", n)
    snapped = [tuple(_grid_point(c, n) for c in p) for pair in pairs for p in pair]
    holed = remove_balls(base, snapped, eps)
    it = iter(snapped)
    glued = [(next(it), next(it)) for _ in pairs]
    model = attach_handles(holed, glued, eps, eps**lam, n_long)
    model.manifold.meta.update(n=n)
    return model, fading_limit(base)
