"""Lagrange shape functions of order 1-3 on the reference triangle and square,
Gauss quadrature rules, and the global nodal space over a mesh.

Local node ordering on every element: corners first (element corner order),
then edge nodes edge by edge in the element's traversal direction, then
interior nodes.  Nodes on shared edges are identified globally through the
edge's canonical orientation (small vertex id -> large vertex id), so the
spaces are conforming by construction and need no coordinate tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .mesh import Mesh, TRIANGLE, QUADRILATERAL, geometry_batch

_SUPPORTED_ORDERS = (1, 2, 3)
_MAX_QUAD_DEGREE = 20


def _check_order(order: int) -> None:
    if order not in _SUPPORTED_ORDERS:
        raise ValueError(f"unsupported polynomial order {order}; supported: {_SUPPORTED_ORDERS}")


# ---------------------------------------------------------------------------
# reference nodes
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _triangle_multi_indices(order: int) -> tuple[tuple[int, int, int], ...]:
    """Barycentric multi-indices (a0,a1,a2), sum r, in local node order."""
    r = order
    corners = [(r, 0, 0), (0, r, 0), (0, 0, r)]
    edges = []
    for k in range(1, r):
        edges.append((r - k, k, 0))     # edge corner0 -> corner1
    for k in range(1, r):
        edges.append((0, r - k, k))     # edge corner1 -> corner2
    for k in range(1, r):
        edges.append((k, 0, r - k))     # edge corner2 -> corner0
    interior = [(a, b, r - a - b) for a in range(1, r) for b in range(1, r - a)]
    return tuple(corners + edges + interior)


@lru_cache(maxsize=None)
def _quad_multi_indices(order: int) -> tuple[tuple[int, int], ...]:
    """1D index pairs (i,j) over the node lattice k/r, in local node order."""
    r = order
    corners = [(0, 0), (r, 0), (r, r), (0, r)]
    edges = []
    for k in range(1, r):
        edges.append((k, 0))            # edge corner0 -> corner1
    for k in range(1, r):
        edges.append((r, k))            # edge corner1 -> corner2
    for k in range(1, r):
        edges.append((r - k, r))        # edge corner2 -> corner3
    for k in range(1, r):
        edges.append((0, r - k))        # edge corner3 -> corner0
    interior = [(i, j) for j in range(1, r) for i in range(1, r)]
    return tuple(corners + edges + interior)


def node_count(kind: str, order: int) -> int:
    _check_order(order)
    if kind == TRIANGLE:
        return (order + 1) * (order + 2) // 2
    return (order + 1) ** 2


def reference_nodes(kind: str, order: int) -> np.ndarray:
    """Equidistant Lagrange nodes on the reference element, local order."""
    _check_order(order)
    r = order
    if kind == TRIANGLE:
        multis = _triangle_multi_indices(order)
        return np.array([[m[1] / r, m[2] / r] for m in multis])
    multis = _quad_multi_indices(order)
    return np.array([[i / r, j / r] for i, j in multis])


# ---------------------------------------------------------------------------
# shape functions
# ---------------------------------------------------------------------------

def _factor_products(t: np.ndarray, r: int, a: int):
    """value and derivative of prod_{k<a} (r*t - k)/(a - k), vectorized in t."""
    f = np.ones_like(t)
    fp = np.zeros_like(t)
    for k in range(a):
        term = (r * t - k) / (a - k)
        termp = r / (a - k)
        fp = fp * term + f * termp
        f = f * term
    return f, fp


def _lagrange_1d(t: np.ndarray, r: int):
    """Values and derivatives of the r+1 one-dimensional Lagrange polynomials
    with equidistant nodes k/r on [0,1]; shapes (..., r+1)."""
    nodes = np.arange(r + 1) / r
    vals = np.ones(t.shape + (r + 1,))
    ders = np.zeros(t.shape + (r + 1,))
    for k in range(r + 1):
        f = np.ones_like(t)
        fp = np.zeros_like(t)
        for m in range(r + 1):
            if m == k:
                continue
            term = (t - nodes[m]) / (nodes[k] - nodes[m])
            termp = 1.0 / (nodes[k] - nodes[m])
            fp = fp * term + f * termp
            f = f * term
        vals[..., k] = f
        ders[..., k] = fp
    return vals, ders


def shape_values(kind: str, order: int, ref_pts) -> np.ndarray:
    """Shape function values; ``ref_pts`` (...,2) gives result (..., n_nodes)."""
    _check_order(order)
    pts = np.asarray(ref_pts, dtype=float)
    x, y = pts[..., 0], pts[..., 1]
    r = order
    if kind == TRIANGLE:
        lam = np.stack([1.0 - x - y, x, y], axis=-1)
        multis = _triangle_multi_indices(order)
        out = np.empty(x.shape + (len(multis),))
        for n, multi in enumerate(multis):
            phi = np.ones_like(x)
            for d in range(3):
                f, _ = _factor_products(lam[..., d], r, multi[d])
                phi = phi * f
            out[..., n] = phi
        return out
    lx, _ = _lagrange_1d(x, r)
    ly, _ = _lagrange_1d(y, r)
    multis = _quad_multi_indices(order)
    out = np.empty(x.shape + (len(multis),))
    for n, (i, j) in enumerate(multis):
        out[..., n] = lx[..., i] * ly[..., j]
    return out


_DLAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # d(lambda_d)/d(x,y)


def shape_gradients(kind: str, order: int, ref_pts) -> np.ndarray:
    """Reference-coordinate gradients; shape (..., n_nodes, 2)."""
    _check_order(order)
    pts = np.asarray(ref_pts, dtype=float)
    x, y = pts[..., 0], pts[..., 1]
    r = order
    if kind == TRIANGLE:
        lam = np.stack([1.0 - x - y, x, y], axis=-1)
        multis = _triangle_multi_indices(order)
        out = np.empty(x.shape + (len(multis), 2))
        for n, multi in enumerate(multis):
            fs, fps = [], []
            for d in range(3):
                f, fp = _factor_products(lam[..., d], r, multi[d])
                fs.append(f)
                fps.append(fp)
            grad = np.zeros(x.shape + (2,))
            for d in range(3):
                partial = fps[d]
                for e in range(3):
                    if e != d:
                        partial = partial * fs[e]
                grad = grad + partial[..., None] * _DLAMBDA[d]
            out[..., n, :] = grad
        return out
    lx, dlx = _lagrange_1d(x, r)
    ly, dly = _lagrange_1d(y, r)
    multis = _quad_multi_indices(order)
    out = np.empty(x.shape + (len(multis), 2))
    for n, (i, j) in enumerate(multis):
        out[..., n, 0] = dlx[..., i] * ly[..., j]
        out[..., n, 1] = lx[..., i] * dly[..., j]
    return out


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (nq, 2) reference coordinates
    weights: np.ndarray  # (nq,) positive, summing to the reference measure
    degree: int


# Symmetric 12-point rule for the triangle, exact through total degree 6
# (weights sum to 1 and refer to the unit-area triangle; scaled by 1/2 below).
_TRI12_ORBITS = [
    (0.873821971016996, 0.063089014491502, 0.050844906370207, 3),
    (0.501426509658179, 0.249286745170910, 0.116786275726379, 3),
    (0.053145049844817, 0.310352451033784, 0.082851075618374, 6),
]


def _triangle_12pt():
    pts, wts = [], []
    for a, b, w, mult in _TRI12_ORBITS:
        if mult == 3:
            bary = [(a, b, b), (b, a, b), (b, b, a)]
        else:
            c = 1.0 - a - b
            bary = [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
        for lam in bary:
            pts.append((lam[1], lam[2]))
            wts.append(0.5 * w)
    return np.array(pts), np.array(wts)


@lru_cache(maxsize=None)
def quadrature_rule(kind: str, degree: int) -> QuadratureRule:
    """Quadrature on the reference element, exact for polynomials of total
    degree ``degree``.  Tensor Gauss-Legendre on the square; the embedded
    12-point symmetric rule for degree 6 on the triangle, a conical
    Gauss-Jacobi product otherwise."""
    if not 0 <= degree <= _MAX_QUAD_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree}")
    n = (degree + 2) // 2
    if kind == QUADRILATERAL:
        x, w = roots_legendre(n)
        x = 0.5 * (x + 1.0)
        w = 0.5 * w
        X, Y = np.meshgrid(x, x, indexing="ij")
        W = np.outer(w, w)
        return QuadratureRule(np.column_stack([X.ravel(), Y.ravel()]), W.ravel(), degree)
    if kind != TRIANGLE:
        raise ValueError(f"unknown element kind {kind!r}")
    if degree == 6:
        pts, wts = _triangle_12pt()
        return QuadratureRule(pts, wts, degree)
    # conical product: x = u*(1-v), y = v with Gauss-Legendre u and
    # Gauss-Jacobi v (weight (1-v) on [0,1])
    u, wu = roots_legendre(n)
    u = 0.5 * (u + 1.0)
    wu = 0.5 * wu
    v, wv = roots_jacobi(n, 1.0, 0.0)
    v = 0.5 * (v + 1.0)
    wv = 0.25 * wv
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv)
    pts = np.column_stack([(U * (1.0 - V)).ravel(), V.ravel()])
    return QuadratureRule(pts, W.ravel(), degree)


# ---------------------------------------------------------------------------
# global Lagrange space
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class LagrangeSpace:
    """Global nodal layout of order ``order`` over ``mesh``.

    ``conn[e]`` maps local node indices of element ``e`` to global node ids.
    ``node_elem``/``node_ref`` record, per global node, one element containing
    it and the node's reference coordinates there (used for interpolation
    between meshes in a refinement lineage).
    """

    mesh: Mesh
    order: int
    nodes: np.ndarray                 # (N, 2) world coordinates
    conn: list[np.ndarray]
    boundary: np.ndarray              # (N,) bool
    node_elem: np.ndarray             # (N,)
    node_ref: np.ndarray              # (N, 2)
    _groups: dict | None = field(default=None, repr=False)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def kind_groups(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        """Element ids and connectivity matrices grouped by element kind."""
        if self._groups is None:
            groups = {}
            for kind, (eids, _) in self.mesh.kind_groups().items():
                groups[kind] = (eids, np.array([self.conn[e] for e in eids]))
            self._groups = groups
        return self._groups


def _element_edges(el) -> list[tuple[int, int]]:
    ids = el.corner_ids
    n = len(ids)
    return [(ids[k], ids[(k + 1) % n]) for k in range(n)]


def build_space(mesh: Mesh, order: int) -> LagrangeSpace:
    _check_order(order)
    r = order
    nodes: list[np.ndarray] = []
    node_elem: list[int] = []
    node_ref: list[np.ndarray] = []

    vertex_node = np.full(mesh.num_vertices, -1, dtype=int)
    edge_nodes: dict[tuple[int, int], list[int]] = {}
    conn: list[np.ndarray] = []

    edge_count: dict[tuple[int, int], int] = {}
    for el in mesh.elements:
        for a, b in _element_edges(el):
            key = (a, b) if a < b else (b, a)
            edge_count[key] = edge_count.get(key, 0) + 1

    ref_nodes_of = {k: reference_nodes(k, r) for k in (TRIANGLE, QUADRILATERAL)}

    def new_node(xy, eid, ref) -> int:
        nid = len(nodes)
        nodes.append(np.asarray(xy, dtype=float))
        node_elem.append(eid)
        node_ref.append(np.asarray(ref, dtype=float))
        return nid

    for el in mesh.elements:
        refs = ref_nodes_of[el.kind]
        nc = len(el.corner_ids)
        local = np.empty(len(refs), dtype=int)
        # corners
        for li, vid in enumerate(el.corner_ids):
            if vertex_node[vid] < 0:
                vertex_node[vid] = new_node(mesh.vertices[vid], el.id, refs[li])
            local[li] = vertex_node[vid]
        # edge nodes, identified through the canonical (min id -> max id) orientation
        li = nc
        for a, b in _element_edges(el):
            key = (a, b) if a < b else (b, a)
            if key not in edge_nodes:
                pa, pb = mesh.vertices[key[0]], mesh.vertices[key[1]]
                ids = []
                for k in range(1, r):
                    t = k / r
                    # straight edges: world position affine between endpoints;
                    # reference coords from the registering element below
                    ids.append(new_node((1 - t) * pa + t * pb, el.id, refs[li + (k - 1 if a < b else r - 1 - k)]))
                edge_nodes[key] = ids
            ids = edge_nodes[key]
            for k in range(1, r):
                canonical = k - 1 if a < b else (r - k) - 1
                local[li] = ids[canonical]
                li += 1
        # interior nodes
        for j in range(li, len(refs)):
            xy = geometry_batch(mesh, el.kind, np.array([el.corner_ids]),
                                refs[j].reshape(1, 1, 2))[0, 0]
            local[j] = new_node(xy, el.id, refs[j])
        conn.append(local)

    boundary = np.zeros(len(nodes), dtype=bool)
    for key, cnt in edge_count.items():
        if cnt == 1:
            boundary[vertex_node[key[0]]] = True
            boundary[vertex_node[key[1]]] = True
            for nid in edge_nodes.get(key, []):
                boundary[nid] = True

    return LagrangeSpace(mesh=mesh, order=order, nodes=np.array(nodes), conn=conn,
                         boundary=boundary, node_elem=np.array(node_elem),
                         node_ref=np.array(node_ref))
