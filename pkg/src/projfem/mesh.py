"""Mixed triangle/quadrilateral grids on the square (-5,5)^2 with uniform refinement.

Conventions:
  * reference triangle  {(x, y) : x >= 0, y >= 0, x + y <= 1}, corners (0,0), (1,0), (0,1)
  * reference square    [0,1]^2, corners counterclockwise (0,0), (1,0), (1,1), (0,1)
  * geometry maps are affine on triangles and bilinear on quadrilaterals; all
    element edges are straight segments, so uniform refinement by edge midpoints
    nests exactly inside the parent geometry.

Meshes are immutable after construction; refinement returns a new mesh that
keeps a reference to its parent together with the child-to-parent element map
and the affine embedding of child reference coordinates into the parent's.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

TRIANGLE = "triangle"
QUADRILATERAL = "quadrilateral"

DOMAIN_HALF_WIDTH = 5.0
_CELLS_PER_SIDE = 4
_PERTURBATION = 0.3
_REF_EPS = 1e-12


@dataclass(frozen=True)
class Element:
    kind: str
    corner_ids: tuple[int, ...]
    id: int

    def __post_init__(self):
        n = 3 if self.kind == TRIANGLE else 4
        if self.kind not in (TRIANGLE, QUADRILATERAL):
            raise ValueError(f"unknown element kind {self.kind!r}")
        if len(self.corner_ids) != n or len(set(self.corner_ids)) != n:
            raise ValueError(f"{self.kind} needs {n} distinct corners, got {self.corner_ids}")


@dataclass(eq=False)
class Mesh:
    """A conforming 2D grid of triangles and quadrilaterals.

    ``parent_elem[e]`` is the id of element ``e``'s parent in ``parent``;
    ``embed_matrix[e] @ ref + embed_offset[e]`` maps reference coordinates
    of child ``e`` into reference coordinates of that parent element.
    """

    vertices: np.ndarray
    elements: list[Element]
    level: int = 0
    parent: "Mesh | None" = None
    parent_elem: np.ndarray | None = None
    embed_matrix: np.ndarray | None = None
    embed_offset: np.ndarray | None = None
    _groups: dict | None = field(default=None, repr=False, compare=False)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_elements(self) -> int:
        return len(self.elements)

    def kind_groups(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        """Element ids and corner-id tables grouped by element kind."""
        if self._groups is None:
            groups = {}
            for kind in (TRIANGLE, QUADRILATERAL):
                eids = [e.id for e in self.elements if e.kind == kind]
                if eids:
                    corners = np.array([self.elements[e].corner_ids for e in eids])
                    groups[kind] = (np.array(eids), corners)
            object.__setattr__(self, "_groups", groups)
        return self._groups


def _reference_cells():
    xs = np.linspace(-DOMAIN_HALF_WIDTH, DOMAIN_HALF_WIDTH, _CELLS_PER_SIDE + 1)
    return xs


def build_coarse_grid() -> Mesh:
    """Deterministic coarse grid on (-5,5)^2.

    4x4 cells; cells with even i+j are quadrilaterals, odd cells are split into
    two triangles along the lower-left to upper-right diagonal.  Interior
    vertices are displaced by (+0.3, -0.3) * (-1)^(i+j), which makes the
    quadrilaterals non-affine while keeping all Jacobians positive.
    """
    xs = _reference_cells()
    n = _CELLS_PER_SIDE
    vertices = np.empty(((n + 1) * (n + 1), 2))
    for j in range(n + 1):
        for i in range(n + 1):
            p = np.array([xs[i], xs[j]])
            if 0 < i < n and 0 < j < n:
                sign = (-1.0) ** (i + j)
                p = p + sign * np.array([_PERTURBATION, -_PERTURBATION])
            vertices[j * (n + 1) + i] = p

    elements: list[Element] = []

    def vid(i, j):
        return j * (n + 1) + i

    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
            if (i + j) % 2 == 0:
                elements.append(Element(QUADRILATERAL, (v00, v10, v11, v01), len(elements)))
            else:
                elements.append(Element(TRIANGLE, (v00, v10, v11), len(elements)))
                elements.append(Element(TRIANGLE, (v00, v11, v01), len(elements)))
    return Mesh(np.asarray(vertices), elements, level=0)


# Child reference-coordinate embeddings, fixed per parent kind and child slot.
_HALF = np.array([[0.5, 0.0], [0.0, 0.5]])
_TRI_EMBED = [
    (_HALF, np.array([0.0, 0.0])),
    (_HALF, np.array([0.5, 0.0])),
    (_HALF, np.array([0.0, 0.5])),
    (-_HALF, np.array([0.5, 0.5])),
]
_QUAD_EMBED = [
    (_HALF, np.array([0.0, 0.0])),
    (_HALF, np.array([0.5, 0.0])),
    (_HALF, np.array([0.5, 0.5])),
    (_HALF, np.array([0.0, 0.5])),
]


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into 4 triangles and every quadrilateral into 4
    quadrilaterals using edge midpoints (and the bilinear image of the
    reference center for quadrilaterals)."""
    verts = [tuple(v) for v in mesh.vertices]
    midpoint_of: dict[tuple[int, int], int] = {}

    def midpoint(a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        vid = midpoint_of.get(key)
        if vid is None:
            vid = len(verts)
            verts.append(tuple(0.5 * (mesh.vertices[key[0]] + mesh.vertices[key[1]])))
            midpoint_of[key] = vid
        return vid

    elements: list[Element] = []
    parent_elem = np.empty(4 * mesh.num_elements, dtype=int)
    embed_matrix = np.empty((4 * mesh.num_elements, 2, 2))
    embed_offset = np.empty((4 * mesh.num_elements, 2))

    for el in mesh.elements:
        if el.kind == TRIANGLE:
            a, b, c = el.corner_ids
            mab, mbc, mca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            children = [(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mbc, mca, mab)]
            embeds = _TRI_EMBED
            kind = TRIANGLE
        else:
            a, b, c, d = el.corner_ids
            mab, mbc = midpoint(a, b), midpoint(b, c)
            mcd, mda = midpoint(c, d), midpoint(d, a)
            z = len(verts)
            verts.append(tuple(0.25 * (mesh.vertices[a] + mesh.vertices[b]
                                       + mesh.vertices[c] + mesh.vertices[d])))
            children = [(a, mab, z, mda), (mab, b, mbc, z), (z, mbc, c, mcd), (mda, z, mcd, d)]
            embeds = _QUAD_EMBED
            kind = QUADRILATERAL
        for slot, corner_ids in enumerate(children):
            cid = len(elements)
            elements.append(Element(kind, corner_ids, cid))
            parent_elem[cid] = el.id
            embed_matrix[cid], embed_offset[cid] = embeds[slot]

    return Mesh(np.array(verts), elements, level=mesh.level + 1, parent=mesh,
                parent_elem=parent_elem, embed_matrix=embed_matrix, embed_offset=embed_offset)


def refine(mesh: Mesh, times: int) -> Mesh:
    for _ in range(times):
        mesh = refine_uniform(mesh)
    return mesh


def mesh_hierarchy(levels: int) -> list[Mesh]:
    """Coarse grid plus ``levels`` uniform refinements."""
    meshes = [build_coarse_grid()]
    for _ in range(levels):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes


def _check_ref(kind: str, ref_pt: np.ndarray) -> None:
    x, y = ref_pt
    if kind == TRIANGLE:
        ok = x >= -_REF_EPS and y >= -_REF_EPS and x + y <= 1.0 + _REF_EPS
    else:
        ok = -_REF_EPS <= x <= 1.0 + _REF_EPS and -_REF_EPS <= y <= 1.0 + _REF_EPS
    if not ok:
        raise ValueError(f"reference point {ref_pt} outside the {kind} reference element")


def geometry_batch(mesh: Mesh, kind: str, corner_ids: np.ndarray, ref_pts: np.ndarray) -> np.ndarray:
    """World coordinates for points ``ref_pts`` with shape (ne, nq, 2); no domain check."""
    c = mesh.vertices[corner_ids]            # (ne, nc, 2)
    x = ref_pts[..., 0][..., None]
    y = ref_pts[..., 1][..., None]
    if kind == TRIANGLE:
        a, b, cc = c[:, 0, None], c[:, 1, None], c[:, 2, None]
        return a + x * (b - a) + y * (cc - a)
    a, b, cc, d = c[:, 0, None], c[:, 1, None], c[:, 2, None], c[:, 3, None]
    w = a - b + cc - d
    return a + x * (b - a) + y * (d - a) + (x * y) * w


def jacobian_batch(mesh: Mesh, kind: str, corner_ids: np.ndarray, ref_pts: np.ndarray) -> np.ndarray:
    """Geometry-map Jacobians, shape (ne, nq, 2, 2); columns are d(world)/d(ref)."""
    c = mesh.vertices[corner_ids]
    ne, nq = ref_pts.shape[:2]
    J = np.empty((ne, nq, 2, 2))
    if kind == TRIANGLE:
        a, b, cc = c[:, 0], c[:, 1], c[:, 2]
        J[..., 0] = (b - a)[:, None]
        J[..., 1] = (cc - a)[:, None]
        return J
    a, b, cc, d = c[:, 0], c[:, 1], c[:, 2], c[:, 3]
    w = a - b + cc - d
    x = ref_pts[..., 0][..., None]
    y = ref_pts[..., 1][..., None]
    J[..., 0] = (b - a)[:, None] + y * w[:, None]
    J[..., 1] = (d - a)[:, None] + x * w[:, None]
    return J


def geometry_map(mesh: Mesh, element: Element, ref_pt) -> np.ndarray:
    """Map a reference point of ``element`` to world coordinates."""
    ref_pt = np.asarray(ref_pt, dtype=float)
    _check_ref(element.kind, ref_pt)
    corner_ids = np.array([element.corner_ids])
    return geometry_batch(mesh, element.kind, corner_ids, ref_pt.reshape(1, 1, 2))[0, 0]


def jacobian(mesh: Mesh, element: Element, ref_pt) -> np.ndarray:
    """Jacobian of :func:`geometry_map` at ``ref_pt`` (2x2)."""
    ref_pt = np.asarray(ref_pt, dtype=float)
    _check_ref(element.kind, ref_pt)
    corner_ids = np.array([element.corner_ids])
    return jacobian_batch(mesh, element.kind, corner_ids, ref_pt.reshape(1, 1, 2))[0, 0]


def is_ancestor(fine: Mesh, coarse: Mesh) -> bool:
    m = fine
    while m is not None:
        if m is coarse:
            return True
        m = m.parent
    return False


def ancestor_ref(fine: Mesh, coarse: Mesh, eids: np.ndarray, ref_pts: np.ndarray):
    """Map (element id, reference point) pairs on ``fine`` to the ancestor mesh ``coarse``.

    ``ref_pts`` has shape (ne, nq, 2) aligned with ``eids``.  Returns coarse
    element ids and the embedded reference points.  Exact by construction, no
    geometric search involved.
    """
    if not is_ancestor(fine, coarse):
        raise ValueError("meshes are not part of one refinement lineage")
    eids = np.asarray(eids)
    ref_pts = np.asarray(ref_pts, dtype=float)
    mesh = fine
    while mesh is not coarse:
        A = mesh.embed_matrix[eids]            # (ne, 2, 2)
        b = mesh.embed_offset[eids]            # (ne, 2)
        ref_pts = np.einsum("eij,eqj->eqi", A, ref_pts) + b[:, None, :]
        eids = mesh.parent_elem[eids]
        mesh = mesh.parent
    return eids, ref_pts


def element_diameters(mesh: Mesh) -> np.ndarray:
    """Maximum corner-to-corner distance per element."""
    out = np.empty(mesh.num_elements)
    for kind, (eids, corners) in mesh.kind_groups().items():
        c = mesh.vertices[corners]
        d = np.linalg.norm(c[:, :, None, :] - c[:, None, :, :], axis=-1)
        out[eids] = d.max(axis=(1, 2))
    return out


def total_area(mesh: Mesh) -> float:
    """Sum of element areas, by quadrature of |det J| (exact for this geometry)."""
    from .fe_basis import quadrature_rule

    area = 0.0
    for kind, (eids, corners) in mesh.kind_groups().items():
        rule = quadrature_rule(kind, 3)
        pts = np.broadcast_to(rule.points, (len(eids),) + rule.points.shape)
        J = jacobian_batch(mesh, kind, corners, pts)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        area += float(np.sum(det * rule.weights))
    return area


def write_mesh(mesh: Mesh, path) -> None:
    """Plain-text dump: one ``v x y`` line per vertex, then ``t i j k`` /
    ``q i j k l`` lines per element."""
    with open(path, "w") as f:
        for v in mesh.vertices:
            f.write(f"v {v[0]!r} {v[1]!r}\n")
        for el in mesh.elements:
            tag = "t" if el.kind == TRIANGLE else "q"
            f.write(tag + " " + " ".join(str(i) for i in el.corner_ids) + "\n")
