"""Structured triangulation of a masked grid and finite-element assembly.

Each active unit cell is split into two right triangles along the same
diagonal (lower-left to upper-right); vertices are the cell corners shared
between neighbors. On this mesh we assemble, for linear barycentric
elements:

  * the mass matrix M, M_ab = integral(psi_a psi_b),
  * the stiffness matrix K, K_ab = integral(grad psi_a . grad psi_b),
  * the evaluation matrix Psi with one row per active cell giving the
    barycentric weights of its center (centers sit on the split diagonal;
    the tie is resolved to the lowest covering triangle index),
  * the roughness operator: for each interior edge e shared by triangles
    T1 < T2, row e of J is |e| times the jump of the surface's normal
    derivative across e, and edge_length holds |e|.

A piecewise-linear surface has no second derivative inside elements; its
curvature is the distribution carried by those edge jumps. The quadratic
form c' J' diag(1/edge_length) J c equals the sum over interior edges of
integral_e (jump of df/dn)^2 ds, the natural squared-curvature energy for
this element: it vanishes exactly on globally affine surfaces (continuous
gradient) and on nothing else when the mesh is connected.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .domain import GridDomain, _frozen
from .errors import DegenerateTriangle

_AREA_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Mesh of a grid domain: vertices, triangles, and cell-center lookups."""

    domain: GridDomain
    vertices: np.ndarray        # (n_v, 2) coordinates
    corners: np.ndarray         # (n_v, 2) integer (row, col) corner ids
    triangles: np.ndarray       # (n_t, 3) vertex indices, positive orientation
    cell_triangles: np.ndarray  # (n, 2) triangles covering each active cell
    center_triangle: np.ndarray # (n,) triangle containing each cell center
    center_bary: np.ndarray     # (n, 3) barycentric coordinates of the center

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]


def triangulate(domain: GridDomain) -> Triangulation:
    nr, nc = domain.n_rows, domain.n_cols
    corner_used = np.zeros((nr + 1, nc + 1), dtype=bool)
    rows, cols = domain.cells[:, 0], domain.cells[:, 1]
    for dr in (0, 1):
        for dc in (0, 1):
            corner_used[rows + dr, cols + dc] = True

    corner_flat = np.flatnonzero(corner_used.ravel())
    vertex_id = np.full((nr + 1) * (nc + 1), -1, dtype=np.int64)
    vertex_id[corner_flat] = np.arange(corner_flat.size)
    corners = np.column_stack([corner_flat // (nc + 1), corner_flat % (nc + 1)])
    ox, oy = domain.origin
    h = domain.cell_size
    vertices = np.column_stack([ox + corners[:, 1] * h, oy + corners[:, 0] * h]).astype(float)

    def vid(r, c):
        return vertex_id[r * (nc + 1) + c]

    ll = vid(rows, cols)
    lr = vid(rows, cols + 1)
    ul = vid(rows + 1, cols)
    ur = vid(rows + 1, cols + 1)
    n = domain.n
    triangles = np.empty((2 * n, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([ll, lr, ur])   # below the diagonal
    triangles[1::2] = np.column_stack([ll, ur, ul])   # above the diagonal
    cell_triangles = np.column_stack([np.arange(0, 2 * n, 2), np.arange(1, 2 * n, 2)])

    center_triangle = np.empty(n, dtype=np.int64)
    center_bary = np.empty((n, 3))
    for j in range(n):
        p = domain.centers[j]
        for t in cell_triangles[j]:
            bary = _barycentric(vertices[triangles[t]], p)
            if bary.min() >= -1e-12:
                center_triangle[j] = t
                center_bary[j] = np.maximum(bary, 0.0) / np.maximum(bary, 0.0).sum()
                break
        else:  # pragma: no cover - centers always lie on the split diagonal
            raise DegenerateTriangle(f"cell {j} center not covered by its triangles")

    return Triangulation(
        domain=domain,
        vertices=_frozen(vertices),
        corners=_frozen(corners),
        triangles=_frozen(triangles),
        cell_triangles=_frozen(cell_triangles),
        center_triangle=_frozen(center_triangle),
        center_bary=_frozen(center_bary),
    )


def _barycentric(tri_coords: np.ndarray, p: np.ndarray) -> np.ndarray:
    a, b, c = tri_coords
    t = np.column_stack([b - a, c - a])
    s = np.linalg.solve(t, p - a)
    return np.array([1.0 - s[0] - s[1], s[0], s[1]])


@dataclass(frozen=True, eq=False)
class FemSystem:
    """Assembled matrices for one triangulation."""

    tri: Triangulation
    mass: sp.csr_matrix        # (n_v, n_v) SPD, row sums integrate to the domain area
    stiffness: sp.csr_matrix   # (n_v, n_v) PSD, K 1 = 0
    basis_eval: sp.csr_matrix  # (n, n_v) barycentric weights of cell centers
    edge_jump: sp.csr_matrix   # (n_e, n_v) |e| * normal-derivative jump per interior edge
    edge_length: np.ndarray    # (n_e,) length |e| per interior edge

    @property
    def n_vertices(self) -> int:
        return self.tri.n_vertices

    @property
    def n_edges(self) -> int:
        return self.edge_length.size

    def roughness_matrix(self) -> sp.csr_matrix:
        """Penalty quadratic form J' diag(1/edge_length) J (for diagnostics)."""
        w = sp.diags(1.0 / self.edge_length)
        return (self.edge_jump.T @ w @ self.edge_jump).tocsr()


_MASS_TEMPLATE = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def assemble(tri: Triangulation) -> FemSystem:
    verts = tri.vertices
    t = tri.triangles
    n_v, n_t = tri.n_vertices, tri.n_triangles
    p = verts[t]                                  # (n_t, 3, 2)
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    area2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if (area2 <= 2.0 * _AREA_TOL).any():
        bad = int(np.argmin(area2))
        raise DegenerateTriangle(f"triangle {bad} has area {area2[bad] / 2.0}")
    area = area2 / 2.0

    # grad psi_i rotates the opposite edge by +90 degrees: with
    # d = p_{i+2} - p_{i+1}, grad psi_i = (-d_y, d_x) / (2 area)
    grads = np.empty((n_t, 3, 2))
    for i in range(3):
        d = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
        grads[:, i, 0] = -d[:, 1]
        grads[:, i, 1] = d[:, 0]
    grads /= area2[:, None, None]

    # entry order per triangle is row-major in (a, b); both local matrices
    # are symmetric so a plain ravel lines up
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    m_entries = (area[:, None, None] * _MASS_TEMPLATE[None]).ravel()
    k_local = np.einsum("tad,tbd->tab", grads, grads) * area[:, None, None]
    k_entries = k_local.ravel()
    mass = sp.coo_matrix((m_entries, (rows, cols)), shape=(n_v, n_v)).tocsr()
    stiffness = sp.coo_matrix((k_entries, (rows, cols)), shape=(n_v, n_v)).tocsr()

    n = tri.domain.n
    bary = tri.center_bary
    psi = sp.csr_matrix(
        (bary.ravel(),
         (np.repeat(np.arange(n), 3), t[tri.center_triangle].ravel())),
        shape=(n, n_v),
    )
    psi.eliminate_zeros()

    edge_jump, edge_length = _assemble_edges(tri, grads, area)
    return FemSystem(
        tri=tri,
        mass=mass,
        stiffness=stiffness,
        basis_eval=psi,
        edge_jump=edge_jump,
        edge_length=_frozen(edge_length),
    )


def _assemble_edges(tri: Triangulation, grads: np.ndarray, area: np.ndarray):
    """Rows of J: |e| * (grad_T1 - grad_T2) . n_e over interior edges.

    The edge normal is folded into the row unscaled (rotate the edge vector
    by 90 degrees), so each row already carries the |e| weight. Orientation
    follows ascending triangle index; the penalty squares the rows, only
    determinism needs the sign fixed. With the companion edge lengths,
    (J c)_e^2 / |e| = |e| * jump^2 = integral of the squared jump along e.
    """
    t = tri.triangles
    n_t = t.shape[0]
    pair_local = np.array([[0, 1], [1, 2], [2, 0]])
    pairs = np.sort(t[:, pair_local], axis=2).reshape(-1, 2)      # (3 n_t, 2)
    uniq, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)

    interior = np.flatnonzero(counts == 2)
    n_e = interior.size
    edge_of = np.full(uniq.shape[0], -1, dtype=np.int64)
    edge_of[interior] = np.arange(n_e)

    owner_tri = np.repeat(np.arange(n_t), 3)
    incident = [[] for _ in range(n_e)]
    for slot, eid in enumerate(edge_of[inverse]):
        if eid >= 0:
            incident[eid].append(owner_tri[slot])

    verts = tri.vertices
    rows, cols, vals = [], [], []
    edge_length = np.empty(n_e)
    for eid in range(n_e):
        t1, t2 = sorted(incident[eid])
        va, vb = uniq[interior[eid]]
        evec = verts[vb] - verts[va]
        normal = np.array([evec[1], -evec[0]])    # length |e|
        for tr, sign in ((t1, 1.0), (t2, -1.0)):
            for loc in range(3):
                rows.append(eid)
                cols.append(t[tr, loc])
                vals.append(sign * grads[tr, loc] @ normal)
        edge_length[eid] = float(np.hypot(evec[0], evec[1]))

    edge_jump = sp.coo_matrix((vals, (rows, cols)), shape=(n_e, tri.n_vertices)).tocsr()
    return edge_jump, edge_length
