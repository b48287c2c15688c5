"""Simplicial mesh representation and geometric operators.

A mesh couples rest geometry (per-element measures, inverse rest edge
matrices, linear deformation-gradient operators) with connectivity and a
set of Dirichlet-fixed vertices.  Configurations are flat numpy vectors of
length d*n, vertex-major with the d coordinates of each vertex interleaved.

All per-element rest data is intrinsic: UV meshes built from a 3D surface
carry 2D rest frames per triangle, so every operator downstream (energies,
Laplacian, one-ring measures) works unchanged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateRestElement, IndexOutOfRange, NonDiskTopology, NotPositiveDefinite

logger = logging.getLogger(__name__)

# Rest measure below 1e-14 * bbox^d counts as degenerate.
DEGENERACY_TOLERANCE = 1e-14


@dataclass(frozen=True)
class Mesh:
    """Immutable simplicial mesh with precomputed rest geometry.

    Attributes
    ----------
    dim : spatial dimension of the optimization variable (2 or 3).
    rest_positions : (n, k) rest vertex positions; k == dim except for UV
        meshes flattened from a surface, where k == 3.
    elements : (m, dim+1) vertex indices, positively oriented at rest.
    fixed_vertices : sorted array of Dirichlet vertex indices.
    rest_measure : (m,) signed area/volume of each rest element (> 0).
    rest_edges : (m, dim, dim) rest edge matrices, columns r_k - r_0.
    inv_rest_edges : (m, dim, dim) inverses of the rest edge matrices.
    grad_op : (m, dim^2, dim*(dim+1)) per-element linear operators taking
        the element's stacked positions to the row-major vectorized
        deformation gradient.
    """

    dim: int
    rest_positions: np.ndarray
    elements: np.ndarray
    fixed_vertices: np.ndarray
    rest_measure: np.ndarray
    rest_edges: np.ndarray
    inv_rest_edges: np.ndarray
    grad_op: np.ndarray
    free_vertices: np.ndarray = field(repr=False)
    free_dofs: np.ndarray = field(repr=False)
    element_dofs: np.ndarray = field(repr=False)

    @property
    def num_vertices(self) -> int:
        return self.rest_positions.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def num_dofs(self) -> int:
        return self.dim * self.num_vertices

    @property
    def num_free_dofs(self) -> int:
        return self.free_dofs.size

    @property
    def total_measure(self) -> float:
        return float(self.rest_measure.sum())

    def rest_configuration(self) -> np.ndarray:
        """Rest positions as a flat configuration (only when rest is d-dimensional)."""
        if self.rest_positions.shape[1] != self.dim:
            raise ValueError("mesh has no d-dimensional rest configuration (UV mesh)")
        return self.rest_positions.reshape(-1).copy()

    def free_part(self, full: np.ndarray) -> np.ndarray:
        """Restrict a length-dn vector to the free DOFs."""
        return full[self.free_dofs]

    def embed(self, free: np.ndarray) -> np.ndarray:
        """Scatter a free-DOF vector into a length-dn vector (zeros elsewhere)."""
        out = np.zeros(self.num_dofs)
        out[self.free_dofs] = free
        return out


def _vertex_dofs(elements: np.ndarray, d: int) -> np.ndarray:
    """(m, d*(d+1)) global DOF index of each local stacked coordinate."""
    m, k = elements.shape
    dofs = (elements[:, :, None] * d + np.arange(d)[None, None, :])
    return dofs.reshape(m, k * d)


def _grad_operators(inv_rest: np.ndarray, d: int) -> np.ndarray:
    """Assemble per-element operators G with vec(F) = G @ stacked positions.

    Row q = i*d + j of G holds the coefficients of F_ij, which depends only
    on coordinate i of the element's vertices: the coefficient of vertex
    k+1 is inv_rest[k, j] and vertex 0 carries minus their sum.
    """
    m = inv_rest.shape[0]
    G = np.zeros((m, d * d, d * (d + 1)))
    col_sums = inv_rest.sum(axis=1)  # (m, d), sum over k of inv_rest[:, k, j]
    for i in range(d):
        for j in range(d):
            q = i * d + j
            G[:, q, i] = -col_sums[:, j]
            for k in range(d):
                G[:, q, (k + 1) * d + i] = inv_rest[:, k, j]
    return G


def _finish_build(rest_positions, elements, fixed_vertices, dim, rest_edges):
    n = rest_positions.shape[0]
    m = elements.shape[0]
    det = np.linalg.det(rest_edges)
    factorial = 2.0 if dim == 2 else 6.0
    measure = det / factorial

    extent = rest_positions.max(axis=0) - rest_positions.min(axis=0)
    bbox = float(np.max(extent)) if extent.size else 0.0
    tol = DEGENERACY_TOLERANCE * bbox**dim
    bad = np.where(measure <= tol)[0]
    if bad.size:
        raise DegenerateRestElement(bad[0], measure[bad[0]])

    inv_rest = np.linalg.inv(rest_edges)
    grad_op = _grad_operators(inv_rest, dim)

    fixed = np.unique(np.asarray(sorted(fixed_vertices), dtype=np.int64)) if len(fixed_vertices) else np.empty(0, dtype=np.int64)
    if fixed.size and (fixed.min() < 0 or fixed.max() >= n):
        raise IndexOutOfRange(f"fixed vertex index out of range [0, {n})")

    free_mask = np.ones(n, dtype=bool)
    free_mask[fixed] = False
    free_vertices = np.where(free_mask)[0]
    free_dofs = (free_vertices[:, None] * dim + np.arange(dim)[None, :]).reshape(-1)

    mesh = Mesh(
        dim=dim,
        rest_positions=rest_positions,
        elements=elements,
        fixed_vertices=fixed,
        rest_measure=measure,
        rest_edges=rest_edges,
        inv_rest_edges=inv_rest,
        grad_op=grad_op,
        free_vertices=free_vertices,
        free_dofs=free_dofs,
        element_dofs=_vertex_dofs(elements, dim),
    )
    for arr in (mesh.rest_positions, mesh.elements, mesh.rest_measure,
                mesh.rest_edges, mesh.inv_rest_edges, mesh.grad_op):
        arr.setflags(write=False)
    return mesh


def build_mesh(rest_positions, elements, fixed_vertices=()) -> Mesh:
    """Build a mesh whose rest shape lives in the optimization dimension.

    rest_positions: (n, d) with d in {2, 3}; elements: (m, d+1) simplices,
    each positively oriented at rest.  Raises DegenerateRestElement for
    non-positive rest measures and IndexOutOfRange for bad connectivity.
    """
    rest_positions = np.ascontiguousarray(rest_positions, dtype=np.float64)
    elements = np.ascontiguousarray(elements, dtype=np.int64)
    if rest_positions.ndim != 2 or rest_positions.shape[1] not in (2, 3):
        raise ValueError("rest_positions must be (n, 2) or (n, 3)")
    d = rest_positions.shape[1]
    if elements.ndim != 2 or elements.shape[1] != d + 1:
        raise ValueError(f"elements must be (m, {d + 1}) for {d}D rest positions")
    n = rest_positions.shape[0]
    if elements.size and (elements.min() < 0 or elements.max() >= n):
        raise IndexOutOfRange(f"element vertex index out of range [0, {n})")

    # Edge matrix columns are r_k - r_0.
    r0 = rest_positions[elements[:, 0]]
    edges = np.stack(
        [rest_positions[elements[:, k + 1]] - r0 for k in range(d)], axis=2
    )
    return _finish_build(rest_positions, elements, fixed_vertices, d, edges)


def build_uv_mesh(surface_positions, triangles, fixed_vertices=()) -> Mesh:
    """Build a 2D mesh whose rest shapes are 3D surface triangles flattened in place.

    Each triangle gets an orthonormal in-plane frame (first edge direction,
    plus its in-plane perpendicular), preserving edge lengths and area; the
    optimization variable is a 2D configuration (a UV map).
    """
    surface_positions = np.ascontiguousarray(surface_positions, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    if surface_positions.ndim != 2 or surface_positions.shape[1] != 3:
        raise ValueError("surface_positions must be (n, 3)")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise ValueError("triangles must be (m, 3)")
    n = surface_positions.shape[0]
    if triangles.size and (triangles.min() < 0 or triangles.max() >= n):
        raise IndexOutOfRange(f"triangle vertex index out of range [0, {n})")

    e1 = surface_positions[triangles[:, 1]] - surface_positions[triangles[:, 0]]
    e2 = surface_positions[triangles[:, 2]] - surface_positions[triangles[:, 0]]
    len1 = np.linalg.norm(e1, axis=1)
    if np.any(len1 == 0.0):
        bad = int(np.where(len1 == 0.0)[0][0])
        raise DegenerateRestElement(bad, 0.0)
    u = e1 / len1[:, None]
    # Component of e2 orthogonal to u, oriented by the triangle normal.
    proj = np.einsum("ei,ei->e", e2, u)
    perp = e2 - proj[:, None] * u
    height = np.linalg.norm(perp, axis=1)
    # Rest edge matrix in the local frame: columns (|e1|, 0) and (proj, height).
    edges = np.zeros((triangles.shape[0], 2, 2))
    edges[:, 0, 0] = len1
    edges[:, 0, 1] = proj
    edges[:, 1, 1] = height
    return _finish_build(surface_positions, triangles, fixed_vertices, 2, edges)


def current_edges(mesh: Mesh, x: np.ndarray) -> np.ndarray:
    """(m, d, d) current edge matrices of configuration x."""
    d = mesh.dim
    pos = x.reshape(-1, d)
    p0 = pos[mesh.elements[:, 0]]
    return np.stack([pos[mesh.elements[:, k + 1]] - p0 for k in range(d)], axis=2)


def deformation_gradients(mesh: Mesh, x: np.ndarray) -> np.ndarray:
    """(m, d, d) deformation gradients F_t = (current edges) @ (rest edges)^-1."""
    return current_edges(mesh, x) @ mesh.inv_rest_edges


def deformation_gradient(mesh: Mesh, x: np.ndarray, t: int) -> np.ndarray:
    """Deformation gradient of a single element."""
    d = mesh.dim
    pos = x.reshape(-1, d)
    verts = mesh.elements[t]
    cur = np.stack([pos[verts[k + 1]] - pos[verts[0]] for k in range(d)], axis=1)
    return cur @ mesh.inv_rest_edges[t]


def _det(F: np.ndarray) -> np.ndarray:
    if F.shape[-1] == 2:
        return F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
    return np.linalg.det(F)


def orientation(mesh: Mesh, x: np.ndarray) -> np.ndarray:
    """Per-element orientation det(F_t(x)); positive iff not collapsed/inverted."""
    return _det(deformation_gradients(mesh, x))


def _cofactor(F: np.ndarray) -> np.ndarray:
    """Cofactor matrices (d det/dF), batched, without inverting F."""
    if F.shape[-1] == 2:
        C = np.empty_like(F)
        C[..., 0, 0] = F[..., 1, 1]
        C[..., 0, 1] = -F[..., 1, 0]
        C[..., 1, 0] = -F[..., 0, 1]
        C[..., 1, 1] = F[..., 0, 0]
        return C
    # 3x3: cofactor columns are cross products of the other two columns.
    c0 = np.cross(F[..., :, 1], F[..., :, 2])
    c1 = np.cross(F[..., :, 2], F[..., :, 0])
    c2 = np.cross(F[..., :, 0], F[..., :, 1])
    return np.stack([c0, c1, c2], axis=-1)


def orientation_jacobian(mesh: Mesh, x: np.ndarray, active_set) -> sp.csc_matrix:
    """Sparse Jacobian of det(F_t) for the requested elements.

    Returns a (d*n, len(active_set)) matrix whose column k is the gradient
    of det(F_{t_k}) with respect to the full configuration; rows belonging
    to fixed vertices are zeroed so the matrix is usable directly in the
    Dirichlet-reduced subspace.
    """
    active = np.asarray(sorted(active_set), dtype=np.int64)
    dn = mesh.num_dofs
    if active.size == 0:
        return sp.csc_matrix((dn, 0))
    F = deformation_gradients(mesh, x)[active]
    cof = _cofactor(F).reshape(active.size, -1)
    G = mesh.grad_op[active]
    local = np.einsum("eqi,eq->ei", G, cof)  # (m_a, d*(d+1))

    rows = mesh.element_dofs[active]
    free_dof_mask = np.zeros(dn, dtype=bool)
    free_dof_mask[mesh.free_dofs] = True
    local = local * free_dof_mask[rows]

    cols = np.repeat(np.arange(active.size), rows.shape[1])
    mat = sp.coo_matrix(
        (local.ravel(), (rows.ravel(), cols)), shape=(dn, active.size)
    )
    return mat.tocsc()


def assemble_laplacian(mesh: Mesh, reduce_fixed: bool = True,
                       regularization: float = 0.0) -> sp.csr_matrix:
    """Scalar linear-FEM stiffness matrix on the rest geometry.

    In 2D this is the cotangent-weight Laplacian; in 3D the standard
    piecewise-linear tetrahedral stiffness matrix.  With reduce_fixed the
    rows/columns of fixed vertices are removed (subspace projection).
    Raises NotPositiveDefinite when the reduced matrix is structurally
    singular (no fixed vertices) and no regularization was requested.
    """
    n = mesh.num_vertices
    d = mesh.dim
    # Gradients of the barycentric basis: rows of the inverse edge matrix,
    # with basis 0 carrying minus their sum.
    gphi = np.concatenate(
        [-mesh.inv_rest_edges.sum(axis=1, keepdims=True), mesh.inv_rest_edges], axis=1
    )  # (m, d+1, d)
    K = np.einsum("eai,ebi->eab", gphi, gphi) * mesh.rest_measure[:, None, None]

    rows = np.repeat(mesh.elements, d + 1, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, d + 1)).ravel()
    L = sp.coo_matrix((K.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    L = (L + L.T) * 0.5  # exact symmetry regardless of assembly order

    if regularization:
        L = L + regularization * sp.identity(n, format="csr")
    if not reduce_fixed:
        return L.tocsr()
    if mesh.fixed_vertices.size == 0 and not regularization:
        raise NotPositiveDefinite(
            "mesh has no fixed vertices: the reduced Laplacian is singular; "
            "pin at least one vertex or pass regularization > 0"
        )
    free = mesh.free_vertices
    return L[free][:, free].tocsr()


def one_ring_measure(mesh: Mesh) -> np.ndarray:
    """Per-vertex sum of opposite-facet rest measures over incident elements.

    Entry i accumulates, for each element containing vertex i, the length
    (2D) or area (3D) of the element facet opposite vertex i.
    """
    E = mesh.rest_edges
    c = [E[:, :, k] for k in range(mesh.dim)]
    if mesh.dim == 2:
        opposite = np.stack(
            [
                np.linalg.norm(c[1] - c[0], axis=1),  # facing local vertex 0
                np.linalg.norm(c[1], axis=1),
                np.linalg.norm(c[0], axis=1),
            ],
            axis=1,
        )
    else:
        def tri_area(u, v):
            return 0.5 * np.linalg.norm(np.cross(u, v), axis=1)

        opposite = np.stack(
            [
                tri_area(c[1] - c[0], c[2] - c[0]),
                tri_area(c[1], c[2]),
                tri_area(c[0], c[2]),
                tri_area(c[0], c[1]),
            ],
            axis=1,
        )
    out = np.bincount(
        mesh.elements.ravel(), weights=opposite.ravel(), minlength=mesh.num_vertices
    )
    return out


def boundary_loop(mesh: Mesh) -> np.ndarray:
    """Ordered boundary vertex cycle of a disk-topology triangle mesh.

    The cycle follows the winding induced by the (positively oriented)
    elements, so mapping it to a counterclockwise convex polygon yields a
    positively oriented embedding.  Raises NonDiskTopology otherwise.
    """
    if mesh.dim != 2:
        raise NonDiskTopology("boundary loops are defined for triangle meshes only")
    tris = mesh.elements
    # Directed edges per triangle; an undirected boundary edge appears once.
    directed = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    und = np.sort(directed, axis=1)
    _, first, counts = np.unique(und, axis=0, return_index=True, return_counts=True)
    if np.any(counts > 2):
        raise NonDiskTopology("non-manifold edge (shared by more than two triangles)")
    boundary_directed = directed[first[counts == 1]]
    if boundary_directed.shape[0] == 0:
        raise NonDiskTopology("mesh has no boundary (closed surface)")

    succ = {}
    for a, b in boundary_directed:
        if int(a) in succ:
            raise NonDiskTopology("non-manifold boundary vertex")
        succ[int(a)] = int(b)
    start = int(boundary_directed[0, 0])
    loop = [start]
    cur = succ[start]
    while cur != start:
        loop.append(cur)
        if len(loop) > len(succ):
            raise NonDiskTopology("boundary does not close into a single loop")
        cur = succ[cur]
    if len(loop) != len(succ):
        raise NonDiskTopology("boundary has more than one loop")

    # Euler characteristic of a disk is 1 (len(first) == unique undirected edges).
    euler = mesh.num_vertices - len(first) + mesh.num_elements
    if euler != 1:
        raise NonDiskTopology(f"Euler characteristic {euler} != 1")
    return np.asarray(loop, dtype=np.int64)


def tutte_embed(mesh: Mesh, boundary_shape=None) -> np.ndarray:
    """Embed a disk-topology triangle mesh with uniform-weight harmonic coordinates.

    boundary_shape(t) maps normalized arc-length parameters in [0, 1) for
    the ordered boundary cycle to points of a convex polygon traversed
    counterclockwise; the default is the unit circle.  Interior vertices
    solve the uniform-weight Laplace equation.  The result is a flat 2D
    configuration with strictly positive orientation on every element
    (verified numerically).
    """
    loop = boundary_loop(mesh)
    if boundary_shape is None:
        def boundary_shape(t):
            ang = 2.0 * np.pi * t
            return np.stack([np.cos(ang), np.sin(ang)], axis=1)

    pts = mesh.rest_positions[loop]
    seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    total = seg.sum()
    t = np.concatenate([[0.0], np.cumsum(seg[:-1])]) / total
    ring = np.asarray(boundary_shape(t), dtype=np.float64)
    if ring.shape != (loop.size, 2):
        raise ValueError("boundary_shape must return one 2D point per boundary vertex")

    n = mesh.num_vertices
    uv = np.zeros((n, 2))
    uv[loop] = ring
    interior_mask = np.ones(n, dtype=bool)
    interior_mask[loop] = False
    interior = np.where(interior_mask)[0]

    if interior.size:
        tris = mesh.elements
        und = np.sort(
            np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1
        )
        edges = np.unique(und, axis=0)
        i, j = edges[:, 0], edges[:, 1]
        ones = np.ones(edges.shape[0])
        adj = sp.coo_matrix((ones, (i, j)), shape=(n, n))
        adj = (adj + adj.T).tocsr()
        deg = np.asarray(adj.sum(axis=1)).ravel()
        lap = sp.diags(deg) - adj

        idx = -np.ones(n, dtype=np.int64)
        idx[interior] = np.arange(interior.size)
        A = lap[interior][:, interior].tocsc()
        rhs = -lap[interior][:, loop] @ uv[loop]
        uv[interior] = sp.linalg.spsolve(A, rhs).reshape(interior.size, 2)

    x = uv.reshape(-1)
    dets = orientation(mesh, x)
    if np.min(dets) <= 0.0:
        raise NonDiskTopology(
            "embedding produced a non-positive element orientation; "
            "boundary polygon must be convex and counterclockwise"
        )
    return x
