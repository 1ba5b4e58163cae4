"""Finite element spaces on triangles: scalar P1, discontinuous P1, vector P2.

A space owns its dof enumeration and tabulated reference-basis data at the
quadrature points of a single rule (degree 5 by default, exact for every
product assembled here under affine maps). Spaces are immutable; evaluation
and interpolation are pure functions of the coefficient vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .mesh import TriMesh

P1 = "P1"
P1DISC = "P1disc"
P2VEC = "P2vec"


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference triangle {l1,l2,l3 >= 0, sum = 1}.

    points : (Q, 3) barycentric coordinates
    weights : (Q,) reference weights, summing to the reference area 1/2
    """

    degree: int
    points: np.ndarray
    weights: np.ndarray


def quadrature_rule(degree: int) -> QuadratureRule:
    """Conical-product Gauss rule, exact for total degree <= `degree`."""
    if degree < 1 or degree > 10:
        raise ValueError(f"unsupported quadrature degree {degree}")
    n = (degree + 2) // 2
    # x-direction: Gauss-Jacobi with weight (1-x) mapped from [-1,1] to [0,1]
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    s = 0.5 * (xj + 1.0)
    ws = 0.25 * wj  # (1/2 for interval map) * (1/2 for the (1-x) weight map)
    xl, wl = roots_legendre(n)
    t = 0.5 * (xl + 1.0)
    wt = 0.5 * wl
    S, T = np.meshgrid(s, t, indexing="ij")
    WS, WT = np.meshgrid(ws, wt, indexing="ij")
    x = S.ravel()
    y = (T * (1.0 - S)).ravel()
    w = (WS * WT).ravel()
    pts = np.column_stack([1.0 - x - y, x, y])
    return QuadratureRule(degree, pts, w)


def _p1_tabulate(points):
    """P1 basis values and reference gradients at barycentric points."""
    val = points.copy()  # (Q, 3): the barycentric coordinates themselves
    grad = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # (3, 2) constant
    return val.T, np.broadcast_to(grad[:, None, :], (3, len(points), 2)).copy()


def _p2_tabulate(points):
    """P2 basis (3 vertex + 3 edge functions) at barycentric points."""
    l = points  # (Q, 3)
    Q = len(points)
    val = np.empty((6, Q))
    for i in range(3):
        val[i] = l[:, i] * (2.0 * l[:, i] - 1.0)
    # edge m opposite vertex m joins vertices (m+1)%3, (m+2)%3
    for m in range(3):
        a, b = (m + 1) % 3, (m + 2) % 3
        val[3 + m] = 4.0 * l[:, a] * l[:, b]
    # gradients w.r.t. reference coords (xi, eta); l = (1-xi-eta, xi, eta)
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # (3, 2)
    grad = np.empty((6, Q, 2))
    for i in range(3):
        grad[i] = (4.0 * l[:, i] - 1.0)[:, None] * dl[i]
    for m in range(3):
        a, b = (m + 1) % 3, (m + 2) % 3
        grad[3 + m] = 4.0 * (l[:, a][:, None] * dl[b] + l[:, b][:, None] * dl[a])
    return val, grad


class FESpace:
    """Dof map plus tabulated basis data for one element family.

    Scalar entity enumeration: P1 uses mesh nodes; P1disc uses 3 dofs per
    cell (cell-major); P2 uses nodes then edge midpoints. The vector space
    interleaves components: dof = 2*scalar_dof + component.
    """

    def __init__(self, mesh: TriMesh, kind: str, quad_degree: int = 5):
        if kind not in (P1, P1DISC, P2VEC):
            raise ValueError(f"unknown space kind {kind!r}")
        self.mesh = mesh
        self.kind = kind
        self.quad = quadrature_rule(quad_degree)

        if kind == P1:
            self.n_scalar = mesh.n_nodes
            self.cell_dofs = mesh.cells.copy()
            phi, gref = _p1_tabulate(self.quad.points)
        elif kind == P1DISC:
            self.n_scalar = 3 * mesh.n_cells
            self.cell_dofs = np.arange(3 * mesh.n_cells).reshape(-1, 3)
            phi, gref = _p1_tabulate(self.quad.points)
        else:
            self.n_scalar = mesh.n_nodes + mesh.n_edges
            self.cell_dofs = np.hstack(
                [mesh.cells, mesh.n_nodes + mesh.cell_edges])
            phi, gref = _p2_tabulate(self.quad.points)

        self.components = 2 if kind == P2VEC else 1
        self.n_dofs = self.components * self.n_scalar
        self.n_local = phi.shape[0]
        self.phi = phi  # (n_local, Q)

        # affine geometry: jacobians, physical gradients, weighted measures
        p = mesh.nodes[mesh.cells]  # (C, 3, 2)
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # (C,2,2)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        Jinv = np.empty_like(J)
        Jinv[:, 0, 0] = J[:, 1, 1] / det
        Jinv[:, 0, 1] = -J[:, 0, 1] / det
        Jinv[:, 1, 0] = -J[:, 1, 0] / det
        Jinv[:, 1, 1] = J[:, 0, 0] / det
        # physical gradient: grad_x phi = Jinv^T @ grad_ref phi
        self.grad_phi = np.einsum("cdr,irq->ciqd", np.transpose(Jinv, (0, 2, 1)),
                                  np.transpose(gref, (0, 2, 1)))  # (C,nl,Q,2)
        self.wdet = self.quad.weights[None, :] * det[:, None]  # (C, Q)
        lam = self.quad.points  # (Q, 3)
        self.qpoints = np.einsum("qk,ckd->cqd", lam, p)  # (C, Q, 2)

    # -- dof coordinates ---------------------------------------------------

    def scalar_dof_points(self) -> np.ndarray:
        """Coordinates of the scalar dofs, in enumeration order."""
        mesh = self.mesh
        if self.kind == P1:
            return mesh.nodes
        if self.kind == P1DISC:
            return mesh.nodes[mesh.cells].reshape(-1, 2)
        return np.vstack([mesh.nodes, mesh.edge_midpoints()])

    # -- interpolation and evaluation ---------------------------------------

    def interpolate(self, f) -> np.ndarray:
        """Pointwise interpolant; f maps (m, 2) points to values.

        Scalar spaces expect f to return shape (m,), the vector space (m, 2).
        """
        pts = self.scalar_dof_points()
        vals = np.asarray(f(pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite sample in interpolation data")
        if self.components == 1:
            if vals.shape != (len(pts),):
                raise ValueError("scalar interpolation data has wrong shape")
            return vals
        if vals.shape != (len(pts), 2):
            raise ValueError("vector interpolation data has wrong shape")
        return vals.reshape(-1)  # interleaved (x0,y0,x1,y1,...)

    def eval_scalar(self, u) -> np.ndarray:
        """Scalar field values at all quadrature points, shape (C, Q)."""
        return np.einsum("iq,ci->cq", self.phi, u[self.cell_dofs])

    def eval_vector(self, u) -> np.ndarray:
        """Vector field values at quadrature points, shape (C, Q, 2)."""
        out = np.empty(self.wdet.shape + (2,))
        for comp in range(2):
            coeffs = u[2 * self.cell_dofs + comp]
            out[:, :, comp] = np.einsum("iq,ci->cq", self.phi, coeffs)
        return out

    def eval_vector_grad(self, u) -> np.ndarray:
        """Gradients d u_c / d x_d at quadrature points, shape (C, Q, 2, 2).

        Index order: [cell, point, component c, derivative d].
        """
        out = np.empty(self.wdet.shape + (2, 2))
        for comp in range(2):
            coeffs = u[2 * self.cell_dofs + comp]
            out[:, :, comp, :] = np.einsum("ciqd,ci->cqd", self.grad_phi, coeffs)
        return out

    def eval_vector_div(self, u) -> np.ndarray:
        """Divergence of a vector field at quadrature points, shape (C, Q)."""
        g = self.eval_vector_grad(u)
        return g[:, :, 0, 0] + g[:, :, 1, 1]


# -- Dirichlet machinery -----------------------------------------------------

FULL = "full"
NORMAL = "normal"


@dataclass(frozen=True)
class BoundaryDofs:
    """Constrained velocity dofs for a set of boundary tags.

    dofs : (m,) sorted unique global dof indices
    points : (m, 2) coordinates of the dof locations
    comps : (m,) component index of each constrained dof
    tags : (m,) tag string per dof (tag of one incident edge)
    """

    dofs: np.ndarray
    points: np.ndarray
    comps: np.ndarray
    tags: np.ndarray


def boundary_dofs(space: FESpace, tags, mode: str = FULL) -> BoundaryDofs:
    """Collect constrained dofs of a vector P2 space on tagged edges.

    mode "full" constrains both components; mode "normal" constrains, per
    axis-aligned boundary edge, only the component perpendicular to it.
    """
    if space.kind != P2VEC:
        raise ValueError("Dirichlet constraints implemented for vector P2 only")
    mesh = space.mesh
    if not mesh.boundary_tags:
        raise ValueError("mesh has no boundary tags; run classify_boundary")
    missing = set(tags) - set(mesh.boundary_tags.values())
    if missing:
        raise ValueError(f"tags {sorted(missing)} not present on the mesh")

    entries = {}  # dof -> (x, y, comp, tag)
    pts = space.scalar_dof_points()
    for e, tag in mesh.boundary_tags.items():
        if tag not in tags:
            continue
        a, b = mesh.edges[e]
        scalar_dofs = [a, b, mesh.n_nodes + e]
        if mode == FULL:
            comps = (0, 1)
        else:
            d = mesh.nodes[b] - mesh.nodes[a]
            if abs(d[0]) <= 1e-12 * (abs(d[1]) + 1.0):
                comps = (0,)  # vertical edge: constrain x-component
            elif abs(d[1]) <= 1e-12 * (abs(d[0]) + 1.0):
                comps = (1,)  # horizontal edge: constrain y-component
            else:
                raise ValueError(
                    "normal-component constraints need axis-aligned edges")
        for s in scalar_dofs:
            for comp in comps:
                entries[2 * s + comp] = (pts[s, 0], pts[s, 1], comp, tag)

    dofs = np.array(sorted(entries), dtype=np.int64)
    points = np.array([entries[d][:2] for d in dofs])
    comps = np.array([entries[d][2] for d in dofs], dtype=np.int64)
    tagarr = np.array([entries[d][3] for d in dofs])
    return BoundaryDofs(dofs, points, comps, tagarr)


def apply_dirichlet(space: FESpace, bc_map: dict, t: float,
                    mode: str = FULL) -> tuple[np.ndarray, np.ndarray]:
    """Constrained dof values at time t for tag -> g(x, t) boundary data.

    Each g maps ((m, 2) points, t) to (m, 2) velocity values. Returns the
    sorted dof indices and the matching values (the relevant component of g).
    """
    bd = boundary_dofs(space, tuple(bc_map), mode)
    return bd.dofs, dirichlet_values(bd, bc_map, t)


def dirichlet_values(bd: BoundaryDofs, bc_map: dict, t: float) -> np.ndarray:
    values = np.zeros(len(bd.dofs))
    for tag, g in bc_map.items():
        sel = bd.tags == tag
        if not np.any(sel):
            continue
        vals = np.asarray(g(bd.points[sel], t), dtype=float)
        values[sel] = vals[np.arange(sel.sum()), bd.comps[sel]]
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite Dirichlet value")
    return values


# -- visualization export ----------------------------------------------------

def export_vtk(path, mesh: TriMesh, vector_field=None, name="velocity"):
    """Legacy ASCII VTK unstructured grid with an optional point vector field.

    P2 fields are written by their vertex values (interleaved coefficient
    layout, vertex scalar dofs first).
    """
    lines = ["# vtk DataFile Version 3.0", "ensflow field", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_nodes} double"]
    for x, y in mesh.nodes:
        lines.append(f"{x:.17g} {y:.17g} 0")
    lines.append(f"CELLS {mesh.n_cells} {4 * mesh.n_cells}")
    for i, j, k in mesh.cells:
        lines.append(f"3 {i} {j} {k}")
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines.extend(["5"] * mesh.n_cells)
    if vector_field is not None:
        lines.append(f"POINT_DATA {mesh.n_nodes}")
        lines.append(f"VECTORS {name} double")
        for i in range(mesh.n_nodes):
            ux, uy = vector_field[2 * i], vector_field[2 * i + 1]
            lines.append(f"{ux:.17g} {uy:.17g} 0")
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
