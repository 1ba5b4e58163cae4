"""Triangular meshes of rectangular and stepped 2D domains.

Meshes are built structured (each grid square split along a fixed diagonal)
and may be barycentrically refined, which is what makes the (P2, P1disc)
velocity/pressure pair divergence-free. All meshes are immutable after
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x0, x1] x [y0, y1]."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, x, y, tol=1e-12):
        return (self.x0 - tol <= x) & (x <= self.x1 + tol) & \
               (self.y0 - tol <= y) & (y <= self.y1 + tol)


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangulation with edge adjacency and boundary tags.

    nodes : (N, 2) float array of vertex coordinates
    cells : (F, 3) int array, counter-clockwise vertex triples
    edges : (E, 2) int array, sorted vertex pairs
    cell_edges : (F, 3) int array; local edge m sits opposite local vertex m
    edge_cells : (E, 2) int array of adjacent cells, -1 for the missing side
    boundary_tags : dict edge index -> tag string (boundary edges only)
    """

    nodes: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    cell_edges: np.ndarray
    edge_cells: np.ndarray
    boundary_tags: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_cells[:, 1] < 0)

    def cell_areas(self) -> np.ndarray:
        p = self.nodes[self.cells]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def h(self) -> float:
        """Maximum circumdiameter over cells (a*b*c / (2*area))."""
        p = self.nodes[self.cells]
        a = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
        b = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
        c = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
        return float(np.max(a * b * c / (2.0 * self.cell_areas())))

    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[self.edges[:, 0]] + self.nodes[self.edges[:, 1]])

    def validate(self):
        """Check the TriMesh invariants; raises MeshError on violation."""
        areas = self.cell_areas()
        if np.any(areas <= 0):
            raise MeshError("cell with non-positive signed area")
        counts = np.sum(self.edge_cells >= 0, axis=1)
        boundary = self.edge_cells[:, 1] < 0
        if np.any(counts[boundary] != 1) or np.any(counts[~boundary] != 2):
            raise MeshError("edge adjacency broken")
        # Euler characteristic: 1 for simply connected planar meshes
        if self.n_nodes - self.n_edges + self.n_cells != 1:
            raise MeshError("Euler formula violated (holes or broken topology)")

    def export_text(self, path):
        """Plain-text export: 'nodes E cells F' header, nodes, then cells."""
        lines = [f"nodes {self.n_nodes} cells {self.n_cells}"]
        for x, y in self.nodes:
            lines.append(f"{x:.17g} {y:.17g}")
        for i, j, k in self.cells:
            lines.append(f"{i} {j} {k} 0")
        with open(path, "w", newline="\n") as f:
            f.write("\n".join(lines) + "\n")


def _build_edges(nodes, cells):
    """Edge table, cell->edge map (edge m opposite vertex m) and adjacency."""
    n_cells = len(cells)
    raw = np.empty((3 * n_cells, 2), dtype=np.int64)
    for m in range(3):
        a = cells[:, (m + 1) % 3]
        b = cells[:, (m + 2) % 3]
        raw[m * n_cells:(m + 1) * n_cells, 0] = np.minimum(a, b)
        raw[m * n_cells:(m + 1) * n_cells, 1] = np.maximum(a, b)
    edges, inverse = np.unique(raw, axis=0, return_inverse=True)
    cell_edges = np.empty((n_cells, 3), dtype=np.int64)
    for m in range(3):
        cell_edges[:, m] = inverse[m * n_cells:(m + 1) * n_cells]
    edge_cells = np.full((len(edges), 2), -1, dtype=np.int64)
    for c in range(n_cells):
        for m in range(3):
            e = cell_edges[c, m]
            if edge_cells[e, 0] < 0:
                edge_cells[e, 0] = c
            elif edge_cells[e, 1] < 0:
                edge_cells[e, 1] = c
            else:
                raise MeshError(f"edge {e} shared by more than 2 cells")
    return edges, cell_edges, edge_cells


def build_structured_mesh(domain: Rect, nx: int, ny: int, holes=()) -> TriMesh:
    """Uniform right-triangle mesh of a rectangle, minus axis-aligned holes.

    Each grid square is split along the diagonal from its lower-left to its
    upper-right corner. Hole boundaries must lie on grid lines.
    """
    if nx < 1 or ny < 1:
        raise MeshError(f"cell counts must be positive, got nx={nx}, ny={ny}")
    dx = domain.width / nx
    dy = domain.height / ny
    for hole in holes:
        for v, d, lo in ((hole.x0, dx, domain.x0), (hole.x1, dx, domain.x0),
                         (hole.y0, dy, domain.y0), (hole.y1, dy, domain.y0)):
            k = (v - lo) / d
            if abs(k - round(k)) > 1e-9:
                raise MeshError(
                    f"hole boundary {v} not on a grid line (spacing {d})")

    xs = domain.x0 + dx * np.arange(nx + 1)
    ys = domain.y0 + dy * np.arange(ny + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])
    nid = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)

    cells = []
    for i in range(nx):
        for j in range(ny):
            cx = domain.x0 + (i + 0.5) * dx
            cy = domain.y0 + (j + 0.5) * dy
            if any(h.contains(cx, cy) for h in holes):
                continue
            v00, v10 = nid[i, j], nid[i + 1, j]
            v11, v01 = nid[i + 1, j + 1], nid[i, j + 1]
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    if not cells:
        raise MeshError("holes removed every cell")
    cells = np.array(cells, dtype=np.int64)

    # drop nodes orphaned by hole removal and renumber
    used = np.zeros(len(nodes), dtype=bool)
    used[cells.ravel()] = True
    renum = -np.ones(len(nodes), dtype=np.int64)
    renum[used] = np.arange(used.sum())
    nodes = nodes[used]
    cells = renum[cells]

    edges, cell_edges, edge_cells = _build_edges(nodes, cells)
    mesh = TriMesh(nodes, cells, edges, cell_edges, edge_cells)
    mesh.validate()
    return mesh


def barycentric_refine(mesh: TriMesh) -> TriMesh:
    """Split every cell into 3 by inserting its barycenter.

    Boundary edges (and their tags) are preserved; cell count triples.
    """
    centers = mesh.nodes[mesh.cells].mean(axis=1)
    nodes = np.vstack([mesh.nodes, centers])
    z = mesh.n_nodes + np.arange(mesh.n_cells)
    a, b, c = mesh.cells[:, 0], mesh.cells[:, 1], mesh.cells[:, 2]
    cells = np.empty((3 * mesh.n_cells, 3), dtype=np.int64)
    cells[0::3] = np.column_stack([a, b, z])
    cells[1::3] = np.column_stack([b, c, z])
    cells[2::3] = np.column_stack([c, a, z])

    edges, cell_edges, edge_cells = _build_edges(nodes, cells)
    refined = TriMesh(nodes, cells, edges, cell_edges, edge_cells)
    refined.validate()

    if mesh.boundary_tags:
        lookup = {tuple(edges[e]): e for e in refined.boundary_edges}
        tags = {}
        for e, tag in mesh.boundary_tags.items():
            key = tuple(mesh.edges[e])
            tags[lookup[key]] = tag
        refined = TriMesh(nodes, cells, edges, cell_edges, edge_cells, tags)
    return refined


def classify_boundary(mesh: TriMesh, rules: dict) -> TriMesh:
    """Tag every boundary edge using midpoint predicates.

    rules maps tag -> predicate(x, y) evaluated at the edge midpoint. Every
    boundary edge must match exactly one rule.
    """
    mids = mesh.edge_midpoints()
    tags = {}
    for e in mesh.boundary_edges:
        x, y = mids[e]
        matches = [tag for tag, pred in rules.items() if pred(x, y)]
        if len(matches) != 1:
            raise MeshError(
                f"boundary edge at ({x:.6g}, {y:.6g}) matched tags {matches}")
        tags[int(e)] = matches[0]
    return TriMesh(mesh.nodes, mesh.cells, mesh.edges, mesh.cell_edges,
                   mesh.edge_cells, tags)
