"""Triangulations of axis-aligned rectangles with uniform 1:4 refinement.

The initial mesh of a rectangle is a 2x2 grid of congruent
sub-rectangles, each split along the diagonal from its lower-left to
its upper-right corner.  On the unit square this gives 8 congruent
right triangles with legs 1/2 and h_max = sqrt(2)/2.

Uniform refinement splits every triangle into 4 congruent children by
edge midpoints, arranged as a fan around the midpoint of the longest
edge (two sweeps of longest-edge bisection applied at once).  For the
right triangles this family produces, the children are congruent with
legs halved, so after k refinements the triangle count is 8*4^k and
h_max is halved k times.  Refining the initial layout once yields the
pattern where each grid cell's diagonal orientation alternates in a
checkerboard, and that pattern then reproduces itself; the convergence
tables this package checks against are sensitive to the choice and were
produced on exactly this family (the midpoint-triangle 1:4 split gives
visibly different boundary-trace errors).

Boundary edges are stored as one closed counterclockwise walk starting
at the lower-left corner; refinement splits each walk edge in place, so
consecutive entries always share a vertex.  A refined mesh records
which coarse edge produced each new vertex (coarse_vertex_count,
midpoint_of), which is what exact coarse-to-fine interpolation of
piecewise-linear fields needs.

Meshes are immutable after construction (the arrays are write locked)
and safe to share across threads.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangulation of an axis-aligned rectangle.

    vertices         -- (nv, 2) float coordinates
    triangles        -- (nt, 3) vertex indices, counterclockwise
    boundary_edges   -- (nbe, 2) vertex indices, a closed ccw walk
    boundary_markers -- (nbe,) int markers (a single marker, 1)
    level            -- refinement count from the initial mesh
    h_max            -- maximum triangle diameter
    coarse_vertex_count -- vertex count of the parent mesh (0 at level 0)
    midpoint_of      -- (nv - coarse_vertex_count, 2) parent vertex pairs
                        that each new vertex bisects (empty at level 0)
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_markers: np.ndarray
    level: int
    h_max: float
    coarse_vertex_count: int = 0
    midpoint_of: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    def __post_init__(self):
        for arr in (self.vertices, self.triangles, self.boundary_edges,
                    self.boundary_markers, self.midpoint_of):
            arr.setflags(write=False)

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]


def _edge_lengths_sq(vertices, triangles):
    p = vertices[triangles]  # (nt, 3, 2)
    d = p - np.roll(p, -1, axis=1)
    return np.einsum("tij,tij->ti", d, d)


def _h_max(vertices, triangles):
    return float(np.sqrt(_edge_lengths_sq(vertices, triangles).max()))


def make_initial_mesh(rect):
    """Build the 8-triangle mesh of a rectangle (2x2 cells, up-diagonals).

    Keyword arguments:
        rect -- (x0, x1, y0, y1) with x0 < x1 and y0 < y1

    Return: TriMesh at level 0.
    """
    x0, x1, y0, y1 = (float(v) for v in rect)
    if not (np.isfinite([x0, x1, y0, y1]).all() and x1 > x0 and y1 > y0):
        raise ValueError(
            "invalid geometry: rectangle (%r, %r, %r, %r) must have positive "
            "width and height" % (x0, x1, y0, y1))
    xs = np.array([x0, 0.5 * (x0 + x1), x1])
    ys = np.array([y0, 0.5 * (y0 + y1), y1])
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack([gx.ravel(), gy.ravel()])  # index = 3*row + col

    # per sub-rectangle, the lower-left to upper-right diagonal
    triangles = np.array([
        [0, 1, 4], [0, 4, 3],   # lower left
        [1, 2, 5], [1, 5, 4],   # lower right
        [3, 4, 7], [3, 7, 6],   # upper left
        [4, 5, 8], [4, 8, 7],   # upper right
    ], dtype=np.int64)

    # closed ccw walk from the lower-left corner
    boundary_edges = np.array(
        [[0, 1], [1, 2], [2, 5], [5, 8], [8, 7], [7, 6], [6, 3], [3, 0]],
        dtype=np.int64)
    markers = np.ones(len(boundary_edges), dtype=np.int64)
    return TriMesh(vertices, triangles, boundary_edges, markers,
                   level=0, h_max=_h_max(vertices, triangles))


def refine_uniform(mesh):
    """Split every triangle into 4 congruent children by edge midpoints.

    The children fan around the midpoint q of the triangle's longest
    edge: q is joined to the opposite vertex and to the midpoints of
    the two remaining edges.  This equals two sweeps of longest-edge
    bisection and, on right triangles, yields 4 congruent children
    with legs halved.  All three edge midpoints become new vertices,
    so the refined vertex set (and one-level interpolation) is the
    same as for the midpoint-triangle split.
    """
    tri = mesh.triangles
    nv = mesh.num_vertices

    # deterministic edge numbering: lexicographically sorted vertex pairs
    pairs = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    pairs.sort(axis=1)
    edges = np.unique(pairs, axis=0)
    edge_id = {(int(a), int(b)): nv + k for k, (a, b) in enumerate(edges)}

    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])

    def mid(a, b):
        return edge_id[(a, b) if a < b else (b, a)]

    # rotate each (ccw) triangle so the longest edge comes first; ties
    # cannot occur for the right triangles this family produces, and
    # argmax breaks them deterministically anyway
    longest = np.argmax(_edge_lengths_sq(mesh.vertices, tri), axis=1)

    children = np.empty((4 * len(tri), 3), dtype=np.int64)
    for t, (a, b, c) in enumerate(tri):
        a, b, c = int(a), int(b), int(c)
        e = longest[t]
        if e == 0:
            vi, vj, vk = a, b, c
        elif e == 1:
            vi, vj, vk = b, c, a
        else:
            vi, vj, vk = c, a, b
        q = mid(vi, vj)
        mik = mid(vi, vk)
        mkj = mid(vk, vj)
        children[4 * t:4 * t + 4] = [
            [q, mik, vi], [q, vk, mik], [q, mkj, vk], [q, vj, mkj]]

    nbe = len(mesh.boundary_edges)
    bnd = np.empty((2 * nbe, 2), dtype=np.int64)
    markers = np.empty(2 * nbe, dtype=np.int64)
    for k, (u, v) in enumerate(mesh.boundary_edges):
        m = mid(int(u), int(v))
        bnd[2 * k] = (u, m)
        bnd[2 * k + 1] = (m, v)
        markers[2 * k:2 * k + 2] = mesh.boundary_markers[k]

    return TriMesh(vertices, children, bnd, markers,
                   level=mesh.level + 1,
                   h_max=_h_max(vertices, children),
                   coarse_vertex_count=nv,
                   midpoint_of=edges)


def mesh_hierarchy(rect, max_level):
    """Return [level 0 mesh, ..., level max_level mesh]."""
    meshes = [make_initial_mesh(rect)]
    for _ in range(max_level):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes


def prolong_linear(coeffs, fine_mesh):
    """Interpolate vertex values one level up (exact for P1 fields)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    nc = fine_mesh.coarse_vertex_count
    if nc == 0 or len(coeffs) != nc:
        raise ValueError("coefficient length %d does not match the coarse "
                         "mesh (%d vertices)" % (len(coeffs), nc))
    out = np.empty(fine_mesh.num_vertices)
    out[:nc] = coeffs
    out[nc:] = 0.5 * (coeffs[fine_mesh.midpoint_of[:, 0]]
                      + coeffs[fine_mesh.midpoint_of[:, 1]])
    return out


def signed_areas(mesh):
    p = mesh.vertices[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def check_mesh(mesh):
    """Verify the TriMesh invariants; raises AssertionError on violation.

    Checks positive triangle orientation, the edge-manifold property
    (each edge in 1 or 2 triangles), and that the boundary walk is
    exactly the set of single-triangle edges.
    """
    assert (signed_areas(mesh) > 0).all(), "negatively oriented triangle"

    tri = mesh.triangles
    pairs = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    pairs.sort(axis=1)
    uniq, counts = np.unique(pairs, axis=0, return_counts=True)
    assert counts.max() <= 2, "edge shared by more than two triangles"

    walk = np.sort(np.asarray(mesh.boundary_edges), axis=1)
    walk_set = {(int(a), int(b)) for a, b in walk}
    single = {(int(a), int(b)) for a, b in uniq[counts == 1]}
    assert walk_set == single, "boundary walk differs from single-count edges"
    assert len(walk_set) == len(mesh.boundary_edges), "duplicate boundary edge"
    # closed walk: consecutive edges chain head to tail
    heads = mesh.boundary_edges[:, 0]
    tails = np.roll(mesh.boundary_edges[:, 1], 1)
    assert (heads == tails).all(), "boundary walk is not a closed loop"


def export_vtk(mesh, fields=(), names=None):
    """Serialize the mesh and nodal fields as a legacy VTK grid.

    Keyword arguments:
        fields -- FemField objects whose vertex values become POINT_DATA
        names  -- data array names (default field_0, field_1, ...)

    Return: bytes of an ASCII legacy VTK 3.0 UNSTRUCTURED_GRID file.
    Vertex coordinates are written with full precision so they
    round-trip exactly.
    """
    nv = mesh.num_vertices
    nt = mesh.num_triangles
    if names is None:
        names = ["field_%d" % i for i in range(len(fields))]

    lines = [
        "# vtk DataFile Version 3.0",
        "dbcfem level %d mesh" % mesh.level,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        "POINTS %d double" % nv,
    ]
    for x, y in mesh.vertices:
        lines.append("%.17g %.17g 0" % (x, y))
    lines.append("CELLS %d %d" % (nt, 4 * nt))
    for a, b, c in mesh.triangles:
        lines.append("3 %d %d %d" % (a, b, c))
    lines.append("CELL_TYPES %d" % nt)
    lines.extend(["5"] * nt)

    if fields:
        lines.append("POINT_DATA %d" % nv)
        for name, f in zip(names, fields):
            if f.dofmap.mesh.num_vertices != nv:
                raise ValueError(
                    "field '%s' lives on a %d-vertex mesh, expected %d"
                    % (name, f.dofmap.mesh.num_vertices, nv))
            lines.append("SCALARS %s double 1" % name)
            lines.append("LOOKUP_TABLE default")
            for v in f.coeffs[:nv]:  # vertex dofs come first for every degree
                lines.append("%.17g" % v)
    return ("\n".join(lines) + "\n").encode("ascii")
