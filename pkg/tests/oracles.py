"""Independent reference computations the tests compare against.

Everything in here deliberately avoids the package's own assembly and
quadrature code paths: local matrices come from exact rational
integration of barycentric monomials, and the fractional boundary
seminorm comes from a brute-force panel-pair integration with much
finer quadrature than the library uses.
"""

import math
from fractions import Fraction

import numpy as np

# ---------------------------------------------------------------------------
# exact local element matrices
#
# A polynomial on the triangle is stored as {(a, b, c): Fraction} over
# barycentric monomials l1^a l2^b l3^c.  The integral of a monomial is
#     int_T l1^a l2^b l3^c = 2|T| a! b! c! / (a+b+c+2)!
# which keeps every entry rational for rational vertices.

P1_BARY = (
    {(1, 0, 0): Fraction(1)},
    {(0, 1, 0): Fraction(1)},
    {(0, 0, 1): Fraction(1)},
)

# vertex functions l(2l-1), then edge bubbles 4 l_a l_b on edges
# (1,2), (2,3), (3,1) -- the node order DofMap uses.
P2_BARY = (
    {(2, 0, 0): Fraction(2), (1, 0, 0): Fraction(-1)},
    {(0, 2, 0): Fraction(2), (0, 1, 0): Fraction(-1)},
    {(0, 0, 2): Fraction(2), (0, 0, 1): Fraction(-1)},
    {(1, 1, 0): Fraction(4)},
    {(0, 1, 1): Fraction(4)},
    {(1, 0, 1): Fraction(4)},
)


def _poly_mul(p, q):
    out = {}
    for ea, ca in p.items():
        for eb, cb in q.items():
            key = (ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2])
            out[key] = out.get(key, Fraction(0)) + ca * cb
    return out


def _poly_diff(p, i):
    out = {}
    for exps, coeff in p.items():
        if exps[i] == 0:
            continue
        lowered = list(exps)
        lowered[i] -= 1
        key = tuple(lowered)
        out[key] = out.get(key, Fraction(0)) + coeff * exps[i]
    return out


def _integral_unit(p):
    """Integral over a triangle of unit area (the 2|T| factor left out)."""
    total = Fraction(0)
    for (a, b, c), coeff in p.items():
        total += coeff * Fraction(
            math.factorial(a) * math.factorial(b) * math.factorial(c),
            math.factorial(a + b + c + 2))
    return 2 * total


def _bary_gradients(p0, p1, p2):
    """Exact gradients of (l1, l2, l3) and the signed area, as Fractions."""
    p0 = [Fraction(v) for v in p0]
    p1 = [Fraction(v) for v in p1]
    p2 = [Fraction(v) for v in p2]
    j11, j21 = p1[0] - p0[0], p1[1] - p0[1]
    j12, j22 = p2[0] - p0[0], p2[1] - p0[1]
    det = j11 * j22 - j12 * j21
    # x = p0 + J (xi, eta); grad xi and grad eta are the rows of J^-1
    gxi = (j22 / det, -j12 / det)
    geta = (-j21 / det, j11 / det)
    gl1 = (-gxi[0] - geta[0], -gxi[1] - geta[1])
    return (gl1, gxi, geta), det / 2


def local_mass_exact(p0, p1, p2, degree):
    basis = P1_BARY if degree == 1 else P2_BARY
    _, area = _bary_gradients(p0, p1, p2)
    n = len(basis)
    out = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            val = _integral_unit(_poly_mul(basis[i], basis[j])) * area
            out[i][j] = out[j][i] = val
    return out


def local_stiffness_exact(p0, p1, p2, degree):
    basis = P1_BARY if degree == 1 else P2_BARY
    grads, area = _bary_gradients(p0, p1, p2)
    n = len(basis)
    partials = [[_poly_diff(b, i) for i in range(3)] for b in basis]
    dots = [[grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]
             for j in range(3)] for i in range(3)]
    out = [[Fraction(0)] * n for _ in range(n)]
    for m in range(n):
        for k in range(m, n):
            val = Fraction(0)
            for i in range(3):
                for j in range(3):
                    if partials[m][i] and partials[k][j]:
                        prod = _poly_mul(partials[m][i], partials[k][j])
                        val += dots[i][j] * _integral_unit(prod)
            out[m][k] = out[k][m] = val * area
    return out


# trace bases on [0, 1]: coefficient lists in t (lowest power first)
_TRACE_T = {
    1: ([Fraction(1), Fraction(-1)], [Fraction(0), Fraction(1)]),
    2: ([Fraction(1), Fraction(-3), Fraction(2)],
        [Fraction(0), Fraction(-1), Fraction(2)],
        [Fraction(0), Fraction(4), Fraction(-4)]),
}


def local_edge_mass_exact(length, degree):
    basis = _TRACE_T[degree]
    n = len(basis)
    out = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            prod = [Fraction(0)] * (len(basis[i]) + len(basis[j]) - 1)
            for a, ca in enumerate(basis[i]):
                for b, cb in enumerate(basis[j]):
                    prod[a + b] += ca * cb
            val = sum(c / (k + 1) for k, c in enumerate(prod))
            out[i][j] = out[j][i] = val * Fraction(length)
    return out


def as_float(mat):
    return np.array([[float(v) for v in row] for row in mat])


def dense_global_matrix(dofmap, kind, gamma=None):
    """Assemble the full matrix densely from the exact local blocks."""
    mesh = dofmap.mesh
    n = dofmap.num_dofs
    out = np.zeros((n, n))
    if kind == "boundary_mass":
        for edge, dofs in zip(mesh.boundary_edges, dofmap.edge_dofs):
            a, b = mesh.vertices[edge[0]], mesh.vertices[edge[1]]
            length = Fraction(float(np.hypot(*(b - a))))
            loc = as_float(local_edge_mass_exact(length, dofmap.degree))
            out[np.ix_(dofs, dofs)] += loc
        return out
    fn = local_mass_exact if kind == "mass" else local_stiffness_exact
    for tri, dofs in zip(mesh.triangles, dofmap.cell_dofs):
        pts = [tuple(float(c) for c in mesh.vertices[v]) for v in tri]
        loc = as_float(fn(pts[0], pts[1], pts[2], dofmap.degree))
        out[np.ix_(dofs, dofs)] += loc
    return out


# ---------------------------------------------------------------------------
# brute-force fractional boundary seminorm
#
# |v|^2 = sum over ordered panel pairs of
#     int int (v(x) - v(y))^2 / |x - y|^2 ds(x) ds(y).
# For a linear trace the same-panel contribution collapses to the
# squared jump of the endpoint values; pairs sharing a vertex get a
# geometrically graded product rule, everything else a fat Gauss rule.


def _gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _graded01(levels, per_cell):
    """Quadrature on (0, 1] graded geometrically toward 0."""
    x, w = _gauss01(per_cell)
    breaks = [0.0] + [2.0 ** (k - levels) for k in range(1, levels + 1)]
    pts, wts = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        pts.append(lo + (hi - lo) * x)
        wts.append((hi - lo) * w)
    return np.concatenate(pts), np.concatenate(wts)


def seminorm_dense_oracle(points, values):
    """H^{1/2} seminorm of the closed piecewise-linear boundary trace.

    points: (n, 2) panel start points in walk order (panel i runs from
    points[i] to points[(i+1) % n]); values: trace at those points.
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(points)
    nxt = np.roll(np.arange(n), -1)
    a, b = points, points[nxt]
    va, vb = values, values[nxt]
    lengths = np.hypot(*(b - a).T)

    total = float(((vb - va) ** 2).sum())  # same-panel pairs, exact

    def pair_integral(i, j, s, ws, t, wt):
        xi = a[i] + np.outer(s, b[i] - a[i])
        xj = a[j] + np.outer(t, b[j] - a[j])
        vi = va[i] + s * (vb[i] - va[i])
        vj = va[j] + t * (vb[j] - va[j])
        num = (vi[:, None] - vj[None, :]) ** 2
        d2 = ((xi[:, None, :] - xj[None, :, :]) ** 2).sum(axis=2)
        return float((num / d2 * np.outer(ws, wt)).sum()
                     ) * lengths[i] * lengths[j]

    sg, wg = _graded01(16, 10)
    s16, w16 = _gauss01(16)
    for i in range(n):
        for j in range(i + 1, n):
            gap = min(j - i, n - (j - i))
            if gap == 1:
                # shares one vertex; grade both parameters toward it
                if (j - i) % n == 1:
                    contrib = pair_integral(i, j, 1.0 - sg, wg, sg, wg)
                else:
                    contrib = pair_integral(i, j, sg, wg, 1.0 - sg, wg)
            else:
                contrib = pair_integral(i, j, s16, w16, s16, w16)
            total += 2.0 * contrib
    return math.sqrt(total)


def walk_trace(field):
    """Panel start points and trace values of a P1 field's boundary."""
    dofmap = field.dofmap
    dofs = dofmap.edge_dofs[:, 0]
    return dofmap.coords[dofs], field.coeffs[dofs]
