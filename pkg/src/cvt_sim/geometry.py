"""Convex-polygon Voronoi construction and density-weighted cell integrals.

Points are Python ``complex`` numbers (``x + 1j*y``); the scalar product of
two points is ``Re(conj(a) * b)``.  Polygons are counter-clockwise vertex
tuples.  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Point2 = complex

ORIENT_EPS = 1e-12
VERTEX_MERGE_TOL = 1e-12
EDGE_MATCH_TOL = 1e-9
MIN_SHARED_EDGE = 1e-7
COINCIDENT_TOL = 1e-9
JACOBIAN_STEP = 1e-5
GLOBAL_REFINE = 3  # quadrature refinement for whole-region cost/gradient with non-uniform density


class GeometryError(ValueError):
    pass


def dot(a: complex, b: complex) -> float:
    return a.real * b.real + a.imag * b.imag


def cross(a: complex, b: complex) -> float:
    return a.real * b.imag - a.imag * b.real


def _signed_area(verts) -> float:
    s = 0.0
    n = len(verts)
    for i in range(n):
        p, q = verts[i], verts[(i + 1) % n]
        s += p.real * q.imag - q.real * p.imag
    return 0.5 * s


class ConvexPolygon:
    """Counter-clockwise convex polygon.

    The public constructor validates; clipping results skip validation via
    :meth:`_trusted`.
    """

    __slots__ = ("vertices",)

    def __init__(self, vertices, *, check: bool = True):
        verts = tuple(complex(v) if not isinstance(v, (tuple, list)) else complex(v[0], v[1])
                      for v in vertices)
        if check:
            verts = _validated(verts)
        self.vertices = verts

    @classmethod
    def _trusted(cls, verts: tuple) -> ConvexPolygon:
        poly = cls.__new__(cls)
        poly.vertices = verts
        return poly

    @classmethod
    def rectangle(cls, x0: float, y0: float, x1: float, y1: float) -> ConvexPolygon:
        return cls([complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)])

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __eq__(self, other):
        return isinstance(other, ConvexPolygon) and self.vertices == other.vertices

    def __hash__(self):
        return hash(self.vertices)

    def __repr__(self):
        pts = ", ".join(f"({v.real:.6g}, {v.imag:.6g})" for v in self.vertices)
        return f"ConvexPolygon([{pts}])"

    @property
    def area(self) -> float:
        return _signed_area(self.vertices)

    def contains(self, q: complex, tol: float = 1e-12) -> bool:
        verts = self.vertices
        n = len(verts)
        for i in range(n):
            a, b = verts[i], verts[(i + 1) % n]
            e = b - a
            if cross(e, q - a) < -tol * abs(e):
                return False
        return True

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [v.real for v in self.vertices]
        ys = [v.imag for v in self.vertices]
        return min(xs), min(ys), max(xs), max(ys)

    def to_list(self) -> list[list[float]]:
        return [[v.real, v.imag] for v in self.vertices]


def _dedupe(verts) -> list:
    out = []
    for v in verts:
        if not out or abs(v - out[-1]) > VERTEX_MERGE_TOL:
            out.append(v)
    while len(out) > 1 and abs(out[0] - out[-1]) <= VERTEX_MERGE_TOL:
        out.pop()
    return out


def _validated(verts: tuple) -> tuple:
    if any(not (math.isfinite(v.real) and math.isfinite(v.imag)) for v in verts):
        raise GeometryError("degenerate polygon: non-finite vertex")
    verts = _dedupe(verts)
    if len(verts) < 3:
        raise GeometryError("degenerate polygon: fewer than 3 distinct vertices")
    area = _signed_area(verts)
    if area < 0:
        verts = verts[::-1]
        area = -area
    if area <= ORIENT_EPS:
        raise GeometryError("degenerate polygon: zero area")
    n = len(verts)
    for i in range(n):
        a, b, c = verts[i - 1], verts[i], verts[(i + 1) % n]
        if cross(b - a, c - b) < -ORIENT_EPS * max(1.0, abs(b - a) * abs(c - b)):
            raise GeometryError("degenerate polygon: not convex")
    return tuple(verts)


def half_plane_clip(poly: ConvexPolygon, a: complex, b: complex) -> ConvexPolygon | None:
    """Intersect ``poly`` with the closed half-plane of points at least as
    close to ``a`` as to ``b``.  Returns ``None`` when the result is empty."""
    if a == b:
        raise GeometryError("half_plane_clip needs distinct points")
    verts = poly.vertices
    if len(verts) < 3:
        raise GeometryError("degenerate polygon")
    d = b - a
    m = 0.5 * (a + b)
    tol = ORIENT_EPS * abs(d)
    dr, di, mr, mi = d.real, d.imag, m.real, m.imag
    side = [(v.real - mr) * dr + (v.imag - mi) * di for v in verts]
    if max(side) <= tol:
        return poly
    if min(side) > -tol:
        # Everything on or beyond the bisector: at most a degenerate sliver remains.
        return None
    out = []
    n = len(verts)
    for i in range(n):
        p, sp = verts[i], side[i]
        q, sq = verts[(i + 1) % n], side[(i + 1) % n]
        if sp <= tol:
            out.append(p)
        if (sp < -tol and sq > tol) or (sp > tol and sq < -tol):
            out.append(p + (q - p) * (sp / (sp - sq)))
    out = _dedupe(out)
    if len(out) < 3 or _signed_area(out) <= ORIENT_EPS:
        return None
    return ConvexPolygon._trusted(tuple(out))


@dataclass(frozen=True)
class VoronoiDiagram:
    generators: tuple
    region: ConvexPolygon
    cells: tuple  # cells[k] is a ConvexPolygon or None (empty cell)
    adjacency: tuple  # adjacency[k] is a frozenset of neighbor indices


def check_generators(generators) -> None:
    n = len(generators)
    if n == 0:
        raise GeometryError("no generators")
    for i in range(n):
        g = generators[i]
        if not (math.isfinite(g.real) and math.isfinite(g.imag)):
            raise GeometryError(f"generator {i} is not finite")
    if n > 1 and all(abs(g - generators[0]) < COINCIDENT_TOL for g in generators):
        raise GeometryError("degenerate generator set")
    for i in range(n):
        for j in range(i + 1, n):
            if abs(generators[i] - generators[j]) < COINCIDENT_TOL:
                raise GeometryError(f"coincident generators {i} and {j}")


def voronoi_cell(generators, region: ConvexPolygon, k: int) -> ConvexPolygon | None:
    """The cell of generator ``k``: the region clipped by every bisector."""
    zk = generators[k]
    cell = region
    for j, zj in enumerate(generators):
        if j == k:
            continue
        cell = half_plane_clip(cell, zk, zj)
        if cell is None:
            return None
    return cell


def _bisector_edge_length(cell: ConvexPolygon | None, a: complex, b: complex) -> float:
    """Length of the part of ``cell``'s boundary on the bisector of a, b."""
    if cell is None:
        return 0.0
    d = b - a
    nd = abs(d)
    m = 0.5 * (a + b)
    on = [v for v in cell.vertices if abs(dot(v - m, d)) / nd <= EDGE_MATCH_TOL]
    if len(on) < 2:
        return 0.0
    t = [cross(d, v - m) / nd for v in on]
    return max(t) - min(t)


def cell_neighbors(generators, cell: ConvexPolygon | None, k: int) -> frozenset:
    zk = generators[k]
    return frozenset(j for j, zj in enumerate(generators)
                     if j != k and _bisector_edge_length(cell, zk, zj) > MIN_SHARED_EDGE)


def compute_voronoi(generators, region: ConvexPolygon) -> VoronoiDiagram:
    gens = tuple(complex(g) for g in generators)
    check_generators(gens)
    n = len(gens)
    cells = tuple(voronoi_cell(gens, region, k) for k in range(n))
    adj = [set() for _ in range(n)]
    for k in range(n):
        for j in range(k + 1, n):
            shared = max(_bisector_edge_length(cells[k], gens[k], gens[j]),
                         _bisector_edge_length(cells[j], gens[j], gens[k]))
            if shared > MIN_SHARED_EDGE:
                adj[k].add(j)
                adj[j].add(k)
    return VoronoiDiagram(gens, region, cells, tuple(frozenset(a) for a in adj))


# -- integrals ---------------------------------------------------------------

@dataclass(frozen=True)
class CellMoments:
    mass: float
    centroid: complex
    polar_moment: float


def _uniform_raw(verts, origin: complex):
    """Area, first moment and second moment sum of a polygon about ``origin``."""
    area2 = 0.0
    mx = my = 0.0
    ixx = iyy = 0.0
    n = len(verts)
    for i in range(n):
        p = verts[i] - origin
        q = verts[(i + 1) % n] - origin
        x0, y0, x1, y1 = p.real, p.imag, q.real, q.imag
        c = x0 * y1 - x1 * y0
        area2 += c
        mx += (x0 + x1) * c
        my += (y0 + y1) * c
        ixx += (x0 * x0 + x0 * x1 + x1 * x1) * c
        iyy += (y0 * y0 + y0 * y1 + y1 * y1) * c
    return 0.5 * area2, complex(mx, my) / 6.0, (ixx + iyy) / 12.0


def _vertex_mean(verts) -> complex:
    return sum(verts) / len(verts)


def uniform_moments(cell: ConvexPolygon, value: float = 1.0) -> CellMoments:
    verts = cell.vertices
    o = _vertex_mean(verts)
    area, first, _ = _uniform_raw(verts, o)
    if area <= 0:
        raise GeometryError("empty cell")
    c = o + first / area
    _, _, second = _uniform_raw(verts, c)
    return CellMoments(value * area, c, value * second)


# 7-point degree-5 rule on the reference triangle (barycentric a, b, b).
_S15 = math.sqrt(15.0)
_TRI_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [(9 - 2 * _S15) / 21, (6 + _S15) / 21, (6 + _S15) / 21],
    [(6 + _S15) / 21, (9 - 2 * _S15) / 21, (6 + _S15) / 21],
    [(6 + _S15) / 21, (6 + _S15) / 21, (9 - 2 * _S15) / 21],
    [(9 + 2 * _S15) / 21, (6 - _S15) / 21, (6 - _S15) / 21],
    [(6 - _S15) / 21, (9 + 2 * _S15) / 21, (6 - _S15) / 21],
    [(6 - _S15) / 21, (6 - _S15) / 21, (9 + 2 * _S15) / 21],
])
_TRI_W = np.array([9 / 40] + [(155 + _S15) / 1200] * 3 + [(155 - _S15) / 1200] * 3)


def quadrature_nodes(cell: ConvexPolygon, refine: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (complex array) and weights integrating over ``cell``.

    Fan triangulation from the vertex mean; each refinement level splits
    every triangle into four.
    """
    verts = np.array(cell.vertices)
    o = verts.mean()
    tris = np.stack([np.full(len(verts), o), verts, np.roll(verts, -1)], axis=1)
    for _ in range(refine):
        a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
        ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
        tris = np.concatenate([
            np.stack([a, ab, ca], 1), np.stack([ab, b, bc], 1),
            np.stack([ca, bc, c], 1), np.stack([ab, bc, ca], 1),
        ])
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    areas = 0.5 * (e1.real * e2.imag - e1.imag * e2.real)
    nodes = tris @ _TRI_BARY.T  # (ntri, 7)
    weights = areas[:, None] * _TRI_W[None, :]
    return nodes.ravel(), weights.ravel()


def quadrature_moments(cell: ConvexPolygon, phi, refine: int = 1) -> CellMoments:
    q, w = quadrature_nodes(cell, refine)
    wphi = w * phi(q.real, q.imag)
    mass = float(wphi.sum())
    if not mass > 0:
        raise GeometryError("empty cell")
    c = complex((wphi * q).sum()) / mass
    j = float((wphi * np.abs(q - c) ** 2).sum())
    return CellMoments(mass, c, j)


def cell_moments(cell: ConvexPolygon | None, phi, refine: int = 1) -> CellMoments:
    if cell is None:
        raise GeometryError("empty cell")
    if getattr(phi, "is_uniform", False):
        return uniform_moments(cell, phi.value)
    return quadrature_moments(cell, phi, refine)


def cell_cost(cell: ConvexPolygon, z: complex, phi, refine: int = 1) -> float:
    """Integral of ``|q - z|^2 phi(q)`` over ``cell``, computed about ``z``."""
    if getattr(phi, "is_uniform", False):
        _, _, second = _uniform_raw(cell.vertices, z)
        return phi.value * second
    q, w = quadrature_nodes(cell, refine)
    return float((w * phi(q.real, q.imag) * np.abs(q - z) ** 2).sum())


def coverage_cost(generators, region: ConvexPolygon, phi, *, diagram: VoronoiDiagram | None = None,
                  refine: int = GLOBAL_REFINE) -> float:
    diagram = diagram or compute_voronoi(generators, region)
    return sum(cell_cost(cell, z, phi, refine)
               for z, cell in zip(diagram.generators, diagram.cells) if cell is not None)


def coverage_gradient(generators, region: ConvexPolygon, phi, *, diagram: VoronoiDiagram | None = None,
                      refine: int = GLOBAL_REFINE) -> list:
    diagram = diagram or compute_voronoi(generators, region)
    grad = []
    for z, cell in zip(diagram.generators, diagram.cells):
        if cell is None:
            grad.append(0j)
            continue
        m = cell_moments(cell, phi, refine)
        grad.append(2.0 * m.mass * (z - m.centroid))
    return grad


def centroid_jacobians(diagram: VoronoiDiagram, phi, k: int, h: float = JACOBIAN_STEP) -> dict:
    """Map ``j -> 2x2 array`` of d(centroid of cell k)/d(generator j).

    Central differences with step ``h``.  Entries for generators that are
    neither ``k`` nor a neighbour of ``k`` are exact zeros.
    """
    gens = list(diagram.generators)
    n = len(gens)
    active = sorted(diagram.adjacency[k] | {k})
    out = {j: np.zeros((2, 2)) for j in range(n)}
    for j in active:
        for col, step in enumerate((h, 1j * h)):
            cols = []
            for sgn in (1.0, -1.0):
                moved = gens.copy()
                moved[j] = gens[j] + sgn * step
                for i in range(n):
                    if i != j and abs(moved[i] - moved[j]) < COINCIDENT_TOL:
                        raise GeometryError("jacobian step collision")
                cell = voronoi_cell(moved, diagram.region, k)
                cols.append(cell_moments(cell, phi).centroid)
            d = (cols[0] - cols[1]) / (2 * h)
            out[j][0, col] = d.real
            out[j][1, col] = d.imag
    return out
