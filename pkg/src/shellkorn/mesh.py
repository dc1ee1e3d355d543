"""Triangulations of the polygonal parameter domain.

Generation (structured, geometrically graded, L-shaped), red refinement,
shape-regularity measurement, boundary-condition partitions, line-cut edge
sums, boundary strips, and a plain-text import/export format.

Edge bookkeeping: every edge stores its endpoints, its length, the adjacent
triangle(s) and a unit normal.  For interior edges the side-1 element is the
one with the smaller index and the normal points from side 1 to side 2; for
boundary edges the normal points out of the domain.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mesh",
    "MeshError",
    "BoundaryPartition",
    "RegularityReport",
    "generate_structured",
    "refine_red",
    "shape_regularity",
    "line_cut_edge_sum",
    "boundary_strip_elements",
    "import_mesh",
    "export_mesh",
    "stretch_mesh",
]

DUPLICATE_TOL = 1e-12


class MeshError(Exception):
    pass


class Mesh:
    """Conforming triangulation with full edge topology.

    Parameters are the vertex array (V, 2) and the triangle index array
    (T, 3).  Triangles are reoriented counterclockwise if needed; duplicate
    vertices, degenerate triangles and non-conforming topology raise
    MeshError.
    """

    def __init__(self, vertices, triangles, regions=None):
        self.vertices = np.asarray(vertices, dtype=float).copy()
        self.triangles = np.asarray(triangles, dtype=int).copy()
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must have shape (V, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must have shape (T, 3)")
        if self.triangles.size and (self.triangles.min() < 0
                                    or self.triangles.max() >= len(self.vertices)):
            raise MeshError("triangle refers to a missing vertex")
        self.regions = (np.zeros(len(self.triangles), dtype=int) if regions is None
                        else np.asarray(regions, dtype=int).copy())

        self._check_duplicates()
        self._orient_and_measure()
        self._build_edges()

    # -- construction helpers -------------------------------------------------

    def _check_duplicates(self):
        v = self.vertices
        order = np.lexsort((v[:, 1], v[:, 0]))
        sv = v[order]
        close = np.all(np.abs(np.diff(sv, axis=0)) <= DUPLICATE_TOL, axis=1)
        if close.any():
            i = int(np.argmax(close))
            raise MeshError(f"duplicate vertices {order[i]} and {order[i + 1]}")

    def _orient_and_measure(self):
        p = self.vertices[self.triangles]
        twice_area = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        flip = twice_area < 0
        if flip.any():
            self.triangles[flip] = self.triangles[flip][:, [0, 2, 1]]
            twice_area = np.abs(twice_area)
        if np.any(twice_area <= 0):
            raise MeshError(f"degenerate (zero area) triangle {int(np.argmin(twice_area))}")
        self.areas = 0.5 * twice_area
        p = self.vertices[self.triangles]
        side = np.stack([np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
                         np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
                         np.linalg.norm(p[:, 0] - p[:, 2], axis=1)], axis=1)
        self.side_lengths = side
        self.h_tau = side.max(axis=1)

    def _build_edges(self):
        pairs = {}
        for t, tri in enumerate(self.triangles):
            for k in range(3):
                a, b = int(tri[k]), int(tri[(k + 1) % 3])
                key = (a, b) if a < b else (b, a)
                pairs.setdefault(key, []).append(t)
        edge_vertices = []
        edge_elems = []
        for key in sorted(pairs):
            adj = pairs[key]
            if len(adj) > 2:
                raise MeshError(f"edge {key} shared by {len(adj)} triangles")
            edge_vertices.append(key)
            edge_elems.append((min(adj), max(adj)) if len(adj) == 2 else (adj[0], -1))
        self.edge_vertices = np.array(edge_vertices, dtype=int)
        self.edge_elems = np.array(edge_elems, dtype=int)
        self.is_boundary_edge = self.edge_elems[:, 1] < 0
        pv = self.vertices[self.edge_vertices]
        self.edge_lengths = np.linalg.norm(pv[:, 1] - pv[:, 0], axis=1)

        # unit normal pointing away from the side-1 element
        tang = (pv[:, 1] - pv[:, 0]) / self.edge_lengths[:, None]
        normal = np.stack([tang[:, 1], -tang[:, 0]], axis=1)
        cent = self.vertices[self.triangles].mean(axis=1)
        mid = pv.mean(axis=1)
        toward_side1 = np.einsum("ed,ed->e", normal, cent[self.edge_elems[:, 0]] - mid)
        normal[toward_side1 > 0] *= -1.0
        self.edge_tangents = tang
        self.edge_normals = normal

        self.interior_edges = np.flatnonzero(~self.is_boundary_edge)
        self.boundary_edges = np.flatnonzero(self.is_boundary_edge)

    # -- basic queries ---------------------------------------------------------

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    @property
    def num_edges(self):
        return len(self.edge_vertices)

    @property
    def area(self):
        return float(self.areas.sum())

    @property
    def max_h(self):
        return float(self.h_tau.max())

    @property
    def min_h(self):
        return float(self.h_tau.min())

    def triangle_points(self, t):
        return self.vertices[self.triangles[t]]

    def __repr__(self):
        return (f"Mesh({self.num_vertices} vertices, {self.num_triangles} triangles, "
                f"{len(self.interior_edges)} interior / {len(self.boundary_edges)} "
                f"boundary edges)")


# -- generation ----------------------------------------------------------------

def generate_structured(n, domain="square", grading="none", q=0.5):
    """Structured triangulation of the unit square or the L-shaped domain.

    Each grid cell is split along its rising diagonal.  ``grading="geometric"``
    builds nested square rings shrinking by factor ``q`` toward the corner
    (0, 0); ``n`` is then the number of nested levels.  For q = 1/2 every
    triangle of the graded mesh is right isosceles, so the shape regularity
    equals the ungraded one while the quasi-uniformity ratio grows like
    2^(n-1).
    """
    if n < 1:
        raise MeshError("subdivision count must be >= 1")
    if grading not in ("none", "geometric"):
        raise MeshError(f"unknown grading {grading!r}")
    if grading == "geometric":
        if not (0.0 < q <= 1.0):
            raise MeshError("grading factor must lie in (0, 1]")
        if domain != "square":
            raise MeshError("geometric grading is only provided on the unit square")
        return _generate_graded(n, q)
    if domain == "square":
        keep = lambda cx, cy: True
    elif domain in ("lshape", "l-shape", "L"):
        if n % 2 != 0 and n > 1:
            raise MeshError("L-shaped domain needs an even subdivision count")
        keep = lambda cx, cy: not (cx > 0.5 and cy > 0.5)
    else:
        raise MeshError(f"unknown domain {domain!r}")

    idx = {}
    verts = []

    def vid(i, j):
        key = (i, j)
        if key not in idx:
            idx[key] = len(verts)
            verts.append((i / n, j / n))
        return idx[key]

    tris = []
    for i in range(n):
        for j in range(n):
            cx, cy = (i + 0.5) / n, (j + 0.5) / n
            if not keep(cx, cy):
                continue
            v00, v10 = vid(i, j), vid(i + 1, j)
            v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return Mesh(np.array(verts), np.array(tris))


def _generate_graded(levels, q):
    verts = []
    idx = {}

    def vid(p):
        key = (round(p[0], 15), round(p[1], 15))
        if key not in idx:
            idx[key] = len(verts)
            verts.append(p)
        return idx[key]

    tris = []

    def add(*pts):
        tris.append(tuple(vid(p) for p in pts))

    def split_rect(x0, x1, y0, y1, cut=None):
        # cut = ("left", yc) or ("bottom", xc) bisects that side through the
        # rectangle center with a 5-triangle fan; otherwise a plain diagonal
        if cut is None:
            add((x0, y0), (x1, y0), (x1, y1))
            add((x0, y0), (x1, y1), (x0, y1))
            return
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        if cut[0] == "left":
            m = (x0, cut[1])
            add((x0, y0), (cx, cy), m)
            add(m, (cx, cy), (x0, y1))
            add((x0, y0), (x1, y0), (cx, cy))
            add((x1, y0), (x1, y1), (cx, cy))
            add((x1, y1), (x0, y1), (cx, cy))
        else:
            m = (cut[1], y0)
            add((x0, y0), m, (cx, cy))
            add(m, (x1, y0), (cx, cy))
            add((x1, y0), (x1, y1), (cx, cy))
            add((x1, y1), (x0, y1), (cx, cy))
            add((x0, y1), (x0, y0), (cx, cy))

    t = [q ** j for j in range(levels)]
    for j in range(levels - 1):
        outer, inner = t[j], t[j + 1]
        split = t[j + 2] if j + 2 < levels else None
        # bottom-right rectangle [inner, outer] x [0, inner]
        split_rect(inner, outer, 0.0, inner,
                   cut=("left", split) if split is not None else None)
        # top-left rectangle [0, inner] x [inner, outer]
        split_rect(0.0, inner, inner, outer,
                   cut=("bottom", split) if split is not None else None)
        # corner rectangle [inner, outer]^2
        split_rect(inner, outer, inner, outer)
    s = t[-1]
    add((0.0, 0.0), (s, 0.0), (s, s))
    add((0.0, 0.0), (s, s), (0.0, s))
    return Mesh(np.array(verts), np.array(tris))


def refine_red(mesh):
    """Split every triangle into four similar children through edge midpoints."""
    V = mesh.num_vertices
    edge_mid = {}
    new_verts = [mesh.vertices]
    mids = []
    for k, (a, b) in enumerate(mesh.edge_vertices):
        edge_mid[(int(a), int(b))] = V + k
        mids.append(0.5 * (mesh.vertices[a] + mesh.vertices[b]))
    new_verts.append(np.array(mids))
    verts = np.vstack(new_verts)

    def mid(a, b):
        return edge_mid[(a, b) if a < b else (b, a)]

    tris = []
    regions = []
    for t, (v0, v1, v2) in enumerate(mesh.triangles):
        v0, v1, v2 = int(v0), int(v1), int(v2)
        m01, m12, m20 = mid(v0, v1), mid(v1, v2), mid(v2, v0)
        tris.extend([(v0, m01, m20), (m01, v1, m12), (m20, m12, v2), (m01, m12, m20)])
        regions.extend([mesh.regions[t]] * 4)
    return Mesh(verts, np.array(tris), regions=np.array(regions))


def stretch_mesh(mesh, sx, sy=None):
    """Anisotropic scaling of all vertices (volume-preserving when sy is None)."""
    if sy is None:
        sy = 1.0 / sx
    v = mesh.vertices * np.array([sx, sy])
    return Mesh(v, mesh.triangles, regions=mesh.regions)


# -- quality -------------------------------------------------------------------

@dataclass(frozen=True)
class RegularityReport:
    """Per-triangle circumradius/inradius ratios and mesh-level summaries."""
    ratios: np.ndarray
    shape_regularity: float
    min_angle: float
    quasi_uniformity: float


def shape_regularity(mesh):
    """Exact R/r per triangle: R = abc/(4 area), r = area/semiperimeter."""
    a = mesh.side_lengths[:, 0]
    b = mesh.side_lengths[:, 1]
    c = mesh.side_lengths[:, 2]
    area = mesh.areas
    R = a * b * c / (4.0 * area)
    s = 0.5 * (a + b + c)
    r = area / s
    ratios = R / r
    # smallest angle via the law of cosines, over all corners
    cosines = np.stack([
        (b ** 2 + c ** 2 - a ** 2) / (2 * b * c),
        (a ** 2 + c ** 2 - b ** 2) / (2 * a * c),
        (a ** 2 + b ** 2 - c ** 2) / (2 * a * b)], axis=1)
    min_angle = float(np.arccos(np.clip(cosines, -1, 1)).min())
    return RegularityReport(
        ratios=ratios,
        shape_regularity=float(ratios.max()),
        min_angle=min_angle,
        quasi_uniformity=float(mesh.h_tau.max() / mesh.h_tau.min()))


# -- boundary partition ----------------------------------------------------------

_MARKS = ("D", "S", "F")


class BoundaryPartition:
    """Assignment of every boundary edge to clamped (D), simply supported (S)
    or free (F).

    ``markers`` is aligned with ``mesh.boundary_edges``.  ``edges_D`` etc.
    are global edge indices.
    """

    def __init__(self, mesh, markers):
        markers = np.asarray(markers)
        if len(markers) != len(mesh.boundary_edges):
            raise MeshError("one marker per boundary edge required")
        bad = set(np.unique(markers)) - set(_MARKS)
        if bad:
            raise MeshError(f"unknown boundary markers {sorted(bad)}")
        self.mesh = mesh
        self.markers = markers.astype("U1")

    @classmethod
    def uniform(cls, mesh, marker="D"):
        if marker not in _MARKS:
            raise MeshError(f"unknown boundary marker {marker!r}")
        return cls(mesh, np.full(len(mesh.boundary_edges), marker))

    @classmethod
    def by_sides(cls, mesh, sides, default="D"):
        """Assign markers by straight boundary side of the bounding box.

        ``sides`` maps any of left/right/bottom/top to a marker letter.
        Boundary edges not on one of the named sides get ``default`` with a
        warning (mirrors the unmarked-edge rule of the file format).
        """
        lo = mesh.vertices.min(axis=0)
        hi = mesh.vertices.max(axis=0)
        tol = 1e-12 * max(1.0, float(np.abs(mesh.vertices).max()))
        markers = np.empty(len(mesh.boundary_edges), dtype="U1")
        unmatched = 0
        for i, e in enumerate(mesh.boundary_edges):
            pv = mesh.vertices[mesh.edge_vertices[e]]
            name = None
            if np.all(np.abs(pv[:, 0] - lo[0]) <= tol):
                name = "left"
            elif np.all(np.abs(pv[:, 0] - hi[0]) <= tol):
                name = "right"
            elif np.all(np.abs(pv[:, 1] - lo[1]) <= tol):
                name = "bottom"
            elif np.all(np.abs(pv[:, 1] - hi[1]) <= tol):
                name = "top"
            if name is not None and name in sides:
                markers[i] = sides[name]
            else:
                markers[i] = default
                unmatched += 1
        if unmatched:
            warnings.warn(f"{unmatched} boundary edges not matched by side map; "
                          f"defaulting to {default!r}", stacklevel=2)
        return cls(mesh, markers)

    def _edges(self, letters):
        mask = np.isin(self.markers, list(letters))
        return self.mesh.boundary_edges[mask]

    @property
    def edges_D(self):
        return self._edges("D")

    @property
    def edges_S(self):
        return self._edges("S")

    @property
    def edges_F(self):
        return self._edges("F")

    @property
    def d_measure(self):
        return float(self.mesh.edge_lengths[self.edges_D].sum())

    @property
    def d_measure_positive(self):
        return self.d_measure > 0.0


# -- line cuts -------------------------------------------------------------------

def line_cut_edge_sum(mesh, point, direction):
    """Sum of full lengths of the mesh edges crossed by a straight line.

    A crossing is counted whenever the line leaves an element or the domain;
    equivalently, every crossed edge counts except the boundary edge through
    which the line first enters the domain (the line is oriented by
    ``direction``).  On the structured unit-square mesh a generic horizontal
    line therefore meets exactly n vertical and n diagonal edges, giving
    1 + sqrt(2) independently of n.  Lines through a vertex are perturbed
    laterally by 1e-9 times the smallest element diameter.
    """
    p0 = np.asarray(point, dtype=float)
    d = np.asarray(direction, dtype=float)
    dn = np.linalg.norm(d)
    if dn == 0:
        raise MeshError("line direction must be nonzero")
    d = d / dn
    nrm = np.array([-d[1], d[0]])

    for attempt in range(8):
        s = nrm @ (mesh.vertices - p0).T
        tol = 1e-13 * max(1.0, float(np.abs(mesh.vertices).max()))
        if np.all(np.abs(s) > tol):
            break
        p0 = p0 + nrm * 1e-9 * mesh.min_h * (attempt + 1)
    else:
        raise MeshError("could not perturb the line away from mesh vertices")

    sv = s[mesh.edge_vertices]                 # signed distances of edge endpoints
    crossed = (sv[:, 0] * sv[:, 1]) < 0.0
    if not crossed.any():
        return 0.0
    # drop boundary edges where the (oriented) line enters the domain
    entering = crossed & mesh.is_boundary_edge & (mesh.edge_normals @ d < 0.0)
    return float(mesh.edge_lengths[crossed & ~entering].sum())


# -- boundary strips --------------------------------------------------------------

def boundary_strip_elements(mesh, delta):
    """Triangles within distance ``delta`` of the domain boundary.

    The strip is a union of whole elements: a triangle belongs to it when its
    exact distance to the boundary polygon is <= delta.  Returns the element
    index array and the measure of the element-union strip.  If the strip
    swallows the whole mesh a warning is issued.
    """
    if delta <= 0:
        raise MeshError("strip width must be positive")
    bseg = mesh.vertices[mesh.edge_vertices[mesh.boundary_edges]]   # (B, 2, 2)
    members = []
    for t in range(mesh.num_triangles):
        tri = mesh.triangle_points(t)
        if _distance_to_segments(tri, bseg) <= delta:
            members.append(t)
    members = np.array(members, dtype=int)
    if len(members) == mesh.num_triangles:
        warnings.warn("boundary strip covers every element "
                      "(width exceeds the domain inradius)", stacklevel=2)
    return members, float(mesh.areas[members].sum())


def _distance_to_segments(tri, segs):
    best = np.inf
    for s0, s1 in segs:
        if _tri_seg_intersect(tri, s0, s1):
            return 0.0
        for p in tri:
            best = min(best, _point_seg_dist(p, s0, s1))
        for k in range(3):
            for q in (s0, s1):
                best = min(best, _point_seg_dist(q, tri[k], tri[(k + 1) % 3]))
    return best


def _point_seg_dist(p, a, b):
    ab = b - a
    L2 = ab @ ab
    t = 0.0 if L2 == 0 else np.clip(((p - a) @ ab) / L2, 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def _tri_seg_intersect(tri, s0, s1):
    # segment endpoint inside the triangle, or any edge pair crossing
    for q in (s0, s1):
        if _point_in_triangle(q, tri):
            return True
    for k in range(3):
        if _segments_cross(tri[k], tri[(k + 1) % 3], s0, s1):
            return True
    return False


def _cross2(u, v):
    return u[0] * v[1] - u[1] * v[0]


def _point_in_triangle(p, tri):
    a, b, c = tri
    d1 = _cross2(b - a, p - a)
    d2 = _cross2(c - b, p - b)
    d3 = _cross2(a - c, p - c)
    return (min(d1, d2, d3) >= -1e-14) or (max(d1, d2, d3) <= 1e-14)


def _segments_cross(a, b, c, d):
    def orient(p, q, r):
        return _cross2(q - p, r - p)

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return (o1 * o2 < 0) and (o3 * o4 < 0)


# -- file I/O ----------------------------------------------------------------------

_MARKER_INT = {1: "D", 2: "S", 3: "F"}


def export_mesh(mesh, node_path, ele_path, marker_path=None, partition=None):
    """Write the whitespace-separated node/ele (and optional marker) files."""
    with open(node_path, "w") as f:
        f.write(f"{mesh.num_vertices} 2 0 0\n")
        for i, (x, y) in enumerate(mesh.vertices, start=1):
            f.write(f"{i} {float(x)!r} {float(y)!r}\n")
    with open(ele_path, "w") as f:
        f.write(f"{mesh.num_triangles} 3 1\n")
        for i, tri in enumerate(mesh.triangles, start=1):
            f.write(f"{i} {tri[0] + 1} {tri[1] + 1} {tri[2] + 1} {mesh.regions[i - 1]}\n")
    if marker_path is not None:
        letters = {v: k for k, v in _MARKER_INT.items()}
        if partition is None:
            partition = BoundaryPartition.uniform(mesh, "D")
        with open(marker_path, "w") as f:
            for e, m in zip(mesh.boundary_edges, partition.markers):
                a, b = mesh.edge_vertices[e]
                f.write(f"{a + 1} {b + 1} {letters[m]}\n")


def import_mesh(node_path, ele_path, marker_path=None, marker_map=None):
    """Read node/ele files back; returns (mesh, partition or None).

    Unmarked boundary edges default to clamped (D) with a warning; unknown
    marker integers raise.
    """
    marker_map = dict(_MARKER_INT if marker_map is None else marker_map)
    with open(node_path) as f:
        header = f.readline().split()
        nv = int(header[0])
        verts = np.empty((nv, 2))
        for _ in range(nv):
            parts = f.readline().split()
            verts[int(parts[0]) - 1] = (float(parts[1]), float(parts[2]))
    with open(ele_path) as f:
        header = f.readline().split()
        nt = int(header[0])
        tris = np.empty((nt, 3), dtype=int)
        regions = np.zeros(nt, dtype=int)
        for _ in range(nt):
            parts = f.readline().split()
            i = int(parts[0]) - 1
            tris[i] = [int(parts[1]) - 1, int(parts[2]) - 1, int(parts[3]) - 1]
            if len(parts) > 4:
                regions[i] = int(parts[4])
    mesh = Mesh(verts, tris, regions=regions)
    if marker_path is None:
        return mesh, None

    lookup = {}
    with open(marker_path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            a, b, m = int(parts[0]) - 1, int(parts[1]) - 1, int(parts[2])
            if m not in marker_map:
                raise MeshError(f"unknown boundary marker {m}")
            lookup[(min(a, b), max(a, b))] = marker_map[m]
    markers = np.empty(len(mesh.boundary_edges), dtype="U1")
    unmarked = 0
    for i, e in enumerate(mesh.boundary_edges):
        a, b = (int(v) for v in mesh.edge_vertices[e])
        m = lookup.get((min(a, b), max(a, b)))
        if m is None:
            m = "D"
            unmarked += 1
        markers[i] = m
    if unmarked:
        warnings.warn(f"{unmarked} boundary edges without markers; defaulting to 'D'",
                      stacklevel=2)
    return mesh, BoundaryPartition(mesh, markers)
