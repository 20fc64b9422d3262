"""Conforming triangle meshes with labeled boundary and interface edges.

A mesh carries a 2-D triangulation together with boundary edges labeled
``dirichlet``, ``neumann`` or ``dynamic``, and interior interface edges on
which dynamic interface conditions live.  The text file format is line
based (``#`` starts a comment)::

    nv nt nbe nie
    x y                 (nv vertex lines)
    i j k region_id     (nt triangle lines)
    i j label           (nbe boundary edge lines)
    i j                 (nie interface edge lines)

All indices are 0-based.  Interface edges are oriented: the stored vertex
order (i, j) defines the edge tangent, and the edge normal is the tangent
rotated by +90 degrees.

Meshes are immutable after construction (construction itself is
single-threaded) and safe for concurrent read access.
"""

from __future__ import annotations

import numpy as np

from ..errors import MeshFormatError, MeshInvariantError

BOUNDARY_LABELS = ("dirichlet", "neumann", "dynamic")

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
DYNAMIC = "dynamic"


class Mesh:
    """Triangulation of a polygonal domain with labeled edges.

    Parameters
    ----------
    vertices : array_like, shape (nv, 2)
        Vertex coordinates.
    triangles : array_like, shape (nt, 3)
        Vertex index triples.  Negatively oriented triangles are flipped
        so that all stored triangles are counter-clockwise.
    boundary_edges : array_like, shape (nbe, 2)
        Vertex index pairs on the domain boundary.
    boundary_labels : sequence of str, length nbe
        One of ``dirichlet``, ``neumann``, ``dynamic`` per boundary edge.
    interface_edges : array_like, shape (nie, 2), optional
        Oriented vertex index pairs of interior interface edges.
    tri_regions : array_like, shape (nt,), optional
        Integer region id per triangle (default all 0).

    Raises
    ------
    MeshInvariantError
        If any structural invariant fails; the message names the check.
    """

    def __init__(self, vertices, triangles, boundary_edges, boundary_labels,
                 interface_edges=None, tri_regions=None):
        self.vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
        self.triangles = np.asarray(triangles, dtype=int).reshape(-1, 3)
        self.boundary_edges = np.asarray(boundary_edges, dtype=int).reshape(-1, 2)
        self.boundary_labels = list(boundary_labels)
        if interface_edges is None or len(np.atleast_1d(interface_edges)) == 0:
            self.interface_edges = np.zeros((0, 2), dtype=int)
        else:
            self.interface_edges = np.asarray(interface_edges, dtype=int).reshape(-1, 2)
        if tri_regions is None:
            self.tri_regions = np.zeros(len(self.triangles), dtype=int)
        else:
            self.tri_regions = np.asarray(tri_regions, dtype=int).reshape(-1)

        self._fix_orientation()
        self._validate()
        self._build_adjacency()

    # -- construction helpers -------------------------------------------------

    def _fix_orientation(self):
        v = self.vertices
        t = self.triangles
        if len(t) == 0:
            return
        a = v[t[:, 1]] - v[t[:, 0]]
        b = v[t[:, 2]] - v[t[:, 0]]
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        flip = cross < 0
        if np.any(flip):
            t[flip] = t[flip][:, [0, 2, 1]]

    def _validate(self):
        nv = len(self.vertices)
        for name, arr in (("triangle", self.triangles),
                          ("boundary edge", self.boundary_edges),
                          ("interface edge", self.interface_edges)):
            if arr.size and (arr.min() < 0 or arr.max() >= nv):
                raise MeshInvariantError(f"{name} vertex index out of range")

        if len(self.boundary_labels) != len(self.boundary_edges):
            raise MeshInvariantError("boundary label count does not match edge count")
        for lab in self.boundary_labels:
            if lab not in BOUNDARY_LABELS:
                raise MeshInvariantError(f"unknown boundary label '{lab}'")

        if np.any(self.triangle_areas() <= 0.0):
            raise MeshInvariantError("degenerate triangle (area <= 0)")

        # Directed edges of CCW triangles: each may appear at most once, and
        # each undirected edge in at most two triangles.  This catches
        # duplicated and overlapping triangles at desk scale.
        directed = set()
        undirected = {}
        for k, (a, b, c) in enumerate(self.triangles):
            for i, j in ((a, b), (b, c), (c, a)):
                if i == j:
                    raise MeshInvariantError("triangle with repeated vertex")
                if (i, j) in directed:
                    raise MeshInvariantError("duplicate directed edge (overlapping triangles)")
                directed.add((i, j))
                key = (min(i, j), max(i, j))
                undirected.setdefault(key, []).append(k)
        for key, tris in undirected.items():
            if len(tris) > 2:
                raise MeshInvariantError("edge shared by more than two triangles")

        topo_boundary = {key for key, tris in undirected.items() if len(tris) == 1}
        declared = set()
        for i, j in self.boundary_edges:
            key = (min(i, j), max(i, j))
            if key in declared:
                raise MeshInvariantError("boundary edge listed twice")
            declared.add(key)
            if key not in undirected:
                raise MeshInvariantError("boundary edge is not an edge of any triangle")
            if len(undirected[key]) != 1:
                raise MeshInvariantError("boundary edge belongs to more than one triangle")
        if declared != topo_boundary:
            raise MeshInvariantError("boundary labels do not cover the topological boundary")

        iface_seen = set()
        degree = {}
        for i, j in self.interface_edges:
            key = (min(i, j), max(i, j))
            if key in iface_seen:
                raise MeshInvariantError("interface edge listed twice")
            iface_seen.add(key)
            if key in declared:
                raise MeshInvariantError("edge labeled both boundary and interface")
            if key not in undirected or len(undirected[key]) != 2:
                raise MeshInvariantError("interface edge must be adjacent to exactly two triangles")
            for v in key:
                degree[v] = degree.get(v, 0) + 1
        for v, deg in degree.items():
            if deg > 2:
                raise MeshInvariantError("interface edges do not form simple polylines")

        self._undirected = undirected

    def _build_adjacency(self):
        und = self._undirected
        self._boundary_tri = []
        for i, j in self.boundary_edges:
            key = (min(i, j), max(i, j))
            self._boundary_tri.append(und[key][0])
        self._interface_tris = []
        for i, j in self.interface_edges:
            key = (min(i, j), max(i, j))
            self._interface_tris.append(tuple(und[key]))

    # -- basic queries ---------------------------------------------------------

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    def triangle_areas(self):
        """Areas of all triangles (positive for CCW orientation)."""
        v = self.vertices
        t = self.triangles
        a = v[t[:, 1]] - v[t[:, 0]]
        b = v[t[:, 2]] - v[t[:, 0]]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    def edge_length(self, i, j):
        return float(np.linalg.norm(self.vertices[j] - self.vertices[i]))

    def edge_lengths(self, edges):
        edges = np.asarray(edges, dtype=int).reshape(-1, 2)
        d = self.vertices[edges[:, 1]] - self.vertices[edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def h_max(self):
        """Longest edge over all triangles."""
        v = self.vertices
        t = self.triangles
        h = 0.0
        for i, j in ((0, 1), (1, 2), (2, 0)):
            d = v[t[:, j]] - v[t[:, i]]
            h = max(h, float(np.hypot(d[:, 0], d[:, 1]).max()))
        return h

    def boundary_edges_with_label(self, label):
        """Indices into ``boundary_edges`` carrying the given label."""
        return [k for k, lab in enumerate(self.boundary_labels) if lab == label]

    def boundary_vertices_with_label(self, label):
        """Sorted vertex ids incident to boundary edges of the given label."""
        verts = set()
        for k in self.boundary_edges_with_label(label):
            verts.update(self.boundary_edges[k])
        return sorted(verts)

    def boundary_outward_normal(self, k):
        """Outward unit normal of boundary edge ``k``."""
        i, j = self.boundary_edges[k]
        tri = self.triangles[self._boundary_tri[k]]
        opp = [v for v in tri if v != i and v != j][0]
        t = self.vertices[j] - self.vertices[i]
        n = np.array([t[1], -t[0]])
        if np.dot(n, self.vertices[opp] - self.vertices[i]) > 0:
            n = -n
        return n / np.linalg.norm(n)

    def interface_normal(self, k):
        """Oriented unit normal of interface edge ``k`` (tangent rotated +90deg)."""
        i, j = self.interface_edges[k]
        t = self.vertices[j] - self.vertices[i]
        n = np.array([-t[1], t[0]])
        return n / np.linalg.norm(n)

    def interface_sides(self, k):
        """Triangle pair (minus_tri, plus_tri) adjacent to interface edge ``k``.

        ``plus_tri`` is the triangle on the side the oriented edge normal
        points into.
        """
        i, j = self.interface_edges[k]
        n = self.interface_normal(k)
        mid = 0.5 * (self.vertices[i] + self.vertices[j])
        t1, t2 = self._interface_tris[k]
        c1 = self.vertices[self.triangles[t1]].mean(axis=0)
        if np.dot(c1 - mid, n) > 0:
            return t2, t1
        return t1, t2

    def boundary_loop_area(self):
        """Polygon area enclosed by the boundary loop(s).

        Uses the shoelace formula with edges directed as they appear in
        their adjacent triangle, which makes outer loops CCW and hole
        loops CW, so holes subtract.
        """
        total = 0.0
        for k, (i, j) in enumerate(self.boundary_edges):
            tri = self.triangles[self._boundary_tri[k]]
            cyc = [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
            if (i, j) not in cyc:
                i, j = j, i
            xi, yi = self.vertices[i]
            xj, yj = self.vertices[j]
            total += 0.5 * (xi * yj - xj * yi)
        return total

    def stats(self):
        """Small summary dict used by run manifests."""
        return {
            "num_vertices": self.num_vertices,
            "num_triangles": self.num_triangles,
            "num_boundary_edges": len(self.boundary_edges),
            "num_interface_edges": len(self.interface_edges),
            "h_max": self.h_max(),
            "area": float(self.triangle_areas().sum()),
        }


def load_mesh(path):
    """Read a mesh from the line-based text format.

    Parameters
    ----------
    path : str or Path
        File to read.

    Returns
    -------
    Mesh

    Raises
    ------
    MeshFormatError
        On malformed content, with the offending line number.
    MeshInvariantError
        If the parsed data violates a mesh invariant.
    """
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                rows.append((lineno, text))

    if not rows:
        raise MeshFormatError("empty mesh file")

    def _ints(parts, n, lineno, what):
        if len(parts) < n:
            raise MeshFormatError(f"expected {n} fields for {what}", line=lineno)
        try:
            return [int(p) for p in parts[:n]]
        except ValueError:
            raise MeshFormatError(f"malformed integer in {what}", line=lineno) from None

    lineno, header = rows[0]
    nv, nt, nbe, nie = _ints(header.split(), 4, lineno, "header")
    expected = 1 + nv + nt + nbe + nie
    if len(rows) != expected:
        raise MeshFormatError(
            f"expected {expected} data lines, found {len(rows)}", line=rows[-1][0])

    pos = 1
    vertices = np.zeros((nv, 2))
    for k in range(nv):
        lineno, text = rows[pos + k]
        parts = text.split()
        if len(parts) < 2:
            raise MeshFormatError("expected 'x y' vertex line", line=lineno)
        try:
            vertices[k] = (float(parts[0]), float(parts[1]))
        except ValueError:
            raise MeshFormatError("malformed vertex coordinate", line=lineno) from None
    pos += nv

    triangles = np.zeros((nt, 3), dtype=int)
    regions = np.zeros(nt, dtype=int)
    for k in range(nt):
        lineno, text = rows[pos + k]
        i, j, m, r = _ints(text.split(), 4, lineno, "triangle")
        _check_index((i, j, m), nv, lineno)
        triangles[k] = (i, j, m)
        regions[k] = r
    pos += nt

    bedges = np.zeros((nbe, 2), dtype=int)
    labels = []
    for k in range(nbe):
        lineno, text = rows[pos + k]
        parts = text.split()
        if len(parts) < 3:
            raise MeshFormatError("expected 'i j label' boundary edge line", line=lineno)
        i, j = _ints(parts, 2, lineno, "boundary edge")
        _check_index((i, j), nv, lineno)
        label = parts[2]
        if label not in BOUNDARY_LABELS:
            raise MeshFormatError(
                f"unknown boundary label '{label}' (expected one of {BOUNDARY_LABELS})",
                line=lineno)
        bedges[k] = (i, j)
        labels.append(label)
    pos += nbe

    iedges = np.zeros((nie, 2), dtype=int)
    for k in range(nie):
        lineno, text = rows[pos + k]
        i, j = _ints(text.split(), 2, lineno, "interface edge")
        _check_index((i, j), nv, lineno)
        iedges[k] = (i, j)

    return Mesh(vertices, triangles, bedges, labels, iedges, regions)


def _check_index(indices, nv, lineno):
    for idx in indices:
        if idx < 0 or idx >= nv:
            raise MeshFormatError(f"vertex index out of range: {idx} of {nv}", line=lineno)


def save_mesh(mesh, path):
    """Write a mesh in the text format understood by :func:`load_mesh`."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{mesh.num_vertices} {mesh.num_triangles} "
                 f"{len(mesh.boundary_edges)} {len(mesh.interface_edges)}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for (i, j, k), r in zip(mesh.triangles, mesh.tri_regions):
            fh.write(f"{i} {j} {k} {r}\n")
        for (i, j), lab in zip(mesh.boundary_edges, mesh.boundary_labels):
            fh.write(f"{i} {j} {lab}\n")
        for i, j in mesh.interface_edges:
            fh.write(f"{i} {j}\n")


def refine_uniform(mesh):
    """One level of red refinement (each triangle split into four).

    Boundary and interface edges are split in two and inherit label and
    orientation; triangle region ids are inherited.
    """
    v = mesh.vertices
    verts = list(map(tuple, v))
    midpoint = {}

    def mid(i, j):
        key = (min(i, j), max(i, j))
        if key not in midpoint:
            verts.append(tuple(0.5 * (v[i] + v[j])))
            midpoint[key] = len(verts) - 1
        return midpoint[key]

    tris = []
    regions = []
    for (a, b, c), r in zip(mesh.triangles, mesh.tri_regions):
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        tris.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        regions.extend([r, r, r, r])

    bedges = []
    labels = []
    for (i, j), lab in zip(mesh.boundary_edges, mesh.boundary_labels):
        m = mid(i, j)
        bedges.extend([(i, m), (m, j)])
        labels.extend([lab, lab])

    iedges = []
    for i, j in mesh.interface_edges:
        m = mid(i, j)
        iedges.extend([(i, m), (m, j)])

    return Mesh(np.array(verts), np.array(tris, dtype=int),
                np.array(bedges, dtype=int), labels,
                np.array(iedges, dtype=int) if iedges else None,
                np.array(regions, dtype=int))
