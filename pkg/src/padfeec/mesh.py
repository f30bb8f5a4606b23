"""Simplicial complexes in dimension 2 and 3.

Cells are stored with vertex indices sorted ascending together with an
orientation sign (the sign of the volume form in that order), so incidence
data is reproducible regardless of how input files order their vertices.
Structured generators cover the unit box, the box with a central square hole
(nontrivial first Betti number) and the 6-tets-per-cube unit box in 3-D.
"""

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter, MeshError, Unsupported
from .forms import CellGeometry


@dataclass
class SubSimplexTable:
    """All k-sub-simplices of a mesh plus cell incidence and boundary flags."""

    k: int
    simplices: list
    index: dict = field(repr=False)
    boundary: np.ndarray = field(repr=False)
    cell_incidence: np.ndarray = field(repr=False)  # (cells, faces-per-cell) global ids
    incidence_signs: np.ndarray = field(repr=False)

    @property
    def count(self):
        return len(self.simplices)

    def interior_ids(self):
        return [i for i in range(self.count) if not self.boundary[i]]

    def boundary_ids(self):
        return [i for i in range(self.count) if self.boundary[i]]


@dataclass
class Patch:
    """Cells sharing one vertex, adjacency-ordered when the dimension allows."""

    center: int
    cells: list


class Mesh:
    """Immutable conforming simplicial complex."""

    def __init__(self, dim, vertices, cells, domain_volume=None):
        if dim not in (2, 3):
            raise Unsupported("mesh dimension must be 2 or 3")
        self.dim = dim
        self.vertices = np.asarray(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != dim:
            raise MeshError("vertex array must be (num_vertices, dim)")
        raw = [tuple(int(v) for v in c) for c in cells]
        self.cells = []
        self.cell_orientations = []
        for c in raw:
            if len(set(c)) != dim + 1:
                raise MeshError("cell %s has repeated vertices" % (c,))
            if max(c) >= len(self.vertices) or min(c) < 0:
                raise MeshError("cell %s references a missing vertex" % (c,))
            srt = tuple(sorted(c))
            det = np.linalg.det(
                (self.vertices[list(srt[1:])] - self.vertices[srt[0]]).T
            )
            if det == 0.0:
                raise MeshError("cell %s is degenerate" % (c,))
            # the stored orientation is the sign of the volume form in the
            # ascending vertex order, so the oriented volume is positive
            self.cells.append(srt)
            self.cell_orientations.append(int(np.sign(det)))
        self.cells = tuple(self.cells)
        self.cell_orientations = np.asarray(self.cell_orientations, dtype=int)
        self.domain_volume = domain_volume
        self._tables = {}
        self._geometry = {}
        self._patches = {}
        self._validate_facets()
        self.satisfies_vertex_hypothesis = self._check_vertex_hypothesis()

    # -- construction checks --------------------------------------------------

    def _validate_facets(self):
        counts = {}
        for ci, cell in enumerate(self.cells):
            for facet in itertools.combinations(cell, self.dim):
                counts.setdefault(facet, []).append(ci)
        for facet, owners in counts.items():
            if len(owners) > 2:
                raise MeshError(
                    "facet %s is shared by %d cells; complex is not conforming"
                    % (facet, len(owners))
                )
        self._facet_owners = counts

    def _check_vertex_hypothesis(self):
        verts = self.subsimplices(0)
        edges = self.subsimplices(1)
        interior = {v[0] for i, v in enumerate(verts.simplices) if not verts.boundary[i]}
        neighbours = {}
        for a, b in edges.simplices:
            neighbours.setdefault(a, set()).add(b)
            neighbours.setdefault(b, set()).add(a)
        for i, v in enumerate(verts.simplices):
            if verts.boundary[i] and not (neighbours.get(v[0], set()) & interior):
                return False
        return True

    # -- queries ---------------------------------------------------------------

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_cells(self):
        return len(self.cells)

    def cell_geometry(self, i):
        geo = self._geometry.get(i)
        if geo is None:
            geo = CellGeometry(self.vertices[list(self.cells[i])])
            self._geometry[i] = geo
        return geo

    def signed_volume(self, i):
        geo = self.cell_geometry(i)
        return geo.volume * geo.orientation * self.cell_orientations[i]

    def total_volume(self):
        return float(sum(self.signed_volume(i) for i in range(self.num_cells)))

    def max_diameter(self):
        return max(self.cell_geometry(i).diameter for i in range(self.num_cells))

    def subsimplices(self, k):
        """Complete duplicate-free table of k-sub-simplices with boundary flags."""
        if not 0 <= k <= self.dim:
            raise InvalidParameter("sub-simplex dimension %d outside 0..%d" % (k, self.dim))
        table = self._tables.get(k)
        if table is not None:
            return table
        combos = list(itertools.combinations(range(self.dim + 1), k + 1))
        index = {}
        simplices = []
        incidence = np.zeros((self.num_cells, len(combos)), dtype=int)
        for ci, cell in enumerate(self.cells):
            for fi, combo in enumerate(combos):
                sub = tuple(cell[j] for j in combo)
                gid = index.get(sub)
                if gid is None:
                    gid = len(simplices)
                    index[sub] = gid
                    simplices.append(sub)
                incidence[ci, fi] = gid
        boundary = np.zeros(len(simplices), dtype=bool)
        if k < self.dim:
            bfacets = [f for f, owners in self._facet_owners.items() if len(owners) == 1]
            bset = set()
            for f in bfacets:
                for sub in itertools.combinations(f, k + 1):
                    bset.add(sub)
            for sub in bset:
                gid = index.get(sub)
                if gid is not None:
                    boundary[gid] = True
        table = SubSimplexTable(
            k=k,
            simplices=simplices,
            index=index,
            boundary=boundary,
            cell_incidence=incidence,
            incidence_signs=np.ones_like(incidence),
        )
        self._tables[k] = table
        return table

    def boundary_matrix(self, k):
        """Integer chain boundary matrix from k-chains to (k-1)-chains."""
        if not 1 <= k <= self.dim:
            raise InvalidParameter("chain degree out of range")
        upper = self.subsimplices(k)
        lower = self.subsimplices(k - 1)
        D = np.zeros((lower.count, upper.count), dtype=int)
        for col, sub in enumerate(upper.simplices):
            for j in range(len(sub)):
                face = sub[:j] + sub[j + 1 :]
                D[lower.index[face], col] += (-1) ** j
        return D

    def vertex_patch(self, v):
        """All cells containing vertex v, adjacency-ordered in 2-D."""
        if not 0 <= v < self.num_vertices:
            raise InvalidParameter("vertex index out of range")
        patch = self._patches.get(v)
        if patch is not None:
            return patch
        cells = [ci for ci, cell in enumerate(self.cells) if v in cell]
        if self.dim == 2 and len(cells) > 1:
            cells = self._order_patch(v, cells)
        patch = Patch(center=v, cells=cells)
        self._patches[v] = patch
        return patch

    def _order_patch(self, v, cells):
        # cells around v form a path or a cycle along shared edges through v
        adj = {c: [] for c in cells}
        for a, b in itertools.combinations(cells, 2):
            shared = set(self.cells[a]) & set(self.cells[b])
            if v in shared and len(shared) == 2:
                adj[a].append(b)
                adj[b].append(a)
        ends = sorted(c for c in cells if len(adj[c]) <= 1)
        start = ends[0] if ends else min(cells)
        ordered = [start]
        seen = {start}
        while True:
            nxt = [c for c in adj[ordered[-1]] if c not in seen]
            if not nxt:
                break
            ordered.append(min(nxt))
            seen.add(ordered[-1])
        return ordered if len(ordered) == len(cells) else cells

    # -- serialization ----------------------------------------------------------

    def to_json(self):
        return {
            "dim": self.dim,
            "vertices": [[float(x) for x in v] for v in self.vertices],
            "cells": [list(c) for c in self.cells],
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def from_json(cls, data):
        try:
            dim = int(data["dim"])
            vertices = data["vertices"]
            cells = data["cells"]
        except (KeyError, TypeError) as exc:
            raise MeshError("mesh file must carry dim, vertices and cells") from exc
        return cls(dim, vertices, cells)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


# -- structured generation ------------------------------------------------------


def generate_structured(dim, n, domain="box"):
    """Structured triangulations: unit box (2-D/3-D) and 2-D box with a hole.

    The 2-D box is split into 2 n^2 triangles with a uniform diagonal; the hole
    variant removes the central (n/2)^2 sub-squares and needs n divisible by 4.
    The 3-D box splits each of the n^3 cubes into 6 tetrahedra.
    """
    if n < 1:
        raise InvalidParameter("need at least one cell per side")
    if domain == "box":
        if dim == 2:
            return _box_2d(n, hole=False)
        if dim == 3:
            return _box_3d(n)
        raise Unsupported("dimension must be 2 or 3")
    if domain == "hole":
        if dim != 2:
            raise InvalidParameter("the hole domain is only generated in 2-D")
        if n % 4 != 0:
            raise InvalidParameter("hole meshes need the side count divisible by 4")
        return _box_2d(n, hole=True)
    raise InvalidParameter("unknown domain %r" % (domain,))


def _box_2d(n, hole):
    idx = lambda i, j: j * (n + 1) + i
    vertices = [
        (i / n, j / n) for j in range(n + 1) for i in range(n + 1)
    ]
    lo, hi = n // 4, 3 * n // 4
    in_hole = lambda i, j: hole and lo <= i < hi and lo <= j < hi
    cells = []
    for j in range(n):
        for i in range(n):
            if in_hole(i, j):
                continue
            a, b = idx(i, j), idx(i + 1, j)
            c, d = idx(i, j + 1), idx(i + 1, j + 1)
            cells.append((a, b, d))
            cells.append((a, d, c))
    used = sorted({v for cell in cells for v in cell})
    remap = {v: i for i, v in enumerate(used)}
    vertices = [vertices[v] for v in used]
    cells = [tuple(remap[v] for v in cell) for cell in cells]
    volume = 1.0 - (0.25 if hole else 0.0)
    return Mesh(2, vertices, cells, domain_volume=volume)


def _box_3d(n):
    idx = lambda i, j, k: (k * (n + 1) + j) * (n + 1) + i
    vertices = [
        (i / n, j / n, k / n)
        for k in range(n + 1)
        for j in range(n + 1)
        for i in range(n + 1)
    ]
    offsets = {0: (1, 0, 0), 1: (0, 1, 0), 2: (0, 0, 1)}
    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                corner = np.array([i, j, k])
                for perm in itertools.permutations(range(3)):
                    path = [corner.copy()]
                    for axis in perm:
                        path.append(path[-1] + np.array(offsets[axis]))
                    cells.append(tuple(idx(*p) for p in path))
    return Mesh(3, vertices, cells, domain_volume=1.0)


def refine_uniform(mesh):
    """Split every triangle into 4 via edge midpoints (2-D only)."""
    if mesh.dim != 2:
        raise Unsupported("uniform refinement is implemented for 2-D meshes")
    edges = mesh.subsimplices(1)
    nv = mesh.num_vertices
    vertices = [tuple(v) for v in mesh.vertices]
    mid = {}
    for eid, (a, b) in enumerate(edges.simplices):
        mid[(a, b)] = nv + eid
        vertices.append(tuple((mesh.vertices[a] + mesh.vertices[b]) / 2.0))
    cells = []
    for a, b, c in mesh.cells:
        mab, mac, mbc = mid[(a, b)], mid[(a, c)], mid[(b, c)]
        cells.extend(
            [(a, mab, mac), (b, mab, mbc), (c, mac, mbc), (mab, mac, mbc)]
        )
    return Mesh(2, vertices, cells, domain_volume=mesh.domain_volume)


def canonically_equal(mesh_a, mesh_b, decimals=9):
    """Equality of meshes up to a permutation of vertex labels."""
    if mesh_a.dim != mesh_b.dim or mesh_a.num_vertices != mesh_b.num_vertices:
        return False
    if mesh_a.num_cells != mesh_b.num_cells:
        return False

    def canon(mesh):
        keys = [tuple(round(float(x), decimals) for x in v) for v in mesh.vertices]
        order = sorted(range(len(keys)), key=lambda i: keys[i])
        rank = {old: new for new, old in enumerate(order)}
        cells = sorted(tuple(sorted(rank[v] for v in cell)) for cell in mesh.cells)
        return [keys[i] for i in order], cells

    va, ca = canon(mesh_a)
    vb, cb = canon(mesh_b)
    return va == vb and ca == cb


def shape_report(mesh):
    """Minimum angle (2-D, degrees) and worst diameter/inradius aspect ratio."""
    worst_ratio = 0.0
    min_angle = 180.0
    for i in range(mesh.num_cells):
        geo = mesh.cell_geometry(i)
        V = geo.vertices
        nfaces = mesh.dim + 1
        face_measures = []
        for j in range(nfaces):
            F = np.delete(V, j, axis=0)
            E = F[1:] - F[0]
            G = E @ E.T
            face_measures.append(
                math.sqrt(max(np.linalg.det(G), 0.0)) / math.factorial(mesh.dim - 1)
            )
        inradius = mesh.dim * geo.volume / sum(face_measures)
        worst_ratio = max(worst_ratio, geo.diameter / inradius)
        if mesh.dim == 2:
            for j in range(3):
                a = V[(j + 1) % 3] - V[j]
                b = V[(j + 2) % 3] - V[j]
                cosang = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
                min_angle = min(min_angle, math.degrees(math.acos(np.clip(cosang, -1, 1))))
    return {"min_angle_deg": min_angle, "max_aspect_ratio": worst_ratio}
