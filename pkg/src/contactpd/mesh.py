"""Triangle meshes: loading, adjacency, normals, mass properties, BVH.

A :class:`TriMesh` is immutable after construction and safe for concurrent
reads. Construction computes the edge-graph adjacency, angle-weighted
vertex normals, triangle normals and a binary median-split BVH (longest
axis, leaf size 4).
"""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels

DEGENERATE_AREA = 1e-12
_BVH_LEAF_SIZE = 4


class MeshError(ValueError):
    """Malformed mesh data or unparseable mesh file."""


class UndefinedNormalError(MeshError):
    """A vertex normal could not be resolved (degenerate incident fan)."""


@dataclass(frozen=True)
class MassProperties:
    """Volume, centroid and second moment of a body.

    ``second_moment`` is the integral of p p^T over the body about the
    model origin. For meshes that are not closed the integrals fall back
    to surface-area weighting and ``boundary_only`` is set; ``volume``
    then holds the total surface area.
    """

    volume: float
    centroid: np.ndarray
    second_moment: np.ndarray
    boundary_only: bool = False


class _Bvh:
    """Flattened binary BVH over triangle bounds."""

    __slots__ = ("node_min", "node_max", "left", "right", "start", "count",
                 "order", "_arrays")

    def __init__(self, verts: np.ndarray, tris: np.ndarray):
        m = len(tris)
        tri_min = verts[tris].min(axis=1)
        tri_max = verts[tris].max(axis=1)
        cent = 0.5 * (tri_min + tri_max)

        node_min = []
        node_max = []
        left = []
        right = []
        start = []
        count = []
        order = np.arange(m, dtype=np.int64)

        def build(lo: int, hi: int) -> int:
            idx = len(left)
            node_min.append(None)
            node_max.append(None)
            left.append(-1)
            right.append(-1)
            start.append(lo)
            count.append(hi - lo)
            sel = order[lo:hi]
            node_min[idx] = tri_min[sel].min(axis=0)
            node_max[idx] = tri_max[sel].max(axis=0)
            if hi - lo > _BVH_LEAF_SIZE:
                extent = node_max[idx] - node_min[idx]
                axis = int(np.argmax(extent))
                perm = np.argsort(cent[sel, axis], kind="stable")
                order[lo:hi] = sel[perm]
                mid = lo + (hi - lo) // 2
                left[idx] = build(lo, mid)
                right[idx] = build(mid, hi)
                count[idx] = 0
            return idx

        build(0, m)
        self.node_min = np.ascontiguousarray(node_min, dtype=np.float64)
        self.node_max = np.ascontiguousarray(node_max, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.start = np.asarray(start, dtype=np.int64)
        self.count = np.asarray(count, dtype=np.int64)
        self.order = order
        self._arrays = (self.node_min, self.node_max, self.left,
                        self.right, self.start, self.count, self.order)

    def arrays(self):
        return self._arrays


class TriMesh:
    """Indexed triangle mesh with adjacency, normals and a BVH."""

    def __init__(self, vertices, triangles):
        verts = np.ascontiguousarray(vertices, dtype=np.float64)
        tris = np.ascontiguousarray(triangles, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise MeshError("vertices must be (n, 3)")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshError("triangles must be (m, 3)")
        if len(tris) == 0:
            raise MeshError("mesh has no triangles")
        if not np.isfinite(verts).all():
            raise MeshError("non-finite vertex coordinate")
        if tris.min() < 0 or tris.max() >= len(verts):
            raise MeshError("triangle index out of range")
        if (tris[:, 0] == tris[:, 1]).any() or \
                (tris[:, 1] == tris[:, 2]).any() or \
                (tris[:, 2] == tris[:, 0]).any():
            raise MeshError("triangle with repeated vertex")
        areas = _tri_areas(verts, tris)
        if (areas < DEGENERATE_AREA).any():
            raise MeshError("degenerate triangle (area below 1e-12)")

        verts.setflags(write=False)
        tris.setflags(write=False)
        self.vertices = verts
        self.triangles = tris
        self.triangle_areas = areas
        self.triangle_normals = _tri_normals(verts, tris)
        self.vertex_adjacency = _vertex_adjacency(verts, tris)
        self.vertex_triangles = _vertex_triangles(len(verts), tris)
        self.vertex_normals = _vertex_normals(
            verts, tris, self.triangle_normals, self.vertex_triangles)
        self.bvh = _Bvh(verts, tris)
        self.closed = _is_closed(len(verts), tris)

        self.triangle_centroids = verts[tris].mean(axis=1)
        self.triangle_radii = np.linalg.norm(
            verts[tris] - self.triangle_centroids[:, None, :],
            axis=2).max(axis=1)
        flat = tris.ravel()
        order = np.argsort(flat, kind="stable")
        self.vertex_tri_offsets = np.searchsorted(
            flat[order], np.arange(len(verts) + 1)).astype(np.int64)
        self.vertex_tri_data = (order // 3).astype(np.int64)
        edge_vec = verts[tris[:, [1, 2, 0]]] - verts[tris]
        self.edge_lengths = np.linalg.norm(edge_vec, axis=2).ravel()
        self.median_edge_length = float(np.median(self.edge_lengths))
        lo = verts.min(axis=0)
        hi = verts.max(axis=0)
        self.bounds = (lo, hi)
        self.bbox_diagonal = float(np.linalg.norm(hi - lo))
        self.max_vertex_radius = float(np.linalg.norm(verts, axis=1).max())
        self._hash = _mesh_hash(verts, tris)
        self._mass: MassProperties | None = None

    # -- basic queries ------------------------------------------------

    def __len__(self) -> int:
        return len(self.triangles)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def content_hash(self) -> str:
        """FNV-1a 64-bit hash of the canonical vertex/triangle bytes."""
        return self._hash

    def triangle_corners(self, t: int) -> np.ndarray:
        return self.vertices[self.triangles[t]]

    def point_from_feature(self, tri: int, bary) -> np.ndarray:
        b = np.asarray(bary, dtype=np.float64)
        return b @ self.vertices[self.triangles[tri]]

    def max_incident_edge_length(self, v: int) -> float:
        adj = self.vertex_adjacency[v]
        if len(adj) == 0:
            return 0.0
        d = self.vertices[adj] - self.vertices[v]
        return float(np.linalg.norm(d, axis=1).max())

    # -- io -----------------------------------------------------------

    @classmethod
    def load(cls, path) -> "TriMesh":
        return load_mesh(path)

    def save(self, path) -> None:
        save_mesh(self, path)

    # -- derived quantities --------------------------------------------

    def mass_properties(self) -> MassProperties:
        if self._mass is None:
            self._mass = mass_properties(self)
        return self._mass


# ---------------------------------------------------------------------------
# construction helpers


def _tri_areas(verts, tris):
    e1 = verts[tris[:, 1]] - verts[tris[:, 0]]
    e2 = verts[tris[:, 2]] - verts[tris[:, 0]]
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


def _tri_normals(verts, tris):
    e1 = verts[tris[:, 1]] - verts[tris[:, 0]]
    e2 = verts[tris[:, 2]] - verts[tris[:, 0]]
    n = np.cross(e1, e2)
    n /= np.linalg.norm(n, axis=1)[:, None]
    return n


def _vertex_adjacency(verts, tris):
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]],
                            tris[:, [2, 0]]])
    und = np.sort(edges, axis=1)
    und = np.unique(und, axis=0)
    both = np.concatenate([und, und[:, ::-1]])
    order = np.lexsort((both[:, 1], both[:, 0]))
    both = both[order]
    splits = np.searchsorted(both[:, 0], np.arange(len(verts) + 1))
    return [both[splits[v]:splits[v + 1], 1].copy()
            for v in range(len(verts))]


def _vertex_triangles(nv, tris):
    flat = tris.ravel()
    owner = np.repeat(np.arange(len(tris), dtype=np.int64), 3)
    order = np.argsort(flat, kind="stable")
    flat = flat[order]
    owner = owner[order]
    splits = np.searchsorted(flat, np.arange(nv + 1))
    return [owner[splits[v]:splits[v + 1]].copy() for v in range(nv)]


def _vertex_normals(verts, tris, tri_normals, vertex_tris):
    normals = np.zeros((len(verts), 3))
    corners = verts[tris]
    for c in range(3):
        a = corners[:, (c + 1) % 3] - corners[:, c]
        b = corners[:, (c + 2) % 3] - corners[:, c]
        na = np.linalg.norm(a, axis=1)
        nb = np.linalg.norm(b, axis=1)
        cosang = np.clip((a * b).sum(axis=1) / (na * nb), -1.0, 1.0)
        ang = np.arccos(cosang)
        np.add.at(normals, tris[:, c], tri_normals * ang[:, None])
    lens = np.linalg.norm(normals, axis=1)
    ok = lens > 1e-12
    normals[ok] /= lens[ok, None]
    return normals


def _is_closed(nv, tris):
    """Closed and consistently oriented: each directed edge appears once
    and its reverse exists."""
    codes = np.concatenate([
        tris[:, 0] * nv + tris[:, 1],
        tris[:, 1] * nv + tris[:, 2],
        tris[:, 2] * nv + tris[:, 0],
    ])
    uniq, counts = np.unique(codes, return_counts=True)
    if (counts != 1).any():
        return False
    rev = np.concatenate([
        tris[:, 1] * nv + tris[:, 0],
        tris[:, 2] * nv + tris[:, 1],
        tris[:, 0] * nv + tris[:, 2],
    ])
    return bool(np.isin(rev, uniq).all())


def _mesh_hash(verts, tris) -> str:
    blob = (b"v" + np.ascontiguousarray(verts, dtype="<f8").tobytes() +
            b"t" + np.ascontiguousarray(tris, dtype="<i8").tobytes())
    h = _kernels.fnv1a64(np.frombuffer(blob, dtype=np.uint8))
    return f"{int(h):016x}"


# ---------------------------------------------------------------------------
# operations


def vertex_normal(mesh: TriMesh, v: int) -> np.ndarray:
    """Angle-weighted unit normal at vertex v."""
    if len(mesh.vertex_triangles[v]) == 0:
        raise UndefinedNormalError(f"vertex {v} has no incident triangle")
    n = mesh.vertex_normals[v]
    if np.linalg.norm(n) < 0.5:
        raise UndefinedNormalError(f"vertex {v} has a degenerate normal fan")
    return n


def feature_pseudo_normal(mesh: TriMesh, tri: int, bary,
                          bary_tol: float = 1e-4) -> np.ndarray:
    """Outward normal at a surface point classified by its feature.

    Face interiors use the triangle normal, edge points average the two
    adjacent triangle normals, vertices use the angle-weighted vertex
    normal. The negated result points into the solid from any feature of
    a closed mesh, which face normals alone do not guarantee on edges and
    corners.
    """
    b = np.asarray(bary, dtype=np.float64)
    corners = mesh.triangles[tri]
    top = int(np.argmax(b))
    if b[top] >= 1.0 - bary_tol:
        return vertex_normal(mesh, int(corners[top]))
    low = int(np.argmin(b))
    if b[low] <= bary_tol:
        u, w = corners[[k for k in range(3) if k != low]]
        shared = np.intersect1d(mesh.vertex_triangles[u],
                                mesh.vertex_triangles[w])
        n = mesh.triangle_normals[shared].sum(axis=0)
        norm = np.linalg.norm(n)
        if norm > 1e-12:
            return n / norm
    return mesh.triangle_normals[tri].copy()


def vertex_neighbors_at_step(mesh: TriMesh, v: int, d: float) -> np.ndarray:
    """Vertices whose edge-graph geodesic distance from v is in
    [d/2, 3d/2].

    When d does not exceed the longest edge incident to v, this is exactly
    the one-ring adjacency (the default stepping regime, where the step
    matches the fixed mesh's edge lengths).
    """
    if d <= 0.0:
        raise ValueError("step must be positive")
    adj = mesh.vertex_adjacency[v]
    if len(adj) == 0:
        return np.empty(0, dtype=np.int64)
    if d <= mesh.max_incident_edge_length(v):
        return adj.copy()
    lo, hi = 0.5 * d, 1.5 * d
    dist = {v: 0.0}
    heap = [(0.0, v)]
    out = []
    while heap:
        du, u = heapq.heappop(heap)
        if du > dist.get(u, np.inf):
            continue
        if lo <= du <= hi and u != v:
            out.append(u)
        if du > hi:
            continue
        for w in mesh.vertex_adjacency[u]:
            dw = du + float(np.linalg.norm(mesh.vertices[w] -
                                           mesh.vertices[u]))
            if dw < dist.get(w, np.inf) and dw <= hi + 1e-12:
                dist[w] = dw
                heapq.heappush(heap, (dw, w))
    return np.asarray(sorted(out), dtype=np.int64)


def mass_properties(mesh: TriMesh) -> MassProperties:
    """Exact polynomial integrals of 1, p and p p^T over the body.

    Closed meshes are integrated by the divergence theorem over origin
    tetrahedra; open meshes fall back to surface-area weighting with a
    warning (``volume`` then carries the surface area).
    """
    verts = mesh.vertices
    tris = mesh.triangles
    a = verts[tris[:, 0]]
    b = verts[tris[:, 1]]
    c = verts[tris[:, 2]]
    if mesh.closed:
        det = np.einsum("ij,ij->i", a, np.cross(b, c))
        volume = det.sum() / 6.0
        if volume <= 0.0:
            raise MeshError("closed mesh has non-positive volume; "
                            "orientation looks inverted")
        moment1 = (det[:, None] * (a + b + c)).sum(axis=0) / 24.0
        s = a + b + c
        outer = (np.einsum("ni,nj->nij", a, a) +
                 np.einsum("ni,nj->nij", b, b) +
                 np.einsum("ni,nj->nij", c, c) +
                 np.einsum("ni,nj->nij", s, s))
        second = (det[:, None, None] * outer).sum(axis=0) / 120.0
        return MassProperties(volume=float(volume),
                              centroid=moment1 / volume,
                              second_moment=second)
    warnings.warn("mesh is not closed; mass properties use surface-area "
                  "weighting", stacklevel=2)
    areas = mesh.triangle_areas
    total = areas.sum()
    moment1 = (areas[:, None] * (a + b + c)).sum(axis=0) / 3.0
    s = a + b + c
    outer = (np.einsum("ni,nj->nij", a, a) +
             np.einsum("ni,nj->nij", b, b) +
             np.einsum("ni,nj->nij", c, c) +
             np.einsum("ni,nj->nij", s, s))
    second = (areas[:, None, None] * outer).sum(axis=0) / 12.0
    return MassProperties(volume=float(total), centroid=moment1 / total,
                          second_moment=second, boundary_only=True)


# ---------------------------------------------------------------------------
# file io (ASCII OFF / OBJ)


def load_mesh(path) -> TriMesh:
    """Load an OFF or OBJ mesh; polygons are fan-triangulated and
    degenerate triangles dropped."""
    path = Path(path)
    if not path.exists():
        raise MeshError(f"no such mesh file: {path}")
    suffix = path.suffix.lower()
    text = path.read_text()
    if suffix == ".off" or text.lstrip()[:3].upper() == "OFF":
        verts, polys = _parse_off(text, path)
    elif suffix == ".obj":
        verts, polys = _parse_obj(text, path)
    else:
        raise MeshError(f"unsupported mesh format: {path}")
    if not np.isfinite(verts).all():
        raise MeshError(f"{path}: non-finite vertex coordinate")
    tris = []
    for poly in polys:
        if len(poly) < 3:
            raise MeshError(f"{path}: face with fewer than 3 vertices")
        for k in range(1, len(poly) - 1):
            tris.append((poly[0], poly[k], poly[k + 1]))
    tris = np.asarray(tris, dtype=np.int64)
    if len(tris) == 0:
        raise MeshError(f"{path}: no faces")
    if tris.min() < 0 or tris.max() >= len(verts):
        raise MeshError(f"{path}: face index out of range")
    distinct = ((tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) &
                (tris[:, 2] != tris[:, 0]))
    tris = tris[distinct]
    if len(tris):
        tris = tris[_tri_areas(verts, tris) >= DEGENERATE_AREA]
    if len(tris) == 0:
        raise MeshError(f"{path}: every face is degenerate")
    return TriMesh(verts, tris)


def _parse_off(text: str, path) -> tuple[np.ndarray, list]:
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or tokens[0].upper() != "OFF":
        raise MeshError(f"{path}: missing OFF header")
    try:
        nv, nf = int(tokens[1]), int(tokens[2])
        pos = 4  # skip edge count
        verts = np.array(tokens[pos:pos + 3 * nv],
                         dtype=np.float64).reshape(nv, 3)
        pos += 3 * nv
        polys = []
        for _ in range(nf):
            k = int(tokens[pos])
            polys.append([int(t) for t in tokens[pos + 1:pos + 1 + k]])
            pos += 1 + k
    except (ValueError, IndexError) as exc:
        raise MeshError(f"{path}: malformed OFF data") from exc
    return verts, polys


def _parse_obj(text: str, path) -> tuple[np.ndarray, list]:
    verts = []
    polys = []
    try:
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = []
                for token in parts[1:]:
                    raw = int(token.split("/")[0])
                    idx.append(raw - 1 if raw > 0 else len(verts) + raw)
                polys.append(idx)
    except (ValueError, IndexError) as exc:
        raise MeshError(f"{path}: malformed OBJ data") from exc
    if not verts:
        raise MeshError(f"{path}: no vertices")
    return np.asarray(verts, dtype=np.float64), polys


def save_mesh(mesh: TriMesh, path) -> None:
    path = Path(path)
    verts = [f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}"
             for v in mesh.vertices]
    if path.suffix.lower() == ".obj":
        lines = [f"v {row}" for row in verts]
        lines += [f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}"
                  for t in mesh.triangles]
    else:
        lines = ["OFF", f"{mesh.n_vertices} {len(mesh)} 0"]
        lines += verts
        lines += [f"3 {t[0]} {t[1]} {t[2]}" for t in mesh.triangles]
    path.write_text("\n".join(lines) + "\n")
