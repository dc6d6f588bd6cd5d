"""Independent brute-force oracles used to freeze or verify expectations.

Nothing here shares code with the implementation paths it checks beyond
the scalar ray-parity kernel (used as a point-in-solid primitive).
"""

import heapq

import numpy as np

from contactpd import _kernels
from contactpd.transforms import apply_to_vertices

_DIRS = np.array([
    [0.54030231, 0.84147098, 0.0],
    [0.0, 0.54030231, 0.84147098],
    [0.84147098, 0.0, 0.54030231],
    [0.36235775, -0.93203909, 0.0],
])


def point_in_mesh(mesh, pts) -> np.ndarray:
    """Ray-parity containment of points in a closed mesh."""
    out = np.zeros(len(pts), dtype=bool)
    arrays = mesh.bvh.arrays()
    surf = 1e-9 * max(mesh.bbox_diagonal, 1.0)
    for i, p in enumerate(pts):
        for d in _DIRS:
            par = _kernels.ray_parity(p[0], p[1], p[2], d[0], d[1], d[2],
                                      *arrays, mesh.triangles,
                                      mesh.vertices, surf)
            if par >= 0:
                out[i] = bool(par)
                break
    return out


def monte_carlo_volume(mesh, n, seed):
    """(volume estimate, standard error) by box rejection."""
    rng = np.random.default_rng(seed)
    lo, hi = mesh.bounds
    box = float(np.prod(hi - lo))
    pts = lo + rng.random((n, 3)) * (hi - lo)
    inside = point_in_mesh(mesh, pts)
    p = inside.mean()
    return box * p, box * np.sqrt(p * (1 - p) / n)


def sample_points_inside(mesh, n, seed):
    """Uniform points in a closed mesh's volume by rejection."""
    rng = np.random.default_rng(seed)
    lo, hi = mesh.bounds
    out = []
    while sum(len(c) for c in out) < n:
        pts = lo + rng.random((2 * n, 3)) * (hi - lo)
        keep = pts[point_in_mesh(mesh, pts)]
        if len(keep):
            out.append(keep)
    return np.concatenate(out)[:n]


def object_norm_quadrature(points, qa, qb):
    """(value, 3-sigma bound) of the volume-averaged RMS displacement
    between two poses, from precomputed interior points."""
    da = apply_to_vertices(qa, points) - apply_to_vertices(qb, points)
    sq = (da ** 2).sum(axis=1)
    mean = sq.mean()
    se_mean = sq.std(ddof=1) / np.sqrt(len(sq))
    value = np.sqrt(mean)
    se_value = se_mean / (2.0 * max(value, 1e-12))
    return float(value), float(3.0 * se_value)


def graph_band_vertices(mesh, v, lo, hi):
    """Dijkstra over the edge graph; vertices at geodesic distance in
    [lo, hi]."""
    dist = {v: 0.0}
    heap = [(0.0, v)]
    while heap:
        du, u = heapq.heappop(heap)
        if du > dist.get(u, np.inf) or du > hi:
            continue
        for w in mesh.vertex_adjacency[u]:
            dw = du + float(np.linalg.norm(mesh.vertices[w] -
                                           mesh.vertices[u]))
            if dw < dist.get(w, np.inf) and dw <= hi + 1e-12:
                dist[w] = dw
                heapq.heappush(heap, (dw, w))
    return sorted(u for u, d in dist.items() if u != v and lo <= d <= hi)


def flood_reachable_vertices(mesh, start):
    """Breadth-first vertex set over the edge graph."""
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for w in mesh.vertex_adjacency[u]:
                if int(w) not in seen:
                    seen.add(int(w))
                    nxt.append(int(w))
        frontier = nxt
    return seen


def first_contact_dense(A, q_free, q_hit, B, steps):
    """Dense-time-sampling first-collision parameter (an upper bracket of
    the true first contact within 1/steps)."""
    from contactpd.collision import is_collision
    from contactpd.transforms import interpolate
    for k in range(1, steps + 1):
        s = k / steps
        if is_collision(A, interpolate(q_free, q_hit, s), B):
            return s
    return None
