"""Procedural benchmark meshes.

All closed shapes are consistently oriented with outward normals, so mass
properties integrate with the divergence theorem. Sizes are in model
units; the same generators back the ``genmesh`` CLI subcommand.
"""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def cube(size: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Axis-aligned cube, 12 triangles."""
    c = np.asarray(center, dtype=np.float64)
    h = 0.5 * size
    corners = np.array([[x, y, z] for x in (-h, h) for y in (-h, h)
                        for z in (-h, h)]) + c
    # index bits: x*4 + y*2 + z
    quads = [
        (0, 1, 3, 2),  # -x
        (4, 6, 7, 5),  # +x
        (0, 4, 5, 1),  # -y
        (2, 3, 7, 6),  # +y
        (0, 2, 6, 4),  # -z
        (1, 5, 7, 3),  # +z
    ]
    tris = []
    for a, b, cc, d in quads:
        tris.append((a, b, cc))
        tris.append((a, cc, d))
    return TriMesh(corners, np.asarray(tris))


def tetrahedron(size: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Regular-ish tetrahedron with a single lowest apex at center - z."""
    c = np.asarray(center, dtype=np.float64)
    s = size
    verts = np.array([
        [0.0, 0.0, -0.5],
        [0.45, 0.0, 0.5],
        [-0.225, 0.39, 0.5],
        [-0.225, -0.39, 0.5],
    ]) * s + c
    tris = np.array([
        [0, 2, 1],
        [0, 3, 2],
        [0, 1, 3],
        [1, 2, 3],
    ])
    return TriMesh(verts, tris)


def icosphere(radius: float = 1.0, subdivisions: int = 2,
              center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Subdivided icosahedron projected onto a sphere."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    tris = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    for _ in range(subdivisions):
        verts, tris = _subdivide(verts, tris)
        verts /= np.linalg.norm(verts, axis=1)[:, None]
    return TriMesh(radius * verts + np.asarray(center, dtype=np.float64),
                   tris)


def _subdivide(verts, tris):
    verts = list(verts)
    cache: dict[tuple[int, int], int] = {}

    def midpoint(i, j):
        key = (i, j) if i < j else (j, i)
        if key not in cache:
            cache[key] = len(verts)
            verts.append(0.5 * (verts[i] + verts[j]))
        return cache[key]

    out = []
    for a, b, c in tris:
        ab = midpoint(a, b)
        bc = midpoint(b, c)
        ca = midpoint(c, a)
        out += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return np.asarray(verts), np.asarray(out, dtype=np.int64)


def torus(major_radius: float = 1.0, minor_radius: float = 0.35,
          n_major: int = 18, n_minor: int = 17,
          center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Ring torus in the xy-plane; 2 * n_major * n_minor triangles."""
    c = np.asarray(center, dtype=np.float64)
    u = 2 * np.pi * np.arange(n_major) / n_major
    v = 2 * np.pi * np.arange(n_minor) / n_minor
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ring = major_radius + minor_radius * np.cos(vv)
    verts = np.stack([ring * np.cos(uu), ring * np.sin(uu),
                      minor_radius * np.sin(vv)], axis=-1).reshape(-1, 3)
    tris = []
    for i in range(n_major):
        i1 = (i + 1) % n_major
        for j in range(n_minor):
            j1 = (j + 1) % n_minor
            a = i * n_minor + j
            b = i1 * n_minor + j
            cc = i1 * n_minor + j1
            d = i * n_minor + j1
            tris.append((a, b, cc))
            tris.append((a, cc, d))
    return TriMesh(verts + c, np.asarray(tris))


def grid(nx: int = 11, ny: int = 11, spacing: float = 1.0,
         center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Open flat sheet in the xy-plane with +z normals."""
    heights = np.zeros((nx, ny))
    verts, tris = _heightfield_top(heights, spacing)
    return TriMesh(verts + np.asarray(center, dtype=np.float64), tris)


def slab(nx: int = 11, ny: int = 11, spacing: float = 1.0,
         depth: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Closed box with a gridded top face at z = 0."""
    heights = np.zeros((nx, ny))
    return heightfield(heights, spacing, depth, center)


def staircase(steps: int = 4, nx_per_step: int = 3, ny: int = 7,
              spacing: float = 0.5, step_height: float = 0.5,
              depth: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Closed terrain whose top ascends in sharp steps along +x."""
    nx = steps * nx_per_step + 1
    xs = np.arange(nx)
    level = np.minimum((xs - 1) // nx_per_step + 1, steps - 1)
    level = np.clip(level, 0, None)
    heights = np.repeat((level * step_height)[:, None], ny, axis=1)
    return heightfield(heights, spacing, depth, center)


def heightfield(heights: np.ndarray, spacing: float, depth: float,
                center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Closed solid under a heightfield: gridded top, flat bottom, walls."""
    heights = np.asarray(heights, dtype=np.float64)
    nx, ny = heights.shape
    top_v, top_t = _heightfield_top(heights, spacing, heights_z=True)
    nv_top = nx * ny
    zmin = float(heights.min()) - depth
    bottom_v = top_v.copy()
    bottom_v[:, 2] = zmin
    verts = np.concatenate([top_v, bottom_v])
    tris = list(map(tuple, top_t))
    tris += [(a + nv_top, c + nv_top, b + nv_top) for a, b, c in top_t]

    def vid(i, j):
        return i * ny + j

    # side walls around the boundary, outward-facing
    for i in range(nx - 1):
        tris += _wall(vid(i, 0), vid(i + 1, 0), nv_top, flip=False)
        tris += _wall(vid(i, ny - 1), vid(i + 1, ny - 1), nv_top, flip=True)
    for j in range(ny - 1):
        tris += _wall(vid(0, j), vid(0, j + 1), nv_top, flip=True)
        tris += _wall(vid(nx - 1, j), vid(nx - 1, j + 1), nv_top, flip=False)
    return TriMesh(verts + np.asarray(center, dtype=np.float64),
                   np.asarray(tris))


def _wall(a, b, nv_top, flip):
    ab, bb = a + nv_top, b + nv_top
    if flip:
        return [(a, b, bb), (a, bb, ab)]
    return [(a, bb, b), (a, ab, bb)]


def _heightfield_top(heights, spacing, heights_z=False):
    nx, ny = heights.shape
    xs = spacing * (np.arange(nx) - 0.5 * (nx - 1))
    ys = spacing * (np.arange(ny) - 0.5 * (ny - 1))
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    zz = heights if heights_z else np.zeros_like(xx)
    verts = np.stack([xx, yy, zz], axis=-1).reshape(-1, 3)
    tris = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a = i * ny + j
            b = (i + 1) * ny + j
            c = (i + 1) * ny + j + 1
            d = i * ny + j + 1
            tris.append((a, b, c))
            tris.append((a, c, d))
    return verts, np.asarray(tris, dtype=np.int64)


def bumpy_sphere(radius: float = 1.0, amplitude: float = 0.15,
                 lobes: int = 5, subdivisions: int = 3,
                 center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Sphere with sinusoidal radial bumps (sharp curvature changes)."""
    base = icosphere(1.0, subdivisions)
    v = np.asarray(base.vertices)
    theta = np.arctan2(v[:, 1], v[:, 0])
    phi = np.arccos(np.clip(v[:, 2], -1.0, 1.0))
    r = radius * (1.0 + amplitude * np.sin(lobes * theta) *
                  np.sin(lobes * phi))
    return TriMesh(v * r[:, None] + np.asarray(center, dtype=np.float64),
                   base.triangles)


def cylinder(radius: float = 1.0, height: float = 2.0, n_sides: int = 24,
             n_rings: int = 5, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Closed faceted cylinder along +z with regular side rings."""
    c = np.asarray(center, dtype=np.float64)
    angles = 2 * np.pi * np.arange(n_sides) / n_sides
    zs = np.linspace(-0.5 * height, 0.5 * height, n_rings)
    verts = []
    for z in zs:
        for a in angles:
            verts.append([radius * np.cos(a), radius * np.sin(a), z])
    bottom_apex = len(verts)
    verts.append([0.0, 0.0, -0.5 * height])
    top_apex = len(verts)
    verts.append([0.0, 0.0, 0.5 * height])
    tris = []
    for r in range(n_rings - 1):
        for k in range(n_sides):
            k1 = (k + 1) % n_sides
            a = r * n_sides + k
            b = r * n_sides + k1
            cidx = (r + 1) * n_sides + k1
            d = (r + 1) * n_sides + k
            tris.append((a, b, cidx))
            tris.append((a, cidx, d))
    for k in range(n_sides):
        k1 = (k + 1) % n_sides
        tris.append((bottom_apex, k1, k))
        tris.append((top_apex, (n_rings - 1) * n_sides + k,
                     (n_rings - 1) * n_sides + k1))
    return TriMesh(np.asarray(verts) + c, np.asarray(tris))


SHAPES = {
    "cube": cube,
    "tetra": tetrahedron,
    "icosphere": icosphere,
    "torus": torus,
    "grid": grid,
    "slab": slab,
    "staircase": staircase,
    "bumpysphere": bumpy_sphere,
    "cylinder": cylinder,
}
