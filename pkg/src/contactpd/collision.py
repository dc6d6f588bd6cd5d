"""Collision queries between a posed mesh A and a fixed mesh B.

Discrete checks use exact-ish triangle crossing tests behind a BVH broad
phase; configurations where the surfaces merely touch count as
collision-free, so contact configurations live on the free side of the
boundary. Continuous queries use conservative advancement with bisection
fallback over straight-line configuration motions.

Set ``DEBUG_CHECKS = True`` (the test suite does) to re-verify the
contract of every continuous query result with direct discrete calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .mesh import TriMesh
from .transforms import Configuration, apply_to_vertices, interpolate

DEBUG_CHECKS = False

TOUCH_EPS = 1e-12

# deterministic "generic" ray directions for containment parity tests
_RAY_DIRS = np.array([
    [0.57496987, 0.57948467, 0.57759553],
    [0.90914751, -0.15038371, 0.38838398],
    [-0.19811017, 0.73322185, 0.65051369],
    [0.05990037, -0.41621712, 0.90729331],
    [-0.66728747, -0.48099927, 0.56855457],
    [0.35564059, 0.93097038, -0.08060111],
])


class PenetratingConfigurationError(ValueError):
    """A distance query was asked about an in-collision configuration."""


class MotionPreconditionError(ValueError):
    """A continuous query was given endpoints with the wrong DCD states."""


class TangentialMotionError(RuntimeError):
    """The motion grazes the surface so the first contact admits no
    configuration with a strictly positive gap; callers retry with a
    different motion."""


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances tied to the fixed mesh's scale.

    contact: max gap for a configuration to count as a contact sample;
    gap: max gap of a certified CCD result; time: motion-parameter width
    of the final CCD bracket.
    """

    contact: float
    gap: float
    time: float = 1e-6

    @classmethod
    def for_mesh(cls, fixed: TriMesh) -> "Tolerances":
        eps = 1e-4 * fixed.bbox_diagonal
        return cls(contact=eps, gap=eps)


@dataclass(frozen=True)
class ContactPair:
    """A near-touching feature pair between posed A and B.

    ``point_on_A`` is in A's body frame, ``point_on_B`` in world (B's)
    frame; features are (triangle index, barycentric) on their own mesh,
    normals are the feature triangles' outward normals in world frame.
    """

    point_on_A: np.ndarray
    point_on_B: np.ndarray
    tri_A: int
    bary_A: np.ndarray
    tri_B: int
    bary_B: np.ndarray
    normal_A: np.ndarray
    normal_B: np.ndarray
    gap: float


@dataclass(frozen=True)
class CcdResult:
    hit: bool
    t_contact: float
    q_contact: Configuration
    pair: ContactPair


def _barycentric(p, a, b, c):
    v0 = b - a
    v1 = c - a
    v2 = p - a
    d00 = v0 @ v0
    d01 = v0 @ v1
    d11 = v1 @ v1
    d20 = v2 @ v0
    d21 = v2 @ v1
    denom = d00 * d11 - d01 * d01
    if abs(denom) < 1e-30:
        return np.array([1.0, 0.0, 0.0])
    v = (d11 * d20 - d01 * d21) / denom
    w = (d00 * d21 - d01 * d20) / denom
    return np.array([1.0 - v - w, v, w])


# ---------------------------------------------------------------------------
# discrete queries


def _bounds_disjoint(A: TriMesh, q: Configuration, B: TriMesh,
                     margin: float) -> bool:
    return bool(_kernels.pose_boxes_disjoint(
        q.matrix, q.translation, A.bounds[0], A.bounds[1],
        B.bounds[0], B.bounds[1], margin))


def _parity(mesh: TriMesh, p) -> int:
    """Containment parity with deterministic direction retries; -1 when
    every ray grazes (point effectively on the surface)."""
    arrays = mesh.bvh.arrays()
    surf_tol = 1e-9 * max(mesh.bbox_diagonal, 1.0)
    for d in _RAY_DIRS:
        par = _kernels.ray_parity(p[0], p[1], p[2], d[0], d[1], d[2],
                                  *arrays, mesh.triangles, mesh.vertices,
                                  surf_tol)
        if par >= 0:
            return par
    return -1


_PROBE_COUNT = 8


def _surface_inside(centroids, normals, other: TriMesh) -> bool:
    """Whether part of a boundary (given by its triangle centroids and
    outward normals, in ``other``'s frame) lies strictly inside ``other``.

    This settles interpenetration when no transversal triangle crossing
    exists, which only happens for grazing-aligned or fully contained
    poses. Probes are the centroids ranked by depth inside ``other``'s
    bounding box, falling back to a point nudged inward when a centroid
    sits exactly on the surface.
    """
    delta = 1e-7 * max(other.bbox_diagonal, 1.0)
    surf_tol = 1e-9 * max(other.bbox_diagonal, 1.0)
    on_tol = max(TOUCH_EPS, 8.9e-16 * other.bbox_diagonal)
    return bool(_kernels.surface_inside_probe(
        np.ascontiguousarray(centroids), np.ascontiguousarray(normals),
        *other.bvh.arrays(), other.triangles, other.vertices,
        other.bounds[0], other.bounds[1], delta, _RAY_DIRS, surf_tol,
        on_tol, _PROBE_COUNT))


def _containment_collision(A: TriMesh, q: Configuration, B: TriMesh,
                           wverts: np.ndarray) -> bool:
    if B.closed:
        wcent = A.triangle_centroids @ q.matrix.T + q.translation
        wnorm = A.triangle_normals @ q.matrix.T
        if _surface_inside(wcent, wnorm, B):
            return True
    if A.closed:
        cent = (B.triangle_centroids - q.translation) @ q.matrix
        norm = B.triangle_normals @ q.matrix
        if _surface_inside(cent, norm, A):
            return True
    return False


def is_collision(A: TriMesh, q: Configuration, B: TriMesh) -> bool:
    """True iff A(q) and B properly interpenetrate.

    Surface crossings are detected pairwise; overlaps without a
    transversal crossing (containment, or surfaces grazing along exactly
    aligned features) are caught by parity probes of boundary points.
    Touching within 1e-12 counts as collision-free.
    """
    if _bounds_disjoint(A, q, B, TOUCH_EPS):
        return False
    wverts = apply_to_vertices(q, A.vertices)
    if _kernels.bvh_pair_collides(*A.bvh.arrays(), A.triangles, wverts,
                                  q.matrix, q.translation,
                                  A.triangle_centroids, A.triangle_radii,
                                  *B.bvh.arrays(), B.triangles, B.vertices,
                                  B.triangle_centroids, B.triangle_radii,
                                  TOUCH_EPS):
        return True
    return _containment_collision(A, q, B, wverts)


def is_collision_all_pairs(A: TriMesh, q: Configuration,
                           B: TriMesh) -> bool:
    """Brute-force variant of :func:`is_collision` (no broad phase)."""
    wverts = apply_to_vertices(q, A.vertices)
    if _kernels.all_pairs_collides(A.triangles, wverts, B.triangles,
                                   B.vertices, TOUCH_EPS):
        return True
    return _containment_collision(A, q, B, wverts)


def _make_pair(A, q, B, d, ta, tb, pa_world, pb_world) -> ContactPair:
    wta = apply_to_vertices(q, A.vertices[A.triangles[ta]])
    bary_a = _barycentric(pa_world, wta[0], wta[1], wta[2])
    vb = B.vertices[B.triangles[tb]]
    bary_b = _barycentric(pb_world, vb[0], vb[1], vb[2])
    pa_body = q.matrix.T @ (pa_world - q.translation)
    return ContactPair(
        point_on_A=pa_body,
        point_on_B=np.asarray(pb_world, dtype=np.float64),
        tri_A=int(ta), bary_A=bary_a,
        tri_B=int(tb), bary_B=bary_b,
        normal_A=q.matrix @ A.triangle_normals[ta],
        normal_B=B.triangle_normals[tb].copy(),
        gap=float(d),
    )


def min_distance(A: TriMesh, q: Configuration, B: TriMesh,
                 check: bool = True) -> tuple[float, ContactPair]:
    """Global minimum surface distance with its realizing pair.

    The configuration must be collision-free (touching is fine); pass
    ``check=False`` only when that is already established.
    """
    if check and is_collision(A, q, B):
        raise PenetratingConfigurationError(
            "min_distance asked about an in-collision configuration")
    wverts = apply_to_vertices(q, A.vertices)
    d, ta, tb, pax, pay, paz, pbx, pby, pbz = _kernels.bvh_pair_min_distance(
        *A.bvh.arrays(), A.triangles, wverts, q.matrix, q.translation,
        A.triangle_centroids, A.triangle_radii,
        *B.bvh.arrays(), B.triangles, B.vertices,
        B.triangle_centroids, B.triangle_radii, TOUCH_EPS)
    pair = _make_pair(A, q, B, d, ta, tb,
                      np.array([pax, pay, paz]), np.array([pbx, pby, pbz]))
    return float(d), pair


def contact_pairs(A: TriMesh, q: Configuration, B: TriMesh,
                  eps_contact: float,
                  check: bool = True) -> list[ContactPair]:
    """All locally distinct feature pairs with gap <= eps_contact.

    Candidate triangle pairs come from the BVH; witnesses at the vertices
    of those triangles are added explicitly so corner contacts survive,
    then pairs merge when both witness points coincide within
    2 * eps_contact (minimum-gap representative wins).
    """
    if check and is_collision(A, q, B):
        raise PenetratingConfigurationError(
            "contact_pairs asked about an in-collision configuration")
    wverts = apply_to_vertices(q, A.vertices)
    cap = 8192
    out_gap = np.empty(cap)
    out_tris = np.empty((cap, 2), dtype=np.int64)
    out_pa = np.empty((cap, 3))
    out_pb = np.empty((cap, 3))
    n = _kernels.collect_contact_pairs(
        *A.bvh.arrays(), A.triangles, wverts, A.vertices,
        q.matrix, q.translation,
        A.triangle_centroids, A.triangle_radii,
        A.vertex_tri_offsets, A.vertex_tri_data,
        *B.bvh.arrays(), B.triangles, B.vertices,
        B.triangle_centroids, B.triangle_radii,
        B.vertex_tri_offsets, B.vertex_tri_data,
        eps_contact, TOUCH_EPS, out_gap, out_tris, out_pa, out_pb)
    return [_make_pair(A, q, B, out_gap[k], out_tris[k, 0], out_tris[k, 1],
                       out_pa[k], out_pb[k]) for k in range(n)]


# ---------------------------------------------------------------------------
# continuous queries


def motion_bound(A: TriMesh, q0: Configuration, q1: Configuration) -> float:
    """Upper bound on the speed of any point of A along the interpolated
    motion, per unit of motion parameter."""
    dt = float(np.linalg.norm(q1.translation - q0.translation))
    dot = abs(float(q0.rotation @ q1.rotation))
    angle = 2.0 * np.arccos(min(dot, 1.0))
    return dt + angle * A.max_vertex_radius


def bisect_first_contact(A: TriMesh, q_free: Configuration,
                         q_hit: Configuration, B: TriMesh,
                         tol: Tolerances,
                         param_tol: float | None = None
                         ) -> tuple[float, Configuration]:
    """First contact along interpolate(q_free, q_hit) by pure bisection.

    Returns (t, q) with q collision-free and the bracket to the
    in-collision side narrower than ``param_tol`` (default tol.time).
    Used where the start configuration is already touching, which stalls
    conservative advancement.
    """
    width = tol.time if param_tol is None else param_tol
    lo, hi = 0.0, 1.0
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if is_collision(A, interpolate(q_free, q_hit, mid), B):
            hi = mid
        else:
            lo = mid
    return lo, interpolate(q_free, q_hit, lo)


def ccd_first_contact(A: TriMesh, q_free: Configuration,
                      q_hit: Configuration, B: TriMesh,
                      tol: Tolerances) -> CcdResult:
    """First time of contact along the straight-line motion.

    Conservative advancement (step = gap / motion bound) with bisection
    fallback; the returned configuration is collision-free with gap in
    (0, tol.gap] and the motion parameter is within tol.time of an
    in-collision configuration. Tangentially closing motions creep under
    pure advancement, so the step also grows geometrically while probes
    stay free; an accelerated probe that jumps a thin collision sliver
    brackets a later contact of the same motion, which still satisfies
    every certificate.
    """
    if is_collision(A, q_free, B):
        raise MotionPreconditionError("q_free is in collision")
    if not is_collision(A, q_hit, B):
        raise MotionPreconditionError("q_hit is not in collision")
    bound = max(motion_bound(A, q_free, q_hit), 1e-300)
    lo, hi = 0.0, 1.0
    q_lo = q_free
    gap, pair = min_distance(A, q_lo, B, check=False)
    best_pos = (0.0, gap, pair)  # latest free point with positive gap
    step = 0.25 * tol.time
    for _ in range(512):
        if gap <= tol.gap and hi - lo <= tol.time:
            break
        if gap > tol.gap:
            step = max(0.9 * gap / bound, 1.6 * step, 0.25 * tol.time)
            cand = lo + step
            if cand >= hi:
                cand = 0.5 * (lo + hi)
        else:
            cand = 0.5 * (lo + hi)
        if not lo < cand < hi:
            break  # bracket exhausted at float resolution
        q_cand = interpolate(q_free, q_hit, cand)
        if is_collision(A, q_cand, B):
            hi = cand
            step = 0.25 * tol.time
        else:
            lo = cand
            q_lo = q_cand
            gap, pair = min_distance(A, q_lo, B, check=False)
            if gap > 0.0:
                best_pos = (lo, gap, pair)
    if gap > tol.gap:
        raise TangentialMotionError(
            "no configuration with gap below tolerance brackets the "
            "contact; the motion grazes the surface")
    if gap == 0.0:
        # exact touch: retreat toward the last strictly positive gap
        t0, gap, pair = best_pos
        t1 = lo
        for _ in range(60):
            mid = 0.5 * (t0 + t1)
            q_mid = interpolate(q_free, q_hit, mid)
            g, pr = min_distance(A, q_mid, B, check=False)
            if g > 0.0:
                t0, gap, pair = mid, g, pr
                if g <= tol.gap:
                    break
            else:
                t1 = mid
        lo, q_lo = t0, interpolate(q_free, q_hit, t0)
        if not 0.0 < gap <= tol.gap:
            raise TangentialMotionError(
                "the approach touches the surface over an interval; no "
                "strictly separated contact configuration exists on it")
    # make sure stepping tol.time past the contact is in collision
    for _ in range(32):
        probe = min(lo + tol.time, 1.0)
        if is_collision(A, interpolate(q_free, q_hit, probe), B):
            break
        mid = 0.5 * (lo + hi)
        if is_collision(A, interpolate(q_free, q_hit, mid), B):
            hi = mid
        else:
            lo = mid
            q_lo = interpolate(q_free, q_hit, mid)
            gap, pair = min_distance(A, q_lo, B, check=False)
    result = CcdResult(hit=True, t_contact=lo, q_contact=q_lo, pair=pair)
    if DEBUG_CHECKS:
        assert not is_collision(A, result.q_contact, B)
        g, _ = min_distance(A, result.q_contact, B, check=False)
        assert 0.0 < g <= tol.gap, f"ccd gap {g} outside (0, {tol.gap}]"
        probe = interpolate(q_free, q_hit, min(lo + tol.time, 1.0))
        assert is_collision(A, probe, B)
    return result


def critical_configuration(A: TriMesh, q: Configuration,
                           q_slide: Configuration, B: TriMesh,
                           anchor: tuple[int, np.ndarray],
                           tol: Tolerances
                           ) -> tuple[Configuration | None,
                                      list[ContactPair]]:
    """First configuration along the slide where a non-anchor feature of A
    reaches B, with the new contact set.

    ``anchor`` is the (triangle, barycentric) feature of A held on B's
    surface during the slide; pairs whose A-side witness lies within
    2 * tol.contact of it are excluded. Returns (None, []) when no new
    contact materializes (degenerate grazing), so callers can discard the
    branch.
    """
    if not is_collision(A, q_slide, B):
        raise MotionPreconditionError("slide endpoint is not in collision")
    if is_collision(A, q, B):
        raise MotionPreconditionError("slide start is in collision")
    # a bracket mapping to 1/4 of the contact tolerance in world motion
    # already pins the new feature well inside eps_contact
    bound = max(motion_bound(A, q, q_slide), 1e-300)
    width = max(tol.time, 0.25 * tol.contact / bound)
    _, q_c = bisect_first_contact(A, q, q_slide, B, tol, width)
    pairs = contact_pairs(A, q_c, B, tol.contact, check=False)
    anchor_pt = A.point_from_feature(anchor[0], anchor[1])
    thresh = 2.0 * tol.contact
    new = [p for p in pairs
           if np.linalg.norm(p.point_on_A - anchor_pt) > thresh]
    if not new:
        return None, []
    return q_c, new
