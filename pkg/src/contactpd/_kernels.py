"""Numba kernels for triangle geometry and BVH traversal.

Everything in this module works on flat float64/int64 arrays so the hot
paths stay in nopython mode; the object-level wrappers live in ``mesh``
and ``collision``.

Conventions:
  * verts (n, 3) float64, tris (m, 3) int64
  * a BVH is the array bundle (node_min, node_max, left, right, start,
    count) plus a primitive permutation ``order``; leaves have left == -1
  * mesh A may carry a rigid pose; its vertices are passed pre-transformed
    to world coordinates while its node boxes are transformed on the fly
    (conservative rotated-AABB bound), so one body-frame BVH serves all
    poses
  * the crossing predicate is strict: triangles that merely touch or are
    coplanar within ``eps`` count as non-intersecting, matching the
    convention that contact configurations are collision-free
"""

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# hashing


@njit(cache=True, nogil=True)
def fnv1a64(data):
    """FNV-1a 64-bit hash over a uint8 array."""
    h = np.uint64(0xCBF29CE484222325)
    prime = np.uint64(0x100000001B3)
    for i in range(data.shape[0]):
        h = np.uint64(h ^ np.uint64(data[i]))
        h = np.uint64(h * prime)
    return h


# ---------------------------------------------------------------------------
# scalar triangle primitives


@njit(cache=True, nogil=True, inline="always")
def _clamp01(x):
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


@njit(cache=True, nogil=True)
def _tri_line_interval(ax, ay, az, bx, by, bz, cx, cy, cz,
                       da, db, dc, px, py, pz):
    """Projection interval of a triangle's plane-crossing set onto axis p.

    d* are signed (already zero-clamped) distances of the vertices to the
    other triangle's plane. Returns (lo, hi, npts); points are the edge
    crossings plus any on-plane vertices.
    """
    lo = 1e300
    hi = -1e300
    npts = 0
    # on-plane vertices
    if da == 0.0:
        t = ax * px + ay * py + az * pz
        if t < lo:
            lo = t
        if t > hi:
            hi = t
        npts += 1
    if db == 0.0:
        t = bx * px + by * py + bz * pz
        if t < lo:
            lo = t
        if t > hi:
            hi = t
        npts += 1
    if dc == 0.0:
        t = cx * px + cy * py + cz * pz
        if t < lo:
            lo = t
        if t > hi:
            hi = t
        npts += 1
    # sign-change edges
    if da * db < 0.0:
        s = da / (da - db)
        x = ax + s * (bx - ax)
        y = ay + s * (by - ay)
        z = az + s * (bz - az)
        t = x * px + y * py + z * pz
        if t < lo:
            lo = t
        if t > hi:
            hi = t
        npts += 1
    if db * dc < 0.0:
        s = db / (db - dc)
        x = bx + s * (cx - bx)
        y = by + s * (cy - by)
        z = bz + s * (cz - bz)
        t = x * px + y * py + z * pz
        if t < lo:
            lo = t
        if t > hi:
            hi = t
        npts += 1
    if dc * da < 0.0:
        s = dc / (dc - da)
        x = cx + s * (ax - cx)
        y = cy + s * (ay - cy)
        z = cz + s * (az - cz)
        t = x * px + y * py + z * pz
        if t < lo:
            lo = t
        if t > hi:
            hi = t
        npts += 1
    return lo, hi, npts


@njit(cache=True, nogil=True)
def tri_tri_cross(p1x, p1y, p1z, q1x, q1y, q1z, r1x, r1y, r1z,
                  p2x, p2y, p2z, q2x, q2y, q2z, r2x, r2y, r2z, eps):
    """True iff the triangles cross transversally with positive overlap.

    Both triangles must straddle each other's plane strictly (beyond eps)
    and their crossing segments on the common plane line must overlap by
    more than eps. Grazing, vertex/edge touching and coplanar overlap all
    report False.
    """
    # plane of T2
    e1x = q2x - p2x
    e1y = q2y - p2y
    e1z = q2z - p2z
    e2x = r2x - p2x
    e2y = r2y - p2y
    e2z = r2z - p2z
    n2x = e1y * e2z - e1z * e2y
    n2y = e1z * e2x - e1x * e2z
    n2z = e1x * e2y - e1y * e2x
    n2n = (n2x * n2x + n2y * n2y + n2z * n2z) ** 0.5
    if n2n == 0.0:
        return False
    tol2 = eps * n2n
    du0 = n2x * (p1x - p2x) + n2y * (p1y - p2y) + n2z * (p1z - p2z)
    du1 = n2x * (q1x - p2x) + n2y * (q1y - p2y) + n2z * (q1z - p2z)
    du2 = n2x * (r1x - p2x) + n2y * (r1y - p2y) + n2z * (r1z - p2z)
    if -tol2 < du0 < tol2:
        du0 = 0.0
    if -tol2 < du1 < tol2:
        du1 = 0.0
    if -tol2 < du2 < tol2:
        du2 = 0.0
    has_pos = du0 > 0.0 or du1 > 0.0 or du2 > 0.0
    has_neg = du0 < 0.0 or du1 < 0.0 or du2 < 0.0
    if not (has_pos and has_neg):
        return False

    # plane of T1
    f1x = q1x - p1x
    f1y = q1y - p1y
    f1z = q1z - p1z
    f2x = r1x - p1x
    f2y = r1y - p1y
    f2z = r1z - p1z
    n1x = f1y * f2z - f1z * f2y
    n1y = f1z * f2x - f1x * f2z
    n1z = f1x * f2y - f1y * f2x
    n1n = (n1x * n1x + n1y * n1y + n1z * n1z) ** 0.5
    if n1n == 0.0:
        return False
    tol1 = eps * n1n
    dv0 = n1x * (p2x - p1x) + n1y * (p2y - p1y) + n1z * (p2z - p1z)
    dv1 = n1x * (q2x - p1x) + n1y * (q2y - p1y) + n1z * (q2z - p1z)
    dv2 = n1x * (r2x - p1x) + n1y * (r2y - p1y) + n1z * (r2z - p1z)
    if -tol1 < dv0 < tol1:
        dv0 = 0.0
    if -tol1 < dv1 < tol1:
        dv1 = 0.0
    if -tol1 < dv2 < tol1:
        dv2 = 0.0
    has_pos = dv0 > 0.0 or dv1 > 0.0 or dv2 > 0.0
    has_neg = dv0 < 0.0 or dv1 < 0.0 or dv2 < 0.0
    if not (has_pos and has_neg):
        return False

    # direction of the plane intersection line, projected to dominant axis
    dx = n1y * n2z - n1z * n2y
    dy = n1z * n2x - n1x * n2z
    dz = n1x * n2y - n1y * n2x
    adx = abs(dx)
    ady = abs(dy)
    adz = abs(dz)
    dn = (adx * adx + ady * ady + adz * adz) ** 0.5
    if dn == 0.0:
        return False
    px = dx / dn
    py = dy / dn
    pz = dz / dn

    lo1, hi1, n1c = _tri_line_interval(p1x, p1y, p1z, q1x, q1y, q1z,
                                       r1x, r1y, r1z, du0, du1, du2,
                                       px, py, pz)
    lo2, hi2, n2c = _tri_line_interval(p2x, p2y, p2z, q2x, q2y, q2z,
                                       r2x, r2y, r2z, dv0, dv1, dv2,
                                       px, py, pz)
    if n1c == 0 or n2c == 0:
        return False
    lo = lo1 if lo1 > lo2 else lo2
    hi = hi1 if hi1 < hi2 else hi2
    return hi - lo > eps


@njit(cache=True, nogil=True)
def point_tri_closest(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Closest point on a triangle to p (Ericson). Returns (d2, x, y, z)."""
    abx = bx - ax
    aby = by - ay
    abz = bz - az
    acx = cx - ax
    acy = cy - ay
    acz = cz - az
    apx = px - ax
    apy = py - ay
    apz = pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        dx = px - ax
        dy = py - ay
        dz = pz - az
        return dx * dx + dy * dy + dz * dz, ax, ay, az
    bpx = px - bx
    bpy = py - by
    bpz = pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        dx = px - bx
        dy = py - by
        dz = pz - bz
        return dx * dx + dy * dy + dz * dz, bx, by, bz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        denom = d1 - d3
        v = d1 / denom if denom != 0.0 else 0.0
        qx = ax + v * abx
        qy = ay + v * aby
        qz = az + v * abz
        dx = px - qx
        dy = py - qy
        dz = pz - qz
        return dx * dx + dy * dy + dz * dz, qx, qy, qz
    cpx = px - cx
    cpy = py - cy
    cpz = pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        dx = px - cx
        dy = py - cy
        dz = pz - cz
        return dx * dx + dy * dy + dz * dz, cx, cy, cz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        denom = d2 - d6
        w = d2 / denom if denom != 0.0 else 0.0
        qx = ax + w * acx
        qy = ay + w * acy
        qz = az + w * acz
        dx = px - qx
        dy = py - qy
        dz = pz - qz
        return dx * dx + dy * dy + dz * dz, qx, qy, qz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        denom = (d4 - d3) + (d5 - d6)
        w = (d4 - d3) / denom if denom != 0.0 else 0.0
        qx = bx + w * (cx - bx)
        qy = by + w * (cy - by)
        qz = bz + w * (cz - bz)
        dx = px - qx
        dy = py - qy
        dz = pz - qz
        return dx * dx + dy * dy + dz * dz, qx, qy, qz
    denom = va + vb + vc
    v = vb / denom
    w = vc / denom
    qx = ax + abx * v + acx * w
    qy = ay + aby * v + acy * w
    qz = az + abz * v + acz * w
    dx = px - qx
    dy = py - qy
    dz = pz - qz
    return dx * dx + dy * dy + dz * dz, qx, qy, qz


@njit(cache=True, nogil=True)
def seg_seg_closest(p1x, p1y, p1z, q1x, q1y, q1z,
                    p2x, p2y, p2z, q2x, q2y, q2z):
    """Closest points between two segments. Returns (d2, ax..az, bx..bz)."""
    d1x = q1x - p1x
    d1y = q1y - p1y
    d1z = q1z - p1z
    d2x = q2x - p2x
    d2y = q2y - p2y
    d2z = q2z - p2z
    rx = p1x - p2x
    ry = p1y - p2y
    rz = p1z - p2z
    a = d1x * d1x + d1y * d1y + d1z * d1z
    e = d2x * d2x + d2y * d2y + d2z * d2z
    f = d2x * rx + d2y * ry + d2z * rz
    if a <= 1e-30 and e <= 1e-30:
        s = 0.0
        t = 0.0
    elif a <= 1e-30:
        s = 0.0
        t = _clamp01(f / e)
    else:
        c = d1x * rx + d1y * ry + d1z * rz
        if e <= 1e-30:
            t = 0.0
            s = _clamp01(-c / a)
        else:
            b = d1x * d2x + d1y * d2y + d1z * d2z
            denom = a * e - b * b
            if denom > 1e-30:
                s = _clamp01((b * f - c * e) / denom)
            else:
                s = 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = _clamp01(-c / a)
            elif t > 1.0:
                t = 1.0
                s = _clamp01((b - c) / a)
    ax = p1x + s * d1x
    ay = p1y + s * d1y
    az = p1z + s * d1z
    bx = p2x + t * d2x
    by = p2y + t * d2y
    bz = p2z + t * d2z
    dx = ax - bx
    dy = ay - by
    dz = az - bz
    return dx * dx + dy * dy + dz * dz, ax, ay, az, bx, by, bz


@njit(cache=True, nogil=True)
def tri_tri_distance(ax, ay, az, bx, by, bz, cx, cy, cz,
                     dx, dy, dz, ex, ey, ez, fx, fy, fz, eps):
    """Minimum distance between two triangles with witness points.

    Returns (d2, pax, pay, paz, pbx, pby, pbz); d2 == 0 with the segment
    midpoint as witness when the triangles properly cross.
    """
    if tri_tri_cross(ax, ay, az, bx, by, bz, cx, cy, cz,
                     dx, dy, dz, ex, ey, ez, fx, fy, fz, eps):
        mx = (ax + bx + cx + dx + ex + fx) / 6.0
        my = (ay + by + cy + dy + ey + fy) / 6.0
        mz = (az + bz + cz + dz + ez + fz) / 6.0
        return 0.0, mx, my, mz, mx, my, mz
    best = 1e300
    pax = pay = paz = pbx = pby = pbz = 0.0
    # vertices of T1 against T2
    for i in range(3):
        if i == 0:
            px, py, pz = ax, ay, az
        elif i == 1:
            px, py, pz = bx, by, bz
        else:
            px, py, pz = cx, cy, cz
        d2, qx, qy, qz = point_tri_closest(px, py, pz, dx, dy, dz,
                                           ex, ey, ez, fx, fy, fz)
        if d2 < best:
            best = d2
            pax, pay, paz = px, py, pz
            pbx, pby, pbz = qx, qy, qz
    # vertices of T2 against T1
    for i in range(3):
        if i == 0:
            px, py, pz = dx, dy, dz
        elif i == 1:
            px, py, pz = ex, ey, ez
        else:
            px, py, pz = fx, fy, fz
        d2, qx, qy, qz = point_tri_closest(px, py, pz, ax, ay, az,
                                           bx, by, bz, cx, cy, cz)
        if d2 < best:
            best = d2
            pax, pay, paz = qx, qy, qz
            pbx, pby, pbz = px, py, pz
    # edge pairs
    for i in range(3):
        if i == 0:
            s1x, s1y, s1z, s2x, s2y, s2z = ax, ay, az, bx, by, bz
        elif i == 1:
            s1x, s1y, s1z, s2x, s2y, s2z = bx, by, bz, cx, cy, cz
        else:
            s1x, s1y, s1z, s2x, s2y, s2z = cx, cy, cz, ax, ay, az
        for j in range(3):
            if j == 0:
                t1x, t1y, t1z, t2x, t2y, t2z = dx, dy, dz, ex, ey, ez
            elif j == 1:
                t1x, t1y, t1z, t2x, t2y, t2z = ex, ey, ez, fx, fy, fz
            else:
                t1x, t1y, t1z, t2x, t2y, t2z = fx, fy, fz, dx, dy, dz
            d2, uax, uay, uaz, ubx, uby, ubz = seg_seg_closest(
                s1x, s1y, s1z, s2x, s2y, s2z, t1x, t1y, t1z, t2x, t2y, t2z)
            if d2 < best:
                best = d2
                pax, pay, paz = uax, uay, uaz
                pbx, pby, pbz = ubx, uby, ubz
    return best, pax, pay, paz, pbx, pby, pbz


# ---------------------------------------------------------------------------
# box helpers


@njit(cache=True, nogil=True)
def pose_boxes_disjoint(R, t, alo, ahi, blo, bhi, margin):
    """True iff the world box of A's body box under pose (R, t) misses
    B's box inflated by margin."""
    acx = 0.5 * (alo[0] + ahi[0])
    acy = 0.5 * (alo[1] + ahi[1])
    acz = 0.5 * (alo[2] + ahi[2])
    ahx = 0.5 * (ahi[0] - alo[0])
    ahy = 0.5 * (ahi[1] - alo[1])
    ahz = 0.5 * (ahi[2] - alo[2])
    wcx = R[0, 0] * acx + R[0, 1] * acy + R[0, 2] * acz + t[0]
    wcy = R[1, 0] * acx + R[1, 1] * acy + R[1, 2] * acz + t[1]
    wcz = R[2, 0] * acx + R[2, 1] * acy + R[2, 2] * acz + t[2]
    whx = abs(R[0, 0]) * ahx + abs(R[0, 1]) * ahy + abs(R[0, 2]) * ahz
    why = abs(R[1, 0]) * ahx + abs(R[1, 1]) * ahy + abs(R[1, 2]) * ahz
    whz = abs(R[2, 0]) * ahx + abs(R[2, 1]) * ahy + abs(R[2, 2]) * ahz
    if wcx + whx + margin < blo[0] or wcx - whx - margin > bhi[0]:
        return True
    if wcy + why + margin < blo[1] or wcy - why - margin > bhi[1]:
        return True
    if wcz + whz + margin < blo[2] or wcz - whz - margin > bhi[2]:
        return True
    return False


@njit(cache=True, nogil=True, inline="always")
def _node_world_box(nmin, nmax, i, R, t):
    """Conservative world AABB of a body-frame node box under pose (R, t)."""
    cx = 0.5 * (nmin[i, 0] + nmax[i, 0])
    cy = 0.5 * (nmin[i, 1] + nmax[i, 1])
    cz = 0.5 * (nmin[i, 2] + nmax[i, 2])
    hx = 0.5 * (nmax[i, 0] - nmin[i, 0])
    hy = 0.5 * (nmax[i, 1] - nmin[i, 1])
    hz = 0.5 * (nmax[i, 2] - nmin[i, 2])
    wcx = R[0, 0] * cx + R[0, 1] * cy + R[0, 2] * cz + t[0]
    wcy = R[1, 0] * cx + R[1, 1] * cy + R[1, 2] * cz + t[1]
    wcz = R[2, 0] * cx + R[2, 1] * cy + R[2, 2] * cz + t[2]
    whx = abs(R[0, 0]) * hx + abs(R[0, 1]) * hy + abs(R[0, 2]) * hz
    why = abs(R[1, 0]) * hx + abs(R[1, 1]) * hy + abs(R[1, 2]) * hz
    whz = abs(R[2, 0]) * hx + abs(R[2, 1]) * hy + abs(R[2, 2]) * hz
    return wcx, wcy, wcz, whx, why, whz


@njit(cache=True, nogil=True, inline="always")
def _box_box_gap2(acx, acy, acz, ahx, ahy, ahz,
                  bcx, bcy, bcz, bhx, bhy, bhz):
    """Squared distance between two center/half-extent boxes (0 if overlap)."""
    gx = abs(acx - bcx) - (ahx + bhx)
    gy = abs(acy - bcy) - (ahy + bhy)
    gz = abs(acz - bcz) - (ahz + bhz)
    d2 = 0.0
    if gx > 0.0:
        d2 += gx * gx
    if gy > 0.0:
        d2 += gy * gy
    if gz > 0.0:
        d2 += gz * gz
    return d2


# ---------------------------------------------------------------------------
# BVH pair traversals


@njit(cache=True, nogil=True)
def bvh_pair_collides(nminA, nmaxA, leftA, rightA, startA, countA, orderA,
                      trisA, wvertsA, R, t, centA, radA,
                      nminB, nmaxB, leftB, rightB, startB, countB, orderB,
                      trisB, vertsB, centB, radB, eps):
    """True iff any triangle of posed A properly crosses a triangle of B."""
    cap = 4 * (leftA.shape[0] + leftB.shape[0]) + 128
    stack = np.empty((cap, 2), np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    top = 1
    while top > 0:
        top -= 1
        ia = stack[top, 0]
        ib = stack[top, 1]
        acx, acy, acz, ahx, ahy, ahz = _node_world_box(nminA, nmaxA, ia, R, t)
        bcx = 0.5 * (nminB[ib, 0] + nmaxB[ib, 0])
        bcy = 0.5 * (nminB[ib, 1] + nmaxB[ib, 1])
        bcz = 0.5 * (nminB[ib, 2] + nmaxB[ib, 2])
        bhx = 0.5 * (nmaxB[ib, 0] - nminB[ib, 0])
        bhy = 0.5 * (nmaxB[ib, 1] - nminB[ib, 1])
        bhz = 0.5 * (nmaxB[ib, 2] - nminB[ib, 2])
        if _box_box_gap2(acx, acy, acz, ahx + eps, ahy + eps, ahz + eps,
                         bcx, bcy, bcz, bhx, bhy, bhz) > 0.0:
            continue
        leafA = leftA[ia] < 0
        leafB = leftB[ib] < 0
        if leafA and leafB:
            for ka in range(startA[ia], startA[ia] + countA[ia]):
                ta = orderA[ka]
                ccx = (R[0, 0] * centA[ta, 0] + R[0, 1] * centA[ta, 1] +
                       R[0, 2] * centA[ta, 2] + t[0])
                ccy = (R[1, 0] * centA[ta, 0] + R[1, 1] * centA[ta, 1] +
                       R[1, 2] * centA[ta, 2] + t[1])
                ccz = (R[2, 0] * centA[ta, 0] + R[2, 1] * centA[ta, 1] +
                       R[2, 2] * centA[ta, 2] + t[2])
                i0 = trisA[ta, 0]
                i1 = trisA[ta, 1]
                i2 = trisA[ta, 2]
                for kb in range(startB[ib], startB[ib] + countB[ib]):
                    tb = orderB[kb]
                    dx = ccx - centB[tb, 0]
                    dy = ccy - centB[tb, 1]
                    dz = ccz - centB[tb, 2]
                    reach = radA[ta] + radB[tb] + eps
                    if dx * dx + dy * dy + dz * dz > reach * reach:
                        continue
                    j0 = trisB[tb, 0]
                    j1 = trisB[tb, 1]
                    j2 = trisB[tb, 2]
                    if tri_tri_cross(
                            wvertsA[i0, 0], wvertsA[i0, 1], wvertsA[i0, 2],
                            wvertsA[i1, 0], wvertsA[i1, 1], wvertsA[i1, 2],
                            wvertsA[i2, 0], wvertsA[i2, 1], wvertsA[i2, 2],
                            vertsB[j0, 0], vertsB[j0, 1], vertsB[j0, 2],
                            vertsB[j1, 0], vertsB[j1, 1], vertsB[j1, 2],
                            vertsB[j2, 0], vertsB[j2, 1], vertsB[j2, 2], eps):
                        return True
        elif leafA or (not leafB and
                       (nmaxB[ib, 0] - nminB[ib, 0]) +
                       (nmaxB[ib, 1] - nminB[ib, 1]) +
                       (nmaxB[ib, 2] - nminB[ib, 2]) >
                       (nmaxA[ia, 0] - nminA[ia, 0]) +
                       (nmaxA[ia, 1] - nminA[ia, 1]) +
                       (nmaxA[ia, 2] - nminA[ia, 2])):
            stack[top, 0] = ia
            stack[top, 1] = leftB[ib]
            top += 1
            stack[top, 0] = ia
            stack[top, 1] = rightB[ib]
            top += 1
        else:
            stack[top, 0] = leftA[ia]
            stack[top, 1] = ib
            top += 1
            stack[top, 0] = rightA[ia]
            stack[top, 1] = ib
            top += 1
    return False


@njit(cache=True, nogil=True)
def all_pairs_collides(trisA, wvertsA, trisB, vertsB, eps):
    """Brute-force variant of bvh_pair_collides over every triangle pair."""
    for ta in range(trisA.shape[0]):
        i0 = trisA[ta, 0]
        i1 = trisA[ta, 1]
        i2 = trisA[ta, 2]
        for tb in range(trisB.shape[0]):
            j0 = trisB[tb, 0]
            j1 = trisB[tb, 1]
            j2 = trisB[tb, 2]
            if tri_tri_cross(
                    wvertsA[i0, 0], wvertsA[i0, 1], wvertsA[i0, 2],
                    wvertsA[i1, 0], wvertsA[i1, 1], wvertsA[i1, 2],
                    wvertsA[i2, 0], wvertsA[i2, 1], wvertsA[i2, 2],
                    vertsB[j0, 0], vertsB[j0, 1], vertsB[j0, 2],
                    vertsB[j1, 0], vertsB[j1, 1], vertsB[j1, 2],
                    vertsB[j2, 0], vertsB[j2, 1], vertsB[j2, 2], eps):
                return True
    return False


@njit(cache=True, nogil=True, inline="always")
def _pair_gap2(nminA, nmaxA, ia, R, t, nminB, nmaxB, ib):
    acx, acy, acz, ahx, ahy, ahz = _node_world_box(nminA, nmaxA, ia, R, t)
    bcx = 0.5 * (nminB[ib, 0] + nmaxB[ib, 0])
    bcy = 0.5 * (nminB[ib, 1] + nmaxB[ib, 1])
    bcz = 0.5 * (nminB[ib, 2] + nmaxB[ib, 2])
    bhx = 0.5 * (nmaxB[ib, 0] - nminB[ib, 0])
    bhy = 0.5 * (nmaxB[ib, 1] - nminB[ib, 1])
    bhz = 0.5 * (nmaxB[ib, 2] - nminB[ib, 2])
    return _box_box_gap2(acx, acy, acz, ahx, ahy, ahz,
                         bcx, bcy, bcz, bhx, bhy, bhz)


@njit(cache=True, nogil=True)
def bvh_pair_min_distance(nminA, nmaxA, leftA, rightA, startA, countA, orderA,
                          trisA, wvertsA, R, t, centA, radA,
                          nminB, nmaxB, leftB, rightB, startB, countB, orderB,
                          trisB, vertsB, centB, radB, eps):
    """Global minimum distance between posed A and B (branch and bound,
    children visited nearest-first).

    Returns (dist, triA, triB, pax, pay, paz, pbx, pby, pbz) with world
    witness points.
    """
    cap = 4 * (leftA.shape[0] + leftB.shape[0]) + 128
    stack = np.empty((cap, 2), np.int64)
    gaps = np.empty(cap, np.float64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    gaps[0] = 0.0
    top = 1
    best = 1e300
    best2 = 1e300
    bta = -1
    btb = -1
    bax = bay = baz = bbx = bby = bbz = 0.0
    while top > 0:
        top -= 1
        if gaps[top] >= best2:
            continue
        ia = stack[top, 0]
        ib = stack[top, 1]
        leafA = leftA[ia] < 0
        leafB = leftB[ib] < 0
        if leafA and leafB:
            for ka in range(startA[ia], startA[ia] + countA[ia]):
                ta = orderA[ka]
                ccx = (R[0, 0] * centA[ta, 0] + R[0, 1] * centA[ta, 1] +
                       R[0, 2] * centA[ta, 2] + t[0])
                ccy = (R[1, 0] * centA[ta, 0] + R[1, 1] * centA[ta, 1] +
                       R[1, 2] * centA[ta, 2] + t[1])
                ccz = (R[2, 0] * centA[ta, 0] + R[2, 1] * centA[ta, 1] +
                       R[2, 2] * centA[ta, 2] + t[2])
                i0 = trisA[ta, 0]
                i1 = trisA[ta, 1]
                i2 = trisA[ta, 2]
                for kb in range(startB[ib], startB[ib] + countB[ib]):
                    tb = orderB[kb]
                    dx = ccx - centB[tb, 0]
                    dy = ccy - centB[tb, 1]
                    dz = ccz - centB[tb, 2]
                    reach = radA[ta] + radB[tb] + best
                    if dx * dx + dy * dy + dz * dz >= reach * reach:
                        continue
                    j0 = trisB[tb, 0]
                    j1 = trisB[tb, 1]
                    j2 = trisB[tb, 2]
                    d2, pax, pay, paz, pbx, pby, pbz = tri_tri_distance(
                        wvertsA[i0, 0], wvertsA[i0, 1], wvertsA[i0, 2],
                        wvertsA[i1, 0], wvertsA[i1, 1], wvertsA[i1, 2],
                        wvertsA[i2, 0], wvertsA[i2, 1], wvertsA[i2, 2],
                        vertsB[j0, 0], vertsB[j0, 1], vertsB[j0, 2],
                        vertsB[j1, 0], vertsB[j1, 1], vertsB[j1, 2],
                        vertsB[j2, 0], vertsB[j2, 1], vertsB[j2, 2], eps)
                    if d2 < best2:
                        best2 = d2
                        best = d2 ** 0.5
                        bta = ta
                        btb = tb
                        bax, bay, baz = pax, pay, paz
                        bbx, bby, bbz = pbx, pby, pbz
        else:
            if leafA or (not leafB and
                         (nmaxB[ib, 0] - nminB[ib, 0]) +
                         (nmaxB[ib, 1] - nminB[ib, 1]) +
                         (nmaxB[ib, 2] - nminB[ib, 2]) >
                         (nmaxA[ia, 0] - nminA[ia, 0]) +
                         (nmaxA[ia, 1] - nminA[ia, 1]) +
                         (nmaxA[ia, 2] - nminA[ia, 2])):
                c0a, c0b = ia, leftB[ib]
                c1a, c1b = ia, rightB[ib]
            else:
                c0a, c0b = leftA[ia], ib
                c1a, c1b = rightA[ia], ib
            g0 = _pair_gap2(nminA, nmaxA, c0a, R, t, nminB, nmaxB, c0b)
            g1 = _pair_gap2(nminA, nmaxA, c1a, R, t, nminB, nmaxB, c1b)
            if g0 < g1:  # push farther first so the nearer pops first
                c0a, c1a = c1a, c0a
                c0b, c1b = c1b, c0b
                g0, g1 = g1, g0
            if g0 < best2:
                stack[top, 0] = c0a
                stack[top, 1] = c0b
                gaps[top] = g0
                top += 1
            if g1 < best2:
                stack[top, 0] = c1a
                stack[top, 1] = c1b
                gaps[top] = g1
                top += 1
    return best, bta, btb, bax, bay, baz, bbx, bby, bbz


@njit(cache=True, nogil=True)
def bvh_pairs_within(nminA, nmaxA, leftA, rightA, startA, countA, orderA,
                     trisA, wvertsA, R, t,
                     nminB, nmaxB, leftB, rightB, startB, countB, orderB,
                     trisB, vertsB, radius, eps,
                     out_tris, out_points):
    """Collect triangle pairs whose distance is <= radius.

    out_tris is (cap, 2) int64, out_points is (cap, 7) float64 rows of
    (dist, pa, pb) world witnesses. Returns the pair count (may equal cap,
    in which case the caller must retry with larger buffers).
    """
    cap = 4 * (leftA.shape[0] + leftB.shape[0]) + 128
    stack = np.empty((cap, 2), np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    top = 1
    n = 0
    r2 = radius * radius
    while top > 0:
        top -= 1
        ia = stack[top, 0]
        ib = stack[top, 1]
        acx, acy, acz, ahx, ahy, ahz = _node_world_box(nminA, nmaxA, ia, R, t)
        bcx = 0.5 * (nminB[ib, 0] + nmaxB[ib, 0])
        bcy = 0.5 * (nminB[ib, 1] + nmaxB[ib, 1])
        bcz = 0.5 * (nminB[ib, 2] + nmaxB[ib, 2])
        bhx = 0.5 * (nmaxB[ib, 0] - nminB[ib, 0])
        bhy = 0.5 * (nmaxB[ib, 1] - nminB[ib, 1])
        bhz = 0.5 * (nmaxB[ib, 2] - nminB[ib, 2])
        if _box_box_gap2(acx, acy, acz, ahx, ahy, ahz,
                         bcx, bcy, bcz, bhx, bhy, bhz) > r2:
            continue
        leafA = leftA[ia] < 0
        leafB = leftB[ib] < 0
        if leafA and leafB:
            for ka in range(startA[ia], startA[ia] + countA[ia]):
                ta = orderA[ka]
                i0 = trisA[ta, 0]
                i1 = trisA[ta, 1]
                i2 = trisA[ta, 2]
                for kb in range(startB[ib], startB[ib] + countB[ib]):
                    tb = orderB[kb]
                    j0 = trisB[tb, 0]
                    j1 = trisB[tb, 1]
                    j2 = trisB[tb, 2]
                    d2, pax, pay, paz, pbx, pby, pbz = tri_tri_distance(
                        wvertsA[i0, 0], wvertsA[i0, 1], wvertsA[i0, 2],
                        wvertsA[i1, 0], wvertsA[i1, 1], wvertsA[i1, 2],
                        wvertsA[i2, 0], wvertsA[i2, 1], wvertsA[i2, 2],
                        vertsB[j0, 0], vertsB[j0, 1], vertsB[j0, 2],
                        vertsB[j1, 0], vertsB[j1, 1], vertsB[j1, 2],
                        vertsB[j2, 0], vertsB[j2, 1], vertsB[j2, 2], eps)
                    if d2 <= r2:
                        if n >= out_tris.shape[0]:
                            return n
                        out_tris[n, 0] = ta
                        out_tris[n, 1] = tb
                        out_points[n, 0] = d2 ** 0.5
                        out_points[n, 1] = pax
                        out_points[n, 2] = pay
                        out_points[n, 3] = paz
                        out_points[n, 4] = pbx
                        out_points[n, 5] = pby
                        out_points[n, 6] = pbz
                        n += 1
        elif leafA or (not leafB and
                       (nmaxB[ib, 0] - nminB[ib, 0]) +
                       (nmaxB[ib, 1] - nminB[ib, 1]) +
                       (nmaxB[ib, 2] - nminB[ib, 2]) >
                       (nmaxA[ia, 0] - nminA[ia, 0]) +
                       (nmaxA[ia, 1] - nminA[ia, 1]) +
                       (nmaxA[ia, 2] - nminA[ia, 2])):
            stack[top, 0] = ia
            stack[top, 1] = leftB[ib]
            top += 1
            stack[top, 0] = ia
            stack[top, 1] = rightB[ib]
            top += 1
        else:
            stack[top, 0] = leftA[ia]
            stack[top, 1] = ib
            top += 1
            stack[top, 0] = rightA[ia]
            stack[top, 1] = ib
            top += 1
    return n


@njit(cache=True, nogil=True)
def collect_contact_pairs(nminA, nmaxA, leftA, rightA, startA, countA,
                          orderA, trisA, wvertsA, vertsA_body, R, t,
                          centA, radA, voffA, vdatA,
                          nminB, nmaxB, leftB, rightB, startB, countB,
                          orderB, trisB, vertsB, centB, radB, voffB, vdatB,
                          radius, eps,
                          out_gap, out_tris, out_pa, out_pb):
    """All near-contact feature pairs within ``radius``, deduplicated.

    Collects triangle pairs from the BVH (sphere quick-reject before the
    exact distance), adds explicit witnesses at the vertices of candidate
    triangles (so corner contacts survive), sorts by gap and merges pairs
    whose witness points coincide within 2 * radius on both sides.
    Returns the kept count; rows land compacted in the out arrays.
    """
    cap = out_gap.shape[0]
    scap = 4 * (leftA.shape[0] + leftB.shape[0]) + 128
    stack = np.empty((scap, 2), np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    top = 1
    n = 0
    r2 = radius * radius
    while top > 0:
        top -= 1
        ia = stack[top, 0]
        ib = stack[top, 1]
        if _pair_gap2(nminA, nmaxA, ia, R, t, nminB, nmaxB, ib) > r2:
            continue
        leafA = leftA[ia] < 0
        leafB = leftB[ib] < 0
        if leafA and leafB:
            for ka in range(startA[ia], startA[ia] + countA[ia]):
                ta = orderA[ka]
                ccx = (R[0, 0] * centA[ta, 0] + R[0, 1] * centA[ta, 1] +
                       R[0, 2] * centA[ta, 2] + t[0])
                ccy = (R[1, 0] * centA[ta, 0] + R[1, 1] * centA[ta, 1] +
                       R[1, 2] * centA[ta, 2] + t[1])
                ccz = (R[2, 0] * centA[ta, 0] + R[2, 1] * centA[ta, 1] +
                       R[2, 2] * centA[ta, 2] + t[2])
                i0 = trisA[ta, 0]
                i1 = trisA[ta, 1]
                i2 = trisA[ta, 2]
                for kb in range(startB[ib], startB[ib] + countB[ib]):
                    tb = orderB[kb]
                    dx = ccx - centB[tb, 0]
                    dy = ccy - centB[tb, 1]
                    dz = ccz - centB[tb, 2]
                    reach = radA[ta] + radB[tb] + radius
                    if dx * dx + dy * dy + dz * dz > reach * reach:
                        continue
                    j0 = trisB[tb, 0]
                    j1 = trisB[tb, 1]
                    j2 = trisB[tb, 2]
                    d2, pax, pay, paz, pbx, pby, pbz = tri_tri_distance(
                        wvertsA[i0, 0], wvertsA[i0, 1], wvertsA[i0, 2],
                        wvertsA[i1, 0], wvertsA[i1, 1], wvertsA[i1, 2],
                        wvertsA[i2, 0], wvertsA[i2, 1], wvertsA[i2, 2],
                        vertsB[j0, 0], vertsB[j0, 1], vertsB[j0, 2],
                        vertsB[j1, 0], vertsB[j1, 1], vertsB[j1, 2],
                        vertsB[j2, 0], vertsB[j2, 1], vertsB[j2, 2], eps)
                    if d2 <= r2 and n < cap:
                        out_gap[n] = d2 ** 0.5
                        out_tris[n, 0] = ta
                        out_tris[n, 1] = tb
                        out_pa[n, 0] = pax
                        out_pa[n, 1] = pay
                        out_pa[n, 2] = paz
                        out_pb[n, 0] = pbx
                        out_pb[n, 1] = pby
                        out_pb[n, 2] = pbz
                        n += 1
        elif leafA or (not leafB and
                       (nmaxB[ib, 0] - nminB[ib, 0]) +
                       (nmaxB[ib, 1] - nminB[ib, 1]) +
                       (nmaxB[ib, 2] - nminB[ib, 2]) >
                       (nmaxA[ia, 0] - nminA[ia, 0]) +
                       (nmaxA[ia, 1] - nminA[ia, 1]) +
                       (nmaxA[ia, 2] - nminA[ia, 2])):
            stack[top, 0] = ia
            stack[top, 1] = leftB[ib]
            top += 1
            stack[top, 0] = ia
            stack[top, 1] = rightB[ib]
            top += 1
        else:
            stack[top, 0] = leftA[ia]
            stack[top, 1] = ib
            top += 1
            stack[top, 0] = rightA[ia]
            stack[top, 1] = ib
            top += 1
    n_tri = n
    # explicit vertex witnesses of the candidate triangles
    seenA = np.zeros(wvertsA.shape[0], np.uint8)
    seenB = np.zeros(vertsB.shape[0], np.uint8)
    for k in range(n_tri):
        for c in range(3):
            seenA[trisA[out_tris[k, 0], c]] = 1
            seenB[trisB[out_tris[k, 1], c]] = 1
    for va in range(seenA.shape[0]):
        if not seenA[va] or n >= cap:
            continue
        px = wvertsA[va, 0]
        py = wvertsA[va, 1]
        pz = wvertsA[va, 2]
        d, tb, qx, qy, qz = point_mesh_distance(
            px, py, pz, nminB, nmaxB, leftB, rightB, startB, countB,
            orderB, trisB, vertsB)
        if d <= radius:
            out_gap[n] = d
            out_tris[n, 0] = vdatA[voffA[va]]
            out_tris[n, 1] = tb
            out_pa[n, 0] = px
            out_pa[n, 1] = py
            out_pa[n, 2] = pz
            out_pb[n, 0] = qx
            out_pb[n, 1] = qy
            out_pb[n, 2] = qz
            n += 1
    for vb in range(seenB.shape[0]):
        if not seenB[vb] or n >= cap:
            continue
        wx = vertsB[vb, 0] - t[0]
        wy = vertsB[vb, 1] - t[1]
        wz = vertsB[vb, 2] - t[2]
        px = R[0, 0] * wx + R[1, 0] * wy + R[2, 0] * wz
        py = R[0, 1] * wx + R[1, 1] * wy + R[2, 1] * wz
        pz = R[0, 2] * wx + R[1, 2] * wy + R[2, 2] * wz
        d, ta, qx, qy, qz = point_mesh_distance(
            px, py, pz, nminA, nmaxA, leftA, rightA, startA, countA,
            orderA, trisA, vertsA_body)
        if d <= radius:
            out_gap[n] = d
            out_tris[n, 0] = ta
            out_tris[n, 1] = vdatB[voffB[vb]]
            wax = R[0, 0] * qx + R[0, 1] * qy + R[0, 2] * qz + t[0]
            way = R[1, 0] * qx + R[1, 1] * qy + R[1, 2] * qz + t[1]
            waz = R[2, 0] * qx + R[2, 1] * qy + R[2, 2] * qz + t[2]
            out_pa[n, 0] = wax
            out_pa[n, 1] = way
            out_pa[n, 2] = waz
            out_pb[n, 0] = vertsB[vb, 0]
            out_pb[n, 1] = vertsB[vb, 1]
            out_pb[n, 2] = vertsB[vb, 2]
            n += 1
    if n == 0:
        return 0
    # stable sort by gap, then greedy point-coincidence dedup
    order = np.argsort(out_gap[:n], kind="mergesort")
    tol2 = 4.0 * r2
    kept = np.empty(n, np.int64)
    nk = 0
    for oi in range(n):
        k = order[oi]
        dup = False
        for kj in range(nk):
            j = kept[kj]
            dax = out_pa[k, 0] - out_pa[j, 0]
            day = out_pa[k, 1] - out_pa[j, 1]
            daz = out_pa[k, 2] - out_pa[j, 2]
            if dax * dax + day * day + daz * daz > tol2:
                continue
            dbx = out_pb[k, 0] - out_pb[j, 0]
            dby = out_pb[k, 1] - out_pb[j, 1]
            dbz = out_pb[k, 2] - out_pb[j, 2]
            if dbx * dbx + dby * dby + dbz * dbz <= tol2:
                dup = True
                break
        if not dup:
            kept[nk] = k
            nk += 1
    # compact kept rows to the front, in kept order
    gap_t = out_gap[:n].copy()
    tris_t = out_tris[:n].copy()
    pa_t = out_pa[:n].copy()
    pb_t = out_pb[:n].copy()
    for kj in range(nk):
        k = kept[kj]
        out_gap[kj] = gap_t[k]
        out_tris[kj, 0] = tris_t[k, 0]
        out_tris[kj, 1] = tris_t[k, 1]
        out_pa[kj, 0] = pa_t[k, 0]
        out_pa[kj, 1] = pa_t[k, 1]
        out_pa[kj, 2] = pa_t[k, 2]
        out_pb[kj, 0] = pb_t[k, 0]
        out_pb[kj, 1] = pb_t[k, 1]
        out_pb[kj, 2] = pb_t[k, 2]
    return nk


# ---------------------------------------------------------------------------
# single-point queries


@njit(cache=True, nogil=True)
def point_mesh_distance(px, py, pz, nmin, nmax, left, right, start, count,
                        order, tris, verts):
    """Closest point on a mesh to p. Returns (dist, tri, qx, qy, qz)."""
    cap = 2 * left.shape[0] + 64
    stack = np.empty(cap, np.int64)
    stack[0] = 0
    top = 1
    best = 1e300
    btri = -1
    bqx = bqy = bqz = 0.0
    while top > 0:
        top -= 1
        i = stack[top]
        gx = 0.0
        if px < nmin[i, 0]:
            gx = nmin[i, 0] - px
        elif px > nmax[i, 0]:
            gx = px - nmax[i, 0]
        gy = 0.0
        if py < nmin[i, 1]:
            gy = nmin[i, 1] - py
        elif py > nmax[i, 1]:
            gy = py - nmax[i, 1]
        gz = 0.0
        if pz < nmin[i, 2]:
            gz = nmin[i, 2] - pz
        elif pz > nmax[i, 2]:
            gz = pz - nmax[i, 2]
        if gx * gx + gy * gy + gz * gz >= best * best:
            continue
        if left[i] < 0:
            for k in range(start[i], start[i] + count[i]):
                tt = order[k]
                j0 = tris[tt, 0]
                j1 = tris[tt, 1]
                j2 = tris[tt, 2]
                d2, qx, qy, qz = point_tri_closest(
                    px, py, pz,
                    verts[j0, 0], verts[j0, 1], verts[j0, 2],
                    verts[j1, 0], verts[j1, 1], verts[j1, 2],
                    verts[j2, 0], verts[j2, 1], verts[j2, 2])
                d = d2 ** 0.5
                if d < best:
                    best = d
                    btri = tt
                    bqx, bqy, bqz = qx, qy, qz
        else:
            stack[top] = left[i]
            top += 1
            stack[top] = right[i]
            top += 1
    return best, btri, bqx, bqy, bqz


@njit(cache=True, nogil=True)
def surface_inside_probe(cent, norms, nmin, nmax, left, right, start,
                         count, order, tris, verts, blo, bhi, delta,
                         dirs, surf_tol, on_tol, probe_count):
    """Whether any probed boundary point lies strictly inside the mesh.

    ``cent``/``norms`` are triangle centroids and outward normals of the
    other body, expressed in this mesh's frame. Probes the ``probe_count``
    centroids deepest inside the bounding box; points within ``on_tol``
    of the surface count as touching and are re-probed nudged inward by
    delta, which keeps grazing contacts collision-free. Used to settle
    interpenetration when no transversal crossing exists.
    """
    m = cent.shape[0]
    chosen = np.full(probe_count, -1, np.int64)
    cmargin = np.full(probe_count, -1e300)
    for k in range(m):
        mg = 1e300
        for ax in range(3):
            lo = cent[k, ax] - blo[ax]
            hi = bhi[ax] - cent[k, ax]
            if lo < mg:
                mg = lo
            if hi < mg:
                mg = hi
        # keep the probe_count best margins, earliest index wins ties
        j = probe_count - 1
        if mg > cmargin[j]:
            while j > 0 and mg > cmargin[j - 1]:
                cmargin[j] = cmargin[j - 1]
                chosen[j] = chosen[j - 1]
                j -= 1
            cmargin[j] = mg
            chosen[j] = k
    for ci in range(probe_count):
        k = chosen[ci]
        if k < 0 or cmargin[ci] < -delta:
            break
        for attempt in range(2):
            if attempt == 0:
                px = cent[k, 0]
                py = cent[k, 1]
                pz = cent[k, 2]
                d_surf, _, _, _, _ = point_mesh_distance(
                    px, py, pz, nmin, nmax, left, right, start, count,
                    order, tris, verts)
                if d_surf <= on_tol:
                    continue  # touching: let the offset probe decide
            else:
                px = cent[k, 0] - delta * norms[k, 0]
                py = cent[k, 1] - delta * norms[k, 1]
                pz = cent[k, 2] - delta * norms[k, 2]
            par = -1
            for di in range(dirs.shape[0]):
                par = ray_parity(px, py, pz,
                                 dirs[di, 0], dirs[di, 1], dirs[di, 2],
                                 nmin, nmax, left, right, start, count,
                                 order, tris, verts, surf_tol)
                if par >= 0:
                    break
            if par == 1:
                return True
            if par == 0:
                break  # clean outside; offset probe unnecessary
        # ambiguous through both attempts: try the next candidate
    return False


@njit(cache=True, nogil=True)
def ray_parity(px, py, pz, dx, dy, dz, nmin, nmax, left, right, start, count,
               order, tris, verts, surf_tol):
    """Crossing parity of a ray against a mesh.

    Returns 1 (odd, inside), 0 (even, outside) or -1 when a hit is too
    close to a triangle boundary or to the origin to trust; callers retry
    with another direction.
    """
    cap = 2 * left.shape[0] + 64
    stack = np.empty(cap, np.int64)
    stack[0] = 0
    top = 1
    crossings = 0
    while top > 0:
        top -= 1
        i = stack[top]
        # slab test
        tmin = -1e300
        tmax = 1e300
        ok = True
        for ax in range(3):
            if ax == 0:
                o = px
                d = dx
            elif ax == 1:
                o = py
                d = dy
            else:
                o = pz
                d = dz
            lo = nmin[i, ax]
            hi = nmax[i, ax]
            if abs(d) < 1e-300:
                if o < lo or o > hi:
                    ok = False
                    break
            else:
                inv = 1.0 / d
                t0 = (lo - o) * inv
                t1 = (hi - o) * inv
                if t0 > t1:
                    t0, t1 = t1, t0
                if t0 > tmin:
                    tmin = t0
                if t1 < tmax:
                    tmax = t1
                if tmin > tmax:
                    ok = False
                    break
        if not ok or tmax < 0.0:
            continue
        if left[i] < 0:
            for k in range(start[i], start[i] + count[i]):
                tt = order[k]
                j0 = tris[tt, 0]
                j1 = tris[tt, 1]
                j2 = tris[tt, 2]
                ax0 = verts[j0, 0]
                ay0 = verts[j0, 1]
                az0 = verts[j0, 2]
                e1x = verts[j1, 0] - ax0
                e1y = verts[j1, 1] - ay0
                e1z = verts[j1, 2] - az0
                e2x = verts[j2, 0] - ax0
                e2y = verts[j2, 1] - ay0
                e2z = verts[j2, 2] - az0
                hx = dy * e2z - dz * e2y
                hy = dz * e2x - dx * e2z
                hz = dx * e2y - dy * e2x
                det = e1x * hx + e1y * hy + e1z * hz
                sx = px - ax0
                sy = py - ay0
                sz = pz - az0
                nx = e1y * e2z - e1z * e2y
                ny = e1z * e2x - e1x * e2z
                nz = e1x * e2y - e1y * e2x
                nn = (nx * nx + ny * ny + nz * nz) ** 0.5
                if abs(det) < 1e-9 * nn:
                    # near-parallel ray: safe to skip only when the
                    # origin is clearly off this triangle's plane
                    dplane = abs(nx * sx + ny * sy + nz * sz)
                    if dplane <= 8.0 * surf_tol * nn:
                        return -1
                    continue
                inv = 1.0 / det
                u = (sx * hx + sy * hy + sz * hz) * inv
                qx = sy * e1z - sz * e1y
                qy = sz * e1x - sx * e1z
                qz = sx * e1y - sy * e1x
                v = (dx * qx + dy * qy + dz * qz) * inv
                w = 1.0 - u - v
                tt2 = (e2x * qx + e2y * qy + e2z * qz) * inv
                if u < -1e-10 or v < -1e-10 or w < -1e-10:
                    continue
                if tt2 <= -surf_tol:
                    continue
                if tt2 < surf_tol:
                    return -1  # origin on or next to the surface
                if u < 1e-9 or v < 1e-9 or w < 1e-9:
                    return -1  # hit too close to a triangle boundary
                crossings += 1
        else:
            stack[top] = left[i]
            top += 1
            stack[top] = right[i]
            top += 1
    return crossings & 1
