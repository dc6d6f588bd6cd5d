"""Brute-force ground-truth PD estimators, independent of the sampler and
query paths.

The translational oracle enumerates separation directions (signed axes
plus a prefix-stable low-discrepancy sphere sequence) and finds the exit
distance along each by coarse marching plus bisection; it converges to
the exact translational PD from above as the direction count grows. The
generalized oracle lands random contact configurations around the query
through CCD and reports the best object-norm distance; it is an upper
bound whose quality improves with the sample count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collision import (TangentialMotionError, Tolerances,
                        ccd_first_contact, is_collision)
from .mesh import TriMesh
from .transforms import (Configuration, GENERALIZED, OBJECT_NORM, dist,
                         quat_exp, quat_log, sigma_scale)

UPPER_BOUND = "upper_bound"
TWO_SIDED = "two_sided_estimate"


@dataclass(frozen=True)
class OracleResult:
    value: float
    witness: Configuration
    direction: np.ndarray | None
    resolution: int
    bound_kind: str


def separation_directions(n: int) -> np.ndarray:
    """n unit directions: the 6 signed axes followed by a prefix-stable
    golden-angle / van-der-Corput sphere sequence, so direction sets nest
    as n grows."""
    if n < 1:
        raise ValueError("need at least one direction")
    axes = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0],
                     [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.float64)
    if n <= 6:
        return axes[:n]
    m = n - 6
    idx = np.arange(m)
    z = 1.0 - 2.0 * _van_der_corput(idx)
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, 1.0))
    phi = idx * (np.pi * (3.0 - np.sqrt(5.0)))
    rest = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    return np.concatenate([axes, rest])


def _van_der_corput(idx: np.ndarray) -> np.ndarray:
    out = np.zeros(len(idx), dtype=np.float64)
    denom = 2.0
    rest = idx.astype(np.int64) + 1
    while rest.any():
        out += (rest & 1) / denom
        rest >>= 1
        denom *= 2.0
    return out


def translational_pd_oracle(A: TriMesh, q0: Configuration, B: TriMesh,
                            ndirs: int = 1000,
                            tol: float = 1e-4) -> OracleResult:
    """Directional translational PD: minimum certified exit distance over
    the direction set.

    Marches each direction in coarse steps until free, then bisects the
    bracket to ``tol`` and keeps the free end, so every per-direction
    value is an upper bound within tol of that direction's exit.
    """
    if not is_collision(A, q0, B):
        raise ValueError("oracle asked about a collision-free "
                         "configuration")
    dirs = separation_directions(ndirs)
    span = A.bbox_diagonal + B.bbox_diagonal
    coarse = max(tol, span / 256.0)
    t0 = q0.translation
    reach = 1.5 * span + float(np.linalg.norm(
        t0 - 0.5 * (B.bounds[0] + B.bounds[1])))
    best = np.inf
    best_dir = None
    best_cfg = None
    for u in dirs:
        lo = 0.0
        s = coarse
        hi = None
        limit = min(reach, best + coarse)  # beyond best this cannot win
        while s <= limit:
            if not is_collision(A, _shift(q0, u, s), B):
                hi = s
                break
            lo = s
            s += coarse
        if hi is None:
            continue
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if is_collision(A, _shift(q0, u, mid), B):
                lo = mid
            else:
                hi = mid
        if hi < best:
            best = hi
            best_dir = u.copy()
            best_cfg = _shift(q0, u, hi)
    if best_cfg is None:
        raise RuntimeError("no separating direction found within reach; "
                           "geometry encloses the movable body")
    return OracleResult(value=float(best), witness=best_cfg,
                        direction=best_dir, resolution=ndirs,
                        bound_kind=UPPER_BOUND)


def _shift(q: Configuration, u: np.ndarray, s: float) -> Configuration:
    rot = None if q.mode == "translational" else q.rotation
    return Configuration(q.translation + s * u, rot, q.mode)


def generalized_pd_oracle(A: TriMesh, q0: Configuration, B: TriMesh,
                          nsamples: int, rng) -> OracleResult:
    """Generalized PD upper bound from CCD-landed contact configurations.

    Draws free poses at adaptive embedding radii around the query (the
    query itself is the in-collision endpoint), lands each on the contact
    space by CCD, and keeps the best object-norm distance.
    """
    if nsamples <= 0:
        raise ValueError("nsamples must be positive")
    if not is_collision(A, q0, B):
        raise ValueError("oracle asked about a collision-free "
                         "configuration")
    props = A.mass_properties()
    sigma = sigma_scale(props)
    tol = Tolerances.for_mesh(B)
    q0g = Configuration(q0.translation, q0.rotation, GENERALIZED)
    e0 = np.concatenate([q0g.translation,
                         sigma * quat_log(q0g.rotation)])
    span = A.bbox_diagonal + B.bbox_diagonal
    radius = span
    best = np.inf
    best_cfg = None
    best_dir = None
    for _ in range(nsamples):
        d = rng.normal(size=6)
        d /= np.linalg.norm(d)
        if best_dir is not None and rng.random() < 0.6:
            # exploit: jitter around the best separating direction
            d = best_dir + 0.35 * d
            d /= np.linalg.norm(d)
        r = radius * float(rng.uniform(0.8, 1.6))
        q_free = None
        for _ in range(5):
            coords = e0 + r * d
            cand = Configuration(coords[:3], quat_exp(coords[3:] / sigma),
                                 GENERALIZED)
            if not is_collision(A, cand, B):
                q_free = cand
                break
            r *= 2.0
        if q_free is None:
            continue
        try:
            res = ccd_first_contact(A, q_free, q0g, B, tol)
        except TangentialMotionError:
            continue
        val = dist(q0g, res.q_contact, OBJECT_NORM, props)
        if val < best:
            best = val
            best_cfg = res.q_contact
            e_best = np.concatenate([
                res.q_contact.translation,
                sigma * quat_log(res.q_contact.rotation)])
            step = e_best - e0
            norm = np.linalg.norm(step)
            if norm > 0:
                best_dir = step / norm
            radius = max(1.5 * val, 4.0 * tol.contact)
    if best_cfg is None:
        raise RuntimeError("no contact configuration reached from the "
                           "sampled poses")
    return OracleResult(value=float(best), witness=best_cfg,
                        direction=None, resolution=nsamples,
                        bound_kind=UPPER_BOUND)
