"""Contact-space precomputation: random seeds via CCD plus breadth-first
propagation of sliding transitions.

The propagation keeps a queue of contact tuples (configuration, held
feature of A, contact vertex on B, relative orientation). Popped tuples
enter the database; each neighbor vertex of the contact vertex yields a
slid configuration that either stays in contact (boundary case, pushed
directly) or collides (internal case, resolved through the critical
configuration where a new feature of A reaches B). Every push is dedup
tested against the embedding index at radius r, which is what keeps the
sample set overlap-free.

Slid configurations place the held point of A exactly on the target
vertex, so a boundary-case push needs a single discrete collision check;
expensive CCD happens only when seeding.
"""

from __future__ import annotations

import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .collision import (ContactPair, TangentialMotionError, Tolerances,
                        ccd_first_contact, critical_configuration,
                        is_collision, min_distance)
from .contactdb import ContactSample, SampleDB
from .mesh import (TriMesh, UndefinedNormalError, feature_pseudo_normal,
                   vertex_neighbors_at_step, vertex_normal)
from .transforms import (Configuration, GENERALIZED, TRANSLATIONAL,
                         apply, default_metric, matrix_to_quat,
                         quat_conjugate, quat_multiply, quat_rotate,
                         quat_to_matrix, random_quat, sigma_scale)


def certify_sample(A: TriMesh, B: TriMesh, s: ContactSample,
                   tol: Tolerances) -> list[str]:
    """Re-run the contact certificate of one sample; returns the list of
    violations (empty when certified).

    Checks: collision-free; global gap at most eps_contact; pushing A by
    2 eps_contact along the inward contact normal collides (for at least
    one contact pair, so flush contacts with ambiguous witnesses pass);
    the held feature of A sits on B within eps_contact (on its contact
    vertex for ordinary samples, anywhere on the surface for tuples born
    at critical configurations).
    """
    from .collision import contact_pairs, is_collision, min_distance
    problems: list[str] = []
    if is_collision(A, s.q, B):
        return ["in collision"]
    gap, _ = min_distance(A, s.q, B, check=False)
    if gap > tol.contact:
        problems.append(
            f"gap {gap:.3g} above eps_contact {tol.contact:.3g}")
        return problems
    pairs = contact_pairs(A, s.q, B, tol.contact, check=False)
    pushed_in = False
    for pair in pairs:
        normal = feature_pseudo_normal(B, pair.tri_B, pair.bary_B)
        push = Configuration(
            s.q.translation - 2.0 * tol.contact * normal,
            None if s.q.mode == TRANSLATIONAL else s.q.rotation, s.q.mode)
        if is_collision(A, push, B):
            pushed_in = True
            break
    if not pushed_in:
        problems.append("no inward push along a contact normal collides")
    anchor_world = apply(s.q, A.point_from_feature(s.anchor_tri,
                                                   s.anchor_bary))
    d_vertex = float(np.linalg.norm(anchor_world -
                                    B.vertices[s.vertex_B]))
    if d_vertex > tol.contact:
        from . import _kernels
        d_surf = _kernels.point_mesh_distance(
            anchor_world[0], anchor_world[1], anchor_world[2],
            *B.bvh.arrays(), B.triangles, B.vertices)[0]
        if d_surf > tol.contact:
            problems.append(f"anchor is {d_surf:.3g} off B's surface "
                            f"(vertex gap {d_vertex:.3g})")
    return problems


class SeedSaturationError(RuntimeError):
    """Seed retries exhausted: the contact space is saturated at the
    dedup radius. A normal terminal signal for build loops."""


class SeedGenerationError(RuntimeError):
    """The sampling bounds yielded no usable free/in-collision pair."""


@dataclass
class BuildParams:
    """Knobs of a database build.

    ``step`` is "one-ring" or "fixed:<d>"; ``dedup_radius`` defaults to
    5% of B's median edge length; ``bounds`` is a translation sampling
    box (lo, hi) defaulting to 1.5x the combined bounding diagonals
    around B.
    """

    mode: str = TRANSLATIONAL
    metric: str | None = None
    budget: int = 1000
    max_seeds: int | None = None
    step: str = "one-ring"
    dedup_radius: float | None = None
    rng_seed: int = 0
    bounds: tuple | None = None
    threads: int = 1

    def resolved_metric(self) -> str:
        return self.metric or default_metric(self.mode)


@dataclass
class PropagationStats:
    seeds: int = 0
    propagated: int = 0
    per_seed: list = field(default_factory=list)
    ccd_calls: int = 0
    dcd_calls: int = 0
    critical_calls: int = 0
    degenerate_motions: int = 0
    ccd_seconds: float = 0.0
    dcd_seconds: float = 0.0
    build_seconds: float = 0.0
    saturated: bool = False

    @property
    def t_ccd_over_t_dcd(self) -> float:
        if self.ccd_calls == 0 or self.dcd_calls == 0 or \
                self.dcd_seconds == 0.0:
            return float("nan")
        return ((self.ccd_seconds / self.ccd_calls) /
                (self.dcd_seconds / self.dcd_calls))

    def as_dict(self) -> dict:
        return {
            "seeds": self.seeds,
            "propagated": self.propagated,
            "per_seed": list(self.per_seed),
            "ccd_calls": self.ccd_calls,
            "dcd_calls": self.dcd_calls,
            "critical_calls": self.critical_calls,
            "degenerate_motions": self.degenerate_motions,
            "ccd_seconds": self.ccd_seconds,
            "dcd_seconds": self.dcd_seconds,
            "t_ccd_over_t_dcd": self.t_ccd_over_t_dcd,
            "build_seconds": self.build_seconds,
            "saturated": self.saturated,
        }


# ---------------------------------------------------------------------------
# contact frames and orientation records


def contact_frame(B: TriMesh, v: int) -> np.ndarray:
    """Deterministic orthonormal frame quaternion at a vertex of B.

    Third column is the angle-weighted vertex normal; the tangent comes
    from the lowest-index neighbor whose edge is not parallel to the
    normal. Frames are cached on the mesh.
    """
    cache = getattr(B, "_frame_cache", None)
    if cache is None:
        cache = {}
        B._frame_cache = cache
    hit = cache.get(v)
    if hit is not None:
        return hit
    quat = _contact_frame_uncached(B, v)
    cache[v] = quat
    return quat


def _contact_frame_uncached(B: TriMesh, v: int) -> np.ndarray:
    n = vertex_normal(B, v)
    for u in B.vertex_adjacency[v]:
        e = B.vertices[u] - B.vertices[v]
        t = e - (e @ n) * n
        norm = np.linalg.norm(t)
        if norm > 1e-10 * max(np.linalg.norm(e), 1e-300):
            t = t / norm
            break
    else:
        raise UndefinedNormalError(
            f"no usable tangent at vertex {v}")
    b = np.cross(n, t)
    return matrix_to_quat(np.column_stack([t, b, n]))


def orientation_record(A: TriMesh, B: TriMesh, q: Configuration,
                       anchor_tri: int, v: int) -> np.ndarray:
    """Relative orientation entry of a contact tuple.

    Translational mode records the angle between B's vertex normal and
    the world normal of A's anchor triangle; generalized mode records the
    quaternion carrying B's contact frame at v to A's rotation.
    """
    if q.mode == TRANSLATIONAL:
        na = q.matrix @ A.triangle_normals[anchor_tri]
        nb = vertex_normal(B, v)
        theta = float(np.arccos(np.clip(na @ nb, -1.0, 1.0)))
        return np.array([theta])
    frame = contact_frame(B, v)
    return quat_multiply(quat_conjugate(frame), q.rotation)


def slide_transition(sample: ContactSample, target_vertex: int,
                     A: TriMesh, B: TriMesh) -> Configuration:
    """One sliding step: move the held point of A onto a nearby vertex
    of B, preserving the relative orientation record.

    Translational mode keeps A's rotation (the translation is fully
    determined by point coincidence); generalized mode composes the
    stored record with the contact frame at the target, which rotates A
    by exactly the surface's frame change. Pure and deterministic; the
    caller classifies the result as boundary or internal case.
    """
    a_pt = A.point_from_feature(sample.anchor_tri, sample.anchor_bary)
    target = B.vertices[target_vertex]
    if sample.q.mode == TRANSLATIONAL:
        return Configuration(target - a_pt, None, TRANSLATIONAL)
    frame = contact_frame(B, target_vertex)
    rot = quat_multiply(frame, sample.rel_orient)
    t = target - quat_rotate(rot, a_pt)
    return Configuration(t, rot, GENERALIZED)


def inverse_slide(sample_after: ContactSample, source_vertex: int,
                  A: TriMesh, B: TriMesh) -> Configuration:
    """The inverse transition: sliding back to the source vertex. Same
    map as :func:`slide_transition`, exposed for the round-trip
    property."""
    return slide_transition(sample_after, source_vertex, A, B)


# ---------------------------------------------------------------------------
# seeding


def default_bounds(A: TriMesh, B: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    span = A.bbox_diagonal + B.bbox_diagonal
    lo, hi = B.bounds
    center = 0.5 * (lo + hi)
    half = 0.75 * span
    return center - half, center + half


def validate_bounds(bounds, A: TriMesh, B: TriMesh) -> None:
    lo = np.asarray(bounds[0], dtype=np.float64)
    hi = np.asarray(bounds[1], dtype=np.float64)
    span = A.bbox_diagonal + B.bbox_diagonal
    if ((hi - lo) < span).any():
        raise ValueError(
            "sampling box must span at least the sum of the bounding-box "
            f"diagonals ({span:.4g}) on every axis")


def _random_configuration(rng, bounds, mode) -> Configuration:
    lo, hi = bounds
    t = lo + rng.random(3) * (hi - lo)
    if mode == TRANSLATIONAL:
        return Configuration(t, None, mode)
    return Configuration(t, random_quat(rng), mode)


def _nearest_triangle_vertex(B: TriMesh, tri: int, point: np.ndarray) -> int:
    idx = B.triangles[tri]
    d = np.linalg.norm(B.vertices[idx] - point, axis=1)
    return int(idx[int(np.argmin(d))])


def random_contact_seed(A: TriMesh, B: TriMesh, rng, bounds,
                        db: SampleDB, tol: Tolerances,
                        stats: PropagationStats | None = None,
                        max_retries: int = 64) -> ContactSample:
    """Draw one certified contact seed: random free and in-collision
    configurations joined by CCD.

    The seed sits exactly at the CCD contact; its contact vertex is the
    nearest vertex of the contact triangle, and the first propagation hop
    slides it onto that vertex. Retries when the seed lands within the
    dedup radius of an existing sample; exhausting the retry cap raises
    :class:`SeedSaturationError`, the normal stop signal for builds.
    """
    validate_bounds(bounds, A, B)
    stats = stats or PropagationStats()
    mode = db.mode
    for _ in range(max_retries):
        q_free = None
        for _ in range(256):
            q = _random_configuration(rng, bounds, mode)
            if not is_collision(A, q, B):
                q_free = q
                break
        q_hit = None
        for _ in range(4096):
            q = _random_configuration(rng, bounds, mode)
            if is_collision(A, q, B):
                q_hit = q
                break
        if q_free is None or q_hit is None:
            raise SeedGenerationError(
                "could not draw both a free and an in-collision "
                "configuration inside the sampling bounds")
        t0 = time.perf_counter()
        try:
            res = ccd_first_contact(A, q_free, q_hit, B, tol)
        except TangentialMotionError:
            stats.ccd_seconds += time.perf_counter() - t0
            stats.ccd_calls += 1
            stats.degenerate_motions += 1
            continue
        stats.ccd_seconds += time.perf_counter() - t0
        stats.ccd_calls += 1
        pair = res.pair
        if db.dedup_hit(res.q_contact):
            continue
        v = _nearest_triangle_vertex(B, pair.tri_B, pair.point_on_B)
        try:
            rel = orientation_record(A, B, res.q_contact, pair.tri_A, v)
        except UndefinedNormalError:
            continue
        return ContactSample(q=res.q_contact, anchor_tri=pair.tri_A,
                             anchor_bary=pair.bary_A, vertex_B=v,
                             rel_orient=rel, kind="seed")
    raise SeedSaturationError(
        f"no admissible seed in {max_retries} attempts; contact space "
        f"saturated at radius {db.dedup_radius:.4g}")


# ---------------------------------------------------------------------------
# propagation


def _neighbor_vertices(B: TriMesh, v: int, step: str) -> np.ndarray:
    if step == "one-ring":
        return B.vertex_adjacency[v]
    if step.startswith("fixed:"):
        return vertex_neighbors_at_step(B, v, float(step[6:]))
    raise ValueError(f"unknown step policy {step!r}")


def dedup_test(db: SampleDB, q: Configuration, r: float) -> bool:
    """True iff some existing sample lies within r of q in the
    embedding."""
    return db.dedup_hit(q, r)


def _timed_dcd(A, q, B, stats) -> bool:
    t0 = time.perf_counter()
    hit = is_collision(A, q, B)
    stats.dcd_seconds += time.perf_counter() - t0
    stats.dcd_calls += 1
    return hit


class _DedupScope:
    """Dedup view used during one propagation: the database index plus an
    optional private overlay for worker batches."""

    def __init__(self, db: SampleDB, private=None):
        self.db = db
        self.private = private

    def hit(self, q: Configuration) -> bool:
        emb = self.db.embed(q)
        if self.db.index.any_within(emb, self.db.dedup_radius):
            return True
        if self.private is not None:
            return self.private.any_within(emb, self.db.dedup_radius)
        return False

    def add(self, q: Configuration) -> None:
        emb = self.db.embed(q)
        if self.private is not None:
            self.private.add(emb)
        else:
            self.db.index.add(emb)


def propagate(A: TriMesh, B: TriMesh, seed: ContactSample, step: str,
              db: SampleDB, tol: Tolerances,
              budget: int | None = None,
              stats: PropagationStats | None = None,
              sink=None, scope: _DedupScope | None = None
              ) -> list[ContactSample]:
    """Breadth-first local search from a certified seed.

    Pops enter the database (or ``sink`` when given); pushes are dedup
    tested at the database radius. Returns the popped samples.
    """
    stats = stats or PropagationStats()
    out: list[ContactSample] = []
    record = sink if sink is not None else db.append
    limit = np.inf if budget is None else budget
    scope = scope or _DedupScope(db)

    scope.add(seed.q)
    queue: deque[ContactSample] = deque([seed])
    while queue:
        s = queue.popleft()
        record(s)
        out.append(s)
        total = len(db) + (len(out) if sink is not None else 0)
        if total >= limit:
            break
        anchor_pt = A.point_from_feature(s.anchor_tri, s.anchor_bary)
        anchor_world = apply(s.q, anchor_pt)
        on_vertex = (np.linalg.norm(anchor_world - B.vertices[s.vertex_B])
                     <= tol.contact)
        try:
            neighbors = _neighbor_vertices(B, s.vertex_B, step)
        except UndefinedNormalError:
            continue
        if not on_vertex:
            # tuples born at a critical configuration sit between
            # vertices; their first hop lands them on the vertex itself
            neighbors = np.concatenate([[s.vertex_B], neighbors])
        for v in neighbors:
            v = int(v)
            try:
                q2 = slide_transition(s, v, A, B)
            except UndefinedNormalError:
                continue
            if _timed_dcd(A, q2, B, stats):
                # internal case: resume at the critical configuration
                stats.critical_calls += 1
                q_c, new_pairs = critical_configuration(
                    A, s.q, q2, B, (s.anchor_tri, s.anchor_bary), tol)
                if q_c is None:
                    continue
                for pair in new_pairs:
                    tup = _tuple_from_pair(A, B, q_c, pair)
                    if tup is None:
                        continue
                    if scope.hit(tup.q):
                        continue
                    scope.add(tup.q)
                    queue.append(tup)
            else:
                # boundary case: the anchor already touches the vertex
                if scope.hit(q2):
                    continue
                scope.add(q2)
                queue.append(ContactSample(
                    q=q2, anchor_tri=s.anchor_tri,
                    anchor_bary=s.anchor_bary, vertex_B=v,
                    rel_orient=s.rel_orient, kind="propagated"))
    return out


def _tuple_from_pair(A: TriMesh, B: TriMesh, q_c: Configuration,
                     pair: ContactPair) -> ContactSample | None:
    v = _nearest_triangle_vertex(B, pair.tri_B, pair.point_on_B)
    try:
        rel = orientation_record(A, B, q_c, pair.tri_A, v)
    except UndefinedNormalError:
        return None
    return ContactSample(q=q_c, anchor_tri=pair.tri_A,
                         anchor_bary=pair.bary_A, vertex_B=v,
                         rel_orient=rel, kind="propagated")


# ---------------------------------------------------------------------------
# full build


def build_contact_db(A: TriMesh, B: TriMesh,
                     params: BuildParams) -> tuple[SampleDB,
                                                   PropagationStats]:
    """Seed-and-propagate until the budget, seed cap or saturation.

    Bit-reproducible from the rng seed with ``threads == 1``; the
    worker-pool mode keeps every invariant except byte reproducibility.
    """
    if params.budget <= 0:
        raise ValueError("budget must be positive")
    metric = params.resolved_metric()
    if params.mode == GENERALIZED or metric == "object_norm":
        sigma = sigma_scale(A.mass_properties())
    else:
        sigma = 1.0
    radius = params.dedup_radius
    if radius is None:
        radius = 0.05 * B.median_edge_length
    bounds = params.bounds or default_bounds(A, B)
    validate_bounds(bounds, A, B)
    tol = Tolerances.for_mesh(B)
    db = SampleDB(A, B, params.mode, metric, radius, params.rng_seed,
                  sigma, params.step)
    stats = PropagationStats()
    t_start = time.perf_counter()
    if params.threads > 1:
        _build_parallel(A, B, params, db, tol, bounds, stats)
    else:
        rng = np.random.default_rng(params.rng_seed)
        max_seeds = params.max_seeds or np.inf
        while len(db) < params.budget and stats.seeds < max_seeds:
            try:
                seed = random_contact_seed(A, B, rng, bounds, db, tol,
                                           stats)
            except SeedSaturationError:
                stats.saturated = True
                break
            got = propagate(A, B, seed, params.step, db, tol,
                            params.budget, stats)
            stats.seeds += 1
            stats.per_seed.append(len(got))
    if len(db) == 0:
        raise SeedGenerationError("no samples produced; the bodies cannot "
                                  "touch inside the sampling bounds")
    db.finalize()
    stats.propagated = len(db) - stats.seeds
    stats.build_seconds = time.perf_counter() - t_start
    db.meta.update(stats.as_dict())
    return db, stats


def _build_parallel(A, B, params, db, tol, bounds, stats) -> None:
    """Worker-pool build: workers seed and propagate into private
    batches against an index overlay; the caller thread merges batches,
    re-applying the dedup test on every insertion."""
    from concurrent.futures import FIRST_COMPLETED, wait
    from .contactdb import _EmbeddingIndex

    max_seeds = params.max_seeds or np.inf

    def one_iteration(seed_index: int):
        rng = np.random.default_rng((params.rng_seed, seed_index))
        local = PropagationStats()
        try:
            seed = random_contact_seed(A, B, rng, bounds, db, tol, local)
        except SeedSaturationError:
            return None, local
        batch: list[ContactSample] = []
        scope = _DedupScope(db, private=_EmbeddingIndex())
        propagate(A, B, seed, params.step, db, tol, budget=params.budget,
                  stats=local, sink=batch.append, scope=scope)
        return batch, local

    next_job = 0
    dry_spells = 0
    with ThreadPoolExecutor(max_workers=params.threads) as pool:
        pending = set()
        while True:
            while (len(pending) < params.threads and
                   stats.seeds + len(pending) < max_seeds and
                   len(db) < params.budget and
                   dry_spells < params.threads):
                pending.add(pool.submit(one_iteration, next_job))
                next_job += 1
            if not pending:
                break
            done, pending = wait(pending, return_when=FIRST_COMPLETED)
            for fut in done:
                batch, local = fut.result()
                _merge_stats(stats, local)
                if batch is None:
                    dry_spells += 1
                    continue
                inserted = 0
                for s in batch:
                    if len(db) >= params.budget:
                        break
                    if db.dedup_hit(s.q):
                        continue  # conflicts with a concurrent batch
                    db.append(s)
                    db.index.add(db.embed(s.q))
                    inserted += 1
                if inserted:
                    dry_spells = 0
                    stats.seeds += 1
                    stats.per_seed.append(inserted)
        if dry_spells >= params.threads:
            stats.saturated = True


def _merge_stats(into: PropagationStats, other: PropagationStats) -> None:
    into.ccd_calls += other.ccd_calls
    into.dcd_calls += other.dcd_calls
    into.critical_calls += other.critical_calls
    into.degenerate_motions += other.degenerate_motions
    into.ccd_seconds += other.ccd_seconds
    into.dcd_seconds += other.dcd_seconds
