import numpy as np
import pytest

from contactpd import shapes
from contactpd.collision import Tolerances, is_collision
from contactpd.contactdb import ContactSample, SampleDB
from contactpd.sampling import (BuildParams, PropagationStats,
                                SeedGenerationError, SeedSaturationError,
                                build_contact_db, certify_sample,
                                contact_frame, dedup_test,
                                default_bounds, inverse_slide,
                                orientation_record, propagate,
                                random_contact_seed, slide_transition)
from contactpd.transforms import (Configuration, GENERALIZED,
                                  TRANSLATIONAL, quat_multiply,
                                  quat_rotate, random_quat)

from _oracles import flood_reachable_vertices


def vertex_anchor(mesh, v):
    """(tri, bary) feature pinned to vertex v."""
    tri = int(mesh.vertex_triangles[v][0])
    bary = np.zeros(3)
    bary[list(mesh.triangles[tri]).index(v)] = 1.0
    return tri, bary


def sample_at_vertex(A, B, v, anchor_v=0, mode=TRANSLATIONAL, rot=None):
    tri, bary = vertex_anchor(A, anchor_v)
    a_pt = A.point_from_feature(tri, bary)
    if mode == TRANSLATIONAL:
        q = Configuration(B.vertices[v] - a_pt)
    else:
        frame = contact_frame(B, v)
        rel = rot if rot is not None else np.array([1.0, 0, 0, 0])
        rotq = quat_multiply(frame, rel)
        q = Configuration(B.vertices[v] - quat_rotate(rotq, a_pt), rotq,
                          GENERALIZED)
    rel_rec = orientation_record(A, B, q, tri, v)
    return ContactSample(q=q, anchor_tri=tri, anchor_bary=bary,
                         vertex_B=v, rel_orient=rel_rec, kind="seed")


def make_db(A, B, mode=TRANSLATIONAL, r=0.05, sigma=1.0):
    metric = ("euclidean_translation" if mode == TRANSLATIONAL
              else "object_norm")
    return SampleDB(A, B, mode, metric, dedup_radius=r, rng_seed=0,
                    sigma=sigma)


# ---------------------------------------------------------------------------
# slide transitions


def test_slide_flat_grid_is_pure_inplane_translation():
    A = shapes.tetrahedron()
    B = shapes.grid(7, 7, 1.0)
    v = 3 * 7 + 3
    s = sample_at_vertex(A, B, v)
    for w in B.vertex_adjacency[v]:
        q2 = slide_transition(s, int(w), A, B)
        delta = q2.translation - s.q.translation
        assert np.allclose(delta, B.vertices[w] - B.vertices[v],
                           atol=1e-12)
        assert delta[2] == pytest.approx(0.0, abs=1e-12)
        assert np.array_equal(q2.rotation, s.q.rotation)


def test_slide_generalized_equals_translational_on_flat_grid():
    A = shapes.tetrahedron()
    B = shapes.grid(7, 7, 1.0)
    v = 3 * 7 + 3
    s_t = sample_at_vertex(A, B, v, mode=TRANSLATIONAL)
    s_g = sample_at_vertex(A, B, v, mode=GENERALIZED)
    # interior frames of a flat grid are all equal
    for w in B.vertex_adjacency[v]:
        w = int(w)
        if (np.abs(B.vertices[w][:2]) >= 2.5).any():
            continue  # boundary vertices have different normals sums
        qt = slide_transition(s_t, w, A, B)
        qg = slide_transition(s_g, w, A, B)
        assert np.allclose(qg.translation, qt.translation, atol=1e-12)
        assert np.allclose(qg.matrix, s_g.q.matrix, atol=1e-12)


def test_slide_cylinder_ring_advances_by_facet_angle():
    n = 24
    B = shapes.cylinder(radius=1.0, height=2.0, n_sides=n, n_rings=5)
    A = shapes.tetrahedron(0.4)
    facet = 2 * np.pi / n
    ring = 2
    for k in range(2, n - 3):
        v = ring * n + k
        s = sample_at_vertex(A, B, v, mode=GENERALIZED)
        q2 = slide_transition(s, ring * n + k + 1, A, B)
        rel = q2.matrix @ s.q.matrix.T
        angle = np.arccos(np.clip((np.trace(rel) - 1) / 2, -1, 1))
        axis = np.array([rel[2, 1] - rel[1, 2], rel[0, 2] - rel[2, 0],
                         rel[1, 0] - rel[0, 1]])
        axis /= np.linalg.norm(axis)
        assert angle == pytest.approx(facet, abs=1e-9)
        assert abs(axis[2]) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("mesh_name", ["torus", "grid"])
def test_slide_commutativity_1000_random(mesh_name, rng):
    B = shapes.torus() if mesh_name == "torus" else shapes.grid(9, 9, 1.0)
    A = shapes.tetrahedron(0.5)
    diag = max(A.bbox_diagonal, B.bbox_diagonal)
    failures = 0
    skipped = 0
    trials = 1000
    for _ in range(trials):
        v = int(rng.integers(0, B.n_vertices))
        anchor_v = int(rng.integers(0, A.n_vertices))
        mode = GENERALIZED if rng.random() < 0.5 else TRANSLATIONAL
        try:
            s = sample_at_vertex(A, B, v, anchor_v, mode,
                                 random_quat(rng) if mode == GENERALIZED
                                 else None)
            nb = B.vertex_adjacency[v]
            w = int(nb[rng.integers(0, len(nb))])
            q_fwd = slide_transition(s, w, A, B)
            s_fwd = ContactSample(q=q_fwd, anchor_tri=s.anchor_tri,
                                  anchor_bary=s.anchor_bary, vertex_B=w,
                                  rel_orient=s.rel_orient, kind="propagated")
            q_back = inverse_slide(s_fwd, v, A, B)
        except Exception:
            skipped += 1
            continue
        err = np.abs(q_back.to_row() - s.q.to_row()).max()
        if err > 1e-6 * diag:
            failures += 1
    assert skipped <= trials // 100
    assert failures / (trials - skipped) <= 0.001


# ---------------------------------------------------------------------------
# propagation


def test_propagate_floods_flat_grid():
    A = shapes.tetrahedron()
    B = shapes.grid(11, 11, 1.0)
    tol = Tolerances.for_mesh(B)
    v0 = 5 * 11 + 5
    seed = sample_at_vertex(A, B, v0)
    db = make_db(A, B, r=0.1)
    out = propagate(A, B, seed, "one-ring", db, tol, budget=10_000)
    reachable = flood_reachable_vertices(B, v0)
    assert len(out) == len(reachable) == 121
    assert {s.vertex_B for s in out} == reachable


def test_propagate_exhausts_immediately_when_deduped():
    A = shapes.tetrahedron()
    B = shapes.grid(7, 7, 1.0)
    tol = Tolerances.for_mesh(B)
    seed = sample_at_vertex(A, B, 3 * 7 + 3)
    db = make_db(A, B, r=50.0)  # every push lands inside the radius
    out = propagate(A, B, seed, "one-ring", db, tol, budget=10_000)
    assert len(out) == 1
    assert out[0].kind == "seed"


def test_propagate_crosses_bumps():
    """The internal case lets floods escape high-curvature regions."""
    A = shapes.tetrahedron(0.35)
    B = shapes.bumpy_sphere(1.0, amplitude=0.2, lobes=4, subdivisions=2)
    tol = Tolerances.for_mesh(B)
    seed = sample_at_vertex(A, B, 0)
    db = make_db(A, B, r=0.05 * B.median_edge_length)
    out = propagate(A, B, seed, "one-ring", db, tol, budget=100_000)
    visited = {s.vertex_B for s in out}
    assert len(visited) > 0.4 * B.n_vertices


def test_dedup_test_examples():
    A, B = shapes.cube(), shapes.cube()
    db = make_db(A, B, r=0.5)
    q = Configuration([1.0, 0, 0])
    assert dedup_test(db, q, 0.5) is False  # empty database
    db.index.add(db.embed(q))
    assert dedup_test(db, q, 0.5) is True
    far = Configuration([1.0 + 0.5 * 1.01, 0, 0])
    assert dedup_test(db, far, 0.5) is False  # strictly outside the radius


# ---------------------------------------------------------------------------
# seeding


def test_random_seed_certified_cubes(rng):
    A, B = shapes.cube(), shapes.cube()
    tol = Tolerances.for_mesh(B)
    db = make_db(A, B, r=0.02)
    seed = random_contact_seed(A, B, rng, default_bounds(A, B), db, tol)
    assert seed.kind == "seed"
    assert certify_sample(A, B, seed, tol) == []


def test_random_seed_sphere_pair_touching_distance(rng):
    S = shapes.icosphere(1.0, 2)
    tol = Tolerances.for_mesh(S)
    db = make_db(S, S, r=0.01)
    for _ in range(5):
        seed = random_contact_seed(S, S, rng, default_bounds(S, S), db, tol)
        d = np.linalg.norm(seed.q.translation)
        assert abs(d - 2.0) < 0.1  # sum of radii, within faceting
        db.index.add(db.embed(seed.q))


def test_seed_degenerate_bounds_rejected(rng):
    A, B = shapes.cube(), shapes.cube()
    tol = Tolerances.for_mesh(B)
    db = make_db(A, B)
    with pytest.raises(ValueError):
        random_contact_seed(A, B, rng, (np.zeros(3), np.zeros(3)), db, tol)


def test_seed_saturation_signal(rng):
    A, B = shapes.cube(), shapes.cube()
    tol = Tolerances.for_mesh(B)
    db = make_db(A, B, r=1000.0)  # one sample saturates everything
    db.index.add(np.zeros(6))
    with pytest.raises(SeedSaturationError):
        random_contact_seed(A, B, rng, default_bounds(A, B), db, tol,
                            max_retries=4)


# ---------------------------------------------------------------------------
# full builds


def test_build_budget_one_keeps_only_the_seed():
    A, B = shapes.cube(), shapes.cube()
    db, stats = build_contact_db(A, B, BuildParams(budget=1, rng_seed=9))
    assert len(db) == 1
    assert stats.seeds == 1
    assert db.sample(0).kind == "seed"


def test_build_invariants_cube(tmp_path):
    A, B = shapes.cube(), shapes.cube()
    params = BuildParams(budget=800, rng_seed=13, dedup_radius=0.02)
    db, stats = build_contact_db(A, B, params)
    assert len(db) == 800
    assert stats.seeds + stats.propagated == 800
    tol = Tolerances.for_mesh(B)
    bad = sum(bool(certify_sample(A, B, s, tol)) for s in db)
    assert bad == 0
    # pairwise embedding separation (exhaustive)
    from scipy.spatial import cKDTree
    emb = db.embeddings()
    tree = cKDTree(emb)
    assert len(tree.query_pairs(db.dedup_radius * (1 - 1e-12))) == 0


def test_build_amortizes_on_slab():
    A = shapes.tetrahedron()
    B = shapes.slab(11, 11, 1.0, 1.0)
    budget = 10 * B.n_vertices
    params = BuildParams(budget=budget, rng_seed=4, dedup_radius=0.03)
    db, stats = build_contact_db(A, B, params)
    assert len(db) == budget
    assert stats.propagated >= 9 * stats.seeds
    assert stats.ccd_calls <= 1.05 * stats.seeds


def test_build_deterministic_bytes(tmp_path):
    A, B = shapes.cube(), shapes.cube()
    params = BuildParams(budget=300, rng_seed=77, dedup_radius=0.02)
    paths = []
    for k in range(2):
        db, _ = build_contact_db(A, B, params)
        p = tmp_path / f"db{k}.jsonl"
        db.save(p)
        paths.append(p.read_bytes())
    assert paths[0] == paths[1]


def test_build_generalized_mode():
    A, B = shapes.cube(), shapes.cube()
    params = BuildParams(mode=GENERALIZED, budget=400, rng_seed=2,
                         dedup_radius=0.02)
    db, stats = build_contact_db(A, B, params)
    assert len(db) == 400
    assert db.metric == "object_norm"
    tol = Tolerances.for_mesh(B)
    for i in range(0, len(db), 7):
        assert certify_sample(A, B, db.sample(i), tol) == []


def test_build_worker_pool_mode():
    A, B = shapes.cube(), shapes.cube()
    params = BuildParams(budget=400, rng_seed=5, dedup_radius=0.02,
                         threads=3)
    db, stats = build_contact_db(A, B, params)
    assert len(db) == 400
    tol = Tolerances.for_mesh(B)
    bad = sum(bool(certify_sample(A, B, db.sample(i), tol))
              for i in range(len(db)))
    assert bad == 0
    from scipy.spatial import cKDTree
    tree = cKDTree(db.embeddings())
    assert len(tree.query_pairs(db.dedup_radius * (1 - 1e-12))) == 0


def test_build_impossible_contact_raises():
    A, B = shapes.cube(0.2), shapes.cube(0.2)
    bounds = (np.array([50.0, 50, 50]), np.array([60.0, 60, 60]))
    with pytest.raises(SeedGenerationError):
        build_contact_db(A, B, BuildParams(budget=10, bounds=bounds))


# ---------------------------------------------------------------------------
# persistence


def test_db_roundtrip_preserves_columns(tmp_path):
    A, B = shapes.cube(), shapes.torus()
    params = BuildParams(mode=GENERALIZED, budget=120, rng_seed=6,
                         dedup_radius=0.01)
    db, _ = build_contact_db(A, B, params)
    p = tmp_path / "db.jsonl"
    db.save(p)
    back = SampleDB.load(p, A, B)
    assert len(back) == len(db)
    assert back.mode == db.mode and back.metric == db.metric
    assert back.dedup_radius == db.dedup_radius
    assert back.sigma == db.sigma
    for i in range(len(db)):
        a, b = db.sample(i), back.sample(i)
        assert np.array_equal(a.q.to_row(), b.q.to_row())
        assert a.anchor_tri == b.anchor_tri
        assert np.allclose(a.anchor_bary, b.anchor_bary, atol=1e-15)
        assert a.vertex_B == b.vertex_B
        assert np.array_equal(a.rel_orient, b.rel_orient)
        assert a.kind == b.kind


def test_db_load_rejects_wrong_mesh(tmp_path):
    A, B = shapes.cube(), shapes.cube()
    db, _ = build_contact_db(A, B, BuildParams(budget=20, rng_seed=1))
    p = tmp_path / "db.jsonl"
    db.save(p)
    from contactpd.contactdb import DataMismatchError
    with pytest.raises(DataMismatchError):
        SampleDB.load(p, A, shapes.torus())


def test_db_load_rejects_bad_version(tmp_path):
    A, B = shapes.cube(), shapes.cube()
    db, _ = build_contact_db(A, B, BuildParams(budget=20, rng_seed=1))
    p = tmp_path / "db.jsonl"
    db.save(p)
    lines = p.read_text().splitlines()
    lines[0] = lines[0].replace('"format_version":1', '"format_version":9')
    p.write_text("\n".join(lines) + "\n")
    from contactpd.contactdb import DataMismatchError
    with pytest.raises(DataMismatchError):
        SampleDB.load(p, A, B)


def test_db_prefix_view():
    A, B = shapes.cube(), shapes.cube()
    db, _ = build_contact_db(A, B, BuildParams(budget=100, rng_seed=1,
                                               dedup_radius=0.02))
    sub = db.prefix(30)
    assert len(sub) == 30
    assert np.array_equal(sub.configurations, db.configurations[:30])
    idx, _ = sub.index.nearest(sub.embeddings()[0], 1)
    assert idx[0] == 0
