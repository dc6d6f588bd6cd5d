import numpy as np
import pytest

from contactpd import shapes
from contactpd.mesh import (MeshError, TriMesh, feature_pseudo_normal,
                            load_mesh, mass_properties, vertex_neighbors_at_step,
                            vertex_normal)

from _oracles import graph_band_vertices, monte_carlo_volume


def test_load_single_triangle_off(tmp_path):
    p = tmp_path / "tri.off"
    p.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    m = load_mesh(p)
    assert len(m) == 1
    assert np.allclose(m.triangle_normals[0], [0, 0, 1])


def test_load_cube_adjacency(tmp_path):
    p = tmp_path / "cube.off"
    shapes.cube().save(p)
    m = load_mesh(p)
    assert m.n_vertices == 8
    assert len(m) == 12
    for adj in m.vertex_adjacency:
        assert 3 <= len(adj) <= 6


def test_load_collinear_triangle_fails(tmp_path):
    p = tmp_path / "bad.off"
    p.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n2 0 0\n3 0 1 2\n")
    with pytest.raises(MeshError):
        load_mesh(p)


def test_load_errors(tmp_path):
    with pytest.raises(MeshError):
        load_mesh(tmp_path / "missing.off")
    p = tmp_path / "garbage.off"
    p.write_text("OFF\nnot numbers\n")
    with pytest.raises(MeshError):
        load_mesh(p)
    p2 = tmp_path / "naninf.off"
    p2.write_text("OFF\n3 1 0\n0 0 0\nnan 0 0\n0 1 0\n3 0 1 2\n")
    with pytest.raises(MeshError):
        load_mesh(p2)


def test_obj_roundtrip_and_quads(tmp_path):
    p = tmp_path / "quad.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    m = load_mesh(p)
    assert len(m) == 2  # fan triangulated
    out = tmp_path / "round.obj"
    m.save(out)
    m2 = load_mesh(out)
    assert np.array_equal(m.triangles, m2.triangles)
    assert np.allclose(m.vertices, m2.vertices)


def test_obj_negative_indices(tmp_path):
    p = tmp_path / "neg.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
    m = load_mesh(p)
    assert np.array_equal(m.triangles, [[0, 1, 2]])


def test_mass_properties_unit_cube():
    mp = shapes.cube().mass_properties()
    assert mp.volume == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(mp.centroid, 0.0, atol=1e-12)
    assert np.allclose(mp.second_moment, np.eye(3) / 12.0, atol=1e-12)
    assert not mp.boundary_only


def test_mass_properties_translation_equivariance():
    mp = shapes.cube(center=(2.0, 0.0, 0.0)).mass_properties()
    assert mp.volume == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(mp.centroid, [2.0, 0.0, 0.0], atol=1e-12)


def test_mass_properties_icosphere_volume():
    m = shapes.icosphere(1.0, 3)
    vol = m.mass_properties().volume
    exact = 4.0 * np.pi / 3.0
    assert abs(vol - exact) <= 0.02 * exact
    mc, se = monte_carlo_volume(m, 200_000, seed=5)
    assert abs(vol - mc) <= 3.0 * se


def test_mass_properties_open_mesh_warns():
    g = shapes.grid(5, 5, 1.0)
    with pytest.warns(UserWarning):
        mp = mass_properties(g)
    assert mp.boundary_only
    assert mp.volume == pytest.approx(16.0)  # surface area of a 4x4 sheet


def test_mass_properties_inverted_orientation_raises():
    c = shapes.cube()
    flipped = TriMesh(c.vertices, c.triangles[:, ::-1])
    with pytest.raises(MeshError):
        mass_properties(flipped)


def test_mass_properties_reorder_invariance(rng):
    m = shapes.icosphere(1.0, 1)
    base = m.mass_properties()
    perm = rng.permutation(len(m))
    shuffled = TriMesh(m.vertices, m.triangles[perm])
    mp = shuffled.mass_properties()
    assert mp.volume == pytest.approx(base.volume, abs=1e-12)
    assert np.allclose(mp.centroid, base.centroid, atol=1e-12)
    assert np.allclose(mp.second_moment, base.second_moment, atol=1e-12)


def test_vertex_normal_cases():
    g = shapes.grid(5, 5, 1.0)
    interior = 2 * 5 + 2
    assert np.allclose(vertex_normal(g, interior), [0, 0, 1], atol=1e-12)

    c = shapes.cube()
    corner = 0  # (-1,-1,-1) octant
    assert np.allclose(vertex_normal(c, corner),
                       -np.ones(3) / np.sqrt(3), atol=1e-12)

    s = shapes.icosphere(1.0, 3)
    for v in (0, 100, 500):
        radial = s.vertices[v] / np.linalg.norm(s.vertices[v])
        assert np.linalg.norm(vertex_normal(s, v) - radial) < 1e-2


def test_neighbors_one_ring_default():
    c = shapes.cube()
    ring = vertex_neighbors_at_step(c, 0, c.max_incident_edge_length(0))
    assert set(ring) == set(c.vertex_adjacency[0])
    assert 3 <= len(ring) <= 6


def test_neighbors_band_matches_dijkstra_oracle():
    g = shapes.grid(9, 9, 1.0)
    for v in (0, 4 * 9 + 4, 40):
        d = 2.0
        got = list(vertex_neighbors_at_step(g, v, d))
        want = graph_band_vertices(g, v, d / 2, 3 * d / 2)
        assert got == want
        assert v not in got


def test_neighbors_large_step_band_excludes_near():
    g = shapes.grid(9, 9, 1.0)
    v = 4 * 9 + 4
    out = vertex_neighbors_at_step(g, v, 100.0)
    assert len(out) == 0  # band [50, 150] beyond the mesh


def test_neighbors_never_contain_self(rng):
    m = shapes.torus()
    for v in rng.integers(0, m.n_vertices, size=25):
        for d in (0.1, 0.3, 0.7):
            assert int(v) not in vertex_neighbors_at_step(m, int(v), d)


def test_neighbors_rejects_nonpositive_step():
    with pytest.raises(ValueError):
        vertex_neighbors_at_step(shapes.cube(), 0, 0.0)


def test_bvh_bounds_contain_triangles():
    m = shapes.bumpy_sphere()
    bvh = m.bvh
    for node in range(len(bvh.left)):
        if bvh.left[node] >= 0:
            continue
        sel = bvh.order[bvh.start[node]:bvh.start[node] + bvh.count[node]]
        pts = m.vertices[m.triangles[sel]].reshape(-1, 3)
        assert (pts >= bvh.node_min[node] - 1e-12).all()
        assert (pts <= bvh.node_max[node] + 1e-12).all()


def test_normals_unit_length():
    for m in (shapes.cube(), shapes.torus(), shapes.staircase()):
        assert np.allclose(np.linalg.norm(m.triangle_normals, axis=1), 1.0,
                           atol=1e-9)
        lens = np.linalg.norm(m.vertex_normals, axis=1)
        assert np.allclose(lens, 1.0, atol=1e-9)


def test_adjacency_symmetry():
    m = shapes.staircase()
    for v, adj in enumerate(m.vertex_adjacency):
        for u in adj:
            assert v in m.vertex_adjacency[u]


def test_content_hash_stability(tmp_path):
    m = shapes.torus()
    p = tmp_path / "t.off"
    m.save(p)
    assert load_mesh(p).content_hash == m.content_hash
    moved = TriMesh(np.asarray(m.vertices) + 1e-9, m.triangles)
    assert moved.content_hash != m.content_hash


def test_feature_pseudo_normal_edge_and_vertex():
    c = shapes.cube()
    # vertex feature: barycentric concentrated on one corner
    tri = int(c.vertex_triangles[7][0])
    bary = np.zeros(3)
    bary[list(c.triangles[tri]).index(7)] = 1.0
    n = feature_pseudo_normal(c, tri, bary)
    assert np.allclose(n, np.ones(3) / np.sqrt(3), atol=1e-12)
    # interior feature: triangle normal
    n2 = feature_pseudo_normal(c, tri, np.array([1, 1, 1]) / 3.0)
    assert np.allclose(n2, c.triangle_normals[tri])


def test_degenerate_triangle_rejected_in_constructor():
    verts = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0.0]])
    with pytest.raises(MeshError):
        TriMesh(verts, np.array([[0, 1, 2]]))
    with pytest.raises(MeshError):
        TriMesh(verts, np.array([[0, 1, 1]]))
    with pytest.raises(MeshError):
        TriMesh(verts, np.array([[0, 1, 5]]))
