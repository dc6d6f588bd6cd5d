import numpy as np
import pytest

from contactpd import shapes
from contactpd.collision import is_collision, min_distance
from contactpd.oracles import (generalized_pd_oracle, separation_directions,
                               translational_pd_oracle)
from contactpd.transforms import Configuration, GENERALIZED

CUBE = shapes.cube()


def test_directions_unit_and_nested():
    d1 = separation_directions(50)
    d2 = separation_directions(200)
    assert np.allclose(np.linalg.norm(d1, axis=1), 1.0, atol=1e-12)
    assert np.allclose(d2[:50], d1)
    assert np.allclose(d1[:6], [[1, 0, 0], [-1, 0, 0], [0, 1, 0],
                                [0, -1, 0], [0, 0, 1], [0, 0, -1]])


def test_translational_oracle_cube_offsets():
    q = Configuration([0.4, 0, 0])
    res = translational_pd_oracle(CUBE, q, CUBE, ndirs=6, tol=1e-4)
    assert res.value == pytest.approx(0.6, abs=2e-4)
    deep = translational_pd_oracle(CUBE, Configuration([0.05, 0, 0]), CUBE,
                                   ndirs=200, tol=1e-4)
    assert deep.value == pytest.approx(0.95, abs=2e-4)


def test_translational_oracle_sphere_pair():
    S = shapes.icosphere(1.0, 3)
    q = Configuration([1.5, 0, 0])
    res = translational_pd_oracle(S, q, S, ndirs=300, tol=1e-4)
    assert res.value == pytest.approx(0.5, abs=0.03)  # tol + faceting


def test_translational_oracle_monotone_in_ndirs():
    q = Configuration([0.3, 0.2, 0.1])
    values = [translational_pd_oracle(CUBE, q, CUBE, ndirs=n, tol=1e-4).value
              for n in (8, 32, 128, 512)]
    for a, b in zip(values, values[1:]):
        assert b <= a + 1e-12


def test_translational_oracle_witness_certified():
    q = Configuration([0.4, 0.2, 0])
    res = translational_pd_oracle(CUBE, q, CUBE, ndirs=64, tol=1e-4)
    assert not is_collision(CUBE, res.witness, CUBE)
    gap, _ = min_distance(CUBE, res.witness, CUBE, check=False)
    assert gap <= 1.1e-4 + 1e-9  # within the bisection tolerance of contact
    assert res.bound_kind == "upper_bound"


def test_translational_oracle_rejects_free_configuration():
    with pytest.raises(ValueError):
        translational_pd_oracle(CUBE, Configuration([3.0, 0, 0]), CUBE, 8)


def test_generalized_oracle_barely_in_collision(rng):
    q = Configuration([0.999, 0, 0], None, GENERALIZED)
    res = generalized_pd_oracle(CUBE, q, CUBE, 150, rng)
    assert 0.0 < res.value < 0.05
    assert not is_collision(CUBE, res.witness, CUBE)


def test_generalized_oracle_rejects_bad_inputs(rng):
    with pytest.raises(ValueError):
        generalized_pd_oracle(CUBE, Configuration([0.4, 0, 0], None,
                                                  GENERALIZED), CUBE, 0, rng)
    with pytest.raises(ValueError):
        generalized_pd_oracle(CUBE, Configuration([3.0, 0, 0], None,
                                                  GENERALIZED), CUBE, 10, rng)


def test_generalized_oracle_upper_bounds_translational(rng):
    """Allowing rotations can only shorten the separating motion, up to
    sampling slack."""
    q = Configuration([0.3, 0.1, -0.2], None, GENERALIZED)
    gen = generalized_pd_oracle(CUBE, q, CUBE, 600, rng)
    trans = translational_pd_oracle(CUBE, q, CUBE, ndirs=300, tol=1e-4)
    assert gen.value <= trans.value * 1.05 + 1e-3
