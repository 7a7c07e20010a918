import numpy as np
import pytest

from conftest import random_positive
from hflab import quaternion as quat
from hflab.framing import (
    DegenerateFramingError,
    Deformation,
    Framing,
    GaugeField,
    compose,
    gauge_apply,
    identity_gauge,
    polar_path,
    polar_project,
    reference_left_framing,
    reference_right_framing,
    relative_gauge,
)
from hflab.harness import random_deformation
from hflab.topology import covering_map_field, degree, power_twist_field


def test_left_is_identity(grid):
    assert np.array_equal(reference_left_framing(grid).A, np.broadcast_to(np.eye(3), grid.shape + (3, 3)))


def test_right_is_covering_map(grid):
    A = reference_right_framing(grid).A
    assert np.allclose(A, quat.rotation_matrix(grid.nodes), atol=0)
    assert np.allclose(quat.rotation_matrix(np.array([1.0, 0, 0, 0])), np.eye(3))


def test_positivity_enforced(small_grid):
    A = np.broadcast_to(np.diag([1.0, 1.0, -1.0]), small_grid.shape + (3, 3)).copy()
    with pytest.raises(ValueError):
        Framing(small_grid, A)
    with pytest.raises(ValueError):
        GaugeField(small_grid, A)


def test_shape_enforced(small_grid):
    with pytest.raises(ValueError):
        Framing(small_grid, np.ones((2, 2, 2, 3, 3)))


def test_action_identity(small_grid, rng):
    w = Framing(small_grid, random_positive(small_grid, rng))
    assert np.array_equal(gauge_apply(w, identity_gauge(small_grid)).A, w.A)


def test_action_associativity(small_grid, rng):
    w = Framing(small_grid, random_positive(small_grid, rng))
    a = GaugeField(small_grid, random_positive(small_grid, rng))
    b = GaugeField(small_grid, random_positive(small_grid, rng))
    lhs = gauge_apply(gauge_apply(w, a), b).A
    rhs = gauge_apply(w, compose(a, b)).A
    assert np.max(np.abs(lhs - rhs)) < 1e-13 * np.max(np.abs(lhs))


def test_group_axioms(small_grid, rng):
    a, b, c = (GaugeField(small_grid, random_positive(small_grid, rng)) for _ in range(3))
    e = identity_gauge(small_grid)
    assert np.max(np.abs(compose(compose(a, b), c).a - compose(a, compose(b, c)).a)) < 1e-12
    assert np.array_equal(compose(a, e).a, a.a) and np.array_equal(compose(e, a).a, a.a)
    assert np.max(np.abs(compose(a, a.inverse()).a - np.eye(3))) < 1e-12
    assert np.max(np.abs(compose(a.inverse(), a).a - np.eye(3))) < 1e-12


def test_simple_transitivity(small_grid, rng):
    w = Framing(small_grid, random_positive(small_grid, rng))
    z = Framing(small_grid, random_positive(small_grid, rng))
    a = relative_gauge(w, z)
    assert np.max(np.abs(gauge_apply(w, a).A - z.A)) < 1e-12
    # uniqueness: w A is invertible, so any b with w o b = z equals a
    b = np.linalg.inv(w.A) @ z.A
    assert np.max(np.abs(a.a - b)) < 1e-12
    assert np.all(np.linalg.det(a.a) > 0)


def test_relative_gauge_self_and_reference(grid):
    left, right = reference_left_framing(grid), reference_right_framing(grid)
    assert np.max(np.abs(relative_gauge(right, right).a - np.eye(3))) < 1e-13
    rel = relative_gauge(left, right)
    assert np.max(np.abs(rel.a - quat.rotation_matrix(grid.nodes))) < 1e-15
    assert np.max(np.abs(gauge_apply(left, rel).A - right.A)) < 1e-13


def test_relative_gauge_rejects_singular(small_grid):
    A = np.broadcast_to(np.diag([1.0, 1.0, 1e-14]), small_grid.shape + (3, 3)).copy()
    w = Framing(small_grid, A)
    with pytest.raises(DegenerateFramingError):
        relative_gauge(w, reference_left_framing(small_grid))


def test_polar_of_rotation_unchanged(grid):
    rho = covering_map_field(grid)
    assert np.max(np.abs(polar_project(rho).a - rho.a)) < 1e-12


def test_polar_strips_symmetric_factor(grid):
    R = power_twist_field(grid, 2).a
    a = GaugeField(grid, np.diag([2.0, 1.0, 1.0]) @ R)
    assert np.max(np.abs(polar_project(a).a - R)) < 1e-12


def test_polar_properties(small_grid, rng):
    a = GaugeField(small_grid, random_positive(small_grid, rng, scale=0.8))
    r = polar_project(a).a
    assert np.max(np.abs(np.swapaxes(r, -1, -2) @ r - np.eye(3))) < 1e-10
    assert np.all(np.abs(np.linalg.det(r) - 1) < 1e-10)
    assert np.max(np.abs(polar_project(polar_project(a)).a - r)) < 1e-10


def test_polar_path_stays_positive(small_grid, rng):
    a = GaugeField(small_grid, random_positive(small_grid, rng, scale=0.8))
    assert np.max(np.abs(polar_path(a, 0.0).a - a.a)) < 1e-12
    assert np.max(np.abs(polar_path(a, 1.0).a - polar_project(a).a)) < 1e-12
    for s in np.linspace(0, 1, 6):
        assert np.all(np.linalg.det(polar_path(a, s).a) > 0)


@pytest.mark.parametrize("k", [0, 1])
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_polar_degree_independent_of_representative(grid, k, seed):
    base = power_twist_field(grid, k)
    d = random_deformation(grid, seed, 0.3)
    assert degree(polar_project(compose(base, d))).rounded == k
    assert degree(polar_project(compose(d, base))).rounded == k


def test_deformation_starts_at_identity(small_grid, rng):
    e = identity_gauge(small_grid)
    Deformation([0.0, 0.5], [e, e])
    with pytest.raises(ValueError):
        Deformation([0.0], [GaugeField(small_grid, random_positive(small_grid, rng))])
    with pytest.raises(ValueError):
        Deformation([0.1], [e])


def test_grid_mismatch(small_grid, grid):
    with pytest.raises(ValueError):
        gauge_apply(reference_left_framing(small_grid), identity_gauge(grid))
