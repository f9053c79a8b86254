import numpy as np
import pytest
from numpy.testing import assert_allclose

import probes
from hausdorff_core import Axis, GridFunction, SpecError


def test_indicator_declares_its_edges():
    f = probes.indicator(0.0, 1.0)
    assert f.axis_breaks(0) == (1.0,)
    assert_allclose(f(np.array([0.5, 1.5, -0.5])), [1.0, 0.0, 0.0])


def test_library_probe_in_several_dimensions():
    f = probes.library_probe("gaussian", 3)
    assert f.dimension == 3 and f.is_product
    point = np.array([[1.0, 1.0, 1.2]])
    assert_allclose(f(point), [np.exp(-1.0)])
    with pytest.raises(SpecError):
        probes.library_probe("sawtooth")


def test_limits_of_products():
    assert probes.library_probe("saturation", 2).limit == 1.0
    assert probes.constant(2.0, 3).limit == 2.0
    assert probes.gaussian_bump().limit is None


def test_restrict_adds_window_edges():
    f = probes.restrict(probes.gaussian_bump(), 0.5, 2.0)
    assert f.axis_breaks(0) == (0.5, 2.0)
    assert_allclose(f(np.array([0.4, 1.0, 2.5])), [0.0, 1.0, 0.0])


def test_from_grid_interpolates_inside_and_vanishes_outside():
    axis = Axis.log_uniform(-2.0, 2.0, 256)
    grid = GridFunction.sample(probes.gaussian_bump(), (axis,))
    f = probes.from_grid(grid)
    assert f.support is grid
    assert_allclose(f(np.array([[1.1]])), np.exp(-0.25), rtol=1e-5)
    assert f(np.array([[100.0]]))[0] == 0


def test_random_bumps_are_reproducible():
    first = probes.random_bumps(np.random.default_rng(7), 3, n=2)
    second = probes.random_bumps(np.random.default_rng(7), 3, n=2)
    points = np.array([[0.5, 2.0], [1.0, 1.0]])
    for a, b in zip(first, second):
        assert a.is_product
        assert_allclose(a(points), b(points))


def test_hardy_probe_is_homogeneous_near_one():
    f = probes.hardy_probe(1e6)
    assert_allclose(f(np.array([4.0])), [0.5], rtol=1e-9)


def test_flat_array_is_a_list_of_points():
    f = probes.gaussian_bump()
    assert f(np.array([1.0])).shape == (1,)
    assert_allclose(f(np.array([1.0])), [1.0])
    assert f(1.0).shape == ()
    assert f(np.array([[1.0], [1.2]])).shape == (2,)


def test_flat_array_is_one_point_in_several_dimensions():
    f = probes.gaussian_bump_nd(2)
    assert f(np.array([1.0, 1.0])).shape == ()
    with pytest.raises(SpecError):
        f(np.array([1.0, 1.0, 1.0]))
