import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy.special import exp1

import probes
from conftest import FIXTURE_NAMES
from hausdorff_core import (
    Axis,
    DomainTruncationError,
    GridFunction,
    SpecError,
    builtin_cesaro,
    builtin_ck,
    builtin_geometric,
    builtin_identity,
)
from hausdorff_operator import (
    apply,
    apply_adjoint,
    duality_gap,
    evaluate_at,
    image_breaks,
    kernel_mass,
    norm_bound_lp,
    normality_residual,
    quadrature_error,
    rayleigh_quotient,
    regularity_check,
)


def test_cesaro_of_indicator_is_one_then_reciprocal():
    x = np.array([0.25, 0.5, 1.0, 2.0, 10.0, 1e4])
    values = evaluate_at(builtin_cesaro(1), probes.indicator(), x)
    assert_allclose(values, np.minimum(1.0, 1.0 / x), rtol=0, atol=1e-12)


def test_cesaro_of_unit_interval_power():
    # f = x·1_{(0,1)}: Hf = x/2 при x ≤ 1, 1/(2x) при x > 1
    box = probes.indicator()
    g = probes.ProbeFunction("x·1", lambda y: y[..., 0] * box.func(y), breaks=((1.0,),))
    x = np.array([0.5, 3.0])
    assert_allclose(evaluate_at(builtin_cesaro(1), g, x), [0.25, 1.0 / 6.0], atol=1e-12)


def test_separable_cesaro_of_indicator_product():
    values = evaluate_at(builtin_cesaro(2), probes.indicator(n=2), np.array([[2.0, 0.5], [4.0, 5.0]]))
    assert_allclose(values, [0.5, 0.05], atol=1e-12)


def test_identity_returns_samples(narrow_axis):
    f = probes.gaussian_bump()
    image = apply(builtin_identity(), f, (narrow_axis,))
    assert_allclose(image.values, GridFunction.sample(f, (narrow_axis,)).values, atol=1e-15)


def test_geometric_operator_is_a_weighted_dilation_sum():
    f = probes.exponential()
    x = np.array([0.01, 1.0])
    expected = [sum(0.5 ** k * math.exp(-(4.0 ** k) * xi) for k in range(41)) for xi in x]
    assert_allclose(evaluate_at(builtin_geometric(), f, x), expected, rtol=1e-13)


def test_cesaro_adjoint_of_exponential_is_exp1():
    x = np.array([1e-3, 0.1, 1.0, 5.0])
    values = evaluate_at(builtin_cesaro(1).adjoint(), probes.exponential(), x)
    assert_allclose(values, exp1(x), rtol=1e-10)


def test_cesaro_adjoint_of_indicator_is_log():
    x = np.array([0.01, 0.3, 0.9, 2.0])
    values = evaluate_at(builtin_cesaro(1).adjoint(), probes.indicator(), x)
    assert_allclose(values, np.log(1.0 / np.minimum(x, 1.0)), atol=1e-12)


def test_duality_with_indicator_and_exponential():
    spec = builtin_cesaro(1)
    axis = Axis.log_gauss(-40.0, 5.0)
    f = GridFunction.sample(probes.indicator(), (axis,))
    g = GridFunction.sample(probes.exponential(), (axis,))
    left = apply(spec, probes.indicator(), (axis,)).inner(g)
    right = f.inner(apply_adjoint(spec, probes.exponential(), (axis,)))
    expected = (1.0 - math.exp(-1.0)) + exp1(1.0)
    assert_allclose(left.real, expected, atol=1e-9)
    assert_allclose(right.real, expected, atol=1e-9)


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_duality_on_random_pairs(name, fixture_spec, check_axis):
    spec = fixture_spec(name)
    n = spec.dimension
    bumps = probes.random_bumps(np.random.default_rng(1), 100, n)
    gaps = [duality_gap(spec, f, g, (check_axis,) * n) for f, g in zip(bumps[::2], bumps[1::2])]
    assert len(gaps) == 50
    assert max(gaps) < 1e-6


def test_kernel_mass_and_bounds():
    assert_allclose(kernel_mass(builtin_ck(2)), 1.0, rtol=1e-12)
    assert_allclose(kernel_mass(builtin_cesaro(2, scale=0.5)), 0.5, rtol=1e-12)
    assert_allclose(norm_bound_lp(builtin_cesaro(1), p=4.0), 4.0 / 3.0, rtol=1e-10)


def test_regularity_against_closed_form():
    spec = builtin_cesaro(1)
    value = evaluate_at(spec, probes.saturation(), np.array([1e3]))[0]
    assert_allclose(value, 1.0 - math.log(1001.0) / 1000.0, atol=1e-8)
    assert abs(value - 1.0) < 1e-2


def test_regularity_report():
    report = regularity_check(builtin_cesaro(1), probes.saturation(), [1e1, 1e2, 1e3])
    assert report.regular and report.converging
    assert report.expected_deviation == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.diff(report.deviations) < 0)


def test_regularity_of_nonregular_operator():
    report = regularity_check(builtin_cesaro(1, scale=0.5), probes.saturation(), [1e2, 1e3, 1e4])
    assert not report.regular
    assert report.expected_deviation == pytest.approx(0.5)
    assert report.converging


def test_regularity_needs_a_limit():
    with pytest.raises(SpecError):
        regularity_check(builtin_cesaro(1), probes.gaussian_bump(), [10.0])


def test_hardy_probe_approaches_sharp_constant():
    axis = Axis.log_gauss(-50.0, 50.0)
    ratio = rayleigh_quotient(builtin_cesaro(1), probes.hardy_probe(10.0), (axis,))
    assert 1.9 < ratio <= norm_bound_lp(builtin_cesaro(1)) + 1e-6


def test_rayleigh_quotients_stay_below_bound(check_axis):
    spec = builtin_cesaro(1)
    bound = norm_bound_lp(spec)
    for f in probes.random_bumps(np.random.default_rng(3), 50):
        assert rayleigh_quotient(spec, f, (check_axis,)) <= bound + 1e-6


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_normality(name, fixture_spec, narrow_axis):
    spec = fixture_spec(name)
    n = spec.dimension
    assert normality_residual(spec, probes.gaussian_bump_nd(n), (narrow_axis,) * n) < 1e-5


def test_normality_requires_l2(narrow_axis):
    with pytest.raises(SpecError):
        normality_residual(builtin_cesaro(1, p=3.0), probes.gaussian_bump(), (narrow_axis,))


def test_image_breaks_of_indicator():
    assert image_breaks(builtin_cesaro(1), probes.indicator()) == ((1.0,),)
    assert image_breaks(builtin_cesaro(1), probes.gaussian_bump()) == ()


def test_quadrature_error_of_split_rule():
    axis = Axis.log_uniform(-3.0, 3.0, 64)
    assert quadrature_error(builtin_cesaro(1), probes.indicator(), (axis,)) < 1e-10


def test_truncated_grid_function_input(caplog):
    grid = GridFunction.sample(probes.gaussian_bump(), (Axis.log_uniform(-1.0, 1.0, 64),))
    with pytest.raises(DomainTruncationError) as error:
        evaluate_at(builtin_cesaro(1), grid, np.array([5.0]), strict=True)
    assert error.value.mass > 1e-8
    with caplog.at_level(logging.WARNING):
        evaluate_at(builtin_cesaro(1), grid, np.array([5.0]))
    assert "носитель" in caplog.text


def test_dimension_mismatch():
    with pytest.raises(SpecError):
        evaluate_at(builtin_cesaro(2), probes.gaussian_bump(), np.array([[1.0, 1.0]]))


def test_flat_point_array_in_one_dimension():
    spec = builtin_cesaro(1)
    values = evaluate_at(spec, probes.indicator(), np.array([0.5]))
    assert values.shape == (1,)
    assert_allclose(values, [1.0], rtol=1e-12)
    assert evaluate_at(spec, probes.indicator(), 0.5).shape == ()
    assert evaluate_at(spec, probes.indicator(), np.array([0.5, 2.0, 4.0])).shape == (3,)
    assert evaluate_at(spec, probes.indicator(), np.array([[0.5], [2.0]])).shape == (2,)


@settings(max_examples=30, deadline=None)
@given(a=st.complex_numbers(max_magnitude=5.0, allow_nan=False, allow_infinity=False),
       b=st.complex_numbers(max_magnitude=5.0, allow_nan=False, allow_infinity=False),
       name=st.sampled_from(["ck2", "geometric", "cesaro1"]))
def test_linearity(a, b, name, fixture_spec):
    spec = fixture_spec(name)
    f, g = probes.gaussian_bump(), probes.exponential()
    combined = probes.ProbeFunction("combined", lambda x: a * f.func(x) + b * g.func(x))
    x = np.array([0.3, 1.0, 2.5, 7.0])
    expected = a * evaluate_at(spec, f, x) + b * evaluate_at(spec, g, x)
    assert_allclose(evaluate_at(spec, combined, x), expected, rtol=0, atol=1e-12 * (1 + abs(a) + abs(b)))


def _reflected(f: probes.ProbeFunction, signs) -> probes.ProbeFunction:
    def factor(g, sign):
        return probes.ProbeFunction(f"{g.name}(±x)", lambda y: g.func(sign * y))

    return probes.product(*[factor(g, sign) for g, sign in zip(f.factors, signs)])


@pytest.mark.parametrize("signs", [(1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)])
def test_hyperoctants_are_invariant(signs):
    spec = builtin_cesaro(2)
    f = probes.gaussian_bump_nd(2)
    x = np.array([[1.0, 0.8], [0.5, 2.0], [3.0, 1.1]])
    mirrored = x * np.asarray(signs)
    assert_allclose(evaluate_at(spec, _reflected(f, signs), mirrored), evaluate_at(spec, f, x), rtol=1e-14)
    # f сосредоточена в первом октанте, и образ её тоже
    assert np.all(evaluate_at(spec, f, mirrored) == 0.0)


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_double_adjoint_is_the_operator(name, fixture_spec):
    spec = fixture_spec(name)
    twice = spec.adjoint().adjoint()
    rule = spec.measure.base_rule
    assert twice.p == spec.p
    assert_allclose(twice.kernel_values(rule), spec.kernel_values(rule), rtol=1e-12, atol=0)
    assert_allclose(twice.family.eigenvalues(rule), spec.family.eigenvalues(rule), rtol=1e-12, atol=0)


def test_double_adjoint_of_complex_kernel():
    spec = builtin_cesaro(2, p=3.0, scale=0.5 + 0.5j)
    twice = spec.adjoint().adjoint()
    rule = spec.measure.base_rule
    assert twice.p == pytest.approx(3.0, rel=1e-12)
    assert_allclose(twice.kernel_values(rule), spec.kernel_values(rule), rtol=1e-12, atol=0)
    assert_allclose(twice.family.matrices(rule), spec.family.matrices(rule), rtol=1e-12, atol=0)


@pytest.mark.parametrize("name", ["cesaro1", "cesaro2", "ck2", "ck0.5", "geometric"])
def test_constant_is_multiplied_by_kernel_mass(name, fixture_spec):
    spec = fixture_spec(name)
    n = spec.dimension
    c = 2.0 - 1.0j
    x = np.array([[0.4] * n, [1.0] * n, [25.0] * n])
    assert_allclose(evaluate_at(spec, probes.constant(c, n), x), c * kernel_mass(spec), rtol=1e-12)


def test_kernel_mass_of_geometric_operator():
    assert kernel_mass(builtin_geometric()) == pytest.approx(2.0 * (1.0 - 2.0 ** -41), rel=1e-14)
