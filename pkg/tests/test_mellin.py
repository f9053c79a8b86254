import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import probes
from conftest import FIXTURE_NAMES
from hausdorff_core import (
    Axis,
    CommutingFamily,
    DomainTruncationError,
    EigenForm,
    GridFunction,
    KernelSpec,
    MeasureSpace,
    OperatorSpec,
    SpecError,
    UnsupportedVariantError,
    builtin_cesaro,
    builtin_geometric,
    tensor_difference_norm,
)
from hausdorff_mellin import (
    SEPARABLE_AXIS_NODES,
    MellinGrid,
    diagonalization_residual,
    lattice_step,
    mellin_forward,
    mellin_inverse,
    mellin_vector,
    rotate_frame,
    split_hyperoctants,
    truncation_mass,
)
from hausdorff_operator import evaluate_at


def _rotation(angle: float) -> np.ndarray:
    return np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])


def _rotated_discrete(angle: float) -> OperatorSpec:
    forms = (EigenForm("geometric", ratio=0.5), EigenForm("geometric", ratio=2.0))
    kernel = KernelSpec("discrete", {"weights": [1.0, 0.25]})
    return OperatorSpec(MeasureSpace.discrete([0.0, 1.0]), kernel, CommutingFamily(_rotation(angle), forms),
                        name="rotated")


def test_default_grid():
    grid = MellinGrid.default(1)
    assert grid.count == 4096 and grid.window() == (math.exp(-12.0), math.exp(12.0))
    assert_allclose(grid.s_spacing, 2 * math.pi / 24.0)
    assert np.all(np.diff(grid.s_nodes) > 0)


def test_grid_limits():
    with pytest.raises(UnsupportedVariantError):
        MellinGrid.default(4)
    with pytest.raises(UnsupportedVariantError):
        MellinGrid(dimension=4, count=8)
    with pytest.raises(SpecError):
        MellinGrid(count=1000)
    with pytest.raises(SpecError):
        MellinGrid(signs=(1, 1))


def test_transform_of_indicator():
    grid = MellinGrid.default(1)
    transformed = mellin_forward(probes.indicator(), grid)
    s = grid.s_nodes
    near = np.abs(s) <= 2.0
    z = 0.5 + 1j * s[near]
    expected = (1.0 - np.exp(-12.0 * z)) / z / math.sqrt(2 * math.pi)
    assert_allclose(transformed.values[near], expected, rtol=0, atol=1e-5)


def test_transform_preserves_norm():
    grid = MellinGrid.default(1)
    f = probes.gaussian_bump()
    sampled = GridFunction.sample(f, grid.axes)
    assert_allclose(mellin_forward(f, grid).norm(), sampled.norm(), rtol=1e-12)
    # ‖f‖² = 0.2·√(π/2) с точностью до хвостов
    assert_allclose(sampled.norm(), math.sqrt(0.2 * math.sqrt(math.pi / 2)), rtol=1e-6)


def test_inverse_restores_samples():
    grid = MellinGrid.default(1)
    sampled = GridFunction.sample(probes.power_exp(), grid.axes)
    restored = mellin_inverse(mellin_forward(sampled))
    assert_allclose(restored.values, sampled.values, rtol=0, atol=1e-12)


def test_inverse_in_two_dimensions():
    grid = MellinGrid(-8.0, 8.0, 128, 2)
    sampled = GridFunction.sample(probes.gaussian_bump_nd(2), grid.axes)
    restored = mellin_inverse(mellin_forward(sampled), grid)
    assert_allclose(restored.values, sampled.values, rtol=0, atol=1e-12)


def test_inverse_refuses_other_exponents():
    transformed = mellin_forward(probes.gaussian_bump(), q=1.5)
    with pytest.raises(SpecError):
        mellin_inverse(transformed)


def test_truncation_is_reported():
    f = probes.log_gaussian(center=11.0)
    assert truncation_mass(f, MellinGrid.default(1)) > 0.1
    with pytest.raises(DomainTruncationError):
        mellin_forward(f)
    with pytest.raises(DomainTruncationError):
        diagonalization_residual(builtin_cesaro(1), f)


@pytest.mark.parametrize("name", FIXTURE_NAMES)
@pytest.mark.parametrize("function, limit", [("indicator", 1e-3), ("gaussian", 1e-5), ("xexp", 1e-5)])
def test_fixtures_are_diagonalized(name, function, limit, fixture_spec):
    spec = fixture_spec(name)
    assert diagonalization_residual(spec, probes.library_probe(function, spec.dimension)) < limit


def test_separable_operator_is_diagonalized():
    assert diagonalization_residual(builtin_cesaro(2), probes.gaussian_bump_nd(2)) < 1e-5


def test_rotated_family_is_diagonalized():
    residual = diagonalization_residual(_rotated_discrete(0.3), probes.gaussian_bump_nd(2))
    assert residual < 1e-5


def test_rotation_conjugates_operator():
    spec = _rotated_discrete(0.3)
    basis = spec.family.basis
    f = probes.gaussian_bump_nd(2)
    x = np.array([[1.0, 1.0], [1.4, 0.7], [0.9, 1.3]])
    direct = evaluate_at(spec, f, x)
    conjugated = evaluate_at(spec.diagonalized(), rotate_frame(f, basis), x @ basis)
    assert_allclose(direct, conjugated, atol=1e-13)


def test_rotate_frame_checks_orthogonality():
    with pytest.raises(SpecError):
        rotate_frame(probes.gaussian_bump_nd(2), [[1.0, 1.0], [0.0, 1.0]])
    f = probes.gaussian_bump_nd(2)
    assert rotate_frame(f, np.eye(2)) is f


def test_lattice_step():
    assert lattice_step(builtin_geometric()) == pytest.approx(math.log(4.0))
    assert lattice_step(builtin_cesaro(1)) is None


def test_hyperoctants_cover_the_line():
    even = probes.ProbeFunction("exp(−x²)", lambda x: np.exp(-x[..., 0] ** 2))
    grid = MellinGrid.default(1)
    pieces = split_hyperoctants(even, grid)
    assert set(pieces) == {(1,), (-1,)}
    assert np.all(pieces[(-1,)].axes[0].nodes < 0)
    vector = mellin_vector(even, grid)
    total = sum(part.norm() ** 2 for part in vector.values())
    assert_allclose(total, 2 * (math.sqrt(math.pi / 8) - math.exp(-12.0)), rtol=1e-6)


def test_frequency_grid_is_nested_under_doubling():
    coarse = MellinGrid(-12.0, 12.0, 1024)
    fine = MellinGrid(-12.0, 12.0, 2048)
    assert coarse.s_spacing == pytest.approx(fine.s_spacing, rel=1e-14)
    assert_allclose(coarse.s_nodes, fine.s_nodes[512:1536], rtol=1e-14, atol=0)
    f = probes.gaussian_bump()
    assert_allclose(mellin_forward(f, coarse).values, mellin_forward(f, fine).values[512:1536], rtol=0, atol=1e-8)


@pytest.mark.parametrize("spec", [_rotated_discrete(0.3), builtin_cesaro(2), builtin_geometric()],
                         ids=lambda spec: spec.name)
def test_family_matrices_are_positive_definite(spec):
    matrices = spec.family.matrices(spec.measure.base_rule)
    assert_allclose(matrices, np.swapaxes(matrices, -1, -2), rtol=0, atol=1e-14)
    # cholesky падает на любой не положительно определённой матрице
    factors = np.linalg.cholesky(matrices)
    assert np.all(np.diagonal(factors, axis1=-2, axis2=-1) > 0)


def test_tensor_difference_norm_keeps_small_differences():
    axis = Axis.log_uniform(-3.0, 3.0, 64)
    g = GridFunction.sample(probes.gaussian_bump(), (axis,))
    h = GridFunction.sample(probes.power_exp(), (axis,))
    assert tensor_difference_norm((g, h), (g, h)) == 0.0
    eps = 1e-10
    perturbed = g.with_values(g.values * (1.0 + eps))
    expected = eps * g.norm() * h.norm()
    assert tensor_difference_norm((g, h), (perturbed, h)) == pytest.approx(expected, rel=1e-5)
    with pytest.raises(SpecError):
        tensor_difference_norm((g, h), (g,))


def test_separable_residual_is_resolved():
    spec = builtin_cesaro(2)
    grid = MellinGrid.default(2)
    axis_grid = grid.axis_grid(0, max(grid.count, SEPARABLE_AXIS_NODES))
    single = diagonalization_residual(spec.factor(0), probes.gaussian_bump(), axis_grid)
    double = diagonalization_residual(spec, probes.gaussian_bump_nd(2))
    assert 0.0 < double < 1e-5
    # ‖A⊗A − B⊗B‖ ≤ ‖A − B‖(‖A‖ + ‖B‖), ‖φ‖∞ = 2
    assert double <= single * (4.0 + single) * (1.0 + 1e-6)
