import importlib.util
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy.special import gamma

from conftest import FIXTURE_NAMES, ROOT
from hausdorff_core import (
    THREADS_ENV,
    Axis,
    CommutingFamily,
    EigenForm,
    GridFunction,
    KernelSpec,
    MeasureSpace,
    OperatorSpec,
    SpecError,
    builtin_cesaro,
    builtin_ck,
    builtin_dilation,
    builtin_geometric,
    builtin_identity,
    builtin_symmetric_discrete,
    compose_specs,
    l1_bound,
    load_spec,
    log_axis_rule,
    preserves_positive_cone,
    save_spec,
    spec_from_dict,
    spec_hash,
    spec_to_dict,
    validate_spec,
    worker_count,
)


def _builtin(name: str):
    if name.startswith("cesaro"):
        return builtin_cesaro(int(name[-1]))
    if name.startswith("ck"):
        return builtin_ck(float(name[2:]))
    return {"geometric": builtin_geometric, "identity": builtin_identity}[name]()


def _rotation(angle: float) -> np.ndarray:
    return np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixture_matches_builtin(name, fixture_spec, fixtures_dir):
    data = json.loads((fixtures_dir / f"{name}.json").read_text(encoding="utf-8"))
    assert data == spec_to_dict(_builtin(name))
    assert spec_hash(fixture_spec(name)) == spec_hash(_builtin(name))


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixtures_are_valid(name, fixture_spec):
    report = validate_spec(fixture_spec(name))
    assert report.valid, report.messages
    assert report.properties["preserves_positive_cone"]


@pytest.mark.parametrize("n", [1, 2, 3])
def test_cesaro_bound_is_power_of_two(n):
    assert_allclose(l1_bound(builtin_cesaro(n)), 2.0 ** n, rtol=1e-10)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 3.0])
def test_ck_bound_matches_beta_integral(k):
    expected = math.sqrt(math.pi) * gamma(k + 1) / gamma(k + 0.5)
    assert_allclose(l1_bound(builtin_ck(k)), expected, rtol=1e-8)


def test_geometric_bound_and_mass():
    spec = builtin_geometric()
    assert_allclose(l1_bound(spec), (1 - 0.25 ** 41) / 0.75, rtol=1e-12)
    report = validate_spec(spec)
    assert_allclose(report.properties["kernel_mass"], 2 - 2 * 0.5 ** 41, rtol=1e-12)


def test_cesaro_at_p1_violates_l1_condition():
    report = validate_spec(builtin_cesaro(1, p=1.0))
    assert not report.valid
    assert not report.checks["l1_condition"]
    assert report.messages


def test_declared_nonnegative_kernel_is_checked():
    family = CommutingFamily.diagonal((EigenForm("geometric", ratio=2.0),))
    kernel = KernelSpec("discrete", {"weights": [1.0, -0.5]}, nonnegative=True)
    spec = OperatorSpec(MeasureSpace.discrete([0.0, 1.0]), kernel, family)
    report = validate_spec(spec)
    assert not report.checks["nonnegative_kernel"]


def test_nonpositive_eigenvalue_is_reported():
    family = CommutingFamily.diagonal((EigenForm("geometric", ratio=-2.0),))
    kernel = KernelSpec("discrete", {"weights": [1.0, 0.5]})
    report = validate_spec(OperatorSpec(MeasureSpace.discrete([0.0, 1.0]), kernel, family))
    assert not report.checks["positive_eigenvalues"]
    assert any("a_1" in message for message in report.messages)


def test_non_orthogonal_basis_is_reported():
    forms = (EigenForm("geometric", ratio=2.0), EigenForm("geometric", ratio=3.0))
    family = CommutingFamily([[1.0, 1.0], [0.0, 1.0]], forms)
    kernel = KernelSpec("discrete", {"weights": [1.0, 0.25]})
    report = validate_spec(OperatorSpec(MeasureSpace.discrete([0.0, 1.0]), kernel, family))
    assert not report.checks["orthogonal_basis"]


def test_malformed_shapes_raise():
    family = CommutingFamily.diagonal((EigenForm("geometric", ratio=2.0),))
    with pytest.raises(SpecError):
        OperatorSpec(MeasureSpace.discrete([0.0, 1.0]), KernelSpec("discrete", {"weights": [1.0]}), family)
    with pytest.raises(SpecError):
        OperatorSpec(MeasureSpace.discrete([0.0]), KernelSpec("discrete", {"weights": [1.0]}), family, p=0.5)
    with pytest.raises(SpecError):
        CommutingFamily(np.eye(2), (EigenForm("coordinate"),))


def test_adjoint_spec_flips_exponent_and_name():
    spec = builtin_cesaro(1, p=3.0)
    adjoint = spec.adjoint()
    assert adjoint.p == pytest.approx(1.5)
    assert adjoint.name == "cesaro1*"
    assert adjoint.adjoint().name == "cesaro1"
    assert adjoint.kernel.conjugate and adjoint.kernel.det_power == 1.0
    with pytest.raises(SpecError):
        builtin_cesaro(1, p=1.0).adjoint()


@settings(max_examples=25, deadline=None)
@given(angle=st.floats(0.1, 1.4),
       low=st.lists(st.floats(0.5, 1.0), min_size=4, max_size=4),
       high=st.lists(st.floats(2.0, 4.0), min_size=4, max_size=4))
def test_from_matrices_recovers_commuting_family(angle, low, high):
    basis = _rotation(angle)
    matrices = np.array([basis @ np.diag([a, b]) @ basis.T for a, b in zip(low, high)])
    family = CommutingFamily.from_matrices(matrices)
    kernel = KernelSpec("discrete", {"weights": np.full(4, 0.25)})
    spec = OperatorSpec(MeasureSpace.discrete(np.arange(4.0)), kernel, family)
    rebuilt = spec.family.matrices(spec.measure.base_rule)
    assert_allclose(rebuilt, matrices, atol=1e-10)
    for i in range(4):
        for j in range(4):
            commutator = rebuilt[i] @ rebuilt[j] - rebuilt[j] @ rebuilt[i]
            assert np.max(np.abs(commutator)) <= 1e-12 * 16


def test_from_matrices_rejects_non_commuting():
    matrices = np.array([np.diag([1.0, 2.0]), _rotation(0.3) @ np.diag([1.0, 3.0]) @ _rotation(0.3).T])
    with pytest.raises(SpecError):
        CommutingFamily.from_matrices(matrices)


def test_rotated_family_preserving_cone():
    forms = (EigenForm("geometric", ratio=0.5), EigenForm("geometric", ratio=2.0))
    kernel = KernelSpec("discrete", {"weights": [1.0, 0.25]})
    measure = MeasureSpace.discrete([0.0, 1.0])
    rotated = OperatorSpec(measure, kernel, CommutingFamily(_rotation(math.pi / 4), forms))
    assert not preserves_positive_cone(rotated)
    assert preserves_positive_cone(OperatorSpec(measure, kernel, CommutingFamily.diagonal(forms)))


def test_separable_factor_of_cesaro():
    spec = builtin_cesaro(3)
    assert spec.is_separable
    factor = spec.factor(2)
    assert factor.dimension == 1
    assert factor.family.forms[0].axis == 0
    assert_allclose(l1_bound(factor), 2.0, rtol=1e-10)


def test_compose_multiplies_bounds():
    first = builtin_symmetric_discrete([1.0, 0.25], 2.0)
    second = builtin_dilation(3.0)
    composed = compose_specs(first, second)
    assert composed.measure.size == first.measure.size * second.measure.size
    assert_allclose(l1_bound(composed), l1_bound(first) * l1_bound(second), rtol=1e-12)


def test_compose_rejects_dimension_mismatch():
    with pytest.raises(SpecError):
        compose_specs(builtin_cesaro(1), builtin_cesaro(2))


def test_spec_from_dict_reports_missing_fields():
    data = spec_to_dict(builtin_cesaro(2))
    del data["kernel"]
    with pytest.raises(SpecError):
        spec_from_dict(data)
    data = spec_to_dict(builtin_cesaro(2))
    data["dimension"] = 3
    with pytest.raises(SpecError):
        spec_from_dict(data)


def test_complex_kernel_scale_survives_json(tmp_path):
    spec = builtin_cesaro(1, scale=0.5 + 0.25j)
    path = save_spec(spec, tmp_path / "complex.json")
    assert json.loads(path.read_text(encoding="utf-8"))["kernel"]["scale"] == [0.5, 0.25]
    assert load_spec(path).kernel.scale == 0.5 + 0.25j


def test_load_spec_rejects_broken_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(SpecError):
        load_spec(path)


def test_log_axis_rule_integrates_power():
    tau, weights = log_axis_rule()
    # ∫_0^1 u^{−1/2} du = 2 после замены u = e^{−τ}
    assert_allclose(np.sum(weights * np.exp(-0.5 * tau)), 2.0 - 2.0 * math.exp(-30.0), rtol=1e-13)


def test_log_axis_rule_splits_at_breaks():
    tau, _ = log_axis_rule(breaks=[[2.5]])
    assert tau.shape == (1, 61 * 12)
    assert np.all(np.diff(tau[0][tau[0] < 59.0]) > 0)


def test_axis_validation():
    with pytest.raises(SpecError):
        Axis([1.0, 3.0, 2.0], [1.0, 1.0, 1.0])
    with pytest.raises(SpecError):
        Axis([-1.0, 1.0], [1.0, 1.0], kind="log")


def test_log_uniform_axis_is_cell_centred():
    axis = Axis.log_uniform(-1.0, 1.0, 4)
    assert_allclose(axis.t, [-0.75, -0.25, 0.25, 0.75])
    assert_allclose(axis.weights, np.exp(axis.t) * 0.5)


def test_grid_function_norm_of_gaussian(check_axis):
    g = GridFunction.sample(lambda x: np.exp(-x[..., 0] ** 2), (check_axis,))
    # окно начинается с x = e^{−12}, где e^{−2x²} ≈ 1
    assert_allclose(g.norm(), math.sqrt(math.sqrt(math.pi / 8) - math.exp(-12.0)), rtol=1e-6)


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert worker_count() == 3
    monkeypatch.setenv(THREADS_ENV, "many")
    assert worker_count() == 1
    monkeypatch.delenv(THREADS_ENV)
    assert worker_count() == 1


def _build_fixtures_script():
    spec = importlib.util.spec_from_file_location("build_fixtures", ROOT / "utility" / "build-fixtures.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def test_fixtures_are_regenerated_byte_for_byte(tmp_path, fixtures_dir, monkeypatch, capsys):
    script = _build_fixtures_script()
    monkeypatch.setattr("sys.argv", ["build-fixtures.py", str(tmp_path)])
    script.main()
    for name in FIXTURE_NAMES:
        assert (tmp_path / f"{name}.json").read_bytes() == (fixtures_dir / f"{name}.json").read_bytes()
    assert capsys.readouterr().out.count("[✓]") == len(FIXTURE_NAMES)
