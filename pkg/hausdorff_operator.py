"""
Действие оператора Хаусдорфа (Hf)(x) = ∫_Ω Φ(u) f(A(u)x) dμ(u) на сетке и прямые
проверки: оценка нормы в L^p, сопряжённый оператор, нормальность, регулярность.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

import probes
from hausdorff_core import (
    CHUNK_BUDGET,
    Axis,
    DomainTruncationError,
    GridFunction,
    OperatorSpec,
    SpecError,
    grid_points,
    l1_bound,
    tensor_difference_norm,
    worker_count,
)
from probes import ProbeFunction

logger = logging.getLogger(__name__)

TRUNCATION_WARN = 1e-8      # доля массы ядра, при которой A(u)x уходит за носитель сетки
MAX_IMAGE_BREAKS = 64       # больше точек негладкости образа не отслеживаем
REGULARITY_TOL = 1e-8


def _axes_of(axes) -> tuple:
    if isinstance(axes, GridFunction):
        return axes.axes
    if isinstance(axes, Axis):
        return (axes,)
    return tuple(axes)


def _splittable(spec: OperatorSpec, f: ProbeFunction) -> bool:
    if spec.dimension != 1 or not spec.refinable or spec.measure.dimension != 1:
        return False
    return spec.family.forms[0].form == "coordinate" and bool(f.axis_breaks(0))


def _run_blocks(run, blocks) -> list:
    workers = worker_count()
    if workers == 1 or len(blocks) == 1:
        return [run(block) for block in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, blocks))


def _outside_mass(f: ProbeFunction, y, weighted, total) -> float:
    if f.support is None or total == 0:
        return 0.0
    outside = ~f.support.support_mask(y)
    return float(np.max(np.sum(outside * np.abs(weighted), axis=-1)) / total) if outside.size else 0.0


def _report_truncation(spec: OperatorSpec, f: ProbeFunction, mass: float, strict: bool):
    if mass <= TRUNCATION_WARN:
        return
    message = (f"{spec.name}: A(u)x выходит за носитель {f.name} с долей массы ядра {mass:.3e} "
               f"(порог {TRUNCATION_WARN:g})")
    if strict:
        raise DomainTruncationError(message, mass)
    logger.warning(message)


def _evaluate_generic(spec: OperatorSpec, f: ProbeFunction, flat: np.ndarray, strict: bool) -> np.ndarray:
    rule = spec.measure.base_rule
    weighted = rule.weights * spec.kernel_values(rule)
    eig = spec.family.eigenvalues(rule)
    basis = spec.family.basis
    diagonal = spec.family.is_diagonal
    total = float(np.sum(np.abs(weighted)))
    n = spec.dimension
    chunk = max(1, CHUNK_BUDGET // max(1, rule.size * n))

    def run(block):
        z = block if diagonal else block @ basis
        y = z[:, None, :] * eig[None, :, :]
        if not diagonal:
            y = y @ basis.T
        values = np.asarray(f(y), dtype=complex) @ weighted
        return values, _outside_mass(f, y, weighted, total)

    results = _run_blocks(run, [flat[i:i + chunk] for i in range(0, flat.shape[0], chunk)])
    _report_truncation(spec, f, max(mass for _, mass in results), strict)
    return np.concatenate([values for values, _ in results])


def _evaluate_split(spec: OperatorSpec, f: ProbeFunction, flat: np.ndarray, strict: bool) -> np.ndarray:
    """
    Одномерный ящик: для каждой точки x панели по τ разбиваются там, где |a(u)x|
    попадает в точку негладкости f.
    """
    measure = spec.measure
    form = spec.family.forms[0]
    levels = f.axis_breaks(0)
    size = measure.size * (1 + len(levels))
    chunk = max(1, CHUNK_BUDGET // max(1, size))

    def run(block):
        radius = np.abs(block[:, 0])
        taus = np.stack([form.break_points(measure, radius, level) for level in levels], axis=-1)
        rule = measure.axis_rule(0, breaks=taus)
        weighted = rule.weights * spec.kernel_values(rule)
        a = np.exp(spec.family.log_eigenvalues(rule)[..., 0])
        y = (a * block[:, :1])[..., None]
        values = np.sum(np.asarray(f(y), dtype=complex) * weighted, axis=-1)
        total = np.sum(np.abs(weighted), axis=-1, keepdims=True)
        mass = 0.0
        if f.support is not None:
            outside = ~f.support.support_mask(y)
            mass = float(np.max(np.sum(outside * np.abs(weighted) / np.where(total > 0, total, 1.0), axis=-1)))
        return values, mass

    results = _run_blocks(run, [flat[i:i + chunk] for i in range(0, flat.shape[0], chunk)])
    _report_truncation(spec, f, max(mass for _, mass in results), strict)
    return np.concatenate([values for values, _ in results])


def evaluate_at(spec: OperatorSpec, f, points, strict: bool = False) -> np.ndarray:
    """
    Значения (Hf)(x) в произвольных точках.

    :param spec: оператор.
    :param f: ProbeFunction, GridFunction или функция от массива точек (..., n).
    :param points: массив (..., n) (для n = 1 допустим и одномерный массив).
    :param strict: бросать DomainTruncationError вместо предупреждения об усечении.
    :return: комплексный массив (...).
    """
    f = probes.as_probe(f)
    n = spec.dimension
    points = np.asarray(points, dtype=float)
    if n == 1 and (points.ndim < 2 or points.shape[-1] != 1):
        points = points[..., None]
    if points.shape[-1] != n or f.dimension != n:
        raise SpecError(f"Размерности не согласованы: оператор {n}, функция {f.dimension}, точки {points.shape}")
    flat = points.reshape(-1, n)
    if flat.shape[0] == 0:
        return np.zeros(points.shape[:-1], dtype=complex)

    if n > 1 and spec.is_separable and f.is_product:
        values = np.ones(flat.shape[0], dtype=complex)
        for j in range(n):
            values *= evaluate_at(spec.factor(j), f.factors[j], flat[:, j:j + 1], strict)
    elif _splittable(spec, f):
        values = _evaluate_split(spec, f, flat, strict)
    else:
        values = _evaluate_generic(spec, f, flat, strict)
    return values.reshape(points.shape[:-1])


def apply(spec: OperatorSpec, f, axes, strict: bool = False) -> GridFunction:
    """
    Hf на тензорной сетке.

    :param spec: оператор.
    :param f: вычислимая функция или GridFunction (вне узлов — кубическая интерполяция по ln|x|).
    :param axes: оси сетки (кортеж Axis или GridFunction, чьи оси взять).
    :return: GridFunction.
    """
    axes = _axes_of(axes)
    f = probes.as_probe(f)
    if spec.dimension > 1 and spec.is_separable and f.is_product:
        return GridFunction.outer([apply(spec.factor(j), f.factors[j], (axes[j],), strict)
                                   for j in range(spec.dimension)])
    values = evaluate_at(spec, f, grid_points(axes), strict)
    return GridFunction(axes, values.reshape(tuple(a.size for a in axes)))


def apply_adjoint(spec: OperatorSpec, f, axes, strict: bool = False) -> GridFunction:
    """
    H*f через сопряжённую спецификацию (ядро Φ̄|det A|⁻¹, семейство A⁻¹): сопряжённый
    к оператору Хаусдорфа снова оператор Хаусдорфа.
    """
    return apply(spec.adjoint(), f, axes, strict)


def norm_bound_lp(spec: OperatorSpec, p: float | None = None) -> float:
    """
    Оценка ‖H‖_{L^p→L^p} ≤ ∫|Φ(u)||det A(u)|^{−1/p}dμ(u).
    """
    return l1_bound(spec, p)


def kernel_mass(spec: OperatorSpec) -> complex:
    """
    ∫_Ω Φ dμ.
    """
    if spec.dimension > 1 and spec.is_separable:
        return complex(np.prod([kernel_mass(spec.factor(j)) for j in range(spec.dimension)]))
    rule = spec.measure.base_rule
    return complex(np.sum(rule.weights * spec.kernel_values(rule)))


def image_breaks(spec: OperatorSpec, f) -> tuple:
    """
    Точки |x|, в которых Hf может быть негладкой (образы точек негладкости f).
    """
    f = probes.as_probe(f)
    if spec.dimension != 1:
        return ()
    levels = f.axis_breaks(0)
    if not levels:
        return ()
    form = spec.family.forms[0]
    if spec.measure.kind == "box" and form.form == "coordinate":
        ends = [spec.measure.high[0]] + ([spec.measure.low[0]] if spec.measure.low[0] > 0 else [])
        scales = [form.scale * end ** form.power for end in ends]
    else:
        rule = spec.measure.base_rule
        if rule.size > MAX_IMAGE_BREAKS:
            return ()
        scales = list(np.unique(spec.family.eigenvalues(rule)[:, 0]))
    found = sorted({float(level / scale) for level in levels for scale in scales if scale > 0})
    return (tuple(found),)


def nested_probe(spec: OperatorSpec, f) -> ProbeFunction:
    """
    Hf как вычислимая функция (для композиций HH*f, H*Hf, H⁻¹Hf).
    """
    f = probes.as_probe(f)
    n = spec.dimension
    if n > 1 and spec.is_separable and f.is_product:
        return probes.product(*[nested_probe(spec.factor(j), f.factors[j]) for j in range(n)])

    def func(x):
        return evaluate_at(spec, f, x)

    return ProbeFunction(f"{spec.name}[{f.name}]", func, dimension=n, breaks=image_breaks(spec, f))


def normality_residual(spec: OperatorSpec, f, axes) -> float:
    """
    ‖HH*f − H*Hf‖₂ / ‖f‖₂ на сетке; для коммутирующих семейств это чистая ошибка дискретизации.

    :param spec: оператор с p = 2.
    :param f: тестовая функция.
    :param axes: оси сетки.
    """
    if spec.p != 2.0:
        raise SpecError(f"Нормальность проверяется в L², а у {spec.name} p = {spec.p}")
    f = probes.as_probe(f)
    axes = _axes_of(axes)
    adjoint = spec.adjoint()
    n = spec.dimension

    if n > 1 and spec.is_separable and f.is_product:
        left, right = [], []
        nf = 1.0
        for j in range(n):
            factor, factor_adj, fj = spec.factor(j), adjoint.factor(j), f.factors[j]
            left.append(apply(factor, nested_probe(factor_adj, fj), (axes[j],)))
            right.append(apply(factor_adj, nested_probe(factor, fj), (axes[j],)))
            nf *= GridFunction.sample(fj, (axes[j],)).norm()
        if nf == 0:
            return 0.0
        return tensor_difference_norm(left, right) / nf

    left = apply(spec, nested_probe(adjoint, f), axes)
    right = apply(adjoint, nested_probe(spec, f), axes)
    norm = GridFunction.sample(f, axes).norm()
    if norm == 0:
        return 0.0
    return left.with_values(left.values - right.values).norm() / norm


@dataclass
class RegularityReport:
    kernel_mass: complex
    limit: complex
    points: np.ndarray
    values: np.ndarray
    deviations: np.ndarray
    expected_deviation: float

    @property
    def regular(self) -> bool:
        return abs(self.kernel_mass - 1.0) <= REGULARITY_TOL

    @property
    def gaps(self) -> np.ndarray:
        return np.abs(self.deviations - self.expected_deviation)

    @property
    def converging(self) -> bool:
        return bool(self.gaps[-1] <= self.gaps[0])

    def to_dict(self) -> dict:
        mass = complex(self.kernel_mass)
        return {
            "kernel_mass": mass.real if mass.imag == 0 else [mass.real, mass.imag],
            "limit": complex(self.limit).real,
            "regular": self.regular,
            "points": [float(x) for x in self.points],
            "deviations": [float(d) for d in self.deviations],
            "expected_deviation": self.expected_deviation,
            "converging": self.converging,
        }


def regularity_check(spec: OperatorSpec, f, probe_points, limit: complex | None = None) -> RegularityReport:
    """
    Регулярность: если f → l на бесконечности, то Hf → l·∫Φdμ; отклонения |Hf(x) − l|
    в точках растущего |x| должны стремиться к |∫Φdμ·l − l|.

    :param spec: оператор (семейство положительно определено по построению).
    :param f: непрерывная функция с пределом на бесконечности.
    :param probe_points: радиусы r; точки берутся на диагонали x = r·(1,…,1).
    :param limit: предел f (по умолчанию f.limit).
    """
    f = probes.as_probe(f)
    limit = f.limit if limit is None else limit
    if limit is None:
        raise SpecError(f"Для {f.name} не известен предел на бесконечности")
    radii = np.asarray(probe_points, dtype=float).ravel()
    points = radii[:, None] * np.ones(spec.dimension)
    values = evaluate_at(spec, f, points)
    mass = kernel_mass(spec)
    deviations = np.abs(values - limit)
    expected = float(abs(mass * limit - limit))
    report = RegularityReport(mass, limit, radii, values, deviations, expected)
    logger.debug("%s: ∫Φ = %s, отклонения %s", spec.name, mass, deviations)
    return report


def duality_gap(spec: OperatorSpec, f, g, axes) -> float:
    """
    |⟨Hf, g⟩ − ⟨f, H*g⟩| / (‖f‖₂‖g‖₂) по квадратуре сетки.
    """
    f, g = probes.as_probe(f), probes.as_probe(g)
    axes = _axes_of(axes)
    adjoint = spec.adjoint()
    n = spec.dimension
    if n > 1 and spec.is_separable and f.is_product and g.is_product:
        pairs = [(spec.factor(j), adjoint.factor(j), f.factors[j], g.factors[j], (axes[j],)) for j in range(n)]
    else:
        pairs = [(spec, adjoint, f, g, axes)]
    lhs = rhs = 1.0 + 0j
    norms = 1.0
    for op, op_adj, fj, gj, ax in pairs:
        fg, gg = GridFunction.sample(fj, ax), GridFunction.sample(gj, ax)
        lhs *= apply(op, fj, ax).inner(gg)
        rhs *= fg.inner(apply(op_adj, gj, ax))
        norms *= fg.norm() * gg.norm()
    return abs(lhs - rhs) / norms if norms > 0 else 0.0


def rayleigh_quotient(spec: OperatorSpec, f, axes) -> float:
    """
    ‖Hf‖_p / ‖f‖_p на сетке (нижняя оценка нормы оператора).
    """
    f = probes.as_probe(f)
    axes = _axes_of(axes)
    if spec.dimension > 1 and spec.is_separable and f.is_product:
        return float(np.prod([rayleigh_quotient(spec.factor(j), f.factors[j], (axes[j],))
                              for j in range(spec.dimension)]))
    norm = GridFunction.sample(f, axes).norm(spec.p)
    if norm == 0:
        return 0.0
    return apply(spec, f, axes).norm(spec.p) / norm


def quadrature_error(spec: OperatorSpec, f, axes) -> float:
    """
    Оценка ошибки квадратуры: max|H_N f − H_{2N} f| при удвоении узлов на панель.
    """
    if spec.measure.kind != "box" or not spec.refinable:
        return 0.0
    coarse = apply(spec, f, axes)
    fine = apply(spec.refined(2 * spec.measure.nodes), f, axes)
    return float(np.max(np.abs(coarse.values - fine.values))) if coarse.values.size else 0.0
