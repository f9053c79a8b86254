"""
Выводы об операторе по его символу (p = 2): норма ‖H‖ = sup|φ|, обратимость
(inf|φ| > 0), спектр как замыкание образа φ, самосопряжённость/положительность/
унитарность и обращение дискретных операторов через обратный степенной ряд.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from hausdorff_core import (
    MeasureSpace,
    KernelSpec,
    NotInvertibleError,
    OperatorSpec,
    QuadratureBudgetError,
    SeriesTruncationError,
    SpecError,
    UnsupportedVariantError,
)
from hausdorff_symbol import Symbol, build_symbol, discrete_coefficients

logger = logging.getLogger(__name__)

NORM_BOX = 40.0             # поиск sup|φ| на [−NORM_BOX, NORM_BOX]ⁿ
NORM_GRID_POINTS = 201      # точек на ось грубой сетки
NORM_GRID_BUDGET = 2 ** 21  # потолок точек грубой сетки в n измерениях
INVERTIBILITY_FLOOR = 1e-3  # |φ(s)| ниже этого считается нулём
PERIOD_SAMPLES = 4096       # точек на период символа с одной образующей
WITNESS_ITERATIONS = 64
MEMBERSHIP_TOL = 1e-10
CLASSIFY_TOL = 1e-10
SERIES_TERMS = 64
SERIES_TAIL_TOL = 1e-10
INTEGER_TOL = 1e-9
ROUNDOFF_TOL = 1e-15        # доля максимума, ниже которой коэффициент ряда считается шумом округления

LABELS = ("self-adjoint", "positive", "unitary")


def _require_l2(sym: Symbol):
    if sym.p != 2.0:
        raise SpecError(f"Спектральные выводы делаются в L², а символ {sym.name!r} построен при p = {sym.p}")


def s_grid(n: int, box: float = NORM_BOX, count: int = NORM_GRID_POINTS) -> np.ndarray:
    """
    Равномерная сетка на [−box, box]ⁿ как массив (P, n); число точек на ось
    уменьшается так, чтобы всего было не больше NORM_GRID_BUDGET.
    """
    count = min(count, int(NORM_GRID_BUDGET ** (1.0 / n)))
    if count % 2 == 0:
        count -= 1
    axis = np.linspace(-box, box, count)
    mesh = np.meshgrid(*(axis,) * n, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _grid_resolution(points: np.ndarray) -> float:
    axis = np.unique(points[:, 0])
    return float(np.min(np.diff(axis))) if axis.size > 1 else 0.0


# ---------------------------------------------------------------------------
# Норма
# ---------------------------------------------------------------------------

@dataclass
class NormEstimate:
    value: float
    argmax: np.ndarray
    boundary: bool = False
    exact: bool = False
    resolution: float = 0.0

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "argmax": [float(v) for v in self.argmax],
            "boundary": self.boundary,
            "exact": self.exact,
            "resolution": self.resolution,
        }


def norm_search(sym: Symbol, box: float = NORM_BOX, count: int = NORM_GRID_POINTS,
                refine: bool = True) -> NormEstimate:
    """
    sup|φ|: для неотрицательного ядра — точно |φ(0)|, иначе максимум на грубой сетке
    с уточнением золотым сечением по каждой координате.

    :param sym: символ при p = 2.
    :param box: полуширина области поиска.
    :param count: точек на ось грубой сетки.
    :param refine: уточнять ли максимум.
    """
    _require_l2(sym)
    n = sym.dimension
    if sym.nonnegative_kernel:
        origin = np.zeros(n)
        return NormEstimate(abs(sym.at(origin)), origin, exact=True)

    points = s_grid(n, box, count)
    values = np.abs(sym(points))
    index = int(np.nanargmax(values))
    best_s, best = points[index].copy(), float(values[index])
    resolution = _grid_resolution(points)

    if refine and resolution > 0:
        for j in range(n):
            def target(x, j=j, base=best_s.copy()):
                s = base.copy()
                s[j] = x
                return -abs(sym.at(s))

            centre = best_s[j]
            try:
                result = minimize_scalar(target, bracket=(centre - resolution, centre, centre + resolution),
                                         method="golden")
            except (ValueError, QuadratureBudgetError):
                continue
            if -result.fun > best:
                best = float(-result.fun)
                best_s[j] = float(result.x)

    boundary = bool(np.any(np.abs(best_s) >= box - 0.5 * resolution))
    if boundary:
        logger.warning("%s: максимум |φ| на границе области поиска (s = %s), увеличьте box",
                       sym.name, np.round(best_s, 6).tolist())
    return NormEstimate(best, best_s, boundary=boundary, resolution=resolution)


def operator_norm(sym: Symbol, box: float = NORM_BOX, count: int = NORM_GRID_POINTS,
                  refine: bool = True) -> float:
    """
    ‖H‖_{L²→L²} = sup|φ|.
    """
    return norm_search(sym, box, count, refine).value


# ---------------------------------------------------------------------------
# Обратимость
# ---------------------------------------------------------------------------

@dataclass
class InvertibilityVerdict:
    status: str                     # invertible | not-invertible | inconclusive
    inf_estimate: float
    witness: np.ndarray | None = None
    exact: bool = False

    @property
    def invertible(self) -> bool:
        return self.status == "invertible"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "inf_estimate": self.inf_estimate,
            "witness": None if self.witness is None else [float(v) for v in self.witness],
            "exact": self.exact,
        }


def single_generator(sym: Symbol):
    """
    Для дискретного символа с ln a(u_k) = m_k·ℓ (m_k целые) возвращает (направление, ℓ):
    тогда φ периодична по s·направление с периодом 2π/ℓ. ℓ = 0 — символ постоянен.
    None, если образующая не одна.
    """
    base = sym.parts[0] if sym.variant == "adjoint" else sym
    if base.variant != "discrete":
        return None
    log_eigs = np.asarray(base.params["log_eigenvalues"], dtype=float)
    norms = np.linalg.norm(log_eigs, axis=-1)
    if np.all(norms <= INTEGER_TOL):
        return np.eye(sym.dimension)[0], 0.0
    direction = log_eigs[int(np.argmax(norms))] / np.max(norms)
    projections = log_eigs @ direction
    if np.max(np.abs(log_eigs - projections[:, None] * direction)) > INTEGER_TOL:
        return None
    step = float(np.min(np.abs(projections[np.abs(projections) > INTEGER_TOL])))
    multiples = projections / step
    if np.max(np.abs(multiples - np.round(multiples))) > 1e-6:
        return None
    return direction, step


def _period_points(direction: np.ndarray, step: float, samples: int = PERIOD_SAMPLES) -> np.ndarray:
    theta = -math.pi + 2.0 * math.pi * np.arange(samples + 1) / samples
    return (theta / step)[:, None] * direction[None, :]


def invertibility(sym: Symbol, s=None, floor: float = INVERTIBILITY_FLOOR) -> InvertibilityVerdict:
    """
    Обратимость H ⇔ inf|φ| > 0.

    Затухающие символы (Чезаро, (C,k)) необратимы: свидетель s* с |φ(s*)| < floor
    ищется удвоением |s|. Символ с одной образующей периодичен, и одного периода
    достаточно для точного вердикта. В остальных случаях положительный минимум на
    конечной сетке ничего не доказывает: вердикт inconclusive.

    :param sym: символ при p = 2.
    :param s: точки (P, n) для общего случая (по умолчанию s_grid).
    :param floor: порог малости |φ|.
    """
    _require_l2(sym)
    n = sym.dimension

    if sym.decays:
        point = np.ones(n)
        witness, smallest = point.copy(), math.inf
        for _ in range(WITNESS_ITERATIONS):
            try:
                value = abs(sym.at(point))
            except QuadratureBudgetError:
                break
            if value < smallest:
                witness, smallest = point.copy(), value
            if value < floor:
                break
            point = point * 2.0
        return InvertibilityVerdict("not-invertible", 0.0, witness, exact=True)

    generator = single_generator(sym)
    if generator is not None:
        direction, step = generator
        points = np.zeros((1, n)) if step == 0.0 else _period_points(direction, step)
        values = np.abs(sym(points))
        index = int(np.argmin(values))
        inf = float(values[index])
        if inf < floor:
            return InvertibilityVerdict("not-invertible", inf, points[index], exact=True)
        return InvertibilityVerdict("invertible", inf, exact=True)

    points = s_grid(n) if s is None else np.asarray(s, dtype=float).reshape(-1, n)
    values = np.abs(sym(points))
    index = int(np.nanargmin(values))
    inf = float(values[index])
    if inf < floor:
        return InvertibilityVerdict("not-invertible", inf, points[index])
    return InvertibilityVerdict("inconclusive", inf)


# ---------------------------------------------------------------------------
# Спектр
# ---------------------------------------------------------------------------

def cesaro_boundary_radius(theta, n: int):
    """
    Граница области, содержащей σ(C_n): r(θ) = 2(2^{n−1} − 1 + cos θ).
    """
    if n < 2:
        raise SpecError("Область r ≤ 2(2^{n−1} − 1 + cos θ) описывает спектр только при n ≥ 2")
    return 2.0 * (2.0 ** (n - 1) - 1.0 + np.cos(theta))


def cesaro_spectrum_membership(z, n: int, tol: float = MEMBERSHIP_TOL):
    """
    Принадлежит ли z = re^{iθ} области r ≤ 2(2^{n−1} − 1 + cos θ), n ≥ 2.

    :return: bool или массив bool.
    """
    z = np.asarray(z, dtype=complex)
    inside = np.abs(z) <= cesaro_boundary_radius(np.angle(z), n) + tol
    return bool(inside) if inside.ndim == 0 else inside


def on_cesaro_circle(z, tol: float = MEMBERSHIP_TOL):
    """
    σ(C_1) — окружность |z − 1| = 1.
    """
    z = np.asarray(z, dtype=complex)
    inside = np.abs(np.abs(z - 1.0) - 1.0) <= tol
    return bool(inside) if inside.ndim == 0 else inside


@dataclass
class SpectrumCloud:
    points: np.ndarray              # значения φ(s)
    s: np.ndarray                   # точки (P, n)
    predicate: str = "none"         # cesaro | circle | none
    dimension: int = 1
    resolution: float = 0.0
    tolerance: float = MEMBERSHIP_TOL

    @property
    def violations(self) -> int:
        if self.predicate == "circle":
            return int(np.sum(~on_cesaro_circle(self.points, self.tolerance)))
        if self.predicate == "cesaro":
            return int(np.sum(~cesaro_spectrum_membership(self.points, self.dimension, self.tolerance)))
        return 0

    @property
    def max_modulus(self) -> float:
        return float(np.max(np.abs(self.points))) if self.points.size else 0.0

    def to_dict(self) -> dict:
        return {
            "samples": int(self.points.size),
            "predicate": self.predicate,
            "violations": self.violations,
            "max_modulus": self.max_modulus,
            "resolution": self.resolution,
        }


def spectrum_cloud(sym: Symbol, s=None) -> SpectrumCloud:
    """
    Значения φ на сетке s как облако точек спектра; для Чезаро прикладывается
    аналитический предикат (окружность при n = 1, область-кардиоида при n ≥ 2).
    """
    _require_l2(sym)
    n = sym.dimension
    points = s_grid(n) if s is None else np.asarray(s, dtype=float).reshape(-1, n)
    values = np.asarray(sym(points), dtype=complex)
    predicate = "none"
    if sym.variant == "cesaro" and sym.params["scale"] == 1.0:
        predicate = "circle" if n == 1 else "cesaro"
    cloud = SpectrumCloud(values, points, predicate, n, _grid_resolution(points))
    if cloud.violations:
        logger.warning("%s: %d точек облака вне аналитической области", sym.name, cloud.violations)
    return cloud


def classify_operator(sym: Symbol, s=None, tol: float = CLASSIFY_TOL) -> frozenset:
    """
    Самосопряжённость (φ вещественна), положительность (φ ≥ 0), унитарность (|φ| = 1).

    :return: множество меток; {"none-of-these"}, если ни одна не подходит.
    """
    _require_l2(sym)
    n = sym.dimension
    if s is None:
        generator = single_generator(sym)
        if generator is not None and generator[1] > 0:
            s = _period_points(*generator)
        else:
            s = s_grid(n)
    values = np.asarray(sym(np.asarray(s, dtype=float).reshape(-1, n)), dtype=complex)
    labels = set()
    if np.max(np.abs(values.imag)) <= tol:
        labels.add("self-adjoint")
        if np.min(values.real) >= -tol:
            labels.add("positive")
    if np.max(np.abs(np.abs(values) - 1.0)) <= tol:
        labels.add("unitary")
    return frozenset(labels) if labels else frozenset({"none-of-these"})


# ---------------------------------------------------------------------------
# Степенные ряды и обращение дискретных операторов
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerSeries:
    """
    Усечённый степенной ряд Σ_{k=0}^{K} c_k z^k.
    """
    coefficients: np.ndarray = field(default_factory=lambda: np.ones(1))

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex).ravel()
        if c.size == 0 or not np.all(np.isfinite(c)):
            raise SpecError("Коэффициенты ряда должны быть конечными и их должно быть хотя бы один")
        object.__setattr__(self, "coefficients", c)

    @property
    def terms(self) -> int:
        return self.coefficients.size - 1

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(np.asarray(z, dtype=complex), self.coefficients)

    def truncated(self, terms: int) -> "PowerSeries":
        c = np.zeros(terms + 1, dtype=complex)
        size = min(terms + 1, self.coefficients.size)
        c[:size] = self.coefficients[:size]
        return PowerSeries(c)

    def convolve(self, other: "PowerSeries") -> "PowerSeries":
        terms = max(self.terms, other.terms)
        return PowerSeries(np.convolve(self.coefficients, other.coefficients)[:terms + 1])

    def reciprocal(self, terms: int | None = None) -> "PowerSeries":
        """
        1/F по рекурсии c_0 b_0 = 1, Σ_{j=0}^{k} c_j b_{k−j} = 0 при k ≥ 1.
        """
        terms = self.terms if terms is None else terms
        c = self.truncated(terms).coefficients
        if c[0] == 0:
            raise NotInvertibleError("Свободный член ряда равен нулю, обратного ряда нет")
        b = np.zeros(terms + 1, dtype=complex)
        b[0] = 1.0 / c[0]
        for k in range(1, terms + 1):
            b[k] = -np.dot(c[1:k + 1], b[k - 1::-1]) / c[0]
        return PowerSeries(b)

    def tail_estimate(self, window: int = 4) -> float:
        """
        Оценка Σ_{k>K}|c_k| геометрическим продолжением последних коэффициентов.
        """
        magnitudes = np.abs(self.coefficients)
        tail = np.where(magnitudes <= ROUNDOFF_TOL * np.max(magnitudes), 0.0, magnitudes)[-window:]
        if np.all(tail == 0):
            return 0.0
        ratios = [tail[i + 1] / tail[i] for i in range(tail.size - 1) if tail[i] > 0]
        if not ratios:
            return float(tail[-1])
        ratio = max(ratios)
        if ratio >= 1.0:
            return math.inf
        return float(tail[-1] * ratio / (1.0 - ratio))


def _generator_ratios(spec: OperatorSpec) -> np.ndarray:
    if spec.measure.kind != "discrete" or spec.measure.dimension != 1:
        raise UnsupportedVariantError(f"{spec.name}: обращение через ряд требует дискретной меры на k = 0, 1, …")
    atoms = spec.measure.atoms[:, 0]
    if np.any(atoms < 0) or not np.allclose(atoms, np.round(atoms), rtol=0, atol=INTEGER_TOL):
        raise UnsupportedVariantError(f"{spec.name}: атомы должны быть неотрицательными целыми")
    forms = spec.family.forms
    if any(f.form != "geometric" or f.scale != 1.0 for f in forms):
        raise UnsupportedVariantError(f"{spec.name}: семейство должно иметь вид A(k) = A^k")
    return np.array([f.ratio for f in forms])


def generating_series(spec: OperatorSpec) -> PowerSeries:
    """
    F(z) = Σ_k Φ(k)(det A)^{−k/2} z^k для оператора с A(k) = A^k, так что φ(s) = F(e^{−i s·ln λ}).
    """
    if spec.p != 2.0:
        raise SpecError("Производящий ряд строится при p = 2")
    _generator_ratios(spec)
    coefficients, _ = discrete_coefficients(spec)
    index = np.round(spec.measure.atoms[:, 0]).astype(int)
    c = np.zeros(int(index.max()) + 1, dtype=complex)
    np.add.at(c, index, coefficients)
    return PowerSeries(c)


def inverse_series(spec: OperatorSpec, terms: int = SERIES_TERMS) -> tuple:
    """
    (F, G = 1/F) для дискретного оператора, с проверкой обратимости по символу.
    """
    F = generating_series(spec)
    verdict = invertibility(build_symbol(spec))
    if not verdict.invertible:
        raise NotInvertibleError(f"{spec.name}: inf|F| на окружности ≈ {verdict.inf_estimate:.3e}, "
                                 f"оператор необратим", verdict.witness, verdict.inf_estimate)
    G = F.reciprocal(terms)
    return F, G


def discrete_inverse(spec: OperatorSpec, terms: int = SERIES_TERMS,
                     tail_tol: float = SERIES_TAIL_TOL) -> OperatorSpec:
    """
    Обратный оператор H⁻¹f(x) = Σ_k b(k)(det A)^{k/2} f(A^k x), где G = 1/F = Σ b(k)z^k.

    :param spec: дискретный оператор с A(k) = A^k.
    :param terms: K — длина обратного ряда.
    :param tail_tol: допустимый хвост Σ_{k>K}|b(k)|.
    :return: OperatorSpec обратного оператора.
    """
    ratios = _generator_ratios(spec)
    _, G = inverse_series(spec, terms)
    tail = G.tail_estimate()
    if tail > tail_tol:
        raise SeriesTruncationError(f"{spec.name}: хвост обратного ряда {tail:.3e} при K = {terms} "
                                    f"больше допустимого {tail_tol:g}", tail)
    if tail > 0:
        logger.info("%s: хвост обратного ряда %.3e", spec.name, tail)
    k = np.arange(G.terms + 1, dtype=float)
    det = float(np.prod(ratios))
    weights = G.coefficients * det ** (k / 2.0)
    if np.all(np.abs(weights.imag) <= 1e-15 * np.max(np.abs(weights))):
        weights = weights.real
    kernel = KernelSpec("discrete", {"weights": weights},
                        nonnegative=bool(np.all(np.isreal(weights)) and np.all(np.real(weights) >= 0)))
    name = spec.name + "⁻¹"
    return OperatorSpec(MeasureSpace.discrete(k), kernel, spec.family, p=2.0, name=name)
