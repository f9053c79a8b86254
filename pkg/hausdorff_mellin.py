"""
Модифицированное преобразование Меллина по гипероктанту

    (M f)(s) = (2π)^{−n/2} ∫_U |x|^{−1/q + is} f(x) dx,

на логарифмической сетке x_j = ε_j·e^{t_j} (сводится к n-мерному БПФ), обратное
преобразование при q = 2 и численный сертификат диагонализации M(Hf) = φ·Mf.
"""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

import probes
from hausdorff_core import (
    MAX_PANEL_NODES,
    Axis,
    DomainTruncationError,
    GridFunction,
    OperatorSpec,
    QuadratureBudgetError,
    SpecError,
    UnsupportedVariantError,
    grid_points,
    tensor_difference_norm,
)
from hausdorff_operator import apply
from hausdorff_symbol import build_symbol, required_nodes, symbol_quadrature
from probes import ProbeFunction

logger = logging.getLogger(__name__)

T_RANGE = (-12.0, 12.0)
DEFAULT_COUNTS = {1: 4096, 2: 512, 3: 64}   # узлов на ось по размерности
MAX_DIMENSION = 3
TRUNCATION_MASS_LIMIT = 1e-4    # допустимая доля L²-массы f вне окна сетки
ORTHOGONAL_TOL = 1e-10
SEPARABLE_AXIS_NODES = 4096     # узлов на ось в покоординатном сертификате
MAX_WORK_EVALUATIONS = 2 ** 30  # точек сетки × узлов квадратуры в сертификате


def _is_power_of_two(value: int) -> bool:
    return value > 0 and value & (value - 1) == 0


@dataclass(frozen=True)
class MellinGrid:
    """
    Равномерная по t = ln|x_j| сетка с узлами в центрах ячеек, одинаковая по всем осям.

    t_min, t_max — окно; count — число узлов на ось (степень двойки);
    signs — знаки гипероктанта; q — показатель преобразования (q = 2 — унитарный случай).
    """
    t_min: float = T_RANGE[0]
    t_max: float = T_RANGE[1]
    count: int = DEFAULT_COUNTS[1]
    dimension: int = 1
    signs: tuple = ()
    q: float = 2.0

    def __post_init__(self):
        if not 1 <= self.dimension <= MAX_DIMENSION:
            raise UnsupportedVariantError(f"Преобразование Меллина поддерживается при n ≤ {MAX_DIMENSION}, "
                                          f"получено n = {self.dimension}")
        if not _is_power_of_two(self.count):
            raise SpecError(f"Число узлов должно быть степенью двойки, получено {self.count}")
        if not self.t_max > self.t_min:
            raise SpecError(f"Пустое окно по t: [{self.t_min}, {self.t_max}]")
        signs = tuple(self.signs) or (1,) * self.dimension
        if len(signs) != self.dimension or any(sign not in (1, -1) for sign in signs):
            raise SpecError(f"Знаки гипероктанта {signs} не подходят для n = {self.dimension}")
        object.__setattr__(self, "signs", signs)

    @classmethod
    def default(cls, n: int = 1, signs=()) -> "MellinGrid":
        if n not in DEFAULT_COUNTS:
            raise UnsupportedVariantError(f"Преобразование Меллина поддерживается при n ≤ {MAX_DIMENSION}")
        return cls(T_RANGE[0], T_RANGE[1], DEFAULT_COUNTS[n], n, tuple(signs))

    @classmethod
    def from_axes(cls, axes, q: float = 2.0) -> "MellinGrid":
        """
        Сетка по готовым равномерным логарифмическим осям (все оси с одним окном).
        """
        axes = tuple(axes)
        first = axes[0]
        if any(a.kind != "log" or a.spacing is None for a in axes):
            raise SpecError("Оси должны быть равномерными логарифмическими")
        step = first.spacing
        t_min = float(first.t[0]) - 0.5 * step
        for a in axes:
            if a.size != first.size or not math.isclose(a.spacing, step, rel_tol=1e-9) \
                    or not math.isclose(float(a.t[0]), float(first.t[0]), rel_tol=0, abs_tol=1e-9):
                raise SpecError("Оси сетки Меллина должны совпадать по окну и шагу")
        return cls(t_min, t_min + first.size * step, first.size, len(axes), tuple(a.sign for a in axes), q)

    @property
    def spacing(self) -> float:
        return (self.t_max - self.t_min) / self.count

    @property
    def t_nodes(self) -> np.ndarray:
        return self.t_min + (np.arange(self.count) + 0.5) * self.spacing

    @property
    def raw_frequencies(self) -> np.ndarray:
        return 2.0 * math.pi * np.fft.fftfreq(self.count, self.spacing)

    @property
    def s_nodes(self) -> np.ndarray:
        return np.fft.fftshift(self.raw_frequencies)

    @property
    def s_spacing(self) -> float:
        return 2.0 * math.pi / (self.count * self.spacing)

    @property
    def axes(self) -> tuple:
        return tuple(Axis.log_uniform(self.t_min, self.t_max, self.count, sign) for sign in self.signs)

    @property
    def s_axes(self) -> tuple:
        return tuple(Axis.frequency(self.s_nodes, self.s_spacing, dual=axis, q=self.q) for axis in self.axes)

    def padded(self, factor: int) -> "MellinGrid":
        """
        Окно, расширенное в factor раз вокруг центра, с тем же шагом.
        """
        center = 0.5 * (self.t_min + self.t_max)
        half = 0.5 * factor * (self.t_max - self.t_min)
        return replace(self, t_min=center - half, t_max=center + half, count=self.count * factor)

    def refined(self, factor: int) -> "MellinGrid":
        return replace(self, count=self.count * factor)

    def aligned(self, step: float) -> "MellinGrid":
        """
        Шаг уменьшается до step/⌈step/Δt⌉, чтобы сдвиг на step был целым числом ячеек;
        число узлов и центр окна сохраняются.
        """
        spacing = step / math.ceil(step / self.spacing - 1e-12)
        center = 0.5 * (self.t_min + self.t_max)
        half = 0.5 * self.count * spacing
        return replace(self, t_min=center - half, t_max=center + half)

    def axis_grid(self, axis: int, count: int | None = None) -> "MellinGrid":
        return MellinGrid(self.t_min, self.t_max, count or self.count, 1, (self.signs[axis],), self.q)

    def with_signs(self, signs) -> "MellinGrid":
        return replace(self, signs=tuple(signs))

    def window(self) -> tuple:
        return math.exp(self.t_min), math.exp(self.t_max)


def _same_grid(first: MellinGrid, second: MellinGrid) -> bool:
    return (first.count == second.count and first.dimension == second.dimension
            and first.signs == second.signs
            and math.isclose(first.t_min, second.t_min, rel_tol=0, abs_tol=1e-9)
            and math.isclose(first.t_max, second.t_max, rel_tol=0, abs_tol=1e-9))


def _along(vector: np.ndarray, axis: int, n: int) -> np.ndarray:
    shape = [1] * n
    shape[axis] = vector.size
    return vector.reshape(shape)


def _window_mask(axes, grid: MellinGrid) -> np.ndarray:
    mask = np.ones(tuple(a.size for a in axes), dtype=bool)
    for j, axis in enumerate(axes):
        inside = (axis.t > grid.t_min) & (axis.t < grid.t_max)
        mask &= _along(inside, j, len(axes))
    return mask


def truncation_mass(f, grid: MellinGrid) -> float:
    """
    Доля L²-массы f за пределами окна сетки (оценка по сетке, расширенной вдвое).
    """
    f = probes.as_probe(f)
    if f.is_product:
        inside = 1.0
        for j, factor in enumerate(f.factors):
            inside *= 1.0 - truncation_mass(factor, grid.axis_grid(j))
        return 1.0 - inside
    wide = grid.padded(2)
    sampled = GridFunction.sample(f, wide.axes)
    density = sampled.weights() * np.abs(sampled.values) ** 2
    total = float(np.sum(density))
    if total == 0.0:
        return 0.0
    return float(np.sum(density[~_window_mask(wide.axes, grid)]) / total)


def _grid_values(f, grid: MellinGrid, strict: bool) -> np.ndarray:
    if isinstance(f, GridFunction) and f.shape == (grid.count,) * grid.dimension:
        try:
            if _same_grid(MellinGrid.from_axes(f.axes), grid):
                return f.values
        except SpecError:
            pass
    f = probes.as_probe(f)
    if f.dimension != grid.dimension:
        raise SpecError(f"Функция размерности {f.dimension} на сетке размерности {grid.dimension}")
    mass = truncation_mass(f, grid)
    if mass > TRUNCATION_MASS_LIMIT:
        message = (f"{f.name}: доля L²-массы вне окна [e^{grid.t_min:g}, e^{grid.t_max:g}] равна {mass:.3e} "
                   f"(порог {TRUNCATION_MASS_LIMIT:g})")
        if strict:
            raise DomainTruncationError(message, mass)
        logger.warning(message)
    return GridFunction.sample(f, grid.axes).values


def mellin_forward(f, grid: MellinGrid | None = None, q: float | None = None, strict: bool = True) -> GridFunction:
    """
    Прямое преобразование Меллина.

    После замены x_j = ε_j·e^{t_j} интеграл равен (2π)^{−n/2}∫e^{t(1−1/q)}f(εe^t)e^{ist}dt
    и на сетке вычисляется одним n-мерным БПФ.

    :param f: GridFunction на равномерной логарифмической сетке или вычислимая функция.
    :param grid: сетка (по умолчанию — по осям f или стандартная для размерности).
    :param q: показатель (по умолчанию из сетки).
    :param strict: бросать DomainTruncationError, если у f заметная масса вне окна.
    :return: GridFunction на s-сетке (частоты по возрастанию).
    """
    if grid is None:
        grid = MellinGrid.from_axes(f.axes) if isinstance(f, GridFunction) else \
            MellinGrid.default(probes.as_probe(f).dimension)
    if q is not None and q != grid.q:
        grid = replace(grid, q=float(q))
    n, count, step = grid.dimension, grid.count, grid.spacing
    values = np.asarray(_grid_values(f, grid, strict), dtype=complex)

    t = grid.t_nodes
    weight = np.exp(t * (1.0 - 1.0 / grid.q))
    for j in range(n):
        values = values * _along(weight, j, n)
    spectrum = np.fft.ifftn(values) * float(count) ** n
    factor = step * np.exp(1j * grid.raw_frequencies * t[0]) / math.sqrt(2.0 * math.pi)
    for j in range(n):
        spectrum = spectrum * _along(factor, j, n)
    return GridFunction(grid.s_axes, np.fft.fftshift(spectrum))


def mellin_inverse(g: GridFunction, grid: MellinGrid | None = None) -> GridFunction:
    """
    Обратное преобразование (только q = 2, где M унитарно).

    :param g: GridFunction на s-сетке, полученной из mellin_forward.
    :param grid: ожидаемая сетка; несовпадение — SpecError.
    :return: GridFunction на логарифмической сетке.
    """
    if any(a.kind != "frequency" or a.dual is None for a in g.axes):
        raise SpecError("Обратное преобразование ждёт функцию на s-сетке")
    if any(a.q != 2.0 for a in g.axes):
        raise SpecError("Обратное преобразование определено только при q = 2")
    own = MellinGrid.from_axes([a.dual for a in g.axes])
    if grid is not None and not _same_grid(grid, own):
        raise SpecError("s-сетка функции не совпадает с заданной сеткой")
    if not np.allclose(g.axes[0].nodes, own.s_nodes, rtol=1e-12, atol=1e-12):
        raise SpecError("Частоты s-сетки не согласованы с её t-сеткой")
    n, count = own.dimension, own.count
    t = own.t_nodes

    values = np.fft.ifftshift(g.values)
    factor = math.sqrt(2.0 * math.pi) * np.exp(-1j * own.raw_frequencies * t[0]) / own.spacing
    for j in range(n):
        values = values * _along(factor, j, n)
    restored = np.fft.fftn(values) / float(count) ** n
    decay = np.exp(-0.5 * t)
    for j in range(n):
        restored = restored * _along(decay, j, n)
    return GridFunction(own.axes, restored)


def rotate_frame(f, basis, tol: float = ORTHOGONAL_TOL) -> ProbeFunction:
    """
    x ↦ f(Cx) для ортогональной C.
    """
    f = probes.as_probe(f)
    basis = np.asarray(basis, dtype=float)
    n = f.dimension
    if basis.shape != (n, n):
        raise SpecError(f"Матрица поворота {basis.shape} для функции размерности {n}")
    if np.max(np.abs(basis.T @ basis - np.eye(n))) > tol:
        raise SpecError("Матрица поворота не ортогональна")
    if np.array_equal(basis, np.eye(n)):
        return f

    def func(x):
        return f(x @ basis.T)

    return ProbeFunction(f"{f.name}∘C", func, dimension=n)


def split_hyperoctants(f, grid: MellinGrid) -> dict:
    """
    Сужения f на все 2ⁿ гипероктанта: {знаки: GridFunction на соответствующей сетке}.
    """
    f = probes.as_probe(f)
    pieces = {}
    for signs in np.ndindex(*(2,) * grid.dimension):
        signs = tuple(1 if bit == 0 else -1 for bit in signs)
        pieces[signs] = GridFunction.sample(f, grid.with_signs(signs).axes)
    return pieces


def mellin_vector(f, grid: MellinGrid) -> dict:
    """
    Vf = (M_j f_j)_j по гипероктантам: {знаки: GridFunction на s-сетке}.
    """
    return {signs: mellin_forward(piece, grid.with_signs(signs))
            for signs, piece in split_hyperoctants(f, grid).items()}


def lattice_step(spec: OperatorSpec) -> float | None:
    """
    Шаг решётки ln a(u) для дискретных геометрических семейств (None, если решётки нет).
    """
    if spec.measure.kind != "discrete":
        return None
    atoms = spec.measure.atoms
    if not np.allclose(atoms, np.round(atoms), rtol=0, atol=1e-12):
        return None
    steps = set()
    for form in spec.family.forms:
        if form.form == "geometric" and form.scale == 1.0:
            steps.add(abs(math.log(form.ratio)))
        elif form.form == "constant":
            steps.add(abs(math.log(form.value)))
        else:
            return None
    steps = {round(step, 12) for step in steps if step > 0}
    return steps.pop() if len(steps) == 1 else None


@dataclass
class ResidualParts:
    transformed_image: GridFunction     # M(Hf)
    multiplied: GridFunction            # φ·Mf
    transformed: GridFunction           # Mf
    band: np.ndarray                    # где φ вычислен


def _symbol_on(spec: OperatorSpec, s_axes):
    symbol = build_symbol(spec)
    points = grid_points(s_axes)
    shape = tuple(a.size for a in s_axes)
    if symbol.has_closed_form:
        return symbol(points).reshape(shape), np.ones(shape, dtype=bool)
    if spec.measure.kind == "box" and spec.refinable:
        band = required_nodes(spec, points) <= MAX_PANEL_NODES
    else:
        band = np.ones(points.shape[0], dtype=bool)
    values = np.zeros(points.shape[0], dtype=complex)
    if np.any(band):
        values[band] = symbol_quadrature(spec, points[band])
    return values.reshape(shape), band.reshape(shape)


def residual_parts(spec: OperatorSpec, f, grid: MellinGrid, pad: int = 4, refine: int = 2) -> ResidualParts:
    """
    M(Hf), φ·Mf и Mf на рабочей сетке: f сужается на окно grid, H применяется к сужению
    точно, преобразование берётся на сетке, расширенной в pad раз и измельчённой в refine раз.
    """
    low, high = grid.window()
    window = probes.restrict(f, low, high)
    work = grid
    step = lattice_step(spec)
    if step is not None:
        work = work.aligned(step)
    work = work.padded(pad).refined(refine)

    evaluations = work.count ** work.dimension * spec.measure.size
    if spec.dimension > 1 and not spec.is_separable and evaluations > MAX_WORK_EVALUATIONS:
        raise QuadratureBudgetError(f"{spec.name}: сертификат потребовал бы {evaluations:.3g} вычислений "
                                    f"(предел {MAX_WORK_EVALUATIONS:.3g})", float("nan"), 0)

    axes = work.axes
    sampled = GridFunction.sample(window, axes)
    image = apply(spec, window, axes)
    transformed = mellin_forward(sampled, work)
    transformed_image = mellin_forward(image, work)
    phi, band = _symbol_on(spec, transformed.axes)
    return ResidualParts(transformed_image, transformed.with_values(phi * transformed.values), transformed, band)


def diagonalization_residual(spec: OperatorSpec, f, grid: MellinGrid | None = None,
                             pad: int | None = None, refine: int | None = None) -> float:
    """
    ‖M(Hf) − φ·Mf‖₂ / ‖Mf‖₂ — численная проверка того, что H унитарно эквивалентен
    умножению на символ.

    Недиагональное семейство сводится к диагональному поворотом f ↦ f∘C.
    Для разделимых операторов и f-произведений норма разности собирается из
    одномерных множителей (на сетке не меньше SEPARABLE_AXIS_NODES узлов по оси).

    :param spec: оператор с p = 2.
    :param f: тестовая функция (сужается на окно сетки).
    :param grid: сетка Меллина (по умолчанию стандартная для размерности).
    :param pad: во сколько раз расширить окно при преобразовании.
    :param refine: во сколько раз измельчить шаг.
    """
    if spec.p != 2.0:
        raise SpecError(f"Сертификат диагонализации проверяется в L², а у {spec.name} p = {spec.p}")
    f = probes.as_probe(f)
    n = spec.dimension
    grid = MellinGrid.default(n) if grid is None else grid
    if grid.dimension != n or f.dimension != n:
        raise SpecError(f"Размерности не согласованы: оператор {n}, сетка {grid.dimension}, функция {f.dimension}")
    if not spec.family.is_diagonal:
        f = rotate_frame(f, spec.family.basis)
        spec = spec.diagonalized()

    mass = truncation_mass(f, grid)
    if mass > TRUNCATION_MASS_LIMIT:
        raise DomainTruncationError(f"{f.name}: доля L²-массы вне окна сетки {mass:.3e}", mass)

    if n > 1 and spec.is_separable and f.is_product:
        images, multiplied = [], []
        norm_f = 1.0
        for j in range(n):
            axis_grid = grid.axis_grid(j, max(grid.count, SEPARABLE_AXIS_NODES))
            parts = residual_parts(spec.factor(j), f.factors[j], axis_grid, pad or 4, refine or 2)
            images.append(parts.transformed_image)
            multiplied.append(parts.multiplied)
            norm_f *= parts.transformed.norm()
        if norm_f == 0:
            return 0.0
        return tensor_difference_norm(images, multiplied) / norm_f

    default_pad, default_refine = (4, 2) if n == 1 else (2, 1)
    parts = residual_parts(spec, f, grid, pad or default_pad, refine or default_refine)
    norm = parts.transformed.norm()
    if norm == 0:
        return 0.0
    difference = np.where(parts.band, parts.transformed_image.values - parts.multiplied.values, 0.0)
    return parts.transformed.with_values(difference).norm() / norm
