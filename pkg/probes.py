"""
Библиотека тестовых функций: индикаторы, гауссовы «шапочки», x^a·e^{−x}, пробная
функция Харди и т.п. Для каждой известны точки негладкости (breaks), чтобы квадратура
по Ω разбивала панели именно там, и предел на бесконечности, если он есть.

Функции принимают массив точек формы (..., n) и возвращают массив (...).
"""

from dataclasses import dataclass

import numpy as np

from hausdorff_core import GridFunction, SpecError


@dataclass(frozen=True, eq=False)
class ProbeFunction:
    """
    Вычислимая функция на ℝⁿ.

    breaks — по каждой оси значения |x_j|, где функция негладкая;
    factors — одномерные сомножители, если функция — произведение по координатам;
    limit — предел на бесконечности (для проверки регулярности);
    support — сеточная функция, если значения известны только на её носителе.
    """
    name: str
    func: object
    dimension: int = 1
    breaks: tuple = ()
    factors: tuple = ()
    limit: complex | None = None
    support: GridFunction | None = None

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if self.dimension == 1:
            # одномерный массив задаёт набор точек, а не одну точку
            if points.ndim < 2 or points.shape[-1] != 1:
                points = points[..., None]
        elif points.ndim == 0 or points.shape[-1] != self.dimension:
            raise SpecError(f"{self.name}: ожидались точки (..., {self.dimension}), получено {points.shape}")
        return np.asarray(self.func(points))

    @property
    def is_product(self) -> bool:
        return len(self.factors) == self.dimension and self.dimension > 1

    def axis_breaks(self, axis: int = 0) -> tuple:
        return self.breaks[axis] if axis < len(self.breaks) else ()


def indicator(low: float = 0.0, high: float = 1.0, n: int = 1) -> ProbeFunction:
    """
    1_{(low, high)ⁿ}.
    """
    if n > 1:
        return product(*[indicator(low, high) for _ in range(n)])

    def func(x):
        return ((x[..., 0] > low) & (x[..., 0] < high)).astype(float)

    edges = tuple(abs(v) for v in (low, high) if v != 0)
    return ProbeFunction(f"indicator({low:g},{high:g})", func, breaks=(edges,))


def gaussian_bump(center: float = 1.0, width: float = 0.2) -> ProbeFunction:
    """
    exp(−((x − center)/width)²) на ℝ₊, ноль при x ≤ 0.
    """
    def func(x):
        y = x[..., 0]
        return np.where(y > 0, np.exp(-((y - center) / width) ** 2), 0.0)

    return ProbeFunction(f"gaussian({center:g},{width:g})", func)


def gaussian_bump_nd(n: int, center: float = 1.0, width: float = 0.2) -> ProbeFunction:
    return product(*[gaussian_bump(center, width) for _ in range(n)])


def log_gaussian(center: float = 0.0, width: float = 1.0, amplitude: complex = 1.0) -> ProbeFunction:
    """
    amplitude·exp(−(ln x − center)²/(2·width²)) на ℝ₊: гладкая по ln x функция.
    """
    def func(x):
        y = x[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.log(np.where(y > 0, y, 1.0))
        return np.where(y > 0, amplitude * np.exp(-(t - center) ** 2 / (2 * width ** 2)), 0.0)

    return ProbeFunction(f"log_gaussian({center:g},{width:g})", func)


def hardy_probe(width: float = 10.0) -> ProbeFunction:
    """
    x^{−1/2}·exp(−(ln x)²/(2·width²)): при большом width отношение ‖Cf‖₂/‖f‖₂
    для оператора Чезаро приближается к точной константе 2.
    """
    def func(x):
        y = x[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.log(np.where(y > 0, y, 1.0))
        return np.where(y > 0, np.exp(-0.5 * t - t ** 2 / (2 * width ** 2)), 0.0)

    return ProbeFunction(f"hardy({width:g})", func)


def power_exp(a: float = 1.0) -> ProbeFunction:
    """
    x^a·e^{−x} на ℝ₊.
    """
    def func(x):
        y = x[..., 0]
        safe = np.where(y > 0, y, 1.0)
        return np.where(y > 0, safe ** a * np.exp(-safe), 0.0)

    return ProbeFunction(f"power_exp({a:g})", func)


def exponential(rate: float = 1.0) -> ProbeFunction:
    def func(x):
        y = x[..., 0]
        return np.where(y > 0, np.exp(-rate * np.where(y > 0, y, 0.0)), 0.0)

    return ProbeFunction(f"exp({rate:g})", func)


def saturation() -> ProbeFunction:
    """
    x/(1 + x) на ℝ₊ с пределом 1 на бесконечности.
    """
    def func(x):
        y = x[..., 0]
        return np.where(y > 0, y / (1.0 + np.abs(y)), 0.0)

    return ProbeFunction("saturation", func, limit=1.0)


def constant(value: complex = 1.0, n: int = 1) -> ProbeFunction:
    def func(x):
        return np.full(x.shape[:-1], value)

    return ProbeFunction(f"constant({value})", func, dimension=n, limit=value,
                         factors=tuple(constant(value if j == 0 else 1.0) for j in range(n)) if n > 1 else ())


def product(*factors: ProbeFunction) -> ProbeFunction:
    """
    f(x) = ∏_j f_j(x_j) для одномерных f_j.
    """
    if any(f.dimension != 1 for f in factors):
        raise SpecError("Сомножители произведения должны быть одномерными")
    if len(factors) == 1:
        return factors[0]

    def func(x):
        result = np.ones(x.shape[:-1], dtype=complex)
        for j, f in enumerate(factors):
            result = result * f.func(x[..., j:j + 1])
        return result

    limit = None
    if all(f.limit is not None for f in factors):
        limit = complex(np.prod([f.limit for f in factors]))
    name = "×".join(f.name for f in factors)
    return ProbeFunction(name, func, dimension=len(factors), breaks=tuple(f.axis_breaks() for f in factors),
                         factors=tuple(factors), limit=limit)


def restrict(probe: ProbeFunction, low: float, high: float) -> ProbeFunction:
    """
    Сужение на окно low < |x_j| < high по каждой координате (границы окна добавляются к breaks).
    """
    if probe.is_product:
        return product(*[restrict(f, low, high) for f in probe.factors])

    def func(x):
        inside = np.all((np.abs(x) > low) & (np.abs(x) < high), axis=-1)
        return np.where(inside, probe.func(x), 0.0)

    breaks = tuple(tuple(sorted(set(probe.axis_breaks(j)) | {low, high})) for j in range(probe.dimension))
    return ProbeFunction(f"{probe.name}|[{low:.3g},{high:.3g}]", func, dimension=probe.dimension, breaks=breaks)


def random_bumps(rng: np.random.Generator, count: int, n: int = 1, terms: int = 3) -> list:
    """
    Случайные гладкие функции: суммы нескольких логарифмических гауссиан с комплексными
    амплитудами; при n > 1 — произведения таких сумм по координатам.
    """
    probes = []
    for _ in range(count):
        factors = []
        for _ in range(n):
            centers = rng.uniform(-2.0, 2.0, terms)
            widths = rng.uniform(0.3, 1.0, terms)
            amplitudes = rng.normal(size=terms) + 1j * rng.normal(size=terms)
            parts = [log_gaussian(c, w, a) for c, w, a in zip(centers, widths, amplitudes)]
            factors.append(ProbeFunction("random_bump", _summed(parts)))
        probes.append(product(*factors))
    return probes


def _summed(parts):
    def func(x):
        return sum(part.func(x) for part in parts)

    return func


def from_grid(grid: GridFunction) -> ProbeFunction:
    breaks = tuple(tuple(sorted({float(np.min(np.abs(a.nodes))), float(np.max(np.abs(a.nodes)))}))
                   for a in grid.axes)
    return ProbeFunction("grid", grid.evaluate, dimension=grid.dimension, breaks=breaks, support=grid)


def as_probe(f) -> ProbeFunction:
    """
    Приводит вход (ProbeFunction, GridFunction или функцию от массива точек) к ProbeFunction.
    """
    if isinstance(f, ProbeFunction):
        return f
    if isinstance(f, GridFunction):
        return from_grid(f)
    if callable(f):
        return ProbeFunction(getattr(f, "__name__", "function"), f)
    raise SpecError(f"Не знаю, как вычислять {type(f).__name__}")


LIBRARY = {
    "indicator": indicator,
    "indicator01": indicator,
    "gaussian": gaussian_bump,
    "xexp": power_exp,
    "hardy": hardy_probe,
    "saturation": saturation,
    "constant": constant,
}


def library_probe(name: str, n: int = 1) -> ProbeFunction:
    """
    Функция из библиотеки по имени (для командной строки), в n измерениях — произведение по координатам.
    """
    if name not in LIBRARY:
        raise SpecError(f"Нет тестовой функции {name!r}; есть: {', '.join(LIBRARY)}")
    if name == "constant":
        return constant(1.0, n)
    return product(*[LIBRARY[name]() for _ in range(n)])
