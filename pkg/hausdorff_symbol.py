"""
Символ оператора Хаусдорфа

    φ(s) = ∫_Ω Φ(u)·(det A(u))^{−1/p}·∏_j a_j(u)^{−i s_j} dμ(u),

по квадратуре и по замкнутым формулам (Чезаро, (C,k), дискретные операторы),
а также комплексная гамма-функция, нужная для (C,k).
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from hausdorff_core import (
    CHUNK_BUDGET,
    MAX_PANEL_NODES,
    NODES_PER_PERIOD,
    NONNEGATIVE_TOL,
    OperatorSpec,
    QuadratureBudgetError,
    SpecError,
    UnsupportedVariantError,
)

logger = logging.getLogger(__name__)

# Приближение Ланцоша, g = 7, 9 коэффициентов
LANCZOS_G = 7
LANCZOS_COEFFICIENTS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

NODE_LADDER = (12, 16, 24, 32, 48, 64, 96, 128, 192, 256)  # ступени числа узлов на панель
MAX_RULE_SIZE = 2 ** 22     # потолок узлов тензорной формулы по Ω
POINT_CACHE_SIZE = 65536    # сколько значений φ(s) в отдельных точках помнить
INFINITE_PRODUCT_TERMS = 10000


# ---------------------------------------------------------------------------
# Гамма-функция
# ---------------------------------------------------------------------------

def complex_log_gamma(z):
    """
    Логарифм Γ(z) для комплексных z (ветвь не главная: exp даёт Γ, мнимая часть
    определена с точностью до 2πi).

    :param z: число или массив.
    :return: комплексный массив той же формы.
    """
    z = np.asarray(z, dtype=complex)
    poles = (z.imag == 0) & (z.real <= 0) & (z.real == np.round(z.real))
    if np.any(poles):
        raise ValueError(f"Γ имеет полюс в точке {z[poles].ravel()[0].real:g}")

    reflect = z.real < 0.5
    w = np.where(reflect, 1.0 - z, z) - 1.0
    x = np.full(w.shape, LANCZOS_COEFFICIENTS[0], dtype=complex)
    for k in range(1, LANCZOS_G + 2):
        x = x + LANCZOS_COEFFICIENTS[k] / (w + k)
    t = w + LANCZOS_G + 0.5
    log_gamma = 0.5 * math.log(2.0 * math.pi) + (w + 0.5) * np.log(t) - t + np.log(x)
    if not np.any(reflect):
        return log_gamma
    with np.errstate(over="ignore", invalid="ignore"):
        reflected = math.log(math.pi) - np.log(np.sin(np.pi * z)) - log_gamma
    return np.where(reflect, reflected, log_gamma)


def complex_gamma(z):
    """
    Γ(z) через приближение Ланцоша, для Re z < 1/2 — через формулу отражения
    Γ(z)Γ(1 − z) = π / sin(πz).

    :param z: число или массив; неположительные целые отвергаются (ValueError).
    :return: комплексное число или массив.
    """
    values = np.exp(complex_log_gamma(z))
    return complex(values) if values.ndim == 0 else values


def ck_finite_product(k: int, s, p: float = 2.0):
    """
    Символ (C,k) при натуральном k: k!/∏_{j=0}^{k−1}(z + j), z = 1 − 1/p − is.
    """
    if k != int(k) or k < 1:
        raise SpecError(f"Конечное произведение определено для натуральных k, получено {k}")
    z = (1.0 - 1.0 / p) - 1j * np.asarray(s, dtype=float)
    result = np.full(z.shape, float(math.factorial(int(k))), dtype=complex)
    for j in range(int(k)):
        result = result / (z + j)
    return result


def ck_infinite_product(k: float, s, terms: int = INFINITE_PRODUCT_TERMS, p: float = 2.0):
    """
    Символ (C,k) как бесконечное произведение ∏_{l≥1} l(k + l − 1 + z)/((k + l)(l − 1 + z)),
    обрезанное на terms множителях; хвост произведения O(1/terms).
    """
    z = (1.0 - 1.0 / p) - 1j * np.asarray(s, dtype=float)
    l = np.arange(1, terms + 1, dtype=float)
    factors = l * (k + l - 1.0 + z[..., None]) / ((k + l) * (l - 1.0 + z[..., None]))
    return np.prod(factors, axis=-1)


# ---------------------------------------------------------------------------
# Символ
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Symbol:
    """
    Символ оператора.

    variant: cesaro | ck | discrete | quadrature | adjoint | product.
    params: scale (cesaro, ck), k (ck), coefficients и log_eigenvalues (discrete).
    parts: символы-сомножители (product) или исходный символ (adjoint).
    """
    variant: str
    dimension: int
    p: float = 2.0
    params: dict = field(default_factory=dict)
    spec: OperatorSpec | None = None
    parts: tuple = ()
    nonnegative_kernel: bool = False
    name: str = ""

    @property
    def has_closed_form(self) -> bool:
        if self.variant in ("cesaro", "ck", "discrete"):
            return True
        if self.variant in ("adjoint", "product"):
            return all(part.has_closed_form for part in self.parts)
        return False

    @property
    def decays(self) -> bool:
        """
        |φ(s)| → 0 при |s| → ∞ (известно аналитически).
        """
        if self.variant in ("cesaro", "ck"):
            return True
        if self.variant == "adjoint":
            return self.parts[0].decays
        if self.variant == "product":
            return any(part.decays for part in self.parts)
        if self.variant == "quadrature":
            forms = self.spec.family.forms
            axes = [f.axis for f in forms]
            return (self.spec.measure.kind == "box"
                    and all(f.form == "coordinate" and f.power != 0 for f in forms)
                    and len(set(axes)) == len(axes))
        return False

    def __call__(self, s) -> np.ndarray:
        return evaluate_symbol(self, s)

    def at(self, s) -> complex:
        """
        φ в одной точке (значения запоминаются по точному кортежу s).
        """
        key = tuple(float(v) for v in np.atleast_1d(np.asarray(s, dtype=float)).ravel())
        if len(key) != self.dimension:
            raise SpecError(f"Ожидалась точка из ℝ^{self.dimension}, получено {key}")
        return _point_value(self, key)


@lru_cache(maxsize=POINT_CACHE_SIZE)
def _point_value(symbol: Symbol, key: tuple) -> complex:
    return complex(evaluate_symbol(symbol, np.asarray(key)[None, :])[0])


def as_s_points(s, n: int):
    """
    Приводит s к массиву (P, n).

    :return: (points, shape) — точки и форма результата.
    """
    s = np.asarray(s, dtype=float)
    if n == 1 and (s.ndim < 2 or s.shape[-1] != 1):
        s = s[..., None]
    if s.ndim == 0 or s.shape[-1] != n:
        raise SpecError(f"Точки s должны иметь последнюю ось длины {n}, получено {s.shape}")
    return s.reshape(-1, n), s.shape[:-1]


def _kernel_nonnegative(spec: OperatorSpec) -> bool:
    if spec.kernel.nonnegative:
        return True
    if spec.kernel.form in ("cesaro", "ck"):
        scale = complex(spec.kernel.scale)
        return scale.imag == 0 and scale.real >= 0
    if spec.measure.kind == "discrete":
        values = spec.kernel_values(spec.measure.base_rule)
        return bool(np.all(np.abs(np.imag(values)) <= NONNEGATIVE_TOL)
                    and np.all(np.real(values) >= -NONNEGATIVE_TOL))
    return False


def _is_unit_box(spec: OperatorSpec) -> bool:
    measure = spec.measure
    if measure.kind != "box" or measure.dimension != spec.dimension:
        return False
    if not (np.all(measure.low == 0.0) and np.all(measure.high == 1.0)):
        return False
    if not spec.family.is_diagonal or spec.kernel.det_power != 0.0 or spec.kernel.conjugate:
        return False
    return all(f.form == "coordinate" and f.axis == j and f.scale == 1.0 and f.power == 1.0
               for j, f in enumerate(spec.family.forms))


def discrete_coefficients(spec: OperatorSpec):
    """
    Коэффициенты c_k = μ_k·Φ(u_k)·(det A(u_k))^{−1/p} и логарифмы собственных значений
    в узлах базовой формулы: φ(s) = Σ_k c_k·exp(−i s·ln a(u_k)).
    """
    rule = spec.measure.base_rule
    log_det = spec.log_det(rule)
    coefficients = rule.weights * spec.kernel_values(rule) * np.exp(-log_det / spec.p)
    return np.asarray(coefficients, dtype=complex), spec.family.log_eigenvalues(rule)


def build_symbol(spec: OperatorSpec) -> Symbol:
    """
    Символ спецификации: замкнутая форма, если оператор её допускает, иначе квадратура.
    """
    n = spec.dimension
    if spec.kernel.conjugate and spec.p == 2.0:
        return adjoint_symbol(build_symbol(spec.adjoint()))
    nonnegative = _kernel_nonnegative(spec)
    if spec.kernel.form == "cesaro" and _is_unit_box(spec):
        return Symbol("cesaro", n, spec.p, {"scale": complex(spec.kernel.scale)}, spec,
                      nonnegative_kernel=nonnegative, name=spec.name)
    if spec.kernel.form == "ck" and n == 1 and _is_unit_box(spec):
        return Symbol("ck", 1, spec.p, {"k": spec.kernel.params["k"], "scale": complex(spec.kernel.scale)}, spec,
                      nonnegative_kernel=nonnegative, name=spec.name)
    if spec.measure.kind == "discrete":
        coefficients, log_eigs = discrete_coefficients(spec)
        return Symbol("discrete", n, spec.p, {"coefficients": coefficients, "log_eigenvalues": log_eigs}, spec,
                      nonnegative_kernel=nonnegative, name=spec.name)
    return Symbol("quadrature", n, spec.p, {}, spec, nonnegative_kernel=nonnegative, name=spec.name)


def _sum_phases(coefficients, log_eigs, flat) -> np.ndarray:
    """
    Σ_k c_k·exp(−i s·ln a_k) для всех строк s из flat (блоками).
    """
    size = max(1, coefficients.size)
    chunk = max(1, CHUNK_BUDGET // size)
    result = np.empty(flat.shape[0], dtype=complex)
    for i in range(0, flat.shape[0], chunk):
        phase = flat[i:i + chunk] @ log_eigs.T
        result[i:i + chunk] = np.exp(-1j * phase) @ coefficients
    return result


def symbol_closed_form(sym: Symbol, s) -> np.ndarray:
    """
    Замкнутая форма символа.

    cesaro: scale·∏_j (1 − 1/p − i s_j)^{−1};
    ck: scale·Γ(k+1)Γ(1 − 1/p − is)/Γ(k + 1 − 1/p − is);
    discrete: Σ_k c_k·exp(−i s·ln a_k).

    :param sym: символ с замкнутой формой.
    :param s: точки (..., n).
    :return: комплексный массив (...).
    """
    if not sym.has_closed_form:
        raise UnsupportedVariantError(f"У символа {sym.name!r} ({sym.variant}) нет замкнутой формы")
    flat, shape = as_s_points(s, sym.dimension)
    z = (1.0 - 1.0 / sym.p) - 1j * flat
    if sym.variant == "cesaro":
        values = sym.params["scale"] / np.prod(z, axis=-1)
    elif sym.variant == "ck":
        k = sym.params["k"]
        z = z[:, 0]
        values = sym.params["scale"] * np.exp(complex_log_gamma(k + 1.0) + complex_log_gamma(z)
                                              - complex_log_gamma(k + z))
    elif sym.variant == "discrete":
        values = _sum_phases(sym.params["coefficients"], sym.params["log_eigenvalues"], flat)
    elif sym.variant == "adjoint":
        values = np.conj(symbol_closed_form(sym.parts[0], flat))
    else:
        values = np.ones(flat.shape[0], dtype=complex)
        for part in sym.parts:
            values = values * symbol_closed_form(part, flat)
    return np.asarray(values, dtype=complex).reshape(shape)


def _log_rates(spec: OperatorSpec) -> np.ndarray:
    """
    Оценки |d ln a_j / dτ| на ящике (скорость набега фазы по логарифмической переменной).
    """
    rates = np.zeros(spec.dimension)
    length = spec.measure.high - spec.measure.low
    for j, form in enumerate(spec.family.forms):
        if form.form == "coordinate":
            rates[j] = abs(form.power)
        elif form.form == "geometric":
            rates[j] = length[form.axis] * abs(math.log(form.ratio))
    return rates


def required_nodes(spec: OperatorSpec, flat) -> np.ndarray:
    """
    Узлов на панель, чтобы на период осцилляции a(u)^{−is} приходилось не меньше NODES_PER_PERIOD узлов.
    """
    omega = np.abs(flat) @ _log_rates(spec)
    width = spec.measure.panel_width
    needed = np.ceil(NODES_PER_PERIOD * width * omega / (2.0 * math.pi)).astype(int) + 4
    return np.maximum(needed, spec.measure.nodes)


def _box_values(spec: OperatorSpec, flat, nodes: int) -> np.ndarray:
    refined = spec.refined(nodes)
    return _sum_phases(*discrete_coefficients(refined), flat)


def symbol_quadrature(spec: OperatorSpec, s, refuse: bool = True) -> np.ndarray:
    """
    φ(s) по квадратуре спецификации. Для ящика число узлов на панель растёт с |s|
    (не меньше NODES_PER_PERIOD узлов на период); сверх MAX_PANEL_NODES — отказ.

    :param spec: оператор.
    :param s: точки (..., n).
    :param refuse: бросать QuadratureBudgetError; иначе за пределом бюджета вернуть nan.
    :return: комплексный массив (...).
    """
    n = spec.dimension
    flat, shape = as_s_points(s, n)
    if not spec.family.is_diagonal:
        spec = spec.diagonalized()

    if n > 1 and spec.is_separable:
        values = np.ones(flat.shape[0], dtype=complex)
        for j in range(n):
            values = values * symbol_quadrature(spec.factor(j), flat[:, j], refuse)
        return values.reshape(shape)

    if spec.measure.kind == "discrete" or not spec.refinable:
        return _sum_phases(*discrete_coefficients(spec), flat).reshape(shape)

    needed = required_nodes(spec, flat)
    values = np.full(flat.shape[0], np.nan + 0j)
    over = needed > MAX_PANEL_NODES
    if np.any(over):
        worst = int(np.max(needed))
        achieved = float("nan")
        if n == 1:
            bad = flat[over]
            achieved = float(np.max(np.abs(_box_values(spec, bad, MAX_PANEL_NODES)
                                           - _box_values(spec, bad, MAX_PANEL_NODES // 2))))
        message = (f"{spec.name}: для |s| до {np.max(np.abs(flat[over])):.4g} нужно {worst} узлов на панель "
                   f"(предел {MAX_PANEL_NODES}), оценка достигнутой ошибки {achieved:.3e}")
        if refuse:
            raise QuadratureBudgetError(message, achieved, worst)
        logger.warning(message)

    ladder = sorted({spec.measure.nodes, *[m for m in NODE_LADDER if m > spec.measure.nodes]})
    level = np.searchsorted(ladder, needed)
    for i, nodes in enumerate(ladder):
        mask = (level == i) & ~over
        if not np.any(mask):
            continue
        size = spec.measure.refined(nodes).size
        if size > MAX_RULE_SIZE:
            message = f"{spec.name}: формула по Ω из {size} узлов превышает предел {MAX_RULE_SIZE}"
            if refuse:
                raise QuadratureBudgetError(message, float("nan"), nodes)
            logger.warning(message)
            continue
        values[mask] = _box_values(spec, flat[mask], nodes)
    return values.reshape(shape)


def evaluate_symbol(sym: Symbol, s) -> np.ndarray:
    """
    Значения символа: замкнутая форма, где она есть, иначе квадратура.
    """
    if sym.variant in ("cesaro", "ck", "discrete"):
        return symbol_closed_form(sym, s)
    if sym.variant == "quadrature":
        return symbol_quadrature(sym.spec, s)
    flat, shape = as_s_points(s, sym.dimension)
    if sym.variant == "adjoint":
        return np.conj(evaluate_symbol(sym.parts[0], flat)).reshape(shape)
    values = np.ones(flat.shape[0], dtype=complex)
    for part in sym.parts:
        values = values * evaluate_symbol(part, flat)
    return values.reshape(shape)


def adjoint_symbol(sym: Symbol) -> Symbol:
    """
    Символ сопряжённого оператора: поточечное сопряжение φ̄ (только в L²).
    """
    if sym.p != 2.0:
        raise SpecError(f"Сопряжённый символ определён при p = 2, у {sym.name!r} p = {sym.p}")
    if sym.variant == "adjoint":
        return sym.parts[0]
    spec = sym.spec.adjoint() if sym.spec is not None else None
    name = sym.name[:-1] if sym.name.endswith("*") else sym.name + "*"
    return Symbol("adjoint", sym.dimension, sym.p, {}, spec, parts=(sym,),
                  nonnegative_kernel=sym.nonnegative_kernel, name=name)


def product_symbol(first: Symbol, second: Symbol) -> Symbol:
    """
    Поточечное произведение φψ — символ композиции операторов.
    """
    if first.dimension != second.dimension:
        raise SpecError(f"Размерности символов не совпадают: {first.dimension} и {second.dimension}")
    if first.p != 2.0 or second.p != 2.0:
        raise SpecError("Произведение символов имеет смысл только при p = 2")
    return Symbol("product", first.dimension, 2.0, {}, None, parts=(first, second),
                  name=f"{first.name}·{second.name}")
