"""
Ядро: типы для описания обобщённых операторов Хаусдорфа, квадратуры по Ω,
проверка спецификаций, встроенные операторы и JSON-схема.

Оператор задаётся тройкой (мера, ядро, семейство матриц):
    (Hf)(x) = ∫_Ω Φ(u) f(A(u)x) dμ(u),
семейство хранится уже диагонализованным: A(u) = C·diag[a_1(u),…,a_n(u)]·Cᵀ,
поэтому матрицы A(u) коммутируют по построению.
"""

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import RegularGridInterpolator

logger = logging.getLogger(__name__)

# Квадратура по ящику ведётся в переменной τ = −ln((u−l)/(h−l)) ∈ [0, LOG_DEPTH]
LOG_DEPTH = 60.0
PANEL_WIDTH = 1.0
PANEL_NODES = 12
MAX_PANEL_NODES = 256       # потолок узлов на панель (осцилляционный бюджет)
NODES_PER_PERIOD = 8
GRADED_ZONE = 0.25          # ширина зоны сгущения к u = h, в долях панели

# Допуски
ORTHOGONALITY_TOL = 1e-12
JOINT_DIAG_TOL = 1e-8
L1_CAP = 1e12
L1_TAIL_TOL = 1e-6          # относительно оценки L¹-нормы
NONNEGATIVE_TOL = 1e-14

CHUNK_BUDGET = 2 ** 21      # элементов в одном блоке вычислений
MAX_COMPOSED_ATOMS = 2 ** 22
THREADS_ENV = "HAUSDORFF_THREADS"


class HausdorffError(Exception):
    """Базовая ошибка пакета."""


class SpecError(HausdorffError, ValueError):
    """Некорректная спецификация: размерности, формы, значения параметров."""


class DomainTruncationError(HausdorffError):
    """Аргумент A(u)x уходит за область, где известна функция, с заметной массой ядра."""

    def __init__(self, message: str, mass: float):
        super().__init__(message)
        self.mass = mass


class QuadratureBudgetError(HausdorffError):
    """Квадратура не укладывается в бюджет узлов."""

    def __init__(self, message: str, achieved_error: float = float("nan"), required_nodes: int = 0):
        super().__init__(message)
        self.achieved_error = achieved_error
        self.required_nodes = required_nodes


class UnsupportedVariantError(HausdorffError):
    """Операция не определена для данного варианта символа, ядра или формы."""


class NotInvertibleError(HausdorffError):
    """Условие обратимости (inf|φ| > 0) не выполнено."""

    def __init__(self, message: str, witness=None, inf_estimate: float | None = None):
        super().__init__(message)
        self.witness = witness
        self.inf_estimate = inf_estimate


class SeriesTruncationError(HausdorffError):
    """Хвост усечённого ряда больше допустимого."""

    def __init__(self, message: str, tail: float):
        super().__init__(message)
        self.tail = tail


def worker_count() -> int:
    """
    Число потоков для блочных вычислений, из переменной окружения HAUSDORFF_THREADS.
    """
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        count = int(raw)
    except ValueError:
        logger.warning("%s=%r не число, используем 1 поток", THREADS_ENV, raw)
        return 1
    return max(1, count)


def get_md5_hash(text: str) -> str:
    return hashlib.md5(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Квадратуры
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def gauss_unit(nodes: int):
    """
    Узлы и веса Гаусса–Лежандра на [−1, 1] (кэшируются, массивы только для чтения).
    """
    x, w = leggauss(nodes)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_nodes(nodes: int, grading: float) -> int:
    if grading == 1.0:
        return nodes
    return max(nodes, math.ceil(nodes * 0.25 * grading))


def log_axis_rule(breaks=None, depth: float = LOG_DEPTH, width: float = PANEL_WIDTH,
                  nodes: int = PANEL_NODES, grading: float = 1.0):
    """
    Составная формула Гаусса–Лежандра по τ ∈ [0, depth].

    Панели ширины width; если grading ≠ 1, первая зона [0, GRADED_ZONE·width] берётся
    в переменной w с τ = zone·w^grading (сгущение к τ = 0, т.е. к u = h).
    Точки breaks, где подынтегральная функция не гладкая, становятся границами панелей.

    :param breaks: массив (P, B) значений τ; значения вне (0, depth) игнорируются. None — без разбиений.
    :param depth: длина отрезка по τ.
    :param width: ширина панели.
    :param nodes: узлов на панель.
    :param grading: показатель сгущения.
    :return: (tau, weights), массивы формы (P, N); при breaks=None P = 1.
    """
    count = max(1, math.ceil(depth / width - 1e-12))
    edges = np.linspace(0.0, depth, count + 1)
    graded = grading != 1.0
    zone = GRADED_ZONE * edges[1]
    if graded:
        edges = np.concatenate(([0.0, zone], edges[1:]))

    if breaks is None:
        breaks = np.empty((1, 0))
    breaks = np.atleast_2d(np.asarray(breaks, dtype=float))
    # лишние точки превращаются в панели нулевой ширины на правом конце
    breaks = np.where(np.isfinite(breaks) & (breaks > 0.0) & (breaks < depth), breaks, depth)
    rows = breaks.shape[0]
    all_edges = np.sort(np.concatenate((np.broadcast_to(edges, (rows, edges.size)), breaks), axis=1), axis=1)
    a = all_edges[:, :-1, None]
    b = all_edges[:, 1:, None]

    m = panel_nodes(nodes, grading)
    x, w = gauss_unit(m)
    tau = 0.5 * (a + b) + 0.5 * (b - a) * x
    weights = 0.5 * (b - a) * w

    if graded:
        gamma = float(grading)
        wa = (a / zone) ** (1.0 / gamma)
        wb = (b / zone) ** (1.0 / gamma)
        wn = 0.5 * (wa + wb) + 0.5 * (wb - wa) * x
        tau_g = zone * wn ** gamma
        weights_g = 0.5 * (wb - wa) * w * zone * gamma * wn ** (gamma - 1.0)
        in_zone = b <= zone * (1.0 + 1e-12)
        tau = np.where(in_zone, tau_g, tau)
        weights = np.where(in_zone, weights_g, weights)

    return tau.reshape(rows, -1), weights.reshape(rows, -1)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    Узлы и веса квадратуры по Ω. Массивы могут иметь ведущие пакетные оси
    (по одной формуле на каждую точку x).
    """
    points: np.ndarray                  # (..., M, m)
    weights: np.ndarray                 # (..., M)
    log_points: np.ndarray              # (..., M, m), ln u
    upper_gap: np.ndarray | None = None  # (..., M, m), h − u без потери точности
    index: np.ndarray | None = None      # (M,) номера узлов базовой формулы

    @property
    def size(self) -> int:
        return self.weights.shape[-1]

    def subset(self, mask) -> "QuadratureRule":
        mask = np.asarray(mask, dtype=bool)
        return QuadratureRule(
            points=self.points[..., mask, :],
            weights=self.weights[..., mask],
            log_points=self.log_points[..., mask, :],
            upper_gap=None if self.upper_gap is None else self.upper_gap[..., mask, :],
            index=None if self.index is None else self.index[mask],
        )


def _tensor_rules(rules) -> QuadratureRule:
    """
    Тензорное произведение одномерных формул (без пакетных осей).
    """
    grids = np.meshgrid(*[r.points[..., 0] for r in rules], indexing="ij")
    logs = np.meshgrid(*[r.log_points[..., 0] for r in rules], indexing="ij")
    gaps = np.meshgrid(*[r.upper_gap[..., 0] for r in rules], indexing="ij")
    weights = np.ones(())
    for r in rules:
        weights = np.multiply.outer(weights, r.weights)
    points = np.stack([g.ravel() for g in grids], axis=-1)
    return QuadratureRule(
        points=points,
        weights=weights.ravel(),
        log_points=np.stack([g.ravel() for g in logs], axis=-1),
        upper_gap=np.stack([g.ravel() for g in gaps], axis=-1),
        index=np.arange(points.shape[0]),
    )


# ---------------------------------------------------------------------------
# Мера, семейство, ядро
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MeasureSpace:
    """
    Пространство Ω с мерой μ: дискретное (атомы u_k с весами μ_k) или ящик [l, h]^m
    с плотностью 1 и составной квадратурой по логарифмической переменной.

    nodes — число узлов на панель, grading — показатель сгущения по каждой оси.
    """
    kind: str
    atoms: np.ndarray | None = None
    weights: np.ndarray | None = None
    low: np.ndarray | None = None
    high: np.ndarray | None = None
    nodes: int = PANEL_NODES
    depth: float = LOG_DEPTH
    panel_width: float = PANEL_WIDTH
    grading: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "discrete":
            if self.atoms is None:
                raise SpecError("Дискретной мере нужны атомы")
            atoms = np.asarray(self.atoms, dtype=float)
            if atoms.ndim == 1:
                atoms = atoms[:, None]
            if atoms.ndim != 2 or atoms.shape[0] == 0:
                raise SpecError(f"Атомы должны быть массивом (K, m), получено {atoms.shape}")
            weights = np.ones(atoms.shape[0]) if self.weights is None else np.asarray(self.weights, dtype=float)
            if weights.shape != (atoms.shape[0],):
                raise SpecError(f"Весов {weights.shape}, атомов {atoms.shape[0]}")
            object.__setattr__(self, "atoms", atoms)
            object.__setattr__(self, "weights", weights)
        elif self.kind == "box":
            low = np.atleast_1d(np.asarray(self.low, dtype=float))
            high = np.atleast_1d(np.asarray(self.high, dtype=float))
            if low.ndim != 1 or low.shape != high.shape:
                raise SpecError(f"Границы ящика несогласованы: {low.shape} и {high.shape}")
            grading = np.ones_like(low) if self.grading is None else np.atleast_1d(np.asarray(self.grading, dtype=float))
            if grading.shape != low.shape:
                raise SpecError("Показатели сгущения не совпадают по длине с границами ящика")
            object.__setattr__(self, "low", low)
            object.__setattr__(self, "high", high)
            object.__setattr__(self, "grading", grading)
        else:
            raise SpecError(f"Неизвестный вид меры: {self.kind!r}")

    @classmethod
    def discrete(cls, atoms, weights=None) -> "MeasureSpace":
        return cls(kind="discrete", atoms=atoms, weights=weights)

    @classmethod
    def box(cls, low, high, nodes: int = PANEL_NODES, depth: float = LOG_DEPTH,
            panel_width: float = PANEL_WIDTH, grading=None) -> "MeasureSpace":
        return cls(kind="box", low=low, high=high, nodes=nodes, depth=depth,
                   panel_width=panel_width, grading=grading)

    @property
    def dimension(self) -> int:
        return self.atoms.shape[1] if self.kind == "discrete" else self.low.size

    @property
    def size(self) -> int:
        """
        Число узлов базовой формулы (без её построения).
        """
        if self.kind == "discrete":
            return self.atoms.shape[0]
        panels = max(1, math.ceil(self.depth / self.panel_width - 1e-12))
        total = 1
        for grading in self.grading:
            graded = grading != 1.0
            total *= (panels + graded) * panel_nodes(self.nodes, float(grading))
        return total

    @cached_property
    def base_rule(self) -> QuadratureRule:
        return self.quadrature()

    def quadrature(self, nodes: int | None = None) -> QuadratureRule:
        """
        Базовая формула меры: атомы для дискретной меры, тензорная формула для ящика.

        :param nodes: узлов на панель (по умолчанию из меры).
        """
        if self.kind == "discrete":
            with np.errstate(divide="ignore", invalid="ignore"):
                logs = np.log(self.atoms)
            return QuadratureRule(points=self.atoms, weights=self.weights, log_points=logs,
                                  index=np.arange(self.atoms.shape[0]))
        rules = [self.axis_rule(j, nodes=nodes) for j in range(self.dimension)]
        if len(rules) == 1:
            rule = rules[0]
            return replace(rule, index=np.arange(rule.size))
        return _tensor_rules(rules)

    def axis_rule(self, axis: int = 0, breaks=None, nodes: int | None = None) -> QuadratureRule:
        """
        Одномерная формула по оси axis ящика.

        :param breaks: массив (P, B) значений τ для разбиения панелей; тогда у формулы есть пакетная ось P.
        :param nodes: узлов на панель.
        """
        if self.kind != "box":
            raise SpecError("Осевая формула определена только для ящика")
        tau, weights = log_axis_rule(breaks, self.depth, self.panel_width,
                                     nodes or self.nodes, float(self.grading[axis]))
        if breaks is None:
            tau, weights = tau[0], weights[0]
        return self.rule_from_tau(tau, weights, axis)

    def rule_from_tau(self, tau, weights_tau, axis: int = 0) -> QuadratureRule:
        low, high = self.low[axis], self.high[axis]
        length = high - low
        decay = np.exp(-tau)
        points = low + length * decay
        if low == 0.0:
            logs = math.log(high) - tau
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                logs = np.log(points)
        return QuadratureRule(
            points=points[..., None],
            weights=length * decay * weights_tau,
            log_points=logs[..., None],
            upper_gap=(length * -np.expm1(-tau))[..., None],
        )

    def tau_of(self, u, axis: int = 0):
        """
        Значение τ для точки u оси axis (nan вне (l, h]).
        """
        low, high = self.low[axis], self.high[axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (np.asarray(u, dtype=float) - low) / (high - low)
            return np.where((ratio > 0) & (ratio <= 1), -np.log(ratio), np.nan)

    def refined(self, nodes: int) -> "MeasureSpace":
        return replace(self, nodes=nodes) if self.kind == "box" else self


@dataclass(frozen=True, eq=False)
class EigenForm:
    """
    Собственное значение a_j(u) семейства.

    coordinate: a = scale·u[axis]^power;  geometric: a = scale·ratio^u[axis];
    table: значения в узлах базовой формулы;  constant: a ≡ value.
    """
    form: str
    axis: int = 0
    scale: float = 1.0
    power: float = 1.0
    ratio: float = 1.0
    value: float = 1.0
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.form not in ("coordinate", "geometric", "table", "constant"):
            raise SpecError(f"Неизвестная форма собственного значения: {self.form!r}")
        if self.form == "table":
            if self.values is None:
                raise SpecError("Табличной форме нужны значения")
            object.__setattr__(self, "values", np.asarray(self.values, dtype=float).ravel())

    @property
    def refinable(self) -> bool:
        return self.form != "table"

    def log_values(self, rule: QuadratureRule) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.form == "coordinate":
                return math.log(self.scale) + self.power * rule.log_points[..., self.axis] if self.scale > 0 \
                    else np.full(rule.weights.shape, np.nan)
            if self.form == "geometric":
                if self.scale <= 0 or self.ratio <= 0:
                    return np.full(rule.weights.shape, np.nan)
                return math.log(self.scale) + rule.points[..., self.axis] * math.log(self.ratio)
            if self.form == "constant":
                return np.full(rule.weights.shape, np.log(self.value) if self.value > 0 else np.nan)
            if rule.index is None:
                raise UnsupportedVariantError("Табличную форму нельзя вычислить вне узлов базовой формулы")
            return np.log(self.values)[rule.index]

    def inverted(self) -> "EigenForm":
        if self.form == "coordinate":
            return replace(self, scale=1.0 / self.scale, power=-self.power)
        if self.form == "geometric":
            return replace(self, scale=1.0 / self.scale, ratio=1.0 / self.ratio)
        if self.form == "constant":
            return replace(self, value=1.0 / self.value)
        return replace(self, values=1.0 / self.values)

    def break_points(self, measure: MeasureSpace, radius, level: float):
        """
        Значения τ, в которых |a(u)·x| = level, для точек |x| = radius (коорд. форма на ящике).
        """
        radius = np.asarray(radius, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_u = (math.log(level) - math.log(self.scale) - np.log(radius)) / self.power
            return measure.tau_of(np.exp(log_u), self.axis)

    def to_dict(self) -> dict:
        if self.form == "coordinate":
            return {"form": "coordinate", "axis": self.axis, "scale": float(self.scale), "power": float(self.power)}
        if self.form == "geometric":
            return {"form": "geometric", "axis": self.axis, "scale": float(self.scale), "ratio": float(self.ratio)}
        if self.form == "constant":
            return {"form": "constant", "value": float(self.value)}
        return {"form": "table", "values": [float(v) for v in self.values]}

    @classmethod
    def from_dict(cls, data: dict) -> "EigenForm":
        form = data.get("form")
        if form == "coordinate":
            return cls(form, axis=int(data.get("axis", 0)), scale=float(data.get("scale", 1.0)),
                       power=float(data.get("power", 1.0)))
        if form == "geometric":
            return cls(form, axis=int(data.get("axis", 0)), scale=float(data.get("scale", 1.0)),
                       ratio=float(data["ratio"]))
        if form == "constant":
            return cls(form, value=float(data["value"]))
        if form == "table":
            return cls(form, values=data["values"])
        raise SpecError(f"Неизвестная форма собственного значения: {form!r}")


@dataclass(frozen=True, eq=False)
class CommutingFamily:
    """
    Семейство A(u) = C·diag[a_1(u),…,a_n(u)]·Cᵀ с ортогональной C.
    """
    basis: np.ndarray
    forms: tuple

    def __post_init__(self):
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        forms = tuple(self.forms)
        if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
            raise SpecError(f"Матрица C должна быть квадратной, получено {basis.shape}")
        if len(forms) != basis.shape[0]:
            raise SpecError(f"Форм собственных значений {len(forms)}, а размерность C {basis.shape[0]}")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "forms", forms)

    @classmethod
    def diagonal(cls, forms) -> "CommutingFamily":
        forms = tuple(forms)
        return cls(np.eye(len(forms)), forms)

    @classmethod
    def from_matrices(cls, matrices, tol: float = JOINT_DIAG_TOL) -> "CommutingFamily":
        """
        Совместная диагонализация набора симметричных матриц A(u_k).

        Базис берётся из eigh случайной линейной комбинации; если после поворота
        внедиагональный остаток больше tol, семейство не коммутирует.

        :param matrices: массив (K, n, n).
        :return: семейство с табличными формами.
        """
        matrices = np.asarray(matrices, dtype=float)
        if matrices.ndim != 3 or matrices.shape[1] != matrices.shape[2]:
            raise SpecError(f"Ожидался массив (K, n, n), получено {matrices.shape}")
        if np.max(np.abs(matrices - np.swapaxes(matrices, 1, 2))) > tol:
            raise SpecError("Матрицы семейства не симметричны")
        mix = np.random.default_rng(0).uniform(0.5, 1.5, matrices.shape[0])
        _, basis = np.linalg.eigh(np.tensordot(mix, matrices, axes=1))
        rotated = np.einsum("ji,kjl,lm->kim", basis, matrices, basis)
        diagonal = np.diagonal(rotated, axis1=1, axis2=2)
        residual = np.max(np.abs(rotated - np.einsum("ki,ij->kij", diagonal, np.eye(basis.shape[0]))))
        scale = max(1.0, float(np.max(np.abs(matrices))))
        if residual > tol * scale:
            raise SpecError(f"Матрицы не диагонализуются совместно: остаток {residual:.3e} > {tol:g}")
        forms = tuple(EigenForm("table", values=diagonal[:, j]) for j in range(basis.shape[0]))
        return cls(basis, forms)

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]

    @cached_property
    def is_diagonal(self) -> bool:
        return bool(np.max(np.abs(self.basis - np.eye(self.dimension))) <= ORTHOGONALITY_TOL)

    @property
    def refinable(self) -> bool:
        return all(form.refinable for form in self.forms)

    def log_eigenvalues(self, rule: QuadratureRule) -> np.ndarray:
        return np.stack([form.log_values(rule) for form in self.forms], axis=-1)

    def eigenvalues(self, rule: QuadratureRule) -> np.ndarray:
        return np.exp(self.log_eigenvalues(rule))

    def log_det(self, rule: QuadratureRule) -> np.ndarray:
        return self.log_eigenvalues(rule).sum(axis=-1)

    def matrices(self, rule: QuadratureRule) -> np.ndarray:
        a = self.eigenvalues(rule)
        return np.einsum("ij,...j,kj->...ik", self.basis, a, self.basis)

    def inverted(self) -> "CommutingFamily":
        return CommutingFamily(self.basis, tuple(form.inverted() for form in self.forms))

    def orthogonality_residual(self) -> float:
        return float(np.max(np.abs(self.basis.T @ self.basis - np.eye(self.dimension))))


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """
    Ядро Φ. Значение в узле: conj?(scale·base(u))·(det A(u))^det_power.

    Формы base: cesaro (≡ 1), ck (k(1−u)^{k−1}), discrete (веса по номеру атома
    или ratio^u), table (значения в узлах базовой формулы). Множитель с det_power
    появляется у сопряжённого оператора.
    """
    form: str
    params: dict = field(default_factory=dict)
    scale: complex = 1.0
    conjugate: bool = False
    det_power: float = 0.0
    nonnegative: bool = False

    def __post_init__(self):
        params = dict(self.params)
        if self.form == "ck":
            if "k" not in params:
                raise SpecError("Ядру (C,k) нужен параметр k")
            params["k"] = float(params["k"])
        elif self.form == "discrete":
            if "weights" in params:
                params["weights"] = np.asarray(params["weights"]).ravel()
            elif "ratio" in params:
                params["ratio"] = float(params["ratio"])
            else:
                raise SpecError("Дискретному ядру нужны weights или ratio")
        elif self.form == "table":
            if "values" not in params:
                raise SpecError("Табличному ядру нужны values")
            params["values"] = np.asarray(params["values"]).ravel()
        elif self.form != "cesaro":
            raise SpecError(f"Неизвестная форма ядра: {self.form!r}")
        object.__setattr__(self, "params", params)

    @property
    def refinable(self) -> bool:
        return self.form in ("cesaro", "ck") or (self.form == "discrete" and "ratio" in self.params)

    def base_values(self, rule: QuadratureRule) -> np.ndarray:
        if self.form == "cesaro":
            base = np.ones(rule.weights.shape)
        elif self.form == "ck":
            if rule.upper_gap is None:
                raise SpecError("Ядро (C,k) определено только на ящике [0, 1]")
            k = self.params["k"]
            with np.errstate(divide="ignore"):
                base = k * rule.upper_gap[..., 0] ** (k - 1.0)
        elif self.form == "discrete" and "ratio" in self.params:
            base = self.params["ratio"] ** rule.points[..., 0]
        else:
            if rule.index is None:
                raise UnsupportedVariantError("Табличное ядро нельзя вычислить вне узлов базовой формулы")
            table = self.params["weights"] if self.form == "discrete" else self.params["values"]
            base = table[rule.index]
        values = self.scale * base
        return np.conj(values) if self.conjugate else values

    def values(self, rule: QuadratureRule, family: CommutingFamily) -> np.ndarray:
        base = self.base_values(rule)
        if self.det_power == 0.0:
            return base
        return base * np.exp(self.det_power * family.log_det(rule))

    def adjoint(self) -> "KernelSpec":
        return replace(self, conjugate=not self.conjugate, det_power=1.0 - self.det_power)


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """
    Полное описание оператора H_{Φ,A} на L^p(ℝⁿ).
    """
    measure: MeasureSpace
    kernel: KernelSpec
    family: CommutingFamily
    p: float = 2.0
    name: str = ""

    def __post_init__(self):
        if not 1.0 <= self.p < math.inf:
            raise SpecError(f"Показатель p должен лежать в [1, ∞), получено {self.p}")
        m = self.measure.dimension
        for form in self.family.forms:
            if form.form in ("coordinate", "geometric") and not 0 <= form.axis < m:
                raise SpecError(f"Форма ссылается на ось {form.axis}, а у Ω размерность {m}")
            if form.form == "table" and form.values.size != self.measure.size:
                raise SpecError(f"Табличная форма: {form.values.size} значений на {self.measure.size} узлов")
        if self.kernel.form == "ck" and not (self.measure.kind == "box" and m == 1):
            raise SpecError("Ядро (C,k) задаётся на одномерном ящике")
        if self.kernel.form in ("discrete", "table"):
            table = self.kernel.params.get("weights", self.kernel.params.get("values"))
            if table is not None and table.size != self.measure.size:
                raise SpecError(f"Значений ядра {table.size}, узлов меры {self.measure.size}")

    @property
    def dimension(self) -> int:
        return self.family.dimension

    def kernel_values(self, rule: QuadratureRule) -> np.ndarray:
        return self.kernel.values(rule, self.family)

    def log_det(self, rule: QuadratureRule) -> np.ndarray:
        return self.family.log_det(rule)

    @property
    def refinable(self) -> bool:
        return self.measure.kind == "box" and self.kernel.refinable and self.family.refinable

    def adjoint(self) -> "OperatorSpec":
        """
        Сопряжённый оператор: ядро Φ̄·|det A|⁻¹, семейство A⁻¹, показатель p' = p/(p−1).
        """
        if self.p == 1.0:
            raise SpecError("Для p = 1 сопряжённый действует в L^∞, это не поддерживается")
        name = self.name[:-1] if self.name.endswith("*") else self.name + "*"
        return OperatorSpec(self.measure, self.kernel.adjoint(), self.family.inverted(),
                            p=self.p / (self.p - 1.0), name=name)

    def with_exponent(self, p: float) -> "OperatorSpec":
        return replace(self, p=float(p))

    def diagonalized(self) -> "OperatorSpec":
        return replace(self, family=CommutingFamily.diagonal(self.family.forms))

    def refined(self, nodes: int) -> "OperatorSpec":
        return replace(self, measure=self.measure.refined(nodes))

    @cached_property
    def is_separable(self) -> bool:
        """
        Ядро и семейство распадаются в произведение по координатам (ящик, C = I,
        ядро Чезаро, j-я форма зависит только от j-й оси).
        """
        if self.dimension == 1:
            return True
        if self.measure.kind != "box" or self.measure.dimension != self.dimension:
            return False
        if self.kernel.form != "cesaro" or not self.family.is_diagonal:
            return False
        return all(f.form == "coordinate" and f.axis == j for j, f in enumerate(self.family.forms))

    def factor(self, j: int) -> "OperatorSpec":
        if self.dimension == 1:
            return self
        if not self.is_separable:
            raise UnsupportedVariantError(f"Оператор {self.name!r} не распадается по координатам")
        m = self.measure
        measure = MeasureSpace.box(m.low[j:j + 1], m.high[j:j + 1], nodes=m.nodes, depth=m.depth,
                                   panel_width=m.panel_width, grading=m.grading[j:j + 1])
        kernel = replace(self.kernel, scale=self.kernel.scale if j == 0 else 1.0)
        family = CommutingFamily.diagonal((replace(self.family.forms[j], axis=0),))
        return OperatorSpec(measure, kernel, family, p=self.p, name=f"{self.name}[{j}]")

    def discretized(self) -> "OperatorSpec":
        """
        Тот же оператор на дискретной мере из узлов базовой формулы (табличные ядро и формы).
        """
        rule = self.measure.base_rule
        kernel = KernelSpec("table", {"values": self.kernel_values(rule)}, nonnegative=self.kernel.nonnegative)
        forms = tuple(EigenForm("table", values=a) for a in self.family.eigenvalues(rule).T)
        measure = MeasureSpace.discrete(rule.points, rule.weights)
        return OperatorSpec(measure, kernel, CommutingFamily(self.family.basis, forms), p=self.p, name=self.name)


# ---------------------------------------------------------------------------
# Проверка спецификаций
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    checks: dict
    messages: list
    bound: float
    tail_estimate: float
    properties: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "checks": dict(self.checks),
            "messages": list(self.messages),
            "bound": self.bound,
            "tail_estimate": self.tail_estimate,
            "properties": dict(self.properties),
        }


def _l1_terms(spec: OperatorSpec, p: float, rule: QuadratureRule | None = None) -> np.ndarray:
    rule = rule or spec.measure.base_rule
    with np.errstate(over="ignore", invalid="ignore"):
        return rule.weights * np.abs(spec.kernel_values(rule)) * np.exp(-spec.log_det(rule) / p)


def _tail_estimate(spec: OperatorSpec, terms: np.ndarray) -> float:
    """
    Оценка отброшенной части L¹-интеграла: масса последней панели для ящика,
    признак Даламбера на концах списка атомов для дискретной меры.
    """
    measure = spec.measure
    if measure.kind == "box":
        rule = measure.base_rule
        ratio = (rule.points - measure.low) / (measure.high - measure.low)
        last = np.any(ratio <= math.exp(-(measure.depth - measure.panel_width)), axis=-1)
        return float(np.sum(terms[last]))
    tail = 0.0
    for end in (terms[:2][::-1], terms[-2:]):
        if terms.size < 2 or end[0] == 0.0:
            continue
        ratio = end[1] / end[0]
        if not ratio < 1.0:
            return float("nan")
        tail += end[1] * ratio / (1.0 - ratio)
    return float(tail)


def l1_bound(spec: OperatorSpec, p: float | None = None) -> float:
    """
    ∫_Ω |Φ(u)|·(det A(u))^{−1/p} dμ(u) по квадратуре меры.

    :param spec: оператор.
    :param p: показатель (по умолчанию из спецификации).
    """
    p = spec.p if p is None else p
    if spec.dimension > 1 and spec.is_separable:
        return float(np.prod([l1_bound(spec.factor(j), p) for j in range(spec.dimension)]))
    return float(np.sum(_l1_terms(spec, p)))


def preserves_positive_cone(spec: OperatorSpec) -> bool:
    """
    Все A(u) переводят ℝ₊ⁿ в себя (неотрицательные матрицы).
    """
    if spec.family.is_diagonal:
        return True
    matrices = spec.family.matrices(spec.measure.base_rule)
    scale = max(1.0, float(np.max(np.abs(matrices))))
    return bool(np.all(matrices >= -ORTHOGONALITY_TOL * scale))


def _validate_single(spec: OperatorSpec) -> ValidationReport:
    checks, messages = {}, []
    measure = spec.measure

    if measure.kind == "discrete":
        ok = bool(np.all(np.isfinite(measure.weights)) and np.all(measure.weights >= 0))
        checks["measure"] = ok
        if not ok:
            messages.append("веса дискретной меры должны быть конечными и неотрицательными")
    else:
        ok = bool(np.all(measure.low < measure.high)) and measure.nodes >= 2
        checks["measure"] = ok
        if not ok:
            messages.append("ящик вырожден или узлов меньше двух")

    rule = measure.base_rule
    log_a = spec.family.log_eigenvalues(rule)
    positive = bool(np.all(np.isfinite(log_a)))
    checks["positive_eigenvalues"] = positive
    if not positive:
        bad = np.argwhere(~np.isfinite(log_a))[0]
        messages.append(f"a_{bad[-1] + 1}(u) не положительно в узле {rule.points[bad[0]].tolist()}")
    log_det = log_a.sum(axis=-1)
    checks["nonzero_determinant"] = bool(np.all(np.isfinite(log_det)))

    kernel = spec.kernel_values(rule)
    finite = bool(np.all(np.isfinite(kernel)))
    checks["kernel_finite"] = finite
    if not finite:
        messages.append("ядро принимает неконечные значения")
    if spec.kernel.nonnegative:
        level = NONNEGATIVE_TOL * max(1.0, float(np.max(np.abs(kernel))))
        ok = bool(np.all(np.real(kernel) >= -level) and np.all(np.abs(np.imag(kernel)) <= level))
        checks["nonnegative_kernel"] = ok
        if not ok:
            messages.append("ядро объявлено неотрицательным, но это не так")

    terms = _l1_terms(spec, spec.p, rule)
    bound = float(np.sum(terms))
    tail = _tail_estimate(spec, terms) if np.isfinite(bound) else float("inf")
    ok = bool(np.isfinite(bound) and bound <= L1_CAP and not tail > L1_TAIL_TOL * max(bound, 1.0))
    checks["l1_condition"] = ok
    if not ok:
        messages.append(f"L¹-условие не выполнено: оценка {bound:.6g}, хвост {tail:.3g}")

    mass = complex(np.sum(rule.weights * kernel)) if finite else complex("nan")
    return ValidationReport(checks, messages, bound, tail, {"kernel_mass": mass})


def validate_spec(spec: OperatorSpec) -> ValidationReport:
    """
    Проверяет инварианты спецификации и считает L¹-оценку ∫|Φ|(det A)^{−1/p}dμ.

    Нарушения попадают в отчёт, исключение бросается только при несогласованных формах массивов.

    :param spec: оператор.
    :return: ValidationReport.
    """
    if spec.dimension > 1 and spec.is_separable:
        parts = [_validate_single(spec.factor(j)) for j in range(spec.dimension)]
        checks = {name: all(part.checks[name] for part in parts) for name in parts[0].checks}
        messages = [f"ось {j}: {m}" for j, part in enumerate(parts) for m in part.messages]
        bound = float(np.prod([part.bound for part in parts]))
        tail = float(bound * sum(part.tail_estimate / part.bound for part in parts if part.bound > 0))
        mass = complex(np.prod([part.properties["kernel_mass"] for part in parts]))
        report = ValidationReport(checks, messages, bound, tail, {"kernel_mass": mass})
    else:
        report = _validate_single(spec)

    residual = spec.family.orthogonality_residual()
    report.checks["orthogonal_basis"] = residual <= ORTHOGONALITY_TOL
    if residual > ORTHOGONALITY_TOL:
        report.messages.append(f"CᵀC отличается от I на {residual:.3e}")

    mass = report.properties["kernel_mass"]
    report.properties.update({
        "kernel_mass": mass.real if mass.imag == 0 else [mass.real, mass.imag],
        "preserves_positive_cone": preserves_positive_cone(spec) if report.checks["positive_eigenvalues"] else False,
        "separable": spec.is_separable,
        "dimension": spec.dimension,
        "exponent_p": spec.p,
    })
    if not report.valid:
        logger.info("Спецификация %s не прошла проверку: %s", spec.name, "; ".join(report.messages))
    return report


# ---------------------------------------------------------------------------
# Встроенные операторы
# ---------------------------------------------------------------------------

def _checked(spec: OperatorSpec) -> OperatorSpec:
    bound = l1_bound(spec)
    if not np.isfinite(bound) or bound > L1_CAP:
        raise SpecError(f"Взвешенная сумма Σ|Φ|(det A)^(-1/p) = {bound:.6g} выходит за предел {L1_CAP:g}")
    return spec


def builtin_cesaro(n: int = 1, p: float = 2.0, scale: float = 1.0) -> OperatorSpec:
    """
    n-мерный оператор Чезаро: Ω = [0,1]ⁿ, Φ ≡ scale, A(u) = diag[u_1,…,u_n].

    :param n: размерность.
    :param p: показатель пространства L^p.
    :param scale: множитель ядра (scale ≠ 1 даёт нерегулярный оператор).
    """
    if n < 1:
        raise SpecError(f"Размерность должна быть ≥ 1, получено {n}")
    measure = MeasureSpace.box(np.zeros(n), np.ones(n))
    kernel = KernelSpec("cesaro", scale=scale, nonnegative=complex(scale).imag == 0 and complex(scale).real >= 0)
    family = CommutingFamily.diagonal(EigenForm("coordinate", axis=j) for j in range(n))
    return OperatorSpec(measure, kernel, family, p=p, name=f"cesaro{n}")


def builtin_ck(k: float, p: float = 2.0) -> OperatorSpec:
    """
    Среднее (C, k): Ω = [0,1], Φ(u) = k(1−u)^{k−1}, A(u) = u.
    При k < 1 ядро особое в u = 1, квадратура сгущается к этой точке с показателем 2/k.
    """
    if not k > 0:
        raise SpecError(f"Параметр k должен быть положительным, получено {k}")
    grading = 2.0 / k if k < 1 else 1.0
    measure = MeasureSpace.box([0.0], [1.0], grading=[grading])
    kernel = KernelSpec("ck", {"k": k}, nonnegative=True)
    family = CommutingFamily.diagonal((EigenForm("coordinate"),))
    return OperatorSpec(measure, kernel, family, p=p, name=f"ck{k:g}")


def builtin_discrete(weights, family: CommutingFamily, p: float = 2.0, atoms=None,
                     name: str = "discrete") -> OperatorSpec:
    """
    Дискретный оператор Σ_k Φ(k) f(A(k)x) на атомах 0..K с единичными весами.

    :param weights: Φ(0..K).
    :param family: семейство, индексированное номером атома (обычно A(k) = A^k).
    :param atoms: другие атомы вместо 0..K.
    """
    weights = np.asarray(weights)
    atoms = np.arange(weights.size, dtype=float) if atoms is None else atoms
    nonnegative = bool(np.all(np.isreal(weights)) and np.all(np.real(weights) >= 0))
    kernel = KernelSpec("discrete", {"weights": weights}, nonnegative=nonnegative)
    return _checked(OperatorSpec(MeasureSpace.discrete(atoms), kernel, family, p=p, name=name))


def builtin_geometric(phi_ratio: float = 0.5, a_ratio: float = 4.0, count: int = 41,
                      p: float = 2.0) -> OperatorSpec:
    """
    Φ(k) = phi_ratio^k, A(k) = a_ratio^k, k = 0..count−1.
    """
    kernel = KernelSpec("discrete", {"ratio": phi_ratio}, nonnegative=phi_ratio >= 0)
    family = CommutingFamily.diagonal((EigenForm("geometric", ratio=a_ratio),))
    return _checked(OperatorSpec(MeasureSpace.discrete(np.arange(count, dtype=float)), kernel, family,
                                 p=p, name="geometric"))


def builtin_identity(n: int = 1) -> OperatorSpec:
    measure = MeasureSpace.discrete([[0.0]])
    kernel = KernelSpec("discrete", {"weights": [1.0]}, nonnegative=True)
    family = CommutingFamily.diagonal(EigenForm("geometric", ratio=1.0) for _ in range(n))
    return OperatorSpec(measure, kernel, family, name="identity")


def builtin_symmetric_discrete(weights, ratio: float, p: float = 2.0) -> OperatorSpec:
    """
    Атомы −K..K, Φ(k) = w_|k|·ratio^{k/p}, A(k) = ratio^k: слагаемые символа с ±k
    попарно сопряжены, поэтому при p = 2 символ вещественный.
    """
    weights = np.asarray(weights, dtype=float)
    top = weights.size - 1
    atoms = np.arange(-top, top + 1, dtype=float)
    values = weights[np.abs(atoms).astype(int)] * ratio ** (atoms / p)
    family = CommutingFamily.diagonal((EigenForm("geometric", ratio=ratio),))
    return builtin_discrete(values, family, p=p, atoms=atoms, name="symmetric")


def builtin_dilation(ratio: float, n: int = 1, p: float = 2.0) -> OperatorSpec:
    """
    Одноатомный оператор f ↦ ratio^{n/p}·f(ratio·x); при p = 2 унитарен, φ(s) = ratio^{−iΣs_j}.
    """
    family = CommutingFamily.diagonal(EigenForm("constant", value=ratio) for _ in range(n))
    return builtin_discrete([ratio ** (n / p)], family, p=p, atoms=[1.0], name="dilation")


def compose_specs(first: OperatorSpec, second: OperatorSpec) -> OperatorSpec:
    """
    Произведение H_first·H_second как оператор Хаусдорфа на Ω₁×Ω₂:
    ядро Φ(u)Ψ(v), семейство A(u)B(v). Обе меры заменяются своими квадратурами.
    """
    if first.dimension != second.dimension:
        raise SpecError(f"Размерности {first.dimension} и {second.dimension} не совпадают")
    if np.max(np.abs(first.family.basis - second.family.basis)) > ORTHOGONALITY_TOL:
        raise SpecError("Семейства диагонализуются в разных базисах, произведение не коммутирует")
    if first.p != second.p:
        raise SpecError(f"Показатели p различаются: {first.p} и {second.p}")
    a, b = first.discretized(), second.discretized()
    size = a.measure.size * b.measure.size
    if size > MAX_COMPOSED_ATOMS:
        raise QuadratureBudgetError(f"Произведение мер даёт {size} атомов", required_nodes=size)
    ra, rb = a.measure.base_rule, b.measure.base_rule
    n = first.dimension
    atoms = np.concatenate([np.repeat(ra.points, rb.size, axis=0), np.tile(rb.points, (ra.size, 1))], axis=1)
    weights = np.outer(ra.weights, rb.weights).ravel()
    values = np.outer(a.kernel_values(ra), b.kernel_values(rb)).ravel()
    eig = (a.family.eigenvalues(ra)[:, None, :] * b.family.eigenvalues(rb)[None, :, :]).reshape(-1, n)
    family = CommutingFamily(first.family.basis, tuple(EigenForm("table", values=eig[:, j]) for j in range(n)))
    kernel = KernelSpec("table", {"values": values},
                        nonnegative=first.kernel.nonnegative and second.kernel.nonnegative)
    return OperatorSpec(MeasureSpace.discrete(atoms, weights), kernel, family, p=first.p,
                        name=f"{first.name}·{second.name}")


# ---------------------------------------------------------------------------
# JSON-схема
# ---------------------------------------------------------------------------

def _encode_number(value):
    value = complex(value)
    return value.real if value.imag == 0 else [value.real, value.imag]


def _decode_number(data):
    if isinstance(data, (list, tuple)):
        if len(data) != 2:
            raise SpecError(f"Комплексное число кодируется парой [re, im], получено {data!r}")
        return complex(float(data[0]), float(data[1]))
    return float(data)


def _encode_array(values) -> list:
    values = np.asarray(values).ravel()
    if np.iscomplexobj(values) and np.any(values.imag != 0):
        return [[float(v.real), float(v.imag)] for v in values]
    return [float(v) for v in np.real(values)]


def _decode_array(data) -> np.ndarray:
    if len(data) and isinstance(data[0], (list, tuple)):
        pairs = np.asarray(data, dtype=float)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise SpecError("Комплексный массив кодируется списком пар [re, im]")
        return pairs[:, 0] + 1j * pairs[:, 1]
    return np.asarray(data, dtype=float)


def _measure_to_dict(measure: MeasureSpace) -> dict:
    if measure.kind == "box":
        return {
            "kind": "box",
            "low": [float(v) for v in measure.low],
            "high": [float(v) for v in measure.high],
            "nodes": int(measure.nodes),
            "depth": float(measure.depth),
            "panel_width": float(measure.panel_width),
            "grading": [float(v) for v in measure.grading],
        }
    atoms = measure.atoms
    if atoms.shape[1] == 1 and np.array_equal(atoms[:, 0], np.arange(atoms.shape[0])) \
            and np.all(measure.weights == 1.0):
        return {"kind": "discrete", "count": int(atoms.shape[0])}
    return {"kind": "discrete", "atoms": atoms.tolist(), "weights": [float(w) for w in measure.weights]}


def _measure_from_dict(data: dict) -> MeasureSpace:
    kind = data.get("kind")
    if kind == "box":
        return MeasureSpace.box(data["low"], data["high"], nodes=int(data.get("nodes", PANEL_NODES)),
                                depth=float(data.get("depth", LOG_DEPTH)),
                                panel_width=float(data.get("panel_width", PANEL_WIDTH)),
                                grading=data.get("grading"))
    if kind == "discrete":
        if "count" in data:
            return MeasureSpace.discrete(np.arange(int(data["count"]), dtype=float))
        return MeasureSpace.discrete(data["atoms"], data.get("weights"))
    raise SpecError(f"Неизвестный вид меры: {kind!r}")


def spec_to_dict(spec: OperatorSpec) -> dict:
    """
    Документ JSON-схемы оператора (комплексные числа — пары [re, im]).
    """
    kernel = spec.kernel
    params = {key: _encode_array(value) if isinstance(value, np.ndarray) else _encode_number(value)
              for key, value in kernel.params.items()}
    return {
        "name": spec.name,
        "dimension": spec.dimension,
        "exponent_p": float(spec.p),
        "measure": _measure_to_dict(spec.measure),
        "kernel": {
            "form": kernel.form,
            "params": params,
            "scale": _encode_number(kernel.scale),
            "conjugate": bool(kernel.conjugate),
            "det_power": float(kernel.det_power),
            "nonnegative": bool(kernel.nonnegative),
        },
        "family": {
            "C": spec.family.basis.tolist(),
            "eigenvalue_forms": [form.to_dict() for form in spec.family.forms],
        },
    }


def spec_from_dict(data: dict) -> OperatorSpec:
    """
    Обратное к spec_to_dict. Отсутствующие поля и несогласованные размерности — SpecError.
    """
    try:
        kernel_data = data["kernel"]
        params = {key: _decode_array(value) if key in ("weights", "values") else _decode_number(value)
                  for key, value in kernel_data.get("params", {}).items()}
        kernel = KernelSpec(kernel_data["form"], params,
                            scale=_decode_number(kernel_data.get("scale", 1.0)),
                            conjugate=bool(kernel_data.get("conjugate", False)),
                            det_power=float(kernel_data.get("det_power", 0.0)),
                            nonnegative=bool(kernel_data.get("nonnegative", False)))
        family_data = data["family"]
        forms = tuple(EigenForm.from_dict(item) for item in family_data["eigenvalue_forms"])
        family = CommutingFamily(family_data["C"], forms)
        measure = _measure_from_dict(data["measure"])
        spec = OperatorSpec(measure, kernel, family, p=float(data.get("exponent_p", 2.0)),
                            name=str(data.get("name", "")))
    except (KeyError, TypeError) as e:
        raise SpecError(f"Документ спецификации неполон: {e!r}") from e
    if "dimension" in data and int(data["dimension"]) != spec.dimension:
        raise SpecError(f"Поле dimension = {data['dimension']}, а у семейства {spec.dimension}")
    return spec


def load_spec(path) -> OperatorSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SpecError(f"Не удалось прочитать {path}: {e}") from e
    return spec_from_dict(data)


def save_spec(spec: OperatorSpec, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(spec_to_dict(spec), f, ensure_ascii=False, indent=2)
    return path


def spec_hash(spec: OperatorSpec) -> str:
    return get_md5_hash(json.dumps(spec_to_dict(spec), sort_keys=True, ensure_ascii=False))


# ---------------------------------------------------------------------------
# Сеточные функции
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Axis:
    """
    Ось тензорной сетки: узлы, квадратурные веса, знак гипероктанта.

    kind: log (узлы sign·e^t, хранится t), linear, frequency (s-ось преобразования
    Меллина; dual — исходная t-ось, q — показатель преобразования).
    """
    nodes: np.ndarray
    weights: np.ndarray
    sign: int = 1
    kind: str = "log"
    t: np.ndarray | None = None
    dual: "Axis | None" = None
    q: float = 2.0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).ravel()
        weights = np.asarray(self.weights, dtype=float).ravel()
        if nodes.shape != weights.shape or nodes.size == 0:
            raise SpecError(f"Узлов {nodes.size}, весов {weights.size}")
        steps = np.diff(nodes)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise SpecError("Узлы оси должны быть строго монотонны")
        if not np.all(weights > 0):
            raise SpecError("Веса оси должны быть положительны")
        if self.kind not in ("log", "linear", "frequency"):
            raise SpecError(f"Неизвестный вид оси: {self.kind!r}")
        if self.kind == "log":
            if np.any(self.sign * nodes <= 0):
                raise SpecError("Узлы логарифмической оси должны лежать в своём гипероктанте")
            object.__setattr__(self, "t", np.log(self.sign * nodes) if self.t is None else np.asarray(self.t, dtype=float))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def log_uniform(cls, t_min: float, t_max: float, count: int, sign: int = 1) -> "Axis":
        """
        Равномерная по t сетка с узлами в центрах ячеек: t_k = t_min + (k + ½)Δt.
        """
        step = (t_max - t_min) / count
        t = t_min + (np.arange(count) + 0.5) * step
        return cls(sign * np.exp(t), np.exp(t) * step, sign=sign, kind="log", t=t)

    @classmethod
    def log_gauss(cls, t_min: float, t_max: float, panel: float = 0.5, nodes: int = 10,
                  sign: int = 1, breaks=()) -> "Axis":
        """
        Составная формула Гаусса по t на [t_min, t_max]; точки |x| из breaks становятся границами панелей.
        """
        count = max(1, math.ceil((t_max - t_min) / panel - 1e-12))
        edges = np.linspace(t_min, t_max, count + 1)
        extra = [math.log(b) for b in breaks if b > 0 and t_min < math.log(b) < t_max]
        edges = np.unique(np.concatenate((edges, extra)))
        x, w = gauss_unit(nodes)
        a, b = edges[:-1, None], edges[1:, None]
        t = (0.5 * (a + b) + 0.5 * (b - a) * x).ravel()
        wt = (0.5 * (b - a) * w).ravel()
        return cls(sign * np.exp(t), np.exp(t) * wt, sign=sign, kind="log", t=t)

    @classmethod
    def linear(cls, nodes, weights=None) -> "Axis":
        nodes = np.asarray(nodes, dtype=float)
        if weights is None:
            gaps = np.diff(nodes)
            weights = np.concatenate(([gaps[0]], gaps[:-1] + gaps[1:], [gaps[-1]])) / 2 if nodes.size > 1 else [1.0]
        return cls(nodes, weights, kind="linear")

    @classmethod
    def frequency(cls, s, spacing: float, dual: "Axis", q: float = 2.0) -> "Axis":
        s = np.asarray(s, dtype=float)
        return cls(s, np.full(s.shape, spacing), sign=dual.sign, kind="frequency", dual=dual, q=q)

    @property
    def size(self) -> int:
        return self.nodes.size

    @cached_property
    def spacing(self) -> float | None:
        """
        Шаг Δt равномерной логарифмической оси (None для неравномерных).
        """
        if self.kind != "log" or self.size < 2:
            return None
        steps = np.diff(self.t)
        return float(steps[0]) if np.allclose(steps, steps[0], rtol=1e-9, atol=0) else None

    def coordinates(self, values) -> np.ndarray:
        """
        Координата интерполяции: ln|x| на логарифмической оси, сама x на остальных; nan вне гипероктанта.
        """
        values = np.asarray(values, dtype=float)
        if self.kind != "log":
            return values
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.sign * values > 0, np.log(self.sign * values), np.nan)

    @property
    def grid(self) -> np.ndarray:
        return self.t if self.kind == "log" else self.nodes


@dataclass(frozen=True, eq=False)
class GridFunction:
    """
    Комплексные значения функции в узлах тензорной сетки.

    Вне сетки функция продолжается нулём, внутри интерполируется кубически
    по ln|x| (логарифмические оси) или по x.
    """
    axes: tuple
    values: np.ndarray
    extension: str = "zero"

    def __post_init__(self):
        axes = tuple(self.axes)
        values = np.asarray(self.values, dtype=complex)
        shape = tuple(axis.size for axis in axes)
        if values.shape != shape:
            raise SpecError(f"Форма значений {values.shape} не совпадает с сеткой {shape}")
        if self.extension != "zero":
            raise SpecError(f"Неизвестное продолжение: {self.extension!r}")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, func, axes) -> "GridFunction":
        axes = tuple(axes)
        points = grid_points(axes)
        values = np.asarray(func(points), dtype=complex).reshape(tuple(a.size for a in axes))
        return cls(axes, values)

    @classmethod
    def outer(cls, factors) -> "GridFunction":
        """
        Тензорное произведение одномерных сеточных функций.
        """
        values = np.ones((), dtype=complex)
        axes = []
        for g in factors:
            values = np.multiply.outer(values, g.values)
            axes.extend(g.axes)
        return cls(tuple(axes), values)

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def points(self) -> np.ndarray:
        return grid_points(self.axes)

    def weights(self) -> np.ndarray:
        w = np.ones(())
        for axis in self.axes:
            w = np.multiply.outer(w, axis.weights)
        return w

    def norm(self, p: float = 2.0) -> float:
        return float(np.sum(self.weights() * np.abs(self.values) ** p) ** (1.0 / p))

    def inner(self, other: "GridFunction") -> complex:
        """
        ⟨self, other⟩ = Σ w·self·conj(other) на общей сетке.
        """
        if other.shape != self.shape:
            raise SpecError(f"Сетки не совпадают: {self.shape} и {other.shape}")
        return complex(np.sum(self.weights() * self.values * np.conj(other.values)))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.axes, values, self.extension)

    @cached_property
    def _interpolators(self):
        grids = []
        values = self.values
        for j, axis in enumerate(self.axes):
            grid = axis.grid
            if grid[0] > grid[-1]:
                grid = grid[::-1]
                values = np.flip(values, axis=j)
            grids.append(grid)
        method = "cubic" if all(g.size >= 4 for g in grids) else "linear"
        return tuple(RegularGridInterpolator(grids, part, method=method, bounds_error=False, fill_value=0.0)
                     for part in (values.real, values.imag))

    def support_mask(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        mask = np.ones(points.shape[:-1], dtype=bool)
        for j, axis in enumerate(self.axes):
            c = axis.coordinates(points[..., j])
            low, high = np.min(axis.grid), np.max(axis.grid)
            mask &= np.isfinite(c) & (c >= low) & (c <= high)
        return mask

    def evaluate(self, points) -> np.ndarray:
        """
        Значения в произвольных точках (..., n); вне носителя сетки — ноль.
        """
        points = np.asarray(points, dtype=float)
        coords = np.stack([axis.coordinates(points[..., j]) for j, axis in enumerate(self.axes)], axis=-1)
        mask = self.support_mask(points)
        coords = np.where(mask[..., None], coords, 0.0)
        flat = coords.reshape(-1, self.dimension)
        re, im = self._interpolators
        result = (re(flat) + 1j * im(flat)).reshape(points.shape[:-1])
        return np.where(mask, result, 0.0)


def grid_points(axes) -> np.ndarray:
    """
    Узлы тензорной сетки как массив (P, n) в C-порядке.
    """
    mesh = np.meshgrid(*[axis.nodes for axis in axes], indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def tensor_difference_norm(left, right) -> float:
    """
    ‖⊗left − ⊗right‖₂ без построения тензоров.

    Разность раскладывается в сумму T_j = a_1⊗…⊗a_{j−1}⊗(a_j − b_j)⊗b_{j+1}⊗…⊗b_n,
    и каждый элемент матрицы Грама ⟨T_j, T_k⟩ содержит две разности, поэтому малая
    невязка не теряется на вычитании близких чисел.

    :param left: одномерные сомножители a_j (GridFunction).
    :param right: одномерные сомножители b_j на тех же сетках.
    """
    left, right = tuple(left), tuple(right)
    if len(left) != len(right):
        raise SpecError(f"Число сомножителей не совпадает: {len(left)} и {len(right)}")
    n = len(left)
    terms = []
    for j in range(n):
        difference = left[j].with_values(left[j].values - right[j].values)
        terms.append(left[:j] + (difference,) + right[j + 1:])
    total = 0j
    for first in terms:
        for second in terms:
            total += math.prod(a.inner(b) for a, b in zip(first, second))
    return math.sqrt(max(total.real, 0.0))
