"""
Командная строка: применение оператора, символ, проверки, спектр, валидация.

Каждая команда читает JSON-спецификацию (--spec) и пишет CSV/JSON в --out или в stdout.
Коды выхода: 0 — всё прошло, 1 — ошибка спецификации или неподдерживаемый запрос, 2 — проверка не прошла,
3 — отказ (бюджет квадратуры, усечение области, хвост ряда).
"""

import argparse
import json
import logging
import sys
import traceback
from datetime import datetime
from pathlib import Path

import numpy as np

import probes
from hausdorff_core import (
    THREADS_ENV,
    Axis,
    DomainTruncationError,
    GridFunction,
    HausdorffError,
    NotInvertibleError,
    QuadratureBudgetError,
    SeriesTruncationError,
    SpecError,
    UnsupportedVariantError,
    load_spec,
    spec_hash,
    validate_spec,
)
from hausdorff_mellin import MellinGrid, diagonalization_residual
from hausdorff_operator import (
    apply,
    duality_gap,
    nested_probe,
    normality_residual,
    quadrature_error,
    regularity_check,
)
from hausdorff_spectral import (
    classify_operator,
    discrete_inverse,
    generating_series,
    inverse_series,
    invertibility,
    norm_search,
    s_grid,
    spectrum_cloud,
)
from hausdorff_symbol import build_symbol, symbol_closed_form, symbol_quadrature

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILED = 2
EXIT_REFUSED = 3

DEFAULT_GRID_N = 512
DEFAULT_T_RANGE = (-6.0, 6.0)       # сетка по t = ln x для apply
DEFAULT_S_RANGE = (-5.0, 5.0)
DEFAULT_FUNCTION = "indicator"
CHECK_T_RANGE = (-12.0, 12.0)       # окно квадратурной сетки для двойственности
NORMALITY_T_RANGE = (-6.0, 6.0)
DUALITY_PAIRS = 50
REGULARITY_POINTS = (1e2, 1e3, 1e4)
INVERSE_PREVIEW = 8                 # сколько коэффициентов b(k) показывать в отчёте

# Пороги по наборам проверок
SUITE_TOL = {
    "diag": 1e-3,
    "diag_smooth": 1e-5,
    "adjoint": 1e-6,
    "normality": 1e-5,
    "regularity": 1e-2,
    "inverse": 1e-6,
    "reciprocal": 1e-10,
}
SUITES = ("diag", "adjoint", "normality", "regularity", "inverse")
REFUSALS = (QuadratureBudgetError, DomainTruncationError, SeriesTruncationError)


def _pair(text: str) -> tuple:
    try:
        low, high = (float(v) for v in text.split(","))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"ожидалось «a,b», получено {text!r}") from e
    if not high > low:
        raise argparse.ArgumentTypeError(f"пустой интервал {text!r}")
    return low, high


def _tol(args, default: float) -> float:
    return args.tol if args.tol is not None else default


def _say(args, text: str):
    """
    Статусные строки идут в stdout, если данные пишутся в файл, иначе в stderr.
    """
    print(text, file=sys.stdout if args.out else sys.stderr)


def _header(spec, args, extra: dict) -> str:
    fields = {"spec": spec.name, "md5": spec_hash(spec), "p": f"{spec.p:g}"}
    if spec.kernel.form == "ck":
        fields["k"] = f"{spec.kernel.params['k']:g}"
    fields.update(extra)
    if args.timestamp:
        fields["timestamp"] = datetime.now().isoformat(timespec="seconds")
    return " ".join(f"{key}={value}" for key, value in fields.items())


def _write_csv(args, data: np.ndarray, columns: list, header: str):
    target = args.out or sys.stdout
    np.savetxt(target, data, fmt="%.17g", delimiter=",", header=header + "\n" + ",".join(columns), comments="# ")
    if args.out:
        print(f"[→] Записано: {args.out}")


def _write_json(path, payload: dict):
    if path is None:
        json.dump(payload, sys.stdout, ensure_ascii=False, indent=2)
        sys.stdout.write("\n")
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=2)
    print(f"[→] Записано: {path}")


def _load_valid(args):
    spec = load_spec(args.spec)
    report = validate_spec(spec)
    if not report.valid:
        raise SpecError(f"{args.spec}: " + "; ".join(report.messages))
    return spec


def _function(name: str, n: int):
    """
    Тестовая функция из библиотеки или таблица «x,Re f[,Im f]» из файла (только n = 1).
    """
    path = Path(name)
    if not path.is_file():
        return probes.library_probe(name, n)
    if n != 1:
        raise SpecError("Табличная функция поддерживается только при n = 1")
    table = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    x = table[:, 0]
    values = table[:, 1] + (1j * table[:, 2] if table.shape[1] > 2 else 0.0)
    axis = Axis(x, Axis.linear(x).weights, kind="log")
    return probes.from_grid(GridFunction((axis,), values))


def _log_axes(t_range, count: int, n: int) -> tuple:
    return tuple(Axis.log_uniform(t_range[0], t_range[1], count) for _ in range(n))


def _s_points(s_range, count: int, n: int) -> np.ndarray:
    axis = np.linspace(s_range[0], s_range[1], count)
    mesh = np.meshgrid(*(axis,) * n, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


# ---------------------------------------------------------------------------
# Команды
# ---------------------------------------------------------------------------

def cmd_apply(args) -> int:
    spec = _load_valid(args)
    n = spec.dimension
    f = _function(args.function, n)
    t_range = args.t_range or DEFAULT_T_RANGE
    count = args.grid_n or DEFAULT_GRID_N
    axes = _log_axes(t_range, count, n)
    image = apply(spec, f, axes)
    error = quadrature_error(spec, f, axes)
    points = image.points()
    data = np.column_stack([points, image.values.real.ravel(), image.values.imag.ravel()])
    columns = [f"x{j + 1}" for j in range(n)] + ["re", "im"]
    header = _header(spec, args, {"function": f.name, "grid": f"log t={t_range[0]:g},{t_range[1]:g} N={count}",
                                  "quadrature_error": f"{error:.3e}"})
    _write_csv(args, data, columns, header)
    _say(args, f"[✓] {spec.name}: Hf на {points.shape[0]} точках, оценка ошибки квадратуры {error:.3e}")
    return EXIT_OK


def cmd_symbol(args) -> int:
    spec = _load_valid(args)
    n = spec.dimension
    sym = build_symbol(spec)
    s_range = args.s_range or DEFAULT_S_RANGE
    count = args.grid_n or DEFAULT_GRID_N
    points = _s_points(s_range, count, n)
    mode = args.mode or "closed"
    code = EXIT_OK

    if mode == "closed":
        values = symbol_closed_form(sym, points)
        extra = []
    else:
        quadrature = symbol_quadrature(spec, points, refuse=False)
        if np.any(np.isnan(quadrature)):
            print(f"[!] {int(np.sum(np.isnan(quadrature)))} строк вне бюджета квадратуры (NaN)", file=sys.stderr)
            code = EXIT_REFUSED
        if mode == "quadrature":
            values, extra = quadrature, []
        else:
            values = symbol_closed_form(sym, points)
            agreement = np.abs(values - quadrature)
            extra = [agreement]
            worst = float(np.nanmax(agreement)) if np.any(np.isfinite(agreement)) else float("nan")
            _say(args, f"[{'✓' if args.tol is None or worst <= args.tol else '!'}] "
                       f"расхождение замкнутой формы и квадратуры: {worst:.3e}")
            if args.tol is not None and not worst <= args.tol and code == EXIT_OK:
                code = EXIT_FAILED

    data = np.column_stack([points, values.real, values.imag, *extra])
    columns = [f"s{j + 1}" for j in range(n)] + ["re", "im"] + (["agreement"] if extra else [])
    header = _header(spec, args, {"mode": mode, "variant": sym.variant,
                                  "s": f"{s_range[0]:g},{s_range[1]:g}", "N": count})
    _write_csv(args, data, columns, header)
    return code


def _suite_diag(spec, args) -> dict:
    n = spec.dimension
    grid = MellinGrid.default(n)
    if args.grid_n or args.t_range:
        t_range = args.t_range or (grid.t_min, grid.t_max)
        grid = MellinGrid(t_range[0], t_range[1], args.grid_n or grid.count, n)
    residuals, passed = {}, True
    for name in ("indicator", "gaussian", "xexp"):
        tol = _tol(args, SUITE_TOL["diag"] if name == "indicator" else SUITE_TOL["diag_smooth"])
        residual = diagonalization_residual(spec, probes.library_probe(name, n), grid)
        residuals[name] = {"residual": residual, "tolerance": tol, "passed": residual <= tol}
        passed &= residual <= tol
    worst = max(item["residual"] for item in residuals.values())
    return {"status": "pass" if passed else "fail", "residual": worst, "functions": residuals}


def _check_axes(t_range, n: int) -> tuple:
    return tuple(Axis.log_gauss(t_range[0], t_range[1]) for _ in range(n))


def _suite_adjoint(spec, args) -> dict:
    n = spec.dimension
    rng = np.random.default_rng(0)
    pairs = probes.random_bumps(rng, 2 * DUALITY_PAIRS, n)
    axes = _check_axes(CHECK_T_RANGE, n)
    gaps = [duality_gap(spec, f, g, axes) for f, g in zip(pairs[::2], pairs[1::2])]
    tol = _tol(args, SUITE_TOL["adjoint"])
    worst = float(max(gaps))
    return {"status": "pass" if worst <= tol else "fail", "residual": worst, "tolerance": tol,
            "pairs": len(gaps)}


def _suite_normality(spec, args) -> dict:
    if spec.p != 2.0:
        return {"status": "skip", "reason": f"нормальность проверяется при p = 2, а p = {spec.p:g}"}
    n = spec.dimension
    residual = normality_residual(spec, probes.gaussian_bump_nd(n), _check_axes(NORMALITY_T_RANGE, n))
    tol = _tol(args, SUITE_TOL["normality"])
    return {"status": "pass" if residual <= tol else "fail", "residual": residual, "tolerance": tol}


def _suite_regularity(spec, args) -> dict:
    n = spec.dimension
    report = regularity_check(spec, probes.library_probe("saturation", n), REGULARITY_POINTS)
    tol = _tol(args, SUITE_TOL["regularity"])
    gap = float(report.gaps[-1])
    passed = report.converging and gap <= tol
    return {"status": "pass" if passed else "fail", "residual": gap, "tolerance": tol, **report.to_dict()}


def _suite_inverse(spec, args) -> dict:
    try:
        generating_series(spec)
    except UnsupportedVariantError as e:
        return {"status": "skip", "reason": str(e)}
    try:
        inverse = discrete_inverse(spec)
    except NotInvertibleError as e:
        return {"status": "fail", "reason": str(e), "inf_estimate": e.inf_estimate}
    F, G = inverse_series(spec)
    identity = F.truncated(G.terms).convolve(G).coefficients
    identity[0] -= 1.0
    reciprocal = float(np.max(np.abs(identity)))

    n = spec.dimension
    f = probes.gaussian_bump_nd(n)
    axes = _check_axes(NORMALITY_T_RANGE, n)
    restored = apply(inverse, nested_probe(spec, f), axes)
    original = GridFunction.sample(f, axes)
    residual = restored.with_values(restored.values - original.values).norm() / original.norm()

    tol = _tol(args, SUITE_TOL["inverse"])
    passed = residual <= tol and reciprocal <= SUITE_TOL["reciprocal"]
    b = G.coefficients[:INVERSE_PREVIEW]
    return {
        "status": "pass" if passed else "fail",
        "residual": float(residual),
        "tolerance": tol,
        "reciprocal_residual": reciprocal,
        "b": [float(v.real) if v.imag == 0 else [float(v.real), float(v.imag)] for v in b],
        "terms": G.terms,
        "tail_estimate": G.tail_estimate(),
    }


SUITE_RUNNERS = {
    "diag": _suite_diag,
    "adjoint": _suite_adjoint,
    "normality": _suite_normality,
    "regularity": _suite_regularity,
    "inverse": _suite_inverse,
}


def _run_suite(name: str, spec, args) -> dict:
    try:
        return SUITE_RUNNERS[name](spec, args)
    except REFUSALS as e:
        return {"status": "refused", "reason": str(e)}
    except (SpecError, UnsupportedVariantError) as e:
        return {"status": "skip", "reason": str(e)}


def cmd_verify(args) -> int:
    spec = _load_valid(args)
    names = SUITES if args.suite == "all" else (args.suite,)
    results = {}
    for name in names:
        result = _run_suite(name, spec, args)
        results[name] = result
        marker = {"pass": "✓", "skip": "→"}.get(result["status"], "!")
        _say(args, f"[{marker}] {name}: {result['status']}"
                   + (f", невязка {result['residual']:.3e}" if "residual" in result else ""))
    statuses = {result["status"] for result in results.values()}
    payload = {"spec": spec.name, "md5": spec_hash(spec), "suites": results,
               "passed": statuses <= {"pass", "skip"}}
    if args.timestamp:
        payload["timestamp"] = datetime.now().isoformat(timespec="seconds")
    _write_json(args.out, payload)
    if "fail" in statuses:
        return EXIT_FAILED
    if "refused" in statuses:
        return EXIT_REFUSED
    return EXIT_OK


def cmd_spectrum(args) -> int:
    spec = _load_valid(args)
    n = spec.dimension
    sym = build_symbol(spec)
    if args.s_range:
        points = _s_points(args.s_range, args.grid_n or DEFAULT_GRID_N, n)
    else:
        points = s_grid(n)
    cloud = spectrum_cloud(sym, points)
    norm = norm_search(sym)
    verdict = invertibility(sym)
    labels = classify_operator(sym)

    data = np.column_stack([points, cloud.points.real, cloud.points.imag])
    columns = [f"s{j + 1}" for j in range(n)] + ["re", "im"]
    _write_csv(args, data, columns, _header(spec, args, {"predicate": cloud.predicate, "samples": points.shape[0]}))

    summary = {
        "spec": spec.name,
        "md5": spec_hash(spec),
        "operator_norm": norm.value,
        "norm": norm.to_dict(),
        "invertibility": verdict.to_dict(),
        "cloud": cloud.to_dict(),
        "classification": sorted(labels),
    }
    if args.out:
        _write_json(Path(args.out).with_suffix(".summary.json"), summary)
    else:
        json.dump(summary, sys.stderr, ensure_ascii=False, indent=2)
        sys.stderr.write("\n")
    _say(args, f"[{'✓' if cloud.violations == 0 else '!'}] ‖H‖ = {norm.value:.10g}, "
               f"обратимость: {verdict.status}, нарушений предиката: {cloud.violations}")
    return EXIT_OK if cloud.violations == 0 else EXIT_FAILED


def cmd_validate(args) -> int:
    spec = load_spec(args.spec)
    report = validate_spec(spec)
    payload = {"spec": spec.name, "md5": spec_hash(spec), **report.to_dict()}
    _write_json(args.out, payload)
    if report.valid:
        _say(args, f"[✓] {spec.name}: спецификация корректна, ‖H‖ ≤ {report.bound:.10g}")
        return EXIT_OK
    for message in report.messages:
        _say(args, f"[!] {message}")
    return EXIT_INVALID


COMMANDS = {
    "apply": cmd_apply,
    "symbol": cmd_symbol,
    "verify": cmd_verify,
    "spectrum": cmd_spectrum,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", required=True, help="JSON-файл спецификации оператора")
    common.add_argument("--out", default=None, help="Куда писать результат (по умолчанию stdout)")
    common.add_argument("--grid-n", type=int, default=None, help=f"Число узлов сетки (по умолчанию {DEFAULT_GRID_N})")
    common.add_argument("--t-range", type=_pair, default=None,
                        help=f"Окно по t = ln x, «a,b» (по умолчанию {DEFAULT_T_RANGE[0]:g},{DEFAULT_T_RANGE[1]:g})")
    common.add_argument("--s-range", type=_pair, default=None,
                        help=f"Диапазон s, «a,b» (по умолчанию {DEFAULT_S_RANGE[0]:g},{DEFAULT_S_RANGE[1]:g})")
    common.add_argument("--tol", type=float, default=None, help="Порог вместо стандартного")
    common.add_argument("--timestamp", action="store_true", help="Добавить время в заголовок результата")
    common.add_argument("-v", "--verbose", action="store_true", help="Подробный лог")

    parser = argparse.ArgumentParser(
        description="Обобщённые операторы Хаусдорфа: действие, символ, проверки, спектр",
        epilog=f"Число потоков для блочных вычислений задаётся переменной окружения {THREADS_ENV}.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("apply", parents=[common], help="Hf на логарифмической сетке (CSV)")
    p.add_argument("--function", default=DEFAULT_FUNCTION,
                   help=f"Тестовая функция ({', '.join(probes.LIBRARY)}) или CSV-таблица «x,Re f[,Im f]»")
    p = sub.add_parser("symbol", parents=[common], help="Символ φ(s) (CSV)")
    p.add_argument("--mode", choices=("closed", "quadrature", "both"), default="closed",
                   help="Замкнутая форма, квадратура или обе с колонкой расхождения")
    p = sub.add_parser("verify", parents=[common], help="Наборы проверок (JSON-отчёт)")
    p.add_argument("--suite", choices=SUITES + ("all",), default="all", help="Какой набор запускать")
    sub.add_parser("spectrum", parents=[common], help="Облако спектра (CSV) и сводка (JSON)")
    sub.add_parser("validate", parents=[common], help="Проверка спецификации (JSON)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="[%(levelname)s] %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except REFUSALS as e:
        print(f"[!] Отказ: {e}", file=sys.stderr)
        return EXIT_REFUSED
    except UnsupportedVariantError as e:
        print(f"[!] Не поддерживается: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (SpecError, OSError) as e:
        print(f"[!] {e}", file=sys.stderr)
        return EXIT_INVALID
    except NotInvertibleError as e:
        print(f"[!] {e}", file=sys.stderr)
        return EXIT_FAILED
    except HausdorffError as e:
        print(f"[!] {e}", file=sys.stderr)
        return EXIT_FAILED
    except Exception:
        print("[!] Непредвиденная ошибка:", file=sys.stderr)
        traceback.print_exc()
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
