"""
Пересобирает JSON-спецификации встроенных операторов в fixtures/ и печатает их md5.
Запуск из корня репозитория: python utility/build-fixtures.py [папка]
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from hausdorff_core import (  # noqa: E402
    builtin_cesaro,
    builtin_ck,
    builtin_geometric,
    builtin_identity,
    save_spec,
    spec_hash,
)

FIXTURES_DIR = Path(__file__).resolve().parent.parent / "fixtures"


def builtin_specs() -> list:
    specs = [builtin_cesaro(n) for n in (1, 2, 3)]
    specs += [builtin_ck(k) for k in (0.5, 1, 2, 3)]
    specs += [builtin_geometric(), builtin_identity()]
    return specs


def main():
    if len(sys.argv) > 2:
        print("Использование: python utility/build-fixtures.py [папка]")
        sys.exit(1)
    target = Path(sys.argv[1]) if len(sys.argv) == 2 else FIXTURES_DIR
    for spec in builtin_specs():
        path = save_spec(spec, target / f"{spec.name}.json")
        print(f"[✓] {path.name}: md5 {spec_hash(spec)}")


if __name__ == "__main__":
    main()
