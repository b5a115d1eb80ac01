#!/usr/bin/env python3
"""Regenerate the bundled CSV fixtures from scikit-learn's copies of the
UCI tables (Fisher's iris, the wine chemical analyses, the Wisconsin
diagnostic breast cancer set, and the 8x8 handwritten digits).

The fixtures are committed so the package and its tests stay hermetic;
rerun this script only to refresh them.  Requires scikit-learn, which is
not a package dependency.
"""

from __future__ import annotations

import csv
from pathlib import Path

from sklearn import datasets as sk

OUT = Path(__file__).resolve().parent.parent / "src" / "distinction_engine" / "datasets"


def write(name: str, bunch, label_names) -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    path = OUT / f"{name}.csv"
    feature_names = [
        str(f).replace(" ", "_") for f in getattr(bunch, "feature_names", [])
    ] or [f"f{i}" for i in range(bunch.data.shape[1])]
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow([*feature_names, "label"])
        for row, target in zip(bunch.data, bunch.target):
            writer.writerow([*(repr(float(v)) for v in row), label_names[target]])
    print(f"wrote {path} ({bunch.data.shape[0]} rows, {bunch.data.shape[1]} features)")


def main() -> None:
    iris = sk.load_iris()
    write("iris", iris, list(iris.target_names))

    wine = sk.load_wine()
    write("wine", wine, list(wine.target_names))

    bc = sk.load_breast_cancer()
    write("breast_cancer", bc, list(bc.target_names))

    digits = sk.load_digits()
    write("digits", digits, [str(d) for d in range(10)])


if __name__ == "__main__":
    main()
