"""Preprocessing recipe for the ProPublica COMPAS two-year recidivism file.

The raw file (``compas-scores-two-years.csv``) is user-supplied.  All rows
are kept; columns are binned into small categorical domains:

* Z1 sex: Male / Female
* Z2 age: ProPublica's ``age_cat`` (Less than 25 / 25 - 45 / Greater than 45)
* X race: White (``Caucasian``) / Non-White
* J juvenile offences (felony + misdemeanour + other): 0 / 1 / 2+
* P prior offences: 0 / 1-3 / 4+
* D charge degree: F / M
* Y two-year recidivism: 0 / 1
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .diagram import CausalDiagram
from .estimate import Dataset, SchemaError

DOMAINS = {
    "Z1": ("Male", "Female"),
    "Z2": ("Less than 25", "25 - 45", "Greater than 45"),
    "X": ("White", "Non-White"),
    "J": ("0", "1", "2+"),
    "P": ("0", "1-3", "4+"),
    "D": ("F", "M"),
    "Y": (0, 1),
}

DIAGRAM = {
    "endogenous": list(DOMAINS),
    "directed": [
        ["Z1", "J"], ["Z1", "P"], ["Z1", "D"], ["Z1", "Y"],
        ["Z2", "J"], ["Z2", "P"], ["Z2", "D"], ["Z2", "Y"],
        ["X", "J"], ["X", "P"], ["X", "D"], ["X", "Y"],
        ["J", "P"], ["J", "D"], ["J", "Y"],
        ["P", "D"], ["D", "Y"],
    ],
    "exogenous": {"U_Z1": ["Z1", "X"], "U_Z2": ["Z2", "X"]},
}

ORDER = ("U_Z1", "U_Z2")
X0 = {"X": "White"}
OUTCOME = {"Y": 1}

_REQUIRED = ("sex", "age_cat", "race", "juv_fel_count", "juv_misd_count",
             "juv_other_count", "priors_count", "c_charge_degree", "two_year_recid")


def diagram() -> CausalDiagram:
    return CausalDiagram.from_dict(DIAGRAM)


def _bin(count: int, labels: tuple[str, str, str], mid_max: int) -> str:
    if count <= 0:
        return labels[0]
    return labels[1] if count <= mid_max else labels[2]


def preprocess_row(row: dict) -> dict:
    juv = int(row["juv_fel_count"]) + int(row["juv_misd_count"]) + int(row["juv_other_count"])
    return {
        "Z1": row["sex"],
        "Z2": row["age_cat"],
        "X": "White" if row["race"] == "Caucasian" else "Non-White",
        "J": _bin(juv, DOMAINS["J"], 1),
        "P": _bin(int(row["priors_count"]), DOMAINS["P"], 3),
        "D": row["c_charge_degree"],
        "Y": int(row["two_year_recid"]),
    }


def load_compas(path: str | Path) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in _REQUIRED if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"{path}: COMPAS file lacks columns {missing}")
        rows = [preprocess_row(r) for r in reader]
    columns = list(DOMAINS)
    index = {c: {v: i for i, v in enumerate(DOMAINS[c])} for c in columns}
    try:
        codes = np.array([[index[c][r[c]] for c in columns] for r in rows], dtype=np.int64)
    except KeyError as exc:
        raise SchemaError(f"{path}: unexpected category {exc.args[0]!r}") from None
    return Dataset.from_codes(columns, [DOMAINS[c] for c in columns], codes)
