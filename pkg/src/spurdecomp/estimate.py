"""Plug-in estimation of identified spurious decompositions from tabular data.

Estimators accept either a :class:`Dataset` (empirical frequencies) or an
exact :class:`~spurdecomp.scm.Distribution` (e.g. ``joint_observational``
of a model), so the same code path is checked against exact engine values.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence, Union

import numpy as np

from .decompose import Contribution, DecompositionReport, event_label
from .diagram import (
    CausalDiagram,
    IdVerdict,
    anchor_set,
    check_identifiable,
    confounders_in_topological_order,
    is_markovian,
    tops_of_spurious_treks,
)
from .engine import Event, Expect, ImpossibleEvidenceError
from .scm import SCM, Distribution, Variable


class EstimationError(ValueError):
    pass


class EmptyStratumError(EstimationError):
    def __init__(self, message: str, strata: list[dict]):
        super().__init__(message)
        self.strata = strata


class NotIdentifiedError(EstimationError):
    def __init__(self, message: str, verdict: IdVerdict | None = None):
        super().__init__(message)
        self.verdict = verdict


class BootstrapError(RuntimeError):
    pass


class SchemaError(ValueError):
    pass


# -- data -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed samples over categorical columns.

    Rows are stored compressed: distinct code patterns with multiplicities.
    """

    columns: tuple[str, ...]
    domains: tuple[tuple, ...]
    codes: np.ndarray
    counts: np.ndarray
    numeric: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.codes.ndim != 2 or self.codes.shape[1] != len(self.columns):
            raise SchemaError("codes must be a (patterns x columns) array")
        for j, dom in enumerate(self.domains):
            if self.codes.size and (self.codes[:, j].min() < 0 or self.codes[:, j].max() >= len(dom)):
                raise SchemaError(f"column {self.columns[j]!r} has codes outside its domain")
        if self.n < 1:
            raise SchemaError("a dataset needs at least one row")

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_codes(cls, columns, domains, rows: np.ndarray, numeric=None) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        patterns, counts = np.unique(rows, axis=0, return_counts=True)
        return cls(tuple(columns), tuple(tuple(d) for d in domains), patterns, counts, dict(numeric or {}))

    @classmethod
    def from_rows(cls, rows: Sequence[Mapping[str, Any]], domains: Mapping[str, Sequence], numeric=None) -> "Dataset":
        columns = tuple(domains)
        variables = [Variable(c, tuple(domains[c])) for c in columns]
        codes = np.array([[v.index(row[v.name]) for v in variables] for row in rows], dtype=np.int64)
        return cls.from_codes(columns, [v.domain for v in variables], codes.reshape(len(rows), len(columns)), numeric)

    def rows(self):
        for pattern, count in zip(self.codes, self.counts):
            row = {c: d[i] for c, d, i in zip(self.columns, self.domains, pattern)}
            for _ in range(int(count)):
                yield dict(row)

    def resample(self, rng: np.random.Generator) -> "Dataset":
        """Bootstrap resample of n rows with replacement (multinomial over patterns)."""
        counts = rng.multinomial(self.n, self.counts / self.n)
        keep = counts > 0
        return Dataset(self.columns, self.domains, self.codes[keep], counts[keep], self.numeric)

    def joint(self, names: Sequence[str]) -> np.ndarray:
        axes = [self._axis(n) for n in names]
        sizes = tuple(len(self.domains[a]) for a in axes)
        if not axes:
            return np.array(float(self.n))
        flat = np.ravel_multi_index(tuple(self.codes[:, a] for a in axes), sizes)
        return np.bincount(flat, weights=self.counts, minlength=int(np.prod(sizes))).reshape(sizes)

    def _axis(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise SchemaError(f"column {name!r} is not in the dataset") from None

    def domain(self, name: str) -> tuple:
        return self.domains[self._axis(name)]

    def numeric_values(self, name: str) -> np.ndarray:
        if name in self.numeric:
            return np.asarray(self.numeric[name], dtype=float)
        try:
            return np.array([float(v) for v in self.domain(name)])
        except (TypeError, ValueError):
            raise SchemaError(f"column {name!r} needs a numeric encoding for expectations") from None


Source = Union[Dataset, Distribution]


def _joint(source: Source, names: Sequence[str]) -> np.ndarray:
    if isinstance(source, Dataset):
        return source.joint(names)
    return source.marginal(list(names)).probs if names else np.array(source.total())


def _domain(source: Source, name: str) -> tuple:
    if isinstance(source, Dataset):
        return source.domain(name)
    return source.domains[source.variables.index(name)]


def _code(source: Source, name: str, value) -> int:
    return Variable(name, _domain(source, name)).index(value)


def _stat_vector(source: Source, y: Event) -> tuple[str, np.ndarray]:
    if isinstance(y, Expect):
        return y.var, source.numeric_values(y.var)
    if len(y) != 1:
        raise EstimationError("y must bind exactly one outcome variable")
    (name, value), = y.items()
    vec = np.zeros(len(_domain(source, name)))
    vec[_code(source, name, value)] = 1.0
    return name, vec


def load_schema(path: str | Path) -> tuple[dict[str, list], dict[str, list[float]]]:
    """Read a schema sidecar: ``{column: [domain...], "numeric": {column: encoding}}``.

    A nested ``{"columns": {...}, "numeric": {...}}`` layout is accepted too.
    """
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    numeric_raw = data.get("numeric", {})
    cols = data["columns"] if "columns" in data else {k: v for k, v in data.items() if k != "numeric"}
    domains = {k: list(v) for k, v in cols.items()}
    numeric = {}
    for k, enc in numeric_raw.items():
        if k not in domains:
            raise SchemaError(f"numeric encoding for unknown column {k!r}")
        if isinstance(enc, Mapping):
            numeric[k] = [float(enc[str(v)]) for v in domains[k]]
        else:
            numeric[k] = [float(e) for e in enc]
    return domains, numeric


def schema_from_model(scm: SCM) -> dict:
    out: dict[str, Any] = {v.name: list(v.domain) for v in scm.endogenous}
    if scm.numeric:
        out["numeric"] = {k: list(v) for k, v in scm.numeric.items()}
    return out


def read_csv(path: str | Path, schema: str | Path | tuple) -> Dataset:
    """Load a CSV with a header row, validating cells against the schema domains."""
    domains, numeric = load_schema(schema) if not isinstance(schema, tuple) else schema
    columns = list(domains)
    lookup = {c: {str(v): i for i, v in enumerate(domains[c])} for c in columns}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        missing = set(columns) - set(header)
        if missing:
            raise SchemaError(f"{path}: columns {sorted(missing)} missing from header")
        pos = [header.index(c) for c in columns]
        rows = []
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            try:
                rows.append([lookup[c][record[p]] for c, p in zip(columns, pos)])
            except KeyError:
                bad = [c for c, p in zip(columns, pos) if record[p] not in lookup[c]]
                raise SchemaError(f"{path}:{lineno}: value outside declared domain in {bad}") from None
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return Dataset.from_codes(columns, [domains[c] for c in columns], np.array(rows), numeric)


def write_csv(path: str | Path, columns: Sequence[str], domains: Sequence[Sequence], codes: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in codes:
            writer.writerow([domains[j][c] for j, c in enumerate(row)])


def sample_dataset(scm: SCM, n: int, seed: int) -> tuple[list[str], list[tuple], np.ndarray]:
    """Forward-sample observed columns (declaration order) as code rows."""
    from .scm import sample

    values = sample(scm, n, np.random.default_rng(seed))
    columns = [v.name for v in scm.endogenous]
    codes = np.stack([values[c] for c in columns], axis=1)
    return columns, [scm.endo_vars[c].domain for c in columns], codes


def dataset_from_model(scm: SCM, n: int, seed: int) -> Dataset:
    columns, domains, codes = sample_dataset(scm, n, seed)
    return Dataset.from_codes(columns, domains, codes, scm.numeric)


# -- conditional probability tables -------------------------------------------


@dataclass(frozen=True, eq=False)
class CPT:
    """P(target | conditioning); ``table`` has conditioning axes first, then target axes."""

    target: tuple[str, ...]
    conditioning: tuple[str, ...]
    table: np.ndarray
    support: np.ndarray

    @property
    def empty(self) -> np.ndarray:
        """Conditioning cells with no support (their distributions are NaN)."""
        return self.support <= 0

    def prob(self, target: Mapping[str, int], given: Mapping[str, int]) -> float:
        idx = tuple(given[c] for c in self.conditioning) + tuple(target[t] for t in self.target)
        return float(self.table[idx])


def fit_cpt(
    data: Source, target: str | Sequence[str], conditioning: Sequence[str] = (), smoothing: float = 0.0
) -> CPT:
    """Relative frequencies with optional additive smoothing."""
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    target = (target,) if isinstance(target, str) else tuple(target)
    conditioning = tuple(conditioning)
    joint = np.asarray(_joint(data, conditioning + target), dtype=float)
    joint = joint + smoothing
    nt = len(target)
    t_axes = tuple(range(len(conditioning), len(conditioning) + nt))
    denom = joint.sum(axis=t_axes, keepdims=True) if nt else joint
    support = np.asarray(_joint(data, conditioning), dtype=float) if conditioning else np.array(float(np.sum(_joint(data, target))))
    with np.errstate(invalid="ignore", divide="ignore"):
        table = np.where(denom > 0, joint / np.where(denom > 0, denom, 1.0), np.nan)
    if smoothing > 0:
        support = support + smoothing * int(np.prod([joint.shape[a] for a in t_axes]))
    return CPT(target, conditioning, table, support)


# -- plug-in estimands ---------------------------------------------------------


def _decode(source: Source, names: Sequence[str], idx) -> dict:
    return {n: _domain(source, n)[int(i)] for n, i in zip(names, idx)}


def _adjusted(source: Source, x: Mapping[str, Any], y: Event, fixed: Sequence[str], rest: Sequence[str], smoothing: float) -> float:
    """sum_z P(y | z, x) P(z_rest | z_fixed, x) P(z_fixed)."""
    (xname, xval), = x.items()
    xc = _code(source, xname, xval)
    yname, stat = _stat_vector(source, y)
    fixed, rest = list(fixed), list(rest)
    zs = fixed + rest

    p_fixed = fit_cpt(source, fixed, (), smoothing) if fixed else None
    f = p_fixed.table if p_fixed is not None else np.array(1.0)

    p_rest = fit_cpt(source, rest, fixed + [xname], smoothing) if rest else None
    if p_rest is not None:
        # axes: fixed..., x, rest...  -> select x
        h = np.take(p_rest.table, xc, axis=len(fixed))
        h_empty = np.take(p_rest.empty, xc, axis=len(fixed))
        needed = (f > 0) & h_empty
        if needed.any():
            strata = [dict(_decode(source, fixed, i), **{xname: xval}) for i in zip(*np.nonzero(needed))]
            raise EmptyStratumError(f"empty strata for P({rest} | {fixed}, {xname}): {strata}", strata)
        f_b = f.reshape(f.shape + (1,) * len(rest))
        h_clean = np.where(np.isnan(h), 0.0, h)
        weight = f_b * h_clean
    else:
        weight = np.asarray(f, dtype=float)

    p_y = fit_cpt(source, yname, zs + [xname], smoothing)
    g_table = np.take(p_y.table, xc, axis=len(zs))
    g_empty = np.take(p_y.empty, xc, axis=len(zs))
    needed = (weight > 0) & g_empty
    if needed.any():
        strata = [dict(_decode(source, zs, i), **{xname: xval}) for i in zip(*np.nonzero(needed))]
        raise EmptyStratumError(f"empty strata for P({yname} | {zs}, {xname}): {strata}", strata)
    g = np.where(np.isnan(g_table), 0.0, g_table) @ stat
    return float(np.sum(np.where(weight > 0, weight * g, 0.0)))


def estimate_conditional(source: Source, x: Mapping[str, Any], y: Event, smoothing: float = 0.0) -> float:
    """Plug-in P(y | x)."""
    return _adjusted(source, x, y, [], [], smoothing)


def estimate_pa_markov(
    data: Source,
    diagram: CausalDiagram,
    x: Mapping[str, Any],
    y: Event,
    i: int,
    *,
    order: Sequence[str] | None = None,
    smoothing: float = 0.0,
) -> float:
    """sum_z P(y | z, x) P(z_{-[i]} | z_{[i]}, x) P(z_{[i]}) over the confounder order."""
    if not is_markovian(diagram):
        raise NotIdentifiedError("estimate_pa_markov requires a Markovian diagram")
    (xname, _), = x.items()
    yname = y.var if isinstance(y, Expect) else next(iter(y))
    zs = confounders_in_topological_order(diagram, xname, yname, tie_break=order)
    if not 0 <= i <= len(zs):
        raise ValueError(f"prefix length {i} outside 0..{len(zs)}")
    return _adjusted(data, x, y, zs[:i], zs[i:], smoothing)


def estimate_pa_anchor(
    data: Source,
    diagram: CausalDiagram,
    x: Mapping[str, Any],
    y: Event,
    latents,
    *,
    smoothing: float = 0.0,
) -> float:
    """sum_{z_s} P(y | x, z_s) P(z_s) with z_s the anchor set of the latents."""
    (xname, _), = x.items()
    yname = y.var if isinstance(y, Expect) else next(iter(y))
    latents = frozenset(latents)
    verdict = check_identifiable(diagram, latents, xname, yname)
    if not verdict.identifiable:
        raise NotIdentifiedError(
            f"P({yname} | {xname}^{sorted(latents)}) is not established as identifiable: "
            + "; ".join(verdict.reasons),
            verdict,
        )
    zs = sorted(anchor_set(diagram, latents, xname))
    return _adjusted(data, x, y, zs, [], smoothing)


def estimate_backdoor(data: Source, x, y: Event, adjustment: Sequence[str], smoothing: float = 0.0) -> float:
    return _adjusted(data, x, y, list(adjustment), [], smoothing)


def _plan(diagram: CausalDiagram, x, y: Event, mode: str, order):
    (xname, _), = x.items()
    yname = y.var if isinstance(y, Expect) else next(iter(y))
    if mode == "auto":
        mode = "markovian" if is_markovian(diagram) else "semi-markovian"
    if mode == "markovian":
        zs = confounders_in_topological_order(diagram, xname, yname, tie_break=order)
        labels = [tuple(sorted(diagram.exogenous_parents(z))) for z in zs]
        return mode, tuple(zs), labels, zs
    if mode == "semi-markovian":
        stot = tops_of_spurious_treks(diagram, xname, yname)
        order = sorted(stot) if order is None else list(order)
        if sorted(order) != sorted(stot) or len(set(order)) != len(order):
            raise EstimationError(f"order {order} is not a permutation of U_sToT = {sorted(stot)}")
        for i in range(1, len(order) + 1):
            verdict = check_identifiable(diagram, order[:i], xname, yname)
            if not verdict.identifiable:
                raise NotIdentifiedError(
                    f"prefix {order[:i]} is not established as identifiable: " + "; ".join(verdict.reasons),
                    verdict,
                )
        return mode, tuple(order), [(u,) for u in order], None
    raise EstimationError(f"unknown mode {mode!r}")


def estimate_decomposition(
    data: Source,
    diagram: CausalDiagram,
    x: Mapping[str, Any],
    y: Event,
    mode: str = "auto",
    order: Sequence[str] | None = None,
    *,
    smoothing: float = 0.0,
) -> DecompositionReport:
    """Plug-in decomposition: differences of consecutive identified prefix terms."""
    mode, ordering, labels, zs = _plan(diagram, x, y, mode, order)
    return _estimate_planned(data, diagram, x, y, mode, ordering, labels, zs, smoothing)


def _estimate_planned(data, diagram, x, y, mode, ordering, labels, zs, smoothing) -> DecompositionReport:
    if mode == "markovian":
        values = [_adjusted(data, x, y, zs[:i], zs[i:], smoothing) for i in range(len(zs) + 1)]
        backdoor = zs
    else:
        values = [estimate_pa_anchor(data, diagram, x, y, ordering[:i], smoothing=smoothing)
                  for i in range(len(ordering) + 1)]
        (xname, _), = x.items()
        backdoor = sorted(anchor_set(diagram, ordering, xname))
    total = estimate_conditional(data, x, y, smoothing) - estimate_backdoor(data, x, y, backdoor, smoothing)
    contributions = [
        Contribution(lab, values[i] - values[i + 1], zs[i] if zs else None) for i, lab in enumerate(labels)
    ]
    return DecompositionReport(total, contributions, ordering, mode, values, dict(x), event_label(y))


# -- bootstrap ----------------------------------------------------------------


@dataclass(frozen=True)
class EstimateWithCI:
    point: float
    lower: float
    upper: float
    level: float
    replicates: int
    seed: int
    se: float = float("nan")
    failures: int = 0

    @property
    def covers_point(self) -> bool:
        return self.lower <= self.point <= self.upper

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return {"point": self.point, "lower": self.lower, "upper": self.upper, "se": self.se,
                "level": self.level, "replicates": self.replicates, "seed": self.seed,
                "failures": self.failures}


_REPLICATE_ERRORS = (EstimationError, ImpossibleEvidenceError, FloatingPointError)


def replicate_rng(seed: int, r: int) -> np.random.Generator:
    """Independent stream for replicate ``r``; depends only on (seed, r)."""
    return np.random.default_rng(np.random.SeedSequence([seed, r]))


def bootstrap_replicates(
    data: Dataset, estimator: Callable[[Dataset], Any], replicates: int, seed: int
) -> tuple[np.ndarray, int]:
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    out = []
    failures = 0
    for r in range(replicates):
        try:
            out.append(np.atleast_1d(np.asarray(estimator(data.resample(replicate_rng(seed, r))), dtype=float)))
        except _REPLICATE_ERRORS:
            failures += 1
    if failures > 0.2 * replicates:
        raise BootstrapError(f"estimator failed on {failures} of {replicates} bootstrap replicates")
    return np.array(out), failures


def _interval(point: float, reps: np.ndarray, level: float, replicates: int, seed: int, failures: int) -> EstimateWithCI:
    alpha = 1.0 - level
    lo, hi = np.quantile(reps, [alpha / 2, 1 - alpha / 2])
    se = float(np.std(reps, ddof=1)) if reps.size > 1 else 0.0
    return EstimateWithCI(float(point), float(lo), float(hi), level, replicates, seed, se, failures)


def bootstrap_ci(
    data: Dataset,
    estimator: Callable[[Dataset], float],
    replicates: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> EstimateWithCI:
    """Percentile bootstrap interval for a scalar estimator."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    point = float(estimator(data))
    reps, failures = bootstrap_replicates(data, estimator, replicates, seed)
    return _interval(point, reps[:, 0], level, replicates, seed, failures)


@dataclass
class EstimatedDecomposition:
    report: DecompositionReport
    total: EstimateWithCI
    contributions: list[EstimateWithCI]

    def to_dict(self) -> dict:
        out = self.report.to_dict()
        out["total_ci"] = self.total.to_dict()
        for c, ci in zip(out["contributions"], self.contributions):
            c["ci"] = ci.to_dict()
        return out


def bootstrap_decomposition(
    data: Dataset,
    diagram: CausalDiagram,
    x: Mapping[str, Any],
    y: Event,
    mode: str = "auto",
    order: Sequence[str] | None = None,
    *,
    replicates: int = 1000,
    level: float = 0.95,
    seed: int = 0,
    smoothing: float = 0.0,
) -> EstimatedDecomposition:
    """Point decomposition plus a percentile interval for every contribution and the total."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    mode, ordering, labels, zs = _plan(diagram, x, y, mode, order)

    def vector(d: Dataset) -> list[float]:
        rep = _estimate_planned(d, diagram, x, y, mode, ordering, labels, zs, smoothing)
        return [rep.total] + [c.value for c in rep.contributions]

    report = _estimate_planned(data, diagram, x, y, mode, ordering, labels, zs, smoothing)
    reps, failures = bootstrap_replicates(data, vector, replicates, seed)
    point = [report.total] + [c.value for c in report.contributions]
    cis = [_interval(point[j], reps[:, j], level, replicates, seed, failures) for j in range(len(point))]
    return EstimatedDecomposition(report, cis[0], cis[1:])
