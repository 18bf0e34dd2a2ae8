"""Finite-domain structural causal models.

An SCM here is a set of endogenous variables, each computed by a lookup
table from its endogenous and exogenous parents, plus mutually independent
exogenous variables with explicit distributions.  Shared confounding is a
single exogenous variable with several children.

All distributional queries are answered by enumerating the exogenous
product space, vectorised with numpy: every endogenous variable is solved
once for every unit and queries become weighted sums over units.
"""
from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .expr import Expression

DEFAULT_ENUMERATION_CAP = 2**24

Assignment = Mapping[str, Any]


class ModelError(ValueError):
    """Malformed model definition."""


class EnumerationCapError(RuntimeError):
    """The exogenous product space exceeds the enumeration cap."""


@dataclass(frozen=True)
class Variable:
    name: str
    domain: tuple

    def __post_init__(self):
        if not self.domain:
            raise ModelError(f"variable {self.name!r} has an empty domain")
        if len(set(self.domain)) != len(self.domain):
            raise ModelError(f"variable {self.name!r} has repeated domain values")

    @property
    def size(self) -> int:
        return len(self.domain)

    def index(self, value) -> int:
        for i, v in enumerate(self.domain):
            if v == value or str(v) == str(value):
                return i
        raise ModelError(f"value {value!r} is not in the domain of {self.name!r}: {list(self.domain)}")


@dataclass(frozen=True, eq=False)
class Mechanism:
    """Lookup-table mechanism.

    ``table`` holds domain *indices* of the target, with one axis per parent
    (endogenous parents first, then exogenous parents, in declared order).
    """

    target: str
    endogenous_parents: tuple[str, ...]
    exogenous_parents: tuple[str, ...]
    table: np.ndarray

    @property
    def parents(self) -> tuple[str, ...]:
        return self.endogenous_parents + self.exogenous_parents

    @classmethod
    def constant(cls, target: str, code: int) -> "Mechanism":
        return cls(target, (), (), np.array(code, dtype=np.int64))

    @classmethod
    def from_function(
        cls,
        target: Variable,
        endogenous_parents: Sequence[Variable],
        exogenous_parents: Sequence[Variable],
        fn: Callable[..., Any],
    ) -> "Mechanism":
        """Tabulate ``fn(**parent_values)`` over the parent domain product."""
        parents = list(endogenous_parents) + list(exogenous_parents)
        shape = tuple(p.size for p in parents)
        table = np.empty(shape, dtype=np.int64)
        for idx in itertools.product(*(range(s) for s in shape)):
            values = {p.name: p.domain[i] for p, i in zip(parents, idx)}
            out = fn(**values)
            try:
                table[idx] = target.index(out)
            except ModelError:
                raise ModelError(
                    f"mechanism for {target.name!r} returns {out!r} at {values}, outside its domain"
                ) from None
        return cls(
            target.name,
            tuple(p.name for p in endogenous_parents),
            tuple(p.name for p in exogenous_parents),
            table,
        )


@dataclass(frozen=True, eq=False)
class ExogenousDistribution:
    variable: str
    probabilities: tuple[float, ...]

    def as_dict(self, var: Variable) -> dict:
        return dict(zip(var.domain, self.probabilities))


def bernoulli(name: str, p: float) -> tuple[Variable, ExogenousDistribution]:
    return Variable(name, (0, 1)), ExogenousDistribution(name, (1.0 - p, float(p)))


def multinomial(name: str, weights: Sequence[float], values: Sequence | None = None):
    values = tuple(values) if values is not None else tuple(range(len(weights)))
    if len(values) != len(weights):
        raise ModelError(f"{name}: {len(values)} values but {len(weights)} weights")
    return Variable(name, values), ExogenousDistribution(name, tuple(float(w) for w in weights))


@dataclass(frozen=True, eq=False)
class SCM:
    endogenous: tuple[Variable, ...]
    exogenous: tuple[Variable, ...]
    mechanisms: Mapping[str, Mechanism]
    exogenous_dists: Mapping[str, ExogenousDistribution]
    numeric: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP

    def __post_init__(self):
        names = [v.name for v in self.endogenous] + [u.name for u in self.exogenous]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ModelError(f"duplicate variable names: {sorted(dupes)}")
        endo, exo = self.endo_vars, self.exo_vars
        if set(self.mechanisms) != set(endo):
            missing = set(endo) - set(self.mechanisms)
            extra = set(self.mechanisms) - set(endo)
            raise ModelError(f"mechanisms do not match endogenous variables (missing {sorted(missing)}, extra {sorted(extra)})")
        for name, mech in self.mechanisms.items():
            for p in mech.endogenous_parents:
                if p not in endo:
                    raise ModelError(f"{name}: unknown endogenous parent {p!r}")
            for p in mech.exogenous_parents:
                if p not in exo:
                    raise ModelError(f"{name}: unknown exogenous parent {p!r}")
            shape = tuple(endo[p].size for p in mech.endogenous_parents) + tuple(
                exo[p].size for p in mech.exogenous_parents
            )
            if mech.table.shape != shape:
                raise ModelError(f"{name}: table shape {mech.table.shape} does not match parents {shape}")
            if mech.table.size and (mech.table.min() < 0 or mech.table.max() >= endo[name].size):
                raise ModelError(f"{name}: table output outside the target domain")
        if set(self.exogenous_dists) != set(exo):
            raise ModelError("every exogenous variable needs exactly one distribution")
        for name, dist in self.exogenous_dists.items():
            probs = np.asarray(dist.probabilities, dtype=float)
            if probs.shape != (exo[name].size,):
                raise ModelError(f"{name}: {probs.size} probabilities for a domain of size {exo[name].size}")
            if (probs < 0).any():
                raise ModelError(f"{name}: negative probability")
            if abs(probs.sum() - 1.0) > 1e-12:
                raise ModelError(f"{name}: probabilities sum to {probs.sum()!r}, not 1")
            if (probs == 0).any():
                warnings.warn(
                    f"exogenous {name!r} has zero-probability values; P(u) is not strictly positive",
                    stacklevel=3,
                )
        for name, enc in self.numeric.items():
            if name not in endo or len(enc) != endo[name].size:
                raise ModelError(f"numeric encoding for {name!r} does not match its domain")
        self.order  # acyclicity check

    # -- structure -------------------------------------------------------
    @cached_property
    def endo_vars(self) -> dict[str, Variable]:
        return {v.name: v for v in self.endogenous}

    @cached_property
    def exo_vars(self) -> dict[str, Variable]:
        return {u.name: u for u in self.exogenous}

    def variable(self, name: str) -> Variable:
        if name in self.endo_vars:
            return self.endo_vars[name]
        if name in self.exo_vars:
            return self.exo_vars[name]
        raise ModelError(f"unknown variable {name!r}")

    @cached_property
    def order(self) -> tuple[str, ...]:
        """Endogenous variables in a topological order (ties by declaration)."""
        remaining = {n: set(m.endogenous_parents) for n, m in self.mechanisms.items()}
        declared = [v.name for v in self.endogenous]
        out: list[str] = []
        while remaining:
            ready = [n for n in declared if n in remaining and not remaining[n]]
            if not ready:
                raise ModelError(f"mechanisms are cyclic among {sorted(remaining)}")
            for n in ready:
                out.append(n)
                del remaining[n]
            for parents in remaining.values():
                parents.difference_update(ready)
        return tuple(out)

    @cached_property
    def unused_exogenous(self) -> frozenset[str]:
        used = {p for m in self.mechanisms.values() for p in m.exogenous_parents}
        return frozenset(self.exo_vars) - used

    def numeric_values(self, name: str) -> np.ndarray:
        """Numeric encoding of an endogenous variable's domain."""
        if name in self.numeric:
            return np.asarray(self.numeric[name], dtype=float)
        var = self.endo_vars[name]
        try:
            return np.array([float(v) for v in var.domain])
        except (TypeError, ValueError):
            raise ModelError(f"{name!r} has a non-numeric domain and no numeric encoding") from None

    def encode(self, assignment: Assignment, *, endogenous_only: bool = False) -> dict[str, int]:
        out = {}
        for name, value in assignment.items():
            if endogenous_only and name not in self.endo_vars:
                raise ModelError(f"{name!r} is not endogenous")
            out[name] = self.variable(name).index(value)
        return out

    # -- enumeration -----------------------------------------------------
    @cached_property
    def n_units(self) -> int:
        n = 1
        for u in self.exogenous:
            n *= u.size
        return n

    @cached_property
    def units(self) -> tuple[dict[str, np.ndarray], np.ndarray]:
        """Exogenous codes and probability for every unit, in C order."""
        if self.n_units > self.enumeration_cap:
            raise EnumerationCapError(
                f"{self.n_units} exogenous configurations exceed the enumeration cap {self.enumeration_cap}"
            )
        sizes = tuple(u.size for u in self.exogenous)
        if not sizes:
            return {}, np.ones(1)
        grids = np.unravel_index(np.arange(self.n_units), sizes)
        codes = {u.name: g.astype(np.int64) for u, g in zip(self.exogenous, grids)}
        p = np.ones(self.n_units)
        for u in self.exogenous:
            p = p * np.asarray(self.exogenous_dists[u.name].probabilities)[codes[u.name]]
        return codes, p

    def solve(self, intervention: Mapping[str, int] | None = None) -> dict[str, np.ndarray]:
        """Endogenous codes for every unit, optionally under ``do(intervention)`` (codes)."""
        if not intervention:
            return self._observational_solution
        return self._solve(intervention)

    @cached_property
    def _observational_solution(self) -> dict[str, np.ndarray]:
        return self._solve({})

    def _solve(self, intervention: Mapping[str, int]) -> dict[str, np.ndarray]:
        exo, _ = self.units
        n = self.n_units
        values: dict[str, np.ndarray] = {}
        for name in self.order:
            if name in intervention:
                values[name] = np.full(n, intervention[name], dtype=np.int64)
                continue
            mech = self.mechanisms[name]
            idx = tuple(values[p] for p in mech.endogenous_parents) + tuple(
                exo[p] for p in mech.exogenous_parents
            )
            if idx:
                values[name] = mech.table[idx]
            else:
                values[name] = np.full(n, int(mech.table), dtype=np.int64)
        return values

    def to_dict(self) -> dict:
        return model_to_dict(self)


# -- operations --------------------------------------------------------------


def evaluate_unit(scm: SCM, u: Assignment) -> dict[str, Any]:
    """Solve the structural equations for a single unit ``U = u``."""
    missing = set(scm.exo_vars) - set(u)
    if missing:
        raise ModelError(f"unit does not bind exogenous variables {sorted(missing)}")
    codes = {name: scm.exo_vars[name].index(value) for name, value in u.items() if name in scm.exo_vars}
    extra = set(u) - set(scm.exo_vars)
    if extra:
        raise ModelError(f"unit binds non-exogenous variables {sorted(extra)}")
    values: dict[str, int] = {}
    for name in scm.order:
        mech = scm.mechanisms[name]
        idx = tuple(values[p] for p in mech.endogenous_parents) + tuple(
            codes[p] for p in mech.exogenous_parents
        )
        values[name] = int(mech.table[idx]) if idx else int(mech.table)
    return {name: scm.endo_vars[name].domain[c] for name, c in values.items()}


def submodel(scm: SCM, intervention: Assignment) -> SCM:
    """The submodel M_x: intervened variables get constant, parentless mechanisms."""
    codes = scm.encode(intervention, endogenous_only=True)
    mechanisms = dict(scm.mechanisms)
    for name, code in codes.items():
        mechanisms[name] = Mechanism.constant(name, code)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return SCM(
            scm.endogenous,
            scm.exogenous,
            mechanisms,
            scm.exogenous_dists,
            scm.numeric,
            scm.enumeration_cap,
        )


def potential_response(scm: SCM, u: Assignment, intervention: Assignment, target: str):
    """Y_x(u): the value of ``target`` for unit ``u`` in the submodel M_x."""
    return evaluate_unit(submodel(scm, intervention), u)[target]


@dataclass(frozen=True, eq=False)
class Distribution:
    """Joint probability table over named finite variables."""

    variables: tuple[str, ...]
    domains: tuple[tuple, ...]
    probs: np.ndarray
    numeric: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    def _axis(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            raise ModelError(f"{name!r} is not in this distribution") from None

    def _code(self, name: str, value) -> int:
        return Variable(name, self.domains[self._axis(name)]).index(value)

    def prob(self, event: Assignment) -> float:
        idx = [slice(None)] * len(self.variables)
        for name, value in event.items():
            idx[self._axis(name)] = self._code(name, value)
        return float(self.probs[tuple(idx)].sum())

    def marginal(self, names: Sequence[str]) -> "Distribution":
        axes = [self._axis(n) for n in names]
        drop = tuple(i for i in range(len(self.variables)) if i not in axes)
        table = self.probs.sum(axis=drop)
        # sum keeps remaining axes in original order; permute to requested order
        kept = [i for i in range(len(self.variables)) if i in axes]
        table = np.transpose(table, [kept.index(a) for a in axes])
        return Distribution(
            tuple(names), tuple(self.domains[a] for a in axes), table,
            {k: v for k, v in self.numeric.items() if k in names},
        )

    def numeric_values(self, name: str) -> np.ndarray:
        if name in self.numeric:
            return np.asarray(self.numeric[name], dtype=float)
        return np.array([float(v) for v in self.domains[self._axis(name)]])

    def expectation(self, name: str) -> float:
        m = self.marginal([name]).probs
        return float(m @ self.numeric_values(name))

    def items(self) -> Iterable[tuple[dict, float]]:
        for idx in itertools.product(*(range(len(d)) for d in self.domains)):
            yield ({v: d[i] for v, d, i in zip(self.variables, self.domains, idx)}, float(self.probs[idx]))

    def total(self) -> float:
        return float(self.probs.sum())


def _pushforward(scm: SCM, solution: Mapping[str, np.ndarray], weights: np.ndarray) -> Distribution:
    names = scm.order
    sizes = tuple(scm.endo_vars[n].size for n in names)
    flat = np.ravel_multi_index(tuple(solution[n] for n in names), sizes) if names else np.zeros(len(weights), dtype=np.int64)
    table = np.bincount(flat, weights=weights, minlength=int(np.prod(sizes))).reshape(sizes)
    return Distribution(tuple(names), tuple(scm.endo_vars[n].domain for n in names), table, dict(scm.numeric))


def joint_observational(scm: SCM) -> Distribution:
    """P(v) = sum_u 1[V(u) = v] P(u), by exact enumeration."""
    _, p = scm.units
    return _pushforward(scm, scm.solve(), p)


def interventional(scm: SCM, intervention: Assignment) -> Distribution:
    """P(v_x): pushforward of P(u) through the submodel M_x."""
    codes = scm.encode(intervention, endogenous_only=True)
    _, p = scm.units
    return _pushforward(scm, scm.solve(codes), p)


def sample(scm: SCM, n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Forward-sample ``n`` units; returns endogenous domain indices per variable."""
    exo = {
        u.name: rng.choice(u.size, size=n, p=np.asarray(scm.exogenous_dists[u.name].probabilities))
        for u in scm.exogenous
    }
    values: dict[str, np.ndarray] = {}
    for name in scm.order:
        mech = scm.mechanisms[name]
        idx = tuple(values[p] for p in mech.endogenous_parents) + tuple(exo[p] for p in mech.exogenous_parents)
        values[name] = mech.table[idx] if idx else np.full(n, int(mech.table), dtype=np.int64)
    return values


# -- model files -------------------------------------------------------------


def _parse_scalar(value):
    if isinstance(value, str):
        for cast in (int, float):
            try:
                return cast(value)
            except ValueError:
                pass
    return value


def _exogenous_from_spec(name: str, spec: Mapping) -> tuple[Variable, ExogenousDistribution]:
    if "bernoulli" in spec:
        return bernoulli(name, float(spec["bernoulli"]))
    if "multinomial" in spec:
        return multinomial(name, spec["multinomial"], spec.get("values"))
    if "table" in spec:
        items = list(spec["table"].items())
        return multinomial(name, [float(p) for _, p in items], [_parse_scalar(k) for k, _ in items])
    raise ModelError(f"exogenous {name!r}: expected one of bernoulli / multinomial / table")


def model_from_dict(data: Mapping, *, enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> SCM:
    """Build an SCM from the JSON model format."""
    try:
        endo_spec = data["endogenous"]
        exo_spec = data.get("exogenous", {})
        mech_spec = data["mechanisms"]
    except KeyError as exc:
        raise ModelError(f"model is missing key {exc.args[0]!r}") from None
    endogenous = tuple(Variable(n, tuple(d)) for n, d in endo_spec.items())
    endo = {v.name: v for v in endogenous}
    exo_pairs = [_exogenous_from_spec(n, s) for n, s in exo_spec.items()]
    exogenous = tuple(v for v, _ in exo_pairs)
    exo = {v.name: v for v in exogenous}
    dists = {d.variable: d for _, d in exo_pairs}

    mechanisms = {}
    for target, spec in mech_spec.items():
        if target not in endo:
            raise ModelError(f"mechanism for undeclared variable {target!r}")
        parents = list(spec.get("parents", []))
        exo_parents = list(spec.get("exo_parents", []))
        for p in parents:
            if p not in endo:
                raise ModelError(f"{target}: unknown endogenous parent {p!r}")
        for p in exo_parents:
            if p not in exo:
                raise ModelError(f"{target}: unknown exogenous parent {p!r}")
        pvars = [endo[p] for p in parents]
        uvars = [exo[p] for p in exo_parents]
        if "expr" in spec:
            expression = Expression(spec["expr"])
            unknown = expression.names - set(parents) - set(exo_parents)
            if unknown:
                raise ModelError(f"{target}: expression uses undeclared parents {sorted(unknown)}")
            mechanisms[target] = Mechanism.from_function(
                endo[target], pvars, uvars, lambda **kw: expression.evaluate(kw)
            )
        elif "table" in spec:
            table = {str(k): v for k, v in spec["table"].items()}

            def lookup(_table=table, _order=parents + exo_parents, _target=target, **kw):
                key = ",".join(str(kw[p]) for p in _order)
                if key not in _table:
                    raise ModelError(f"{_target}: table has no entry for parent values {key!r}")
                return _parse_scalar(_table[key]) if not isinstance(_table[key], (int, float)) else _table[key]

            expected = 1
            for v in pvars + uvars:
                expected *= v.size
            if len(table) != expected:
                raise ModelError(f"{target}: table has {len(table)} entries, expected {expected}")
            mechanisms[target] = Mechanism.from_function(endo[target], pvars, uvars, lookup)
        else:
            raise ModelError(f"mechanism {target!r} needs 'expr' or 'table'")

    numeric = {}
    for name, enc in data.get("numeric", {}).items():
        if name not in endo:
            raise ModelError(f"numeric encoding for unknown variable {name!r}")
        if isinstance(enc, Mapping):
            numeric[name] = tuple(float(enc[str(v)]) if str(v) in enc else float(enc[v]) for v in endo[name].domain)
        else:
            numeric[name] = tuple(float(x) for x in enc)
    return SCM(endogenous, exogenous, mechanisms, dists, numeric, enumeration_cap)


def model_to_dict(scm: SCM) -> dict:
    """Serialise to the JSON model format (table form)."""
    out: dict[str, Any] = {
        "endogenous": {v.name: list(v.domain) for v in scm.endogenous},
        "exogenous": {
            u.name: {"table": {str(k): p for k, p in zip(u.domain, scm.exogenous_dists[u.name].probabilities)}}
            for u in scm.exogenous
        },
        "mechanisms": {},
    }
    for v in scm.endogenous:
        mech = scm.mechanisms[v.name]
        pvars = [scm.variable(p) for p in mech.parents]
        table = {}
        for idx in itertools.product(*(range(p.size) for p in pvars)):
            key = ",".join(str(p.domain[i]) for p, i in zip(pvars, idx))
            code = int(mech.table[idx]) if idx else int(mech.table)
            table[key] = v.domain[code]
        out["mechanisms"][v.name] = {
            "parents": list(mech.endogenous_parents),
            "exo_parents": list(mech.exogenous_parents),
            "table": table,
        }
    if scm.numeric:
        out["numeric"] = {k: list(v) for k, v in scm.numeric.items()}
    return out


def load_model(path: str | Path, **kwargs) -> SCM:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh), **kwargs)


MODELS_DIR = Path(__file__).parent / "models"


def bundled_model_path(name: str) -> Path:
    stem = Path(name).name
    if not stem.endswith(".json"):
        stem += ".json"
    path = MODELS_DIR / stem
    if not path.exists():
        raise FileNotFoundError(f"no bundled model named {name!r}")
    return path


def load_bundled(name: str) -> SCM:
    """Load one of the example models shipped with the package, e.g. ``"markov_b1"``."""
    with warnings.catch_warnings():
        # counterexample models carry zero-weight exogenous values on purpose
        warnings.simplefilter("ignore")
        return load_model(bundled_model_path(name))
