"""Exact inference by (partial) abduction, action and prediction.

Queries take an ``event`` that is either an assignment (probability form,
``{"Y": 1}``) or :class:`Expect` (expectation form, ``Expect("Y")``, using
the model's numeric encoding of that variable).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Literal, Mapping, Union

import numpy as np

from .scm import SCM, Assignment, ModelError


class ImpossibleEvidenceError(ValueError):
    """The conditioning evidence has probability zero."""


class SliceImpossibleError(ImpossibleEvidenceError):
    """The evidence is impossible for a positive-probability slice U1 = u1."""

    def __init__(self, message: str, slice_: Mapping[str, Any]):
        super().__init__(message)
        self.slice = dict(slice_)


@dataclass(frozen=True)
class Expect:
    """Expectation-form query on an endogenous variable."""

    var: str


Event = Union[Assignment, Expect]
OnImpossible = Literal["error", "intervene"]


def _lookup(scm: SCM, solution: Mapping[str, np.ndarray], name: str) -> np.ndarray:
    if name in solution:
        return solution[name]
    exo, _ = scm.units
    if name in exo:
        return exo[name]
    raise ModelError(f"unknown variable {name!r}")


def _mask(scm: SCM, solution: Mapping[str, np.ndarray], assignment: Assignment) -> np.ndarray:
    mask = np.ones(scm.n_units, dtype=bool)
    for name, value in assignment.items():
        mask &= _lookup(scm, solution, name) == scm.variable(name).index(value)
    return mask


def _statistic(scm: SCM, solution: Mapping[str, np.ndarray], event: Event) -> np.ndarray:
    """Per-unit indicator of the event, or per-unit numeric value of Expect(var)."""
    if isinstance(event, Expect):
        return scm.numeric_values(event.var)[solution[event.var]]
    return _mask(scm, solution, event).astype(float)


def _check_evidence(scm: SCM, evidence: Assignment) -> None:
    for name in evidence:
        if name not in scm.endo_vars:
            raise ModelError(f"evidence must bind endogenous variables; got {name!r}")


@dataclass(frozen=True, eq=False)
class Posterior:
    """A distribution over units, P(u | e), stored as one weight per unit."""

    scm: SCM
    evidence: Mapping[str, Any]
    weights: np.ndarray

    def probability(self, event: Event, intervention: Assignment | None = None) -> float:
        codes = self.scm.encode(intervention or {}, endogenous_only=True)
        solution = self.scm.solve(codes)
        return float(np.dot(self.weights, _statistic(self.scm, solution, event)))

    def as_dict(self) -> dict[tuple, float]:
        """Nonzero weights keyed by the tuple of exogenous values (declaration order)."""
        exo, _ = self.scm.units
        out = {}
        for i in np.flatnonzero(self.weights):
            key = tuple(u.domain[exo[u.name][i]] for u in self.scm.exogenous)
            out[key] = float(self.weights[i])
        return out

    def marginal(self, names: Iterable[str]) -> dict[tuple, float]:
        exo, _ = self.scm.units
        names = list(names)
        out: dict[tuple, float] = {}
        for i in np.flatnonzero(self.weights):
            key = tuple(self.scm.exo_vars[n].domain[exo[n][i]] for n in names)
            out[key] = out.get(key, 0.0) + float(self.weights[i])
        return out


@dataclass(frozen=True, eq=False)
class PAPosterior(Posterior):
    """Partially abducted posterior P(u1) P(u2 | u1, e).

    ``fallback`` marks units of slices where the evidence is impossible and
    which keep their prior weight; predictions for them are made under
    do(evidence).
    """

    u1_vars: frozenset = frozenset()
    fallback: np.ndarray | None = None

    def probability(self, event: Event, intervention: Assignment | None = None) -> float:
        if self.fallback is None or not self.fallback.any():
            return super().probability(event, intervention)
        scm = self.scm
        codes = scm.encode(intervention or {}, endogenous_only=True)
        forced = {**scm.encode(self.evidence, endogenous_only=True), **codes}
        stat = np.where(
            self.fallback,
            _statistic(scm, scm.solve(forced), event),
            _statistic(scm, scm.solve(codes), event),
        )
        return float(np.dot(self.weights, stat))


def abduct(scm: SCM, evidence: Assignment) -> Posterior:
    """Abduction step: P(u | e) proportional to P(u) 1[V(u) agrees with e]."""
    _check_evidence(scm, evidence)
    _, p = scm.units
    w = p * _mask(scm, scm.solve(), evidence)
    total = w.sum()
    if total <= 0:
        raise ImpossibleEvidenceError(f"evidence {dict(evidence)} has probability zero")
    return Posterior(scm, dict(evidence), w / total)


def conditional_prob(scm: SCM, event: Event, evidence: Assignment) -> float:
    """P(event | evidence) (or E[var | evidence] for Expect) by abduction and prediction."""
    return abduct(scm, evidence).probability(event)


def counterfactual_prob(scm: SCM, event: Event, intervention: Assignment, evidence: Assignment) -> float:
    """P(event_C | e): abduction on ``evidence``, action ``do(intervention)``, prediction."""
    return abduct(scm, evidence).probability(event, intervention)


def interventional_prob(scm: SCM, event: Event, intervention: Assignment) -> float:
    return counterfactual_prob(scm, event, intervention, {})


def _slices(scm: SCM, u1_vars: Iterable[str]) -> tuple[list[str], np.ndarray, int]:
    names = sorted(set(u1_vars))
    for n in names:
        if n not in scm.exo_vars:
            raise ModelError(f"{n!r} is not an exogenous variable")
    exo, _ = scm.units
    if not names:
        return names, np.zeros(scm.n_units, dtype=np.int64), 1
    sizes = tuple(scm.exo_vars[n].size for n in names)
    group = np.ravel_multi_index(tuple(exo[n] for n in names), sizes)
    return names, group, int(np.prod(sizes))


def _decode_slice(scm: SCM, names: list[str], g: int) -> dict[str, Any]:
    if not names:
        return {}
    sizes = tuple(scm.exo_vars[n].size for n in names)
    idx = np.unravel_index(g, sizes)
    return {n: scm.exo_vars[n].domain[int(i)] for n, i in zip(names, idx)}


def pa_posterior(
    scm: SCM, evidence: Assignment, u1_vars: Iterable[str], *, on_impossible: OnImpossible = "error"
) -> PAPosterior:
    """Partial abduction: keep P(u1), update only u2 by the evidence.

    With ``on_impossible="intervene"`` a positive slice that rules out the
    evidence keeps its prior weights and is marked as a fallback slice.
    """
    _check_evidence(scm, evidence)
    names, group, k = _slices(scm, u1_vars)
    _, p = scm.units
    mask = _mask(scm, scm.solve(), evidence)
    prior = np.bincount(group, weights=p, minlength=k)
    den = np.bincount(group, weights=p * mask, minlength=k)
    if den.sum() <= 0:
        raise ImpossibleEvidenceError(f"evidence {dict(evidence)} has probability zero")
    bad = (prior > 0) & (den <= 0)
    if bad.any() and on_impossible != "intervene":
        sl = _decode_slice(scm, names, int(np.flatnonzero(bad)[0]))
        raise SliceImpossibleError(
            f"evidence {dict(evidence)} is impossible under fixed u1 = {sl}", sl
        )
    scale = np.divide(prior, den, out=np.zeros(k), where=den > 0)
    w = p * mask * scale[group]
    fallback = bad[group]
    w[fallback] = p[fallback]
    return PAPosterior(scm, dict(evidence), w, frozenset(names), fallback if bad.any() else None)


def pa_conditional(
    scm: SCM,
    event: Event,
    evidence: Assignment,
    u1_vars: Iterable[str],
    *,
    on_impossible: OnImpossible = "error",
) -> float:
    """P(event | e^{U1}) = sum_{u1} P(u1) P(event | e, u1).

    Slices with P(u1) = 0 contribute nothing.  A slice with P(u1) > 0 in
    which the evidence cannot occur raises :class:`SliceImpossibleError`
    unless ``on_impossible="intervene"``, in which case that slice
    contributes P(u1) P(event_{do(e)} | u1) instead.
    """
    _check_evidence(scm, evidence)
    names, group, k = _slices(scm, u1_vars)
    _, p = scm.units
    solution = scm.solve()
    mask = _mask(scm, solution, evidence)
    stat = _statistic(scm, solution, event)
    prior = np.bincount(group, weights=p, minlength=k)
    den = np.bincount(group, weights=p * mask, minlength=k)
    num = np.bincount(group, weights=p * mask * stat, minlength=k)
    if den.sum() <= 0:
        raise ImpossibleEvidenceError(f"evidence {dict(evidence)} has probability zero")
    live = (prior > 0) & (den > 0)
    bad = (prior > 0) & (den <= 0)
    terms = np.zeros(k)
    terms[live] = prior[live] * num[live] / den[live]
    if bad.any():
        if on_impossible != "intervene":
            sl = _decode_slice(scm, names, int(np.flatnonzero(bad)[0]))
            raise SliceImpossibleError(
                f"evidence {dict(evidence)} is impossible under fixed u1 = {sl}", sl
            )
        do_solution = scm.solve(scm.encode(evidence, endogenous_only=True))
        do_num = np.bincount(group, weights=p * _statistic(scm, do_solution, event), minlength=k)
        terms[bad] = do_num[bad]
    return float(terms.sum())


def exp_se(scm: SCM, x: Assignment, y: Event) -> float:
    """Experimental spurious effect P(y | x) - P(y | do(x))."""
    return conditional_prob(scm, y, x) - interventional_prob(scm, y, x)


def exp_se_set(
    scm: SCM,
    x: Assignment,
    y: Event,
    a: Iterable[str],
    b: Iterable[str],
    *,
    on_impossible: OnImpossible = "intervene",
) -> float:
    """Set-specific spurious effect P(y | x^A) - P(y | x^B) for nested A within B."""
    a, b = frozenset(a), frozenset(b)
    if not a <= b:
        raise ValueError(f"A = {sorted(a)} is not a subset of B = {sorted(b)}")
    if a == b:
        return 0.0
    return pa_conditional(scm, y, x, a, on_impossible=on_impossible) - pa_conditional(
        scm, y, x, b, on_impossible=on_impossible
    )
