"""Exact decompositions of total variation and of the experimental spurious effect."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from . import engine
from .diagram import (
    confounders_in_topological_order,
    is_markovian,
    project,
    tops_of_spurious_treks,
)
from .engine import Event, Expect
from .scm import SCM, Assignment


class DecompositionError(ValueError):
    pass


def event_label(y: Event) -> str:
    if isinstance(y, Expect):
        return f"E[{y.var}]"
    return ",".join(f"{k}={v}" for k, v in y.items())


def _jsonable(value):
    if hasattr(value, "item"):
        return value.item()
    return value


@dataclass(frozen=True)
class TVReport:
    tv: float
    te: float
    exp_se_x1: float
    exp_se_x0: float

    @property
    def residual(self) -> float:
        return self.tv - (self.te + self.exp_se_x1 - self.exp_se_x0)

    def to_dict(self) -> dict:
        return {"tv": self.tv, "te": self.te, "exp_se_x1": self.exp_se_x1,
                "exp_se_x0": self.exp_se_x0, "residual": self.residual}


@dataclass(frozen=True)
class Contribution:
    label: tuple[str, ...]
    value: float
    confounder: str | None = None


@dataclass
class DecompositionReport:
    """Ordered per-latent contributions that telescope to the total."""

    total: float
    contributions: list[Contribution]
    ordering: tuple[str, ...]
    mode: str
    prefix_values: list[float] = field(default_factory=list)
    x: Mapping[str, Any] = field(default_factory=dict)
    y: str = ""

    @property
    def residual(self) -> float:
        return self.total - sum(c.value for c in self.contributions)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "x": {k: _jsonable(v) for k, v in self.x.items()},
            "y": self.y,
            "ordering": list(self.ordering),
            "total": self.total,
            "contributions": [
                {"latents": list(c.label), "confounder": c.confounder, "value": c.value}
                for c in self.contributions
            ],
            "prefix_values": self.prefix_values,
            "residual": self.residual,
        }

    def to_text(self) -> str:
        rows = [("latents", "confounder", "contribution")]
        for c in self.contributions:
            rows.append((",".join(c.label), c.confounder or "", f"{c.value:+.6f}"))
        rows.append(("total Exp-SE", "", f"{self.total:+.6f}"))
        rows.append(("residual", "", f"{self.residual:+.2e}"))
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        lines = [f"mode: {self.mode}   x: {dict(self.x)}   y: {self.y}"]
        for j, r in enumerate(rows):
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
            if j == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def tv_decompose(scm: SCM, x0: Assignment, x1: Assignment, y: Event) -> TVReport:
    """TV = TE + (Exp-SE at x1) - (Exp-SE at x0)."""
    tv = engine.conditional_prob(scm, y, x1) - engine.conditional_prob(scm, y, x0)
    te = engine.interventional_prob(scm, y, x1) - engine.interventional_prob(scm, y, x0)
    return TVReport(tv, te, engine.exp_se(scm, x1, y), engine.exp_se(scm, x0, y))


def _single(x: Assignment) -> str:
    if len(x) != 1:
        raise DecompositionError("x must bind exactly one treatment variable")
    return next(iter(x))


def _telescope(scm: SCM, x: Assignment, y: Event, prefixes: list[frozenset]) -> list[float]:
    return [engine.pa_conditional(scm, y, x, p, on_impossible="intervene") for p in prefixes]


def markov_decompose(
    scm: SCM,
    x: Assignment,
    y: Event,
    order: Sequence[str] | None = None,
    *,
    outcome: str | None = None,
    force_model_only: bool = False,
) -> DecompositionReport:
    """Per-confounder-latent decomposition of Exp-SE in a Markovian model.

    ``order`` lists confounders (or their latents) and must be topological
    unless ``force_model_only`` is set; non-topological orders give model
    quantities that are not identifiable from P(v).
    """
    xname = _single(x)
    yname = outcome or _outcome(y)
    diagram = project(scm)
    if not is_markovian(diagram):
        raise DecompositionError(
            "model is not Markovian (it has bidirected edges); use semimarkov_decompose"
        )
    default = confounders_in_topological_order(diagram, xname, yname)
    if order is None:
        zs = default
    else:
        by_latent = {u: z for z in default for u in diagram.exogenous_parents(z)}
        zs = [by_latent.get(o, o) for o in order]
        if force_model_only:
            if sorted(zs) != sorted(default):
                raise DecompositionError(f"order {list(order)} is not a permutation of the confounders {default}")
        else:
            try:
                zs = confounders_in_topological_order(diagram, xname, yname, tie_break=zs)
            except ValueError as exc:
                raise DecompositionError(
                    f"{exc}; non-topological orders are not identifiable (pass force_model_only to compute model values)"
                ) from None
    latents = [tuple(sorted(diagram.exogenous_parents(z))) for z in zs]
    prefixes = [frozenset()]
    for lat in latents:
        prefixes.append(prefixes[-1] | frozenset(lat))
    values = _telescope(scm, x, y, prefixes)
    contributions = [
        Contribution(lat, values[i] - values[i + 1], z) for i, (lat, z) in enumerate(zip(latents, zs))
    ]
    return DecompositionReport(
        engine.exp_se(scm, x, y), contributions, tuple(zs), "markovian", values, dict(x), event_label(y)
    )


def semimarkov_decompose(
    scm: SCM,
    x: Assignment,
    y: Event,
    order: Sequence[str] | None = None,
    *,
    outcome: str | None = None,
) -> DecompositionReport:
    """Decomposition over the tops of spurious treks, in the given (default: sorted) order."""
    xname = _single(x)
    yname = outcome or _outcome(y)
    diagram = project(scm)
    stot = tops_of_spurious_treks(diagram, xname, yname)
    if order is None:
        order = sorted(stot)
    else:
        order = list(order)
        if sorted(order) != sorted(stot) or len(set(order)) != len(order):
            raise DecompositionError(f"order {order} is not a permutation of U_sToT = {sorted(stot)}")
    prefixes = [frozenset(order[:i]) for i in range(len(order) + 1)]
    values = _telescope(scm, x, y, prefixes)
    contributions = [Contribution((u,), values[i] - values[i + 1]) for i, u in enumerate(order)]
    return DecompositionReport(
        engine.exp_se(scm, x, y), contributions, tuple(order), "semi-markovian", values, dict(x), event_label(y)
    )


def decompose(
    scm: SCM,
    x: Assignment,
    y: Event,
    mode: str = "auto",
    order: Sequence[str] | None = None,
    *,
    force_model_only: bool = False,
) -> DecompositionReport:
    if mode == "auto":
        mode = "markovian" if is_markovian(project(scm)) else "semi-markovian"
    if mode == "markovian":
        return markov_decompose(scm, x, y, order, force_model_only=force_model_only)
    if mode == "semi-markovian":
        return semimarkov_decompose(scm, x, y, order)
    raise DecompositionError(f"unknown mode {mode!r}")


def _outcome(y: Event) -> str:
    if isinstance(y, Expect):
        return y.var
    if len(y) != 1:
        raise DecompositionError("y must bind exactly one outcome variable (or pass outcome=)")
    return next(iter(y))
