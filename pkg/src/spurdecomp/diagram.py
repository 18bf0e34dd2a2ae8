"""Causal diagrams with explicit exogenous nodes, treks and anchor sets.

A diagram keeps every exogenous variable as a node; bidirected edges are
derived from exogenous variables with more than one endogenous child.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .scm import SCM, load_model

DEFAULT_TREK_CAP = 10**5


class DiagramError(ValueError):
    pass


class ContractError(ValueError):
    """A precondition on the latent sets was violated."""


class TrekOverflowError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CausalDiagram:
    endogenous: frozenset[str]
    exogenous: frozenset[str]
    directed: frozenset[tuple[str, str]]

    def __post_init__(self):
        overlap = self.endogenous & self.exogenous
        if overlap:
            raise DiagramError(f"nodes declared both endogenous and exogenous: {sorted(overlap)}")
        nodes = self.endogenous | self.exogenous
        for a, b in self.directed:
            if a not in nodes or b not in nodes:
                raise DiagramError(f"edge {a}->{b} references an undeclared node")
            if b in self.exogenous:
                raise DiagramError(f"edge {a}->{b} points into an exogenous node")
        if not nx.is_directed_acyclic_graph(self.graph):
            raise DiagramError("directed part of the diagram is cyclic")

    @cached_property
    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(sorted(self.endogenous | self.exogenous))
        g.add_edges_from(sorted(self.directed))
        return g

    def children(self, node: str) -> frozenset[str]:
        return frozenset(self.graph.successors(node))

    def parents(self, node: str) -> frozenset[str]:
        return frozenset(self.graph.predecessors(node))

    def exogenous_parents(self, node: str) -> frozenset[str]:
        return self.parents(node) & self.exogenous

    @cached_property
    def bidirected(self) -> frozenset[tuple[str, str]]:
        pairs = set()
        for u in self.exogenous:
            for a, b in itertools.combinations(sorted(self.children(u)), 2):
                pairs.add((a, b))
        return frozenset(pairs)

    def shared_latents(self, a: str, b: str) -> frozenset[str]:
        return frozenset(u for u in self.exogenous if {a, b} <= self.children(u))

    def descendants(self, node: str, avoid: str | None = None) -> frozenset[str]:
        """Nodes reachable by a directed path from ``node``, optionally never entering ``avoid``."""
        g = self.graph
        if avoid is not None and avoid != node:
            g = g.subgraph(n for n in g.nodes if n != avoid)
        return frozenset(nx.descendants(g, node))

    def ancestors(self, node: str) -> frozenset[str]:
        return frozenset(nx.ancestors(self.graph, node))

    def to_dict(self) -> dict:
        return {
            "endogenous": sorted(self.endogenous),
            "directed": [list(e) for e in sorted(self.directed) if e[0] in self.endogenous],
            "exogenous": {u: sorted(self.children(u)) for u in sorted(self.exogenous)},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CausalDiagram":
        """Diagram file format.

        ``endogenous``: list of names; ``directed``: list of ``[from, to]``
        pairs between endogenous nodes; ``exogenous`` (optional): map from
        latent name to its endogenous children; ``bidirected`` (optional):
        list of pairs, each given a fresh latent ``U_<a>_<b>`` unless an
        explicit ``exogenous`` map already covers it.  Endogenous nodes
        without any exogenous parent get a private latent ``U_<name>``.
        """
        endo = list(data["endogenous"])
        edges = {(a, b) for a, b in data.get("directed", [])}
        exo_map: dict[str, list[str]] = {u: list(ch) for u, ch in data.get("exogenous", {}).items()}
        for a, b in data.get("bidirected", []):
            if any({a, b} <= set(ch) for ch in exo_map.values()):
                continue
            exo_map[f"U_{a}_{b}"] = [a, b]
        covered = {c for ch in exo_map.values() for c in ch}
        if "exogenous" not in data:
            for v in endo:
                if v not in covered:
                    exo_map[f"U_{v}"] = [v]
        for u, ch in exo_map.items():
            edges.update((u, c) for c in ch)
        return cls(frozenset(endo), frozenset(exo_map), frozenset(edges))

    def to_dot(self, latents: bool = True) -> str:
        """DOT text: directed edges solid, bidirected edges dashed."""
        lines = ["digraph G {"]
        for v in sorted(self.endogenous):
            lines.append(f'  "{v}";')
        if latents:
            for u in sorted(self.exogenous):
                lines.append(f'  "{u}" [color=red, fontcolor=red];')
        for a, b in sorted(self.directed):
            if a in self.exogenous and not latents:
                continue
            lines.append(f'  "{a}" -> "{b}";')
        if not latents:
            for a, b in sorted(self.bidirected):
                lines.append(f'  "{a}" -> "{b}" [dir=both, style=dashed];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def project(scm: SCM) -> CausalDiagram:
    """Causal diagram of an SCM, with its exogenous variables as explicit nodes."""
    edges = set()
    for name, mech in scm.mechanisms.items():
        edges.update((p, name) for p in mech.endogenous_parents)
        edges.update((u, name) for u in mech.exogenous_parents)
    return CausalDiagram(frozenset(scm.endo_vars), frozenset(scm.exo_vars), frozenset(edges))


def load_diagram(path: str | Path) -> CausalDiagram:
    """Load a diagram file, or project a model file (one with ``mechanisms``)."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if "mechanisms" in data:
        return project(load_model(path))
    return CausalDiagram.from_dict(data)


def is_markovian(diagram: CausalDiagram) -> bool:
    return not diagram.bidirected


def _check_xy(diagram: CausalDiagram, x: str, y: str) -> None:
    for v in (x, y):
        if v not in diagram.endogenous:
            raise DiagramError(f"{v!r} is not an endogenous node")
    if x == y:
        raise DiagramError("X and Y must differ")
    if y in diagram.ancestors(x):
        raise DiagramError(f"{y!r} is an ancestor of {x!r}; spurious treks are defined for X preceding Y")


def has_spurious_trek(diagram: CausalDiagram, u: str, x: str, y: str) -> bool:
    """Whether ``u`` tops a trek whose right path reaches Y without passing X."""
    return x in diagram.descendants(u) and y in diagram.descendants(u, avoid=x)


def confounders(diagram: CausalDiagram, x: str, y: str) -> frozenset[str]:
    """Observed confounders between X and Y.

    Z (not X or Y) qualifies when it has a directed path to Y avoiding X and
    either is an ancestor of X, or lies downstream (avoiding X) of a shared
    latent that also reaches X.
    """
    _check_xy(diagram, x, y)
    anc_x = diagram.ancestors(x)
    shared = [
        u for u in diagram.exogenous
        if len(diagram.children(u)) > 1 and x in diagram.descendants(u)
    ]
    downstream = set()
    for u in shared:
        downstream |= diagram.descendants(u, avoid=x)
    out = set()
    for z in diagram.endogenous - {x, y}:
        if y not in diagram.descendants(z, avoid=x):
            continue
        if z in anc_x or z in downstream:
            out.add(z)
    return frozenset(out)


def confounders_in_topological_order(
    diagram: CausalDiagram, x: str, y: str, tie_break: Sequence[str] | None = None
) -> list[str]:
    """Confounders sorted topologically; ties broken by name or by a user list."""
    zs = confounders(diagram, x, y)
    if tie_break is not None:
        order = list(tie_break)
        if sorted(order) != sorted(zs):
            raise DiagramError(f"order {order} is not a permutation of the confounders {sorted(zs)}")
        for i, a in enumerate(order):
            later_ancestors = diagram.ancestors(a) & set(order[i + 1:])
            if later_ancestors:
                raise DiagramError(
                    f"order {order} is not topological: {sorted(later_ancestors)} precede {a!r}"
                )
        return order
    sub = nx.DiGraph()
    sub.add_nodes_from(zs)
    sub.add_edges_from((a, b) for a in zs for b in zs if a in diagram.ancestors(b))
    return list(nx.lexicographical_topological_sort(sub))


@dataclass(frozen=True)
class Trek:
    top: str
    left_path: tuple[str, ...]
    right_path: tuple[str, ...]
    spurious: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "spurious", self.left_path[-1] not in self.right_path)

    def __str__(self) -> str:
        return " <- ".join(reversed(self.left_path)) + "".join(f" -> {n}" for n in self.right_path[1:])


def treks(diagram: CausalDiagram, x: str, y: str, cap: int = DEFAULT_TREK_CAP) -> list[Trek]:
    """All treks between X and Y with an exogenous top (spurious or not)."""
    _check_xy(diagram, x, y)
    out: list[Trek] = []
    for u in sorted(diagram.exogenous):
        lefts = sorted(tuple(p) for p in nx.all_simple_paths(diagram.graph, u, x))
        if not lefts:
            continue
        rights = sorted(tuple(p) for p in nx.all_simple_paths(diagram.graph, u, y))
        if len(out) + len(lefts) * len(rights) > cap:
            raise TrekOverflowError(f"more than {cap} treks between {x!r} and {y!r}")
        out.extend(Trek(u, l, r) for l in lefts for r in rights)
    return out


def spurious_treks(diagram: CausalDiagram, x: str, y: str, cap: int = DEFAULT_TREK_CAP) -> list[Trek]:
    """Treks whose right path reaches Y without being intercepted by X."""
    _check_xy(diagram, x, y)
    out: list[Trek] = []
    g_no_x = diagram.graph.subgraph(n for n in diagram.graph.nodes if n != x)
    for u in sorted(diagram.exogenous):
        lefts = sorted(tuple(p) for p in nx.all_simple_paths(diagram.graph, u, x))
        if not lefts:
            continue
        rights = sorted(tuple(p) for p in nx.all_simple_paths(g_no_x, u, y))
        if len(out) + len(lefts) * len(rights) > cap:
            raise TrekOverflowError(f"more than {cap} spurious treks between {x!r} and {y!r}")
        out.extend(Trek(u, l, r) for l in lefts for r in rights)
    return out


def tops_of_spurious_treks(
    diagram: CausalDiagram, x: str, y: str, trace: list | None = None
) -> frozenset[str]:
    """U_sToT, built in the three steps: empty set, shared latents, confounder latents.

    If ``trace`` is a list, ``(step, latent, added)`` records are appended to it.
    """
    _check_xy(diagram, x, y)
    stot: set[str] = set()
    for u in sorted(diagram.exogenous):
        if len(diagram.children(u)) > 1:
            added = has_spurious_trek(diagram, u, x, y)
            if trace is not None:
                trace.append(("bidirected", u, added))
            if added:
                stot.add(u)
    for z in confounders_in_topological_order(diagram, x, y):
        for u in sorted(diagram.exogenous_parents(z)):
            if len(diagram.children(u)) != 1:
                continue
            added = has_spurious_trek(diagram, u, x, y)
            if trace is not None:
                trace.append(("confounder", u, added))
            if added:
                stot.add(u)
    return frozenset(stot)


def anchor_set(diagram: CausalDiagram, latents: Iterable[str], x: str) -> frozenset[str]:
    """AS(U_s): endogenous children of the latents, excluding X."""
    out: set[str] = set()
    for u in latents:
        if u not in diagram.exogenous:
            raise ContractError(f"{u!r} is not an exogenous node")
        out |= diagram.children(u)
    return frozenset(out - {x})


def exogenous_ancestors_in_stot(
    diagram: CausalDiagram, nodes: Iterable[str], stot: Iterable[str]
) -> frozenset[str]:
    """Members of U_sToT with a directed path into any of ``nodes``."""
    nodes = frozenset(nodes)
    return frozenset(u for u in stot if diagram.descendants(u) & nodes)


def _check_subset(diagram: CausalDiagram, latents: frozenset, x: str, y: str) -> frozenset[str]:
    stot = tops_of_spurious_treks(diagram, x, y)
    if not latents <= stot:
        raise ContractError(
            f"{sorted(latents - stot)} do not top any spurious trek between {x!r} and {y!r} "
            f"(U_sToT = {sorted(stot)})"
        )
    return stot


@dataclass(frozen=True)
class AseacResult:
    passed: bool
    anchor: frozenset[str]
    ancestors: frozenset[str]
    witness: frozenset[str]

    def __bool__(self) -> bool:
        return self.passed


def check_aseac(diagram: CausalDiagram, latents: Iterable[str], x: str, y: str) -> AseacResult:
    """Anchor set exogenous ancestral closure: U_s equals an_sToT(AS(U_s))."""
    latents = frozenset(latents)
    stot = _check_subset(diagram, latents, x, y)
    anchor = anchor_set(diagram, latents, x)
    anc = exogenous_ancestors_in_stot(diagram, anchor, stot)
    return AseacResult(anc == latents, anchor, anc, anc ^ latents)


@dataclass(frozen=True)
class IdVerdict:
    identifiable: bool
    latents: frozenset[str]
    anchor: frozenset[str]
    y_in_anchor: bool
    aseac: AseacResult
    reasons: tuple[str, ...]

    @property
    def verdict(self) -> str:
        return "identifiable" if self.identifiable else "not-established"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "latents": sorted(self.latents),
            "anchor_set": sorted(self.anchor),
            "condition_i_y_not_in_anchor": not self.y_in_anchor,
            "condition_ii_aseac": self.aseac.passed,
            "aseac_ancestors": sorted(self.aseac.ancestors),
            "aseac_witness": sorted(self.aseac.witness),
            "reasons": list(self.reasons),
        }


def check_identifiable(diagram: CausalDiagram, latents: Iterable[str], x: str, y: str) -> IdVerdict:
    """Sufficient graphical check for identifying P(y | x^{U_s}).

    A failed check is reported as "not-established": the conditions are
    sufficient, not necessary.
    """
    latents = frozenset(latents)
    aseac = check_aseac(diagram, latents, x, y)
    y_in = y in aseac.anchor
    reasons = []
    if y_in:
        reasons.append(f"condition (i) fails: {y} is in the anchor set {sorted(aseac.anchor)}")
    if not aseac.passed:
        reasons.append(
            "condition (ii) fails: exogenous ancestors of the anchor set within U_sToT are "
            f"{sorted(aseac.ancestors)}, not {sorted(latents)} (witness {sorted(aseac.witness)})"
        )
    return IdVerdict(not y_in and aseac.passed, latents, aseac.anchor, y_in, aseac, tuple(reasons))
