"""Random discrete SCMs for oracle and property testing.

Every generated model gives X its own latent U_X whose table is a
permutation of X's domain for each configuration of X's other parents, so
P(x | anything upstream) > 0 and no conditioning event is ever impossible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scm import SCM, ExogenousDistribution, Mechanism, Variable


@dataclass(frozen=True)
class RandomModelConfig:
    max_confounders: int = 3
    max_domain: int = 3
    edge_prob: float = 0.5
    shared_prob: float = 0.6
    y_latent_prob: float = 0.2
    min_prob: float = 0.05


def _probs(rng: np.random.Generator, k: int, floor: float) -> tuple[float, ...]:
    p = rng.dirichlet(np.ones(k))
    p = floor / k + (1 - floor) * p
    p = p / p.sum()
    return tuple(float(v) for v in p)


def _latent(rng, cfg, name, size=None):
    size = size or int(rng.integers(2, cfg.max_domain + 1))
    var = Variable(name, tuple(range(size)))
    return var, ExogenousDistribution(name, _probs(rng, size, cfg.min_prob))


def _random_table(rng, target: Variable, parents: list[Variable]) -> np.ndarray:
    shape = tuple(p.size for p in parents)
    table = rng.integers(0, target.size, size=shape, dtype=np.int64)
    return table


def _build(rng, cfg, endo, exo, dists, parents_of, exo_parents_of, x_name="X"):
    endo_map = {v.name: v for v in endo}
    exo_map = {v.name: v for v in exo}
    mechanisms = {}
    for v in endo:
        pv = [endo_map[p] for p in parents_of[v.name]]
        uv = [exo_map[u] for u in exo_parents_of[v.name]]
        if v.name == x_name:
            # last exogenous parent is U_X; permute X's domain per configuration of the rest
            others = pv + uv[:-1]
            shape = tuple(p.size for p in others)
            table = np.empty(shape + (v.size,), dtype=np.int64)
            for idx in np.ndindex(*shape) if shape else [()]:
                table[idx] = rng.permutation(v.size)
        else:
            table = _random_table(rng, v, pv + uv)
        mechanisms[v.name] = Mechanism(v.name, tuple(p.name for p in pv), tuple(u.name for u in uv), table)
    return SCM(tuple(endo), tuple(exo), mechanisms, dists)


def random_markovian(rng: np.random.Generator, cfg: RandomModelConfig = RandomModelConfig()) -> SCM:
    """Markovian SCM over Z1..Zk, X, Y with one private latent per variable."""
    k = int(rng.integers(0, cfg.max_confounders + 1))
    size = lambda: int(rng.integers(2, cfg.max_domain + 1))  # noqa: E731
    zs = [f"Z{i + 1}" for i in range(k)]
    endo = [Variable(z, tuple(range(size()))) for z in zs]
    endo += [Variable("X", tuple(range(size()))), Variable("Y", tuple(range(size())))]
    parents_of = {}
    for i, z in enumerate(zs):
        parents_of[z] = [p for p in zs[:i] if rng.random() < cfg.edge_prob]
    parents_of["X"] = [z for z in zs if rng.random() < 0.8]
    parents_of["Y"] = ["X"] + [z for z in zs if rng.random() < 0.8]

    exo, dists, exo_parents_of = [], {}, {}
    for v in endo:
        u_size = v.size if v.name == "X" else None
        var, dist = _latent(rng, cfg, f"U_{v.name}", u_size)
        exo.append(var)
        dists[var.name] = dist
        exo_parents_of[v.name] = [var.name]
    return _build(rng, cfg, endo, exo, dists, parents_of, exo_parents_of)


def random_semimarkovian(rng: np.random.Generator, cfg: RandomModelConfig = RandomModelConfig()) -> SCM:
    """SCM whose confounders may share latents with X (and occasionally Y)."""
    k = int(rng.integers(1, cfg.max_confounders + 1))
    size = lambda: int(rng.integers(2, cfg.max_domain + 1))  # noqa: E731
    zs = [f"Z{i + 1}" for i in range(k)]
    endo = [Variable(z, tuple(range(size()))) for z in zs]
    endo += [Variable("X", tuple(range(size()))), Variable("Y", tuple(range(size())))]
    parents_of = {}
    for i, z in enumerate(zs):
        parents_of[z] = [p for p in zs[:i] if rng.random() < cfg.edge_prob]
    parents_of["X"] = [z for z in zs if rng.random() < 0.3]
    parents_of["Y"] = ["X"] + [z for z in zs if rng.random() < 0.8]

    exo, dists = [], {}
    exo_parents_of = {v.name: [] for v in endo}

    def add(name, children, u_size=None):
        var, dist = _latent(rng, cfg, name, u_size)
        exo.append(var)
        dists[name] = dist
        for c in children:
            exo_parents_of[c].append(name)

    shared = [z for z in zs if rng.random() < cfg.shared_prob] or [zs[0]]
    for z in zs:
        if rng.random() < 0.7:
            add(f"U_{z}", [z])
        if z in shared:
            add(f"U_{z}X", [z, "X"])
        if rng.random() < cfg.y_latent_prob:
            add(f"U_{z}Y", [z, "Y"])
    add("U_Y", ["Y"])
    xvar = next(v for v in endo if v.name == "X")
    add("U_X", ["X"], xvar.size)  # appended last among X's exogenous parents
    return _build(rng, cfg, endo, exo, dists, parents_of, exo_parents_of)


def random_event(rng: np.random.Generator, scm: SCM):
    """Either an expectation-form or a probability-form outcome on Y, plus a treatment value."""
    from .engine import Expect

    x = {"X": scm.endo_vars["X"].domain[int(rng.integers(scm.endo_vars["X"].size))]}
    if rng.random() < 0.5:
        return x, Expect("Y")
    return x, {"Y": scm.endo_vars["Y"].domain[int(rng.integers(scm.endo_vars["Y"].size))]}
