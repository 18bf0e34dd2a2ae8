"""Brute-force reference implementation over model dictionaries.

Shares no code with the package: units are enumerated with itertools,
probabilities are exact Fractions, expressions are evaluated by Python's
own evaluator and mechanisms are solved by repeated sweeps.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

_SAFE = {"min": min, "max": max, "abs": abs, "int": int}


def _frac(p) -> Fraction:
    return Fraction(str(p)) if isinstance(p, str) else Fraction(p).limit_denominator(10**12)


def _parse(value):
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            return value
    return value


def exogenous(model: dict) -> dict[str, list[tuple]]:
    out = {}
    for name, spec in model.get("exogenous", {}).items():
        if "bernoulli" in spec:
            p = _frac(spec["bernoulli"])
            out[name] = [(0, 1 - p), (1, p)]
        elif "multinomial" in spec:
            values = spec.get("values", list(range(len(spec["multinomial"]))))
            out[name] = [(v, _frac(w)) for v, w in zip(values, spec["multinomial"])]
        else:
            out[name] = [(_parse(k), _frac(w)) for k, w in spec["table"].items()]
    return out


def units(model: dict):
    exo = exogenous(model)
    names = list(exo)
    for combo in itertools.product(*(exo[n] for n in names)):
        p = Fraction(1)
        for _, q in combo:
            p *= q
        yield {n: v for n, (v, _) in zip(names, combo)}, p


def _mechanism(model: dict, target: str, env: dict):
    spec = model["mechanisms"][target]
    if "expr" in spec:
        out = eval(spec["expr"], {"__builtins__": {}}, {**_SAFE, **env})  # noqa: S307
        return int(out) if isinstance(out, bool) else out
    key = ",".join(str(env[p]) for p in spec.get("parents", []) + spec.get("exo_parents", []))
    return _parse(spec["table"][key])


def solve(model: dict, u: dict, do: dict | None = None) -> dict:
    do = do or {}
    values = dict(do)
    pending = [v for v in model["endogenous"] if v not in do]
    while pending:
        progressed = False
        for v in list(pending):
            spec = model["mechanisms"][v]
            if all(p in values for p in spec.get("parents", [])):
                values[v] = _mechanism(model, v, {**u, **values})
                pending.remove(v)
                progressed = True
        assert progressed, "cyclic model"
    return values


def _stat(model: dict, y, v: dict) -> Fraction:
    if isinstance(y, str):
        enc = model.get("numeric", {}).get(y)
        if enc is None:
            return Fraction(v[y])
        dom = model["endogenous"][y]
        if isinstance(enc, dict):
            return _frac(enc[str(v[y])])
        return _frac(enc[dom.index(v[y])])
    return Fraction(all(v[k] == val for k, val in y.items()))


def _matches(v: dict, ev: dict) -> bool:
    return all(str(v[k]) == str(val) for k, val in ev.items())


def conditional(model: dict, y, evidence: dict) -> Fraction:
    """E[y | evidence]; ``y`` is a variable name (expectation) or an assignment (probability)."""
    num = den = Fraction(0)
    for u, p in units(model):
        v = solve(model, u)
        if _matches(v, evidence):
            num += p * _stat(model, y, v)
            den += p
    return num / den


def interventional(model: dict, y, do: dict) -> Fraction:
    return sum((p * _stat(model, y, solve(model, u, do)) for u, p in units(model)), Fraction(0))


def partially_abducted(model: dict, y, evidence: dict, fixed, fallback: bool = False) -> Fraction:
    """sum_{u1} P(u1) E[y | evidence, u1]; impossible slices use E[y_{do(evidence)} | u1] when ``fallback``."""
    fixed = list(fixed)
    slices: dict[tuple, list] = {}
    for u, p in units(model):
        key = tuple(u[n] for n in fixed)
        s = slices.setdefault(key, [Fraction(0)] * 4)
        v = solve(model, u)
        s[0] += p
        if _matches(v, evidence):
            s[1] += p * _stat(model, y, v)
            s[2] += p
        s[3] += p * _stat(model, y, solve(model, u, evidence))
    total = Fraction(0)
    for prior, num, den, do_num in slices.values():
        if prior == 0:
            continue
        if den == 0:
            if not fallback:
                raise ZeroDivisionError("evidence impossible in a positive slice")
            total += do_num
        else:
            total += prior * num / den
    return total


def joint(model: dict) -> dict[tuple, Fraction]:
    names = list(model["endogenous"])
    out: dict[tuple, Fraction] = {}
    for u, p in units(model):
        v = solve(model, u)
        key = tuple(v[n] for n in names)
        out[key] = out.get(key, Fraction(0)) + p
    return out
