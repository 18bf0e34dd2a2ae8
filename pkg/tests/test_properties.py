"""Property tests over randomly generated models."""

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

import oracle
from spurdecomp.decompose import decompose, semimarkov_decompose, tv_decompose
from spurdecomp.diagram import project
from spurdecomp.engine import (
    Expect,
    conditional_prob,
    counterfactual_prob,
    exp_se,
    interventional_prob,
    pa_conditional,
    pa_posterior,
)
from spurdecomp.random_models import RandomModelConfig, random_event, random_markovian, random_semimarkovian
from spurdecomp.scm import interventional, joint_observational, model_to_dict

seeds = st.integers(0, 2**32 - 1)
kinds = st.sampled_from(["markovian", "semi-markovian"])
fast = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def make(kind, seed, cfg=RandomModelConfig()):
    rng = np.random.default_rng(seed)
    scm = (random_markovian if kind == "markovian" else random_semimarkovian)(rng, cfg)
    x, y = random_event(rng, scm)
    return rng, scm, x, y


@fast
@given(kinds, seeds)
def test_contributions_telescope_to_total(kind, seed):
    _, scm, x, y = make(kind, seed)
    rep = decompose(scm, x, y)
    assert abs(rep.residual) < 1e-9
    assert rep.total == pytest.approx(exp_se(scm, x, y), abs=1e-12)


@fast
@given(kinds, seeds)
def test_endpoints(kind, seed):
    _, scm, x, y = make(kind, seed)
    rep = decompose(scm, x, y)
    assert rep.prefix_values[0] == pytest.approx(conditional_prob(scm, y, x), abs=1e-12)
    assert rep.prefix_values[-1] == pytest.approx(interventional_prob(scm, y, x), abs=1e-12)


@fast
@given(kinds, seeds)
def test_tv_identity(kind, seed):
    _, scm, _, y = make(kind, seed)
    dom = scm.endo_vars["X"].domain
    rep = tv_decompose(scm, {"X": dom[0]}, {"X": dom[-1]}, y)
    assert abs(rep.residual) < 1e-9


@fast
@given(kinds, seeds)
def test_consistency(kind, seed):
    _, scm, x, y = make(kind, seed)
    assert counterfactual_prob(scm, y, x, x) == pytest.approx(conditional_prob(scm, y, x), abs=1e-12)


@fast
@given(kinds, seeds)
def test_distributions_normalize(kind, seed):
    _, scm, x, _ = make(kind, seed)
    assert joint_observational(scm).total() == pytest.approx(1.0, abs=1e-12)
    assert interventional(scm, x).total() == pytest.approx(1.0, abs=1e-12)


@fast
@given(seeds)
def test_truncated_factorization_on_markovian_models(seed):
    _, scm, x, _ = make("markovian", seed)
    diagram = project(scm)
    obs, do = joint_observational(scm), interventional(scm, x)
    names = list(obs.variables)
    for v, p_do in do.items():
        if v["X"] != x["X"]:
            assert p_do == pytest.approx(0.0, abs=1e-15)
            continue
        prod = 1.0
        for name in names:
            if name == "X":
                continue
            pa = sorted(diagram.parents(name) & set(names))
            den = obs.prob({k: v[k] for k in pa})
            prod *= obs.prob({k: v[k] for k in pa + [name]}) / den if den > 0 else 0.0
        assert p_do == pytest.approx(prod, abs=1e-9)


@fast
@given(seeds)
def test_total_is_order_invariant(seed):
    rng, scm, x, y = make("semi-markovian", seed)
    stot = sorted(semimarkov_decompose(scm, x, y).ordering)
    base = semimarkov_decompose(scm, x, y).total
    for _ in range(3):
        order = list(rng.permutation(stot))
        rep = semimarkov_decompose(scm, x, y, order=order)
        assert sum(c.value for c in rep.contributions) == pytest.approx(base, abs=1e-9)


@fast
@given(kinds, seeds, st.data())
def test_factored_posterior_agrees_with_slice_sum(kind, seed, data):
    _, scm, x, y = make(kind, seed)
    exo = [u.name for u in scm.exogenous]
    u1 = data.draw(st.lists(st.sampled_from(exo), unique=True))
    post = pa_posterior(scm, x, u1, on_impossible="intervene")
    assert post.weights.sum() == pytest.approx(1.0, abs=1e-9)
    value = pa_conditional(scm, y, x, u1, on_impossible="intervene")
    assert post.probability(y) == pytest.approx(value, abs=1e-9)


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(kinds, seeds, st.data())
def test_agreement_with_brute_force_oracle(kind, seed, data):
    small = RandomModelConfig(max_confounders=2, max_domain=2)
    _, scm, x, y = make(kind, seed, small)
    model = model_to_dict(scm)
    exo = [u.name for u in scm.exogenous]
    u1 = data.draw(st.lists(st.sampled_from(exo), unique=True))
    oy = y.var if isinstance(y, Expect) else y
    ref = oracle.partially_abducted(model, oy, x, u1, fallback=True)
    assert pa_conditional(scm, y, x, u1, on_impossible="intervene") == pytest.approx(float(ref), abs=1e-9)
    assert conditional_prob(scm, y, x) == pytest.approx(float(oracle.conditional(model, oy, x)), abs=1e-9)
    assert interventional_prob(scm, y, x) == pytest.approx(float(oracle.interventional(model, oy, x)), abs=1e-9)


def test_oracle_joint_matches_enumeration(models):
    for name in ("markov_b1", "semimarkov_b3", "ex1"):
        scm = models[name]
        obs = joint_observational(scm)
        ref = oracle.joint(model_to_dict(scm))
        for key, p in ref.items():
            assert obs.prob(dict(zip(obs.variables, key))) == pytest.approx(float(p), abs=1e-12)
        assert sum(ref.values()) == 1
