from fractions import Fraction

import numpy as np
import pytest

import oracle
from conftest import BUNDLED, model_dict
from spurdecomp.engine import (
    Expect,
    ImpossibleEvidenceError,
    SliceImpossibleError,
    abduct,
    conditional_prob,
    counterfactual_prob,
    exp_se,
    exp_se_set,
    interventional_prob,
    pa_conditional,
    pa_posterior,
)
from spurdecomp.scm import ModelError


def test_empty_evidence_posterior_is_prior(b1):
    _, p = b1.units
    assert np.allclose(abduct(b1, {}).weights, p, atol=1e-15)


def test_b1_posterior_of_z1_given_x1(b1):
    assert abduct(b1, {"X": 1}).probability({"Z1": 1}) == pytest.approx(0.62, abs=1e-12)


def test_deterministically_impossible_evidence(b1):
    with pytest.raises(ImpossibleEvidenceError):
        abduct(b1, {"Z1": 0, "Z2": 0, "Y": 3})


def test_evidence_on_exogenous_rejected(b1):
    with pytest.raises(ModelError):
        abduct(b1, {"U1": 1})


def test_conditional_expectations(b1, b3):
    assert conditional_prob(b1, Expect("Y"), {"X": 1}) == pytest.approx(2.24, abs=1e-9)
    assert conditional_prob(b3, Expect("Y"), {"X": 1}) == pytest.approx(13 / 6, abs=1e-9)


def test_b1_expectation_via_event_probabilities(b1):
    total = sum(y * conditional_prob(b1, {"Y": y}, {"X": 1}) for y in range(4))
    assert total == pytest.approx(2.24, abs=1e-9)


def test_event_equal_to_evidence_has_probability_one(b3):
    assert conditional_prob(b3, {"X": 1, "Z1": 0}, {"X": 1, "Z1": 0}) == pytest.approx(1.0)


def test_counterfactual_reductions(b1):
    assert counterfactual_prob(b1, {"Y": 3}, {"X": 1}, {}) == pytest.approx(
        float(oracle.interventional(model_dict("markov_b1"), {"Y": 3}, {"X": 1})), abs=1e-12
    )
    assert counterfactual_prob(b1, {"Y": 2}, {}, {"X": 1}) == pytest.approx(conditional_prob(b1, {"Y": 2}, {"X": 1}))
    ey = sum(y * interventional_prob(b1, {"Y": y}, {"X": 1}) for y in range(4))
    assert ey == pytest.approx(2.0, abs=1e-9)


def test_ex1_counterfactual_matches_brute_force(models):
    scm, data = models["ex1"], model_dict("ex1")
    # P(Y_{x=1} = y | X = 0) by direct enumeration over units with posterior weights
    for y in (0, 1, 2):
        num = den = Fraction(0)
        for u, p in oracle.units(data):
            if oracle.solve(data, u)["X"] == 0:
                den += p
                num += p * (oracle.solve(data, u, {"X": 1})["Y"] == y)
        assert counterfactual_prob(scm, {"Y": y}, {"X": 1}, {"X": 0}) == pytest.approx(float(num / den), abs=1e-12)


# -- partial abduction ------------------------------------------------------------------


def test_pa_posterior_with_empty_set_equals_abduct(b3):
    assert np.allclose(pa_posterior(b3, {"X": 1}, []).weights, abduct(b3, {"X": 1}).weights, atol=1e-15)


def test_pa_posterior_with_all_latents_is_prior(b1):
    _, p = b1.units
    with pytest.raises(SliceImpossibleError):
        pa_posterior(b1, {"X": 1}, ["U1", "U2", "UX"])
    post = pa_posterior(b1, {"X": 1}, ["U1", "U2", "UX"], on_impossible="intervene")
    assert np.allclose(post.weights, p, atol=1e-15)
    assert post.probability(Expect("Y")) == pytest.approx(interventional_prob(b1, Expect("Y"), {"X": 1}))


def test_pa_posterior_invariants(b1):
    post = pa_posterior(b1, {"X": 1}, ["U1"])
    marg = post.marginal(["U1"])
    assert marg[(0,)] == pytest.approx(0.5) and marg[(1,)] == pytest.approx(0.5)
    assert post.weights.sum() == pytest.approx(1.0, abs=1e-9)


def test_pa_posterior_names_impossible_slice(b3):
    with pytest.raises(SliceImpossibleError) as info:
        pa_posterior(b3, {"X": 1}, ["U1X", "U2X"])
    assert info.value.slice == {"U1X": 0, "U2X": 0}


def test_ex2_full_confounding_set_gives_interventional(models):
    ex1 = models["ex1"]
    for y in (0, 1, 2):
        value = pa_conditional(ex1, {"Y": y}, {"X": 1}, ["UXZ", "UZ"])
        assert value == pytest.approx(interventional_prob(ex1, {"Y": y}, {"X": 1}), abs=1e-12)


def test_pa_conditional_b1_matches_oracle(b1):
    ref = oracle.partially_abducted(model_dict("markov_b1"), "Y", {"X": 1}, ["U1"])
    assert ref == Fraction(1238, 589)
    assert pa_conditional(b1, Expect("Y"), {"X": 1}, ["U1"]) == pytest.approx(float(ref), abs=1e-12)


def test_pa_conditional_b1_reference_value(b1):
    assert pa_conditional(b1, Expect("Y"), {"X": 1}, ["U1"]) == pytest.approx(2.18, abs=1e-9)


def test_pa_conditional_b3_single_latent(b3):
    assert pa_conditional(b3, Expect("Y"), {"X": 1}, ["U1X"]) == pytest.approx(17 / 8, abs=1e-9)


def test_pa_conditional_empty_set_is_conditional(b3):
    assert pa_conditional(b3, Expect("Y"), {"X": 1}, []) == pytest.approx(13 / 6, abs=1e-12)


def test_pa_conditional_impossible_slice_policy(b3):
    with pytest.raises(SliceImpossibleError):
        pa_conditional(b3, Expect("Y"), {"X": 1}, ["U1X", "U2X"])
    value = pa_conditional(b3, Expect("Y"), {"X": 1}, ["U1X", "U2X"], on_impossible="intervene")
    post = pa_posterior(b3, {"X": 1}, ["U1X", "U2X"], on_impossible="intervene")
    assert post.probability(Expect("Y")) == pytest.approx(value, abs=1e-12)
    ref = oracle.partially_abducted(model_dict("semimarkov_b3"), "Y", {"X": 1}, ["U1X", "U2X"], fallback=True)
    assert value == pytest.approx(float(ref), abs=1e-12)
    assert value == pytest.approx(2.0, abs=1e-12)


def test_pa_conditional_set_semantics(b1):
    a = pa_conditional(b1, Expect("Y"), {"X": 1}, ["U2", "U1"])
    b = pa_conditional(b1, Expect("Y"), {"X": 1}, ("U1", "U2"))
    assert a == b


def test_zero_weight_slices_are_skipped(models):
    # U2 = 1 has probability zero in M1; under evidence X=0 that slice never contributes
    value = pa_conditional(models["counterexample_m1"], Expect("Y"), {"X": 0}, ["U2"])
    assert value == pytest.approx(1.0, abs=1e-12)


def test_total_impossibility_always_raises(b1):
    with pytest.raises(ImpossibleEvidenceError):
        pa_conditional(b1, Expect("Y"), {"Z1": 0, "Z2": 0, "Y": 3}, ["U1"], on_impossible="intervene")


@pytest.mark.parametrize("name", BUNDLED)
def test_factored_posterior_matches_direct_sum(models, name):
    """PA via the factored posterior equals the slice-wise sum, on every bundled model."""
    scm, data = models[name], model_dict(name)
    x = {"X": 1}
    exo = [u.name for u in scm.exogenous]
    for k in range(len(exo) + 1):
        u1 = exo[:k]
        try:
            post = pa_posterior(scm, x, u1)
        except SliceImpossibleError:
            continue
        direct = oracle.partially_abducted(data, "Y", x, u1)
        assert post.probability(Expect("Y")) == pytest.approx(float(direct), abs=1e-9)
        assert pa_conditional(scm, Expect("Y"), x, u1) == pytest.approx(float(direct), abs=1e-9)


# -- spurious effects ------------------------------------------------------------------


def test_exp_se_examples(b1, b3):
    assert exp_se(b1, {"X": 1}, Expect("Y")) == pytest.approx(0.24, abs=1e-9)
    assert exp_se(b3, {"X": 1}, Expect("Y")) == pytest.approx(1 / 6, abs=1e-9)


def test_exp_se_zero_without_confounding():
    from spurdecomp.scm import model_from_dict

    scm = model_from_dict({
        "endogenous": {"X": [0, 1], "Y": [0, 1, 2]},
        "exogenous": {"UX": {"bernoulli": 0.3}, "UY": {"bernoulli": 0.6}},
        "mechanisms": {"X": {"exo_parents": ["UX"], "expr": "UX"},
                       "Y": {"parents": ["X"], "exo_parents": ["UY"], "expr": "X + UY"}},
    })
    assert exp_se(scm, {"X": 1}, Expect("Y")) == pytest.approx(0.0, abs=1e-15)


def test_exp_se_set_b1_reference_value(b1):
    assert exp_se_set(b1, {"X": 1}, Expect("Y"), [], ["U1"]) == pytest.approx(0.06, abs=1e-9)


def test_exp_se_set_b3_second_term(b3):
    assert exp_se_set(b3, {"X": 1}, Expect("Y"), ["U1X"], ["U1X", "U2X"]) == pytest.approx(1 / 8, abs=1e-9)


def test_exp_se_set_contracts(b1):
    assert exp_se_set(b1, {"X": 1}, Expect("Y"), ["U1"], ["U1"]) == 0.0
    with pytest.raises(ValueError):
        exp_se_set(b1, {"X": 1}, Expect("Y"), ["U1", "U2"], ["U1"])


def test_counterexample_values_differ(models):
    m1 = pa_conditional(models["counterexample_m1"], Expect("Y"), {"X": 0}, ["U2"])
    m2 = pa_conditional(models["counterexample_m2"], Expect("Y"), {"X": 0}, ["U2"])
    assert m1 == pytest.approx(1.0, abs=1e-12)
    assert m2 == pytest.approx(14 / 15, abs=1e-12)
    assert float(oracle.partially_abducted(model_dict("counterexample_m2"), "Y", {"X": 0}, ["U2"])) == pytest.approx(14 / 15)
