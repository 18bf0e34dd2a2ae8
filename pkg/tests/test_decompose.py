import itertools
from fractions import Fraction

import pytest

import oracle
from conftest import model_dict
from spurdecomp.decompose import (
    DecompositionError,
    decompose,
    markov_decompose,
    semimarkov_decompose,
    tv_decompose,
)
from spurdecomp.engine import Expect, exp_se
from spurdecomp.scm import model_from_dict

Y = Expect("Y")

UNCONFOUNDED = model_from_dict({
    "endogenous": {"X": [0, 1], "Y": [0, 1, 2]},
    "exogenous": {"UX": {"bernoulli": 0.4}, "UY": {"bernoulli": 0.5}},
    "mechanisms": {"X": {"exo_parents": ["UX"], "expr": "UX"},
                   "Y": {"parents": ["X"], "exo_parents": ["UY"], "expr": "X + UY"}},
})


def test_b1_markov_decomposition_matches_oracle(b1):
    data = model_dict("markov_b1")
    p0 = oracle.conditional(data, "Y", {"X": 1})
    p1 = oracle.partially_abducted(data, "Y", {"X": 1}, ["U1"])
    p2 = oracle.interventional(data, "Y", {"X": 1})
    rep = markov_decompose(b1, {"X": 1}, Y)
    assert rep.ordering == ("Z1", "Z2")
    assert [c.label for c in rep.contributions] == [("U1",), ("U2",)]
    assert rep.contributions[0].value == pytest.approx(float(p0 - p1), abs=1e-12)
    assert rep.contributions[1].value == pytest.approx(float(p1 - p2), abs=1e-12)
    assert rep.total == pytest.approx(0.24, abs=1e-9)
    assert abs(rep.residual) < 1e-9


def test_b1_markov_decomposition_reference_values(b1):
    rep = markov_decompose(b1, {"X": 1}, Y)
    assert [c.value for c in rep.contributions] == pytest.approx([0.06, 0.18], abs=1e-9)


def test_no_confounders_gives_empty_report():
    rep = markov_decompose(UNCONFOUNDED, {"X": 1}, Y)
    assert rep.contributions == [] and rep.total == pytest.approx(0.0, abs=1e-15)


def test_markov_rejects_semimarkov_input(b3):
    with pytest.raises(DecompositionError, match="semimarkov"):
        markov_decompose(b3, {"X": 1}, Y)


def test_markov_rejects_non_topological_order(b1):
    with pytest.raises(DecompositionError):
        markov_decompose(b1, {"X": 1}, Y, order=["Z2", "Z1"])
    forced = markov_decompose(b1, {"X": 1}, Y, order=["U2", "U1"], force_model_only=True)
    assert forced.ordering == ("Z2", "Z1")
    assert abs(forced.residual) < 1e-9


def test_order_may_name_latents(b1):
    a = markov_decompose(b1, {"X": 1}, Y, order=["U1", "U2"])
    b = markov_decompose(b1, {"X": 1}, Y)
    assert [c.value for c in a.contributions] == [c.value for c in b.contributions]


def test_b3_semimarkov_decomposition(b3):
    rep = semimarkov_decompose(b3, {"X": 1}, Y)
    assert rep.ordering == ("U1X", "U2X")
    assert [c.value for c in rep.contributions] == pytest.approx([1 / 24, 1 / 8], abs=1e-9)
    assert rep.total == pytest.approx(1 / 6, abs=1e-9)


def test_b3_reversed_order_still_telescopes(b3):
    data = model_dict("semimarkov_b3")
    rep = semimarkov_decompose(b3, {"X": 1}, Y, order=["U2X", "U1X"])
    mid = oracle.partially_abducted(data, "Y", {"X": 1}, ["U2X"])
    assert mid == Fraction(17, 8)
    assert rep.contributions[0].value == pytest.approx(float(Fraction(13, 6) - mid), abs=1e-12)
    assert sum(c.value for c in rep.contributions) == pytest.approx(1 / 6, abs=1e-9)


def test_semimarkov_order_must_be_permutation(b3):
    with pytest.raises(DecompositionError):
        semimarkov_decompose(b3, {"X": 1}, Y, order=["U1X"])
    with pytest.raises(DecompositionError):
        semimarkov_decompose(b3, {"X": 1}, Y, order=["U1X", "U1X"])


def test_semimarkov_reduces_to_markov_on_b1(b1):
    a = semimarkov_decompose(b1, {"X": 1}, Y, order=["U1", "U2"])
    b = markov_decompose(b1, {"X": 1}, Y)
    assert [c.value for c in a.contributions] == pytest.approx([c.value for c in b.contributions], abs=1e-12)


def test_auto_mode_dispatch(b1, b3):
    assert decompose(b1, {"X": 1}, Y).mode == "markovian"
    assert decompose(b3, {"X": 1}, Y).mode == "semi-markovian"
    with pytest.raises(DecompositionError):
        decompose(b1, {"X": 1}, Y, mode="bogus")


def test_endpoints_match_engine(b1, b3, chain):
    from spurdecomp.engine import conditional_prob, interventional_prob

    for scm in (b1, b3, chain):
        rep = decompose(scm, {"X": 1}, Y)
        assert rep.prefix_values[0] == pytest.approx(conditional_prob(scm, Y, {"X": 1}), abs=1e-12)
        assert rep.prefix_values[-1] == pytest.approx(interventional_prob(scm, Y, {"X": 1}), abs=1e-12)


def test_total_is_order_invariant(b3, chain):
    for scm in (b3, chain):
        totals = [
            sum(c.value for c in semimarkov_decompose(scm, {"X": 1}, Y, order=list(p)).contributions)
            for p in itertools.permutations(["U1X", "U2X"])
        ]
        assert totals[0] == pytest.approx(totals[1], abs=1e-12)


def test_probability_form(b1):
    rep = markov_decompose(b1, {"X": 1}, {"Y": 3})
    assert rep.total == pytest.approx(exp_se(b1, {"X": 1}, {"Y": 3}), abs=1e-12)
    assert rep.y == "Y=3"


def test_tv_report(b1):
    rep = tv_decompose(b1, {"X": 0}, {"X": 1}, Y)
    assert rep.exp_se_x1 == pytest.approx(0.24, abs=1e-9)
    assert abs(rep.residual) < 1e-9
    data = model_dict("markov_b1")
    tv = oracle.conditional(data, "Y", {"X": 1}) - oracle.conditional(data, "Y", {"X": 0})
    assert rep.tv == pytest.approx(float(tv), abs=1e-12)


def test_tv_without_confounding_equals_te():
    rep = tv_decompose(UNCONFOUNDED, {"X": 0}, {"X": 1}, Y)
    assert rep.tv == pytest.approx(rep.te, abs=1e-12)
    assert rep.exp_se_x0 == pytest.approx(0.0, abs=1e-12)


def test_report_serialization(b3):
    rep = decompose(b3, {"X": 1}, Y)
    d = rep.to_dict()
    assert d["ordering"] == ["U1X", "U2X"]
    assert [c["latents"] for c in d["contributions"]] == [["U1X"], ["U2X"]]
    text = rep.to_text()
    assert "U1X" in text and "total Exp-SE" in text
