import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tetra.counterexample import (
    admissible_bound,
    certify_report,
    generate,
    generate_batch,
    sample_lambdas,
)
from tetra.errors import ConstraintViolationError, InvariantViolationError
from tetra.structure import Verdict, family_commutator_norm


def test_reference_example_record():
    rec = generate(lambdas=(0.2, 0.1, 0.15), margin=1e-3)
    assert rec.commutator_norm == pytest.approx(0.0046563, abs=5e-8)
    assert abs(rec.commutator_norm - family_commutator_norm(0.2, 0.1, 0.15)) <= 1e-12
    assert rec.certification.verdict is Verdict.CERTIFIED
    assert rec.theoremB_commutation_interior >= 1e-4
    assert rec.r_used == pytest.approx(1 / 3 - 1e-3, abs=2e-6)


@pytest.mark.parametrize(
    "lams, needle",
    [
        ((0.1, 0.1, 0.15), "differ"),
        ((0.4, 0.1, 0.15), "below r"),
        ((0.2, 0.1, 0.0), "lambda3 must be nonzero"),
        ((0.0, 0.1, 0.15), "lambda1 must be nonzero"),
        ((0.1j, 0.1, 0.15), "differ"),
    ],
)
def test_inadmissible_lambdas_name_the_hypothesis(lams, needle):
    with pytest.raises(ConstraintViolationError, match=needle):
        generate(lambdas=lams)


def test_needs_lambdas_or_seed():
    with pytest.raises(ConstraintViolationError):
        generate()


def test_report_flags_and_text():
    rep = certify_report(generate(lambdas=(0.2, 0.1, 0.15)))
    assert all(rep["hypotheses"].values())
    assert rep["certificate"]["verdict"] == "certified"
    assert "no explicit dilation" in rep["dilation"]
    assert "0.00465626" in rep["text"]


def test_tampered_record_rejected():
    rec = generate(lambdas=(0.2, 0.1, 0.15))
    with pytest.raises(InvariantViolationError):
        certify_report(dataclasses.replace(rec, commutator_norm=0.0))
    with pytest.raises(InvariantViolationError):
        certify_report(dataclasses.replace(rec, commutator_norm=rec.commutator_norm * 2))


def test_batch_of_fifty():
    recs = generate_batch(50, seed=123)
    reps = [certify_report(r) for r in recs]
    assert len(reps) == 50
    assert all(r["commutator_norm"] > 0 for r in reps)
    assert len({r.lambdas for r in recs}) == 50


def test_batch_is_schedule_independent():
    a = generate_batch(6, seed=5, workers=1)
    b = generate_batch(6, seed=5, workers=3)
    assert [r.lambdas for r in a] == [r.lambdas for r in b]
    assert [r.commutator_norm for r in a] == [r.commutator_norm for r in b]


@settings(max_examples=25)
@given(st.integers(0, 2**63))
def test_seeded_draws_are_admissible(seed):
    bound = admissible_bound()
    l1, l2, l3 = sample_lambdas(seed, bound)
    assert 0 < abs(l1) < bound and 0 < abs(l2) < bound and 0 < abs(l3) < bound
    assert abs(abs(l1) - abs(l2)) >= 1e-6
    assert sample_lambdas(seed, bound) == (l1, l2, l3)


def test_sampling_attached_when_requested():
    rec = generate(seed=[4], sampling={"npolys": 50, "degree": 3, "nsamples": 1000})
    assert rec.sampling is not None and rec.sampling.passed
    assert "sampling" in certify_report(rec)
