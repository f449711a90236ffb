import json
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgqn import linalg as la
from cgqn import problems
from cgqn.cg import cg_run
from cgqn.problems import (
    NotPositiveDefinite,
    ProblemFormatError,
    ProblemSpec,
    generate,
    make_problem,
    parse_spec,
    reference_problem,
)

DATA = __import__("pathlib").Path(__file__).parent / "data"


def test_gradient_examples():
    ref = reference_problem()
    assert list(ref.gradient(ref.minimizer())) == [0, 0]
    assert list(ref.gradient(la.vector([0, 0]))) == [-2, -4]
    assert list(ref.gradient(la.vector([F(5, 9), F(10, 9)]))) == [F(-8, 9), F(4, 9)]


def test_objective_examples():
    ref = reference_problem()
    assert ref.objective(la.vector([0, 0])) == 0
    prob = make_problem(la.identity(2, True), la.vector([0, 0]), la.vector([0, 0]))
    assert prob.objective(la.vector([3, 4])) == F(25, 2)
    with pytest.raises(ValueError):
        prob.objective(la.vector([1, 2, 3]))


def test_descent_along_cg():
    prob = generate(parse_spec("random-spd:n=6,seed=4"))
    trace = cg_run(prob)
    xs = [r.x for r in trace.records] + [trace.x_final]
    for rec, x_next in zip(trace.records, xs[1:]):
        assert la.inner(rec.p, rec.g) != 0
        assert prob.objective(x_next) < prob.objective(rec.x)


def test_sr1_trap_n2():
    prob = generate(parse_spec("sr1-trap:n=2"))
    assert prob.H.tolist() == [[F(1, 2), 0], [0, F(3, 2)]]
    assert list(prob.c) == [-1, -1] and list(prob.x0) == [0, 0]
    p0 = -prob.gradient(prob.x0)
    assert list(p0) == [1, 1]
    assert la.inner(p0, p0) / la.inner(p0, la.matvec(prob.H, p0)) == 1


def test_diagonal_spectrum_plain():
    prob = generate(parse_spec("diagonal-spectrum:eigs=2|4"))
    assert prob.H.tolist() == [[2, 0], [0, 4]]


def test_random_spd_deterministic():
    a = generate(ProblemSpec("random-spd", 5, seed=11))
    b = generate(ProblemSpec("random-spd", 5, seed=11))
    assert problems.dumps(a) == problems.dumps(b)
    c = generate(ProblemSpec("random-spd", 5, seed=12))
    assert problems.dumps(a) != problems.dumps(c)


def test_reference_file_round_trip():
    text = (DATA / "ref.json").read_text()
    prob = problems.loads(text)
    assert problems.dumps(prob) + "\n" == text
    assert prob.H.tolist() == reference_problem().H.tolist()


def _ref_dict():
    return problems.to_dict(reference_problem())


def test_asymmetric_file_rejected():
    d = _ref_dict()
    d["H"][0][1] = "1/1"
    with pytest.raises(ProblemFormatError, match="symmetric"):
        problems.from_dict(d)


def test_non_pd_file_names_minor():
    d = _ref_dict()
    d["H"] = [["1", "0"], ["0", "-1"]]
    with pytest.raises(NotPositiveDefinite) as info:
        problems.from_dict(d)
    assert info.value.minor == 2


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("H"),
    lambda d: d.update(scalar_mode="complex"),
    lambda d: d.update(c=["1"]),
    lambda d: d.update(H=[["x", "0"], ["0", "1"]]),
])
def test_malformed_files_rejected(mutate):
    d = _ref_dict()
    mutate(d)
    with pytest.raises(ProblemFormatError):
        problems.from_dict(d)


def test_loads_rejects_bad_json():
    with pytest.raises(ProblemFormatError):
        problems.loads("{not json")


@pytest.mark.parametrize("text", ["random-spd:n=0", "diagonal-spectrum:eigs=", "hilbert-like",
                                  "random-spd:n=3,bogus=1", "nope:n=3", "sr1-trap:n=1",
                                  "diagonal-spectrum:eigs=1|-2"])
def test_bad_specs_rejected(text):
    with pytest.raises(ValueError):
        parse_spec(text)


def test_float_round_trip_is_exact():
    prob = generate(parse_spec("random-spd:n=4,seed=2,cond=100"), "float")
    again = problems.loads(problems.dumps(prob))
    assert np.array_equal(again.H, prob.H) and np.array_equal(again.x0, prob.x0)
    assert json.loads(problems.dumps(prob))["scalar_mode"] == "float"


def test_with_mode_converts():
    ref = reference_problem()
    assert not ref.with_mode("float").exact
    assert ref.with_mode("float").with_mode("rational").H.tolist() == ref.H.tolist()


specs = st.one_of(
    st.builds(lambda n, s: ProblemSpec("random-spd", n, s), st.integers(1, 8), st.integers(0, 999)),
    st.builds(lambda n, s, r: ProblemSpec("sr1-trap", n, s, rotate=r),
              st.integers(2, 8), st.integers(0, 999), st.booleans()),
    st.builds(lambda e, s, r: ProblemSpec("diagonal-spectrum", len(e), s, tuple(e), rotate=r),
              st.lists(st.fractions(F(1, 4), 9, max_denominator=4), min_size=1, max_size=6),
              st.integers(0, 999), st.booleans()),
    st.builds(lambda n: ProblemSpec("hilbert-like", n), st.integers(1, 6)),
)


@settings(max_examples=80, deadline=None)
@given(specs)
def test_generated_problems_are_valid(spec):
    prob = generate(spec)
    assert problems.first_nonpositive_minor(prob.H) is None
    xs = prob.minimizer()
    assert la.is_zero_vector(prob.gradient(xs))
    assert problems.dumps(problems.loads(problems.dumps(prob))) == problems.dumps(prob)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(0, 999), st.booleans())
def test_sr1_trap_rayleigh_quotient_is_one(n, seed, rotate):
    prob = generate(ProblemSpec("sr1-trap", n, seed, rotate=rotate))
    g0 = prob.gradient(prob.x0)
    assert la.inner(g0, g0) == la.inner(g0, la.matvec(prob.H, g0))
