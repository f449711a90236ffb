from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgqn import linalg as la
from cgqn.cg import cg_init, cg_run, cg_step, steplength
from cgqn.problems import ProblemSpec, generate, make_problem, reference_problem
from cgqn.trace import StopPolicy


def test_steplength_examples():
    g = la.vector([3, -1])
    assert steplength(-g, g, la.identity(2, True)) == 1
    ref = reference_problem()
    assert steplength(la.vector([2, 4]), la.vector([-2, -4]), ref.H) == F(5, 18)


def test_reference_steps():
    ref = reference_problem()
    s0 = cg_init(ref)
    s1 = cg_step(s0, ref)
    assert list(s1.x) == [F(5, 9), F(10, 9)]
    assert list(s1.g) == [F(-8, 9), F(4, 9)]
    assert s1.beta_prev == F(4, 81)
    assert list(s1.p) == [F(80, 81), F(-20, 81)]
    assert s1.history[0].alpha == F(5, 18)
    s2 = cg_step(s1, ref)
    assert s2.history[1].alpha == F(9, 20)
    assert list(s2.x) == [1, 1]
    assert list(s2.g) == [0, 0]
    with pytest.raises(ValueError):
        cg_step(s2, ref)


def test_reference_run():
    trace = cg_run(reference_problem())
    assert trace.iterations == 2 and trace.converged
    assert list(trace.x_final) == [1, 1]


def test_identity_hessian_one_step():
    prob = make_problem(la.identity(4, True), la.vector([1, F(-2, 7), 3, 0]),
                        la.vector([5, 0, F(1, 2), -1]))
    assert cg_run(prob).iterations == 1


def test_start_at_minimizer():
    ref = reference_problem()
    prob = make_problem(ref.H, ref.c, ref.minimizer())
    trace = cg_run(prob)
    assert trace.iterations == 0 and trace.converged


@pytest.mark.parametrize("eigs,m", [("1|1|3|3|3", 2), ("2|5|5|7|2|7", 3), ("4|4|4|4", 1)])
def test_distinct_eigenvalues_bound_iterations(eigs, m):
    spec = ProblemSpec("diagonal-spectrum", len(eigs.split("|")), 7,
                       tuple(F(e) for e in eigs.split("|")), rotate=True)
    assert cg_run(generate(spec)).iterations == m


def test_float_run_stops_on_tolerance():
    prob = generate(ProblemSpec("random-spd", 10, 1, cond=10.0), "float")
    trace = cg_run(prob, StopPolicy(tol=1e-10, max_iter=50))
    assert trace.converged
    assert np.linalg.norm(trace.g_final) <= 1e-10 * np.linalg.norm(trace.records[0].g)


def test_float_run_flags_iteration_cap():
    prob = generate(ProblemSpec("hilbert-like", 10), "float")
    trace = cg_run(prob, StopPolicy(tol=1e-15, max_iter=3))
    assert trace.iterations == 3 and not trace.converged


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 10**4))
def test_cg_exact_invariants(n, seed):
    prob = generate(ProblemSpec("random-spd", n, seed))
    trace = cg_run(prob)
    assert trace.converged and trace.iterations <= n
    assert la.is_zero_vector(prob.gradient(trace.x_final))
    gs, ps = trace.gradients(), trace.directions()
    H = prob.H
    for k in range(len(ps)):
        for i in range(k):
            assert la.inner(gs[i], gs[k]) == 0
            assert la.inner(ps[i], la.matvec(H, ps[k])) == 0
        for i in range(k + 1):
            assert la.inner(gs[i], ps[k]) == -la.inner(gs[k], gs[k])
        kry = la.krylov_basis(ps[0], H, k + 1)
        for a, b in ((ps, gs), (gs, kry), (kry, ps)):
            assert all(la.in_span(v, b[:k + 1]) for v in a[:k + 1])
            assert all(la.in_span(v, a[:k + 1]) for v in b[:k + 1])
    for rec in trace.records[1:]:
        assert rec.beta_hessian == rec.beta_prev
