"""Conjugate gradient method with exact linesearch on a quadratic program."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .problems import QuadraticProblem
from .trace import IterationRecord, StopPolicy, Trace, is_stationary


def steplength(p, g, H):
    """Exact linesearch step ``-p'g / p'Hp``."""
    pHp = la.inner(p, la.matvec(H, p))
    if pHp == 0:
        raise ValueError("zero search direction")
    return -la.inner(p, g) / pHp


@dataclass(frozen=True, eq=False)
class CgState:
    k: int
    x: np.ndarray
    g: np.ndarray
    p: np.ndarray
    beta_prev: object = None
    beta_hessian_prev: object = None
    history: tuple[IterationRecord, ...] = ()


def cg_init(prob: QuadraticProblem) -> CgState:
    g0 = prob.gradient(prob.x0)
    return CgState(0, prob.x0, g0, -g0)


def cg_step(state: CgState, prob: QuadraticProblem) -> CgState:
    """Take the step from ``x_k`` and form ``p_{k+1} = -g_{k+1} + beta_k p_k``.

    ``beta_k`` comes from the gradient ratio; the Hessian form
    ``p_k'H g_{k+1} / p_k'H p_k`` is carried along for cross-checking and
    lands in the next record as ``beta_hessian``.
    """
    if la.is_zero_vector(state.g):
        raise ValueError("gradient is zero: already converged")
    Hp = la.matvec(prob.H, state.p)
    pHp = la.inner(state.p, Hp)
    alpha = -la.inner(state.p, state.g) / pHp
    record = IterationRecord(
        state.k, state.x, state.g, state.p, alpha,
        beta_prev=state.beta_prev, beta_hessian=state.beta_hessian_prev,
    )
    x_next = state.x + alpha * state.p
    g_next = prob.gradient(x_next)
    beta = la.inner(g_next, g_next) / la.inner(state.g, state.g)
    beta_h = la.inner(Hp, g_next) / pHp
    return CgState(
        state.k + 1, x_next, g_next, -g_next + beta * state.p,
        beta, beta_h, state.history + (record,),
    )


def cg_run(prob: QuadraticProblem, stop: StopPolicy | None = None) -> Trace:
    """Run CG to convergence.

    Exact mode stops on ``g_k = 0``, which theory guarantees within ``n``
    steps; float mode stops on the relative gradient tolerance or the
    iteration cap, recorded in ``trace.stop_reason``.
    """
    stop = stop or StopPolicy()
    max_iter = prob.n if stop.max_iter is None else stop.max_iter
    state = cg_init(prob)
    g0_norm = la.norm(state.g)
    trace = Trace("cg")
    while True:
        if is_stationary(state.g, g0_norm, prob.exact, stop):
            trace.stop_reason = "gradient-zero" if prob.exact else "tolerance"
            break
        if state.k >= max_iter and not prob.exact:
            trace.stop_reason = "max-iter"
            break
        if prob.exact and state.k >= prob.n:
            raise RuntimeError("exact CG did not terminate within n iterations")
        state = cg_step(state, prob)
    trace.records = list(state.history)
    trace.x_final, trace.g_final = state.x, state.g
    return trace
