"""Quasi-Newton iteration with one-parameter Broyden family updates.

The Hessian approximation starts at ``B_0 = I`` and is updated as
``B_k = B_{k-1} + U_k`` with

    U = Hp p'H / p'Hp - Bp p'B / p'Bp + phi * p'Bp * w w',
    w = Hp / p'Hp - Bp / p'Bp,

all quantities taken at iteration ``k - 1``.  ``phi`` is the dimensionless
Broyden parameter (0 is BFGS).  Directions solve ``B_k p_k = -g_k`` and steps
use exact linesearch.

Besides the iteration itself this module provides the scalar laws tied to
``phi`` (SR1 value, degenerate value, the direction scaling ``delta``) and
:func:`extract_phi`, which recovers ``phi`` from an arbitrary symmetric
update matrix or says which defining condition it violates.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from . import linalg as la
from .linalg import Singular, Tolerance
from .problems import QuadraticProblem
from .trace import IterationRecord, StopPolicy, Trace, is_stationary


class NotWellDefined(ValueError):
    """``p'Bp = 0``: the update has a zero denominator."""


class SR1Undefined(ValueError):
    """``p'(H - B)p = 0``, which on a quadratic means the step was unit."""

    def __init__(self, alpha):
        super().__init__(f"SR1 parameter undefined: p'(H-B)p = 0 (steplength {alpha} = 1)")
        self.alpha = alpha


class NotBroyden(ValueError):
    """An update matrix outside the Broyden family.

    ``condition`` names the first violated requirement, checked in the order
    ``"nullspace"`` (``U p_i != 0`` for an older direction), ``"range"``
    (a column of ``U`` outside ``span{g_{k-1}, g_k}``), ``"qn"`` (secant
    condition fails).  ``violations`` maps every violated condition to its
    witness.
    """

    def __init__(self, condition: str, violations: dict):
        self.condition = condition
        self.violations = violations
        self.witness = violations[condition]
        super().__init__(f"not a Broyden update: {condition} condition violated ({self.witness})")


class BreakdownKind(str, Enum):
    SR1_UNDEFINED = "SR1Undefined"
    DEGENERATE_PHI = "DegeneratePhi"
    INCOMPATIBLE = "Incompatible"
    UPDATE_UNDEFINED = "UpdateUndefined"


class Breakdown(Exception):
    """The quasi-Newton iteration cannot form iteration ``k``.

    ``trace`` holds the records completed before the breakdown (attached by
    :func:`qn_run`).  ``B`` is the offending matrix when one was assembled.
    """

    def __init__(self, kind: BreakdownKind, k: int, message: str, *, phi=None,
                 B=None, alpha=None, cond=None, phi_degenerate=None):
        super().__init__(f"{kind.value} at k={k}: {message}")
        self.kind = kind
        self.k = k
        self.phi = phi
        self.B = B
        self.alpha = alpha
        self.cond = cond
        self.phi_degenerate = phi_degenerate
        self.trace: Trace | None = None

    def to_dict(self) -> dict:
        from ._json import encode

        return encode({
            "kind": self.kind.value,
            "k": self.k,
            "message": str(self),
            "phi": self.phi,
            "alpha_prev": self.alpha,
            "phi_degenerate": self.phi_degenerate,
            "condition_estimate": self.cond,
        })


# ---------------------------------------------------------------------------
# the update


@dataclass(frozen=True, eq=False)
class BroydenUpdate:
    """A family member together with its two 2x2 coefficient representations.

    ``frame_hb`` acts on ``(Hp/p'Hp, Bp/p'Bp)`` and ``frame_gg`` on
    ``(g_{k-1}, g_k)``; ``expand_hb()`` and ``expand_gg()`` rebuild ``U``
    from either.
    """

    U: np.ndarray
    phi: Any
    pHp: Any
    pBp: Any
    hb_basis: tuple[np.ndarray, np.ndarray]
    frame_hb: np.ndarray
    gg_basis: tuple[np.ndarray, np.ndarray]
    frame_gg: np.ndarray

    @property
    def phi_bar(self):
        return self.phi * self.pBp

    def expand_hb(self) -> np.ndarray:
        return _expand(self.hb_basis, self.frame_hb)

    def expand_gg(self) -> np.ndarray:
        return _expand(self.gg_basis, self.frame_gg)


def _expand(basis, M) -> np.ndarray:
    a, b = basis
    return (M[0, 0] * np.outer(a, a) + M[0, 1] * (np.outer(a, b) + np.outer(b, a))
            + M[1, 1] * np.outer(b, b))


def _coerce(value, exact: bool):
    return la.to_fraction(value) if exact else float(value)


def _zero(value, exact: bool, tol: Tolerance | None, scale) -> bool:
    if exact:
        return value == 0
    return (tol or la.DEFAULT_TOL).is_zero(value, scale)


def broyden_update(B, p, H, phi, tol: Tolerance | None = None) -> BroydenUpdate:
    """The Broyden family update for direction ``p``.

    Raises :class:`NotWellDefined` if ``p'Bp = 0``; on a quadratic with exact
    linesearch this never happens while the gradient is nonzero.
    """
    exact = la.is_exact(B)
    phi = _coerce(phi, exact)
    Hp = la.matvec(H, p)
    Bp = la.matvec(B, p)
    pHp = la.inner(p, Hp)
    pBp = la.inner(p, Bp)
    if pHp == 0:
        raise ValueError("p'Hp = 0: zero direction")
    if _zero(pBp, exact, tol, la.norm(Bp) * la.norm(p)):
        raise NotWellDefined(
            "p'Bp = 0 with Bp != 0" if not la.is_zero_vector(Bp) else "p'Bp = 0 and Bp = 0"
        )
    a = Hp / pHp
    b = Bp / pBp
    w = a - b
    U = np.outer(Hp, Hp) / pHp - np.outer(Bp, Bp) / pBp + (phi * pBp) * np.outer(w, w)
    if not exact:
        U = (U + U.T) / 2

    phi_bar = phi * pBp
    frame_hb = np.array([[pHp + phi_bar, -phi_bar], [-phi_bar, -pBp + phi_bar]],
                        dtype=object if exact else float)
    s = pHp / (pBp * pBp)
    frame_gg = np.array([[s - 1 / pBp, -s], [-s, s + phi / pBp]],
                        dtype=object if exact else float)
    g_prev = -Bp
    g_next = g_prev + (pBp / pHp) * Hp
    return BroydenUpdate(U, phi, pHp, pBp, (a, b), frame_hb, (g_prev, g_next), frame_gg)


def phi_sr1(B, p, H, tol: Tolerance | None = None):
    """Broyden parameter of the symmetric rank-one update, ``p'Hp / p'(H-B)p``.

    Raises :class:`SR1Undefined` when the denominator vanishes, carrying the
    steplength ``p'Bp / p'Hp`` (which then equals 1).
    """
    exact = la.is_exact(B)
    pHp = la.inner(p, la.matvec(H, p))
    pBp = la.inner(p, la.matvec(B, p))
    denom = pHp - pBp
    if _zero(denom, exact, tol, abs(pHp)):
        raise SR1Undefined(pBp / pHp)
    return pHp / denom


def phi_degenerate(B, p, g_next):
    """The value ``-p'Bp / g'g`` that makes the updated matrix singular."""
    gg = la.inner(g_next, g_next)
    if gg == 0:
        raise ValueError("g_next = 0: no degenerate value at convergence")
    return -la.inner(p, la.matvec(B, p)) / gg


def delta_of_phi(phi, pBp, gTg):
    """Scaling ``delta`` with ``p_k = delta * p_k^CG`` implied by ``phi``.

    Returns ``math.inf`` at the degenerate value.
    """
    if pBp == 0:
        raise ValueError("p'Bp = 0")
    denom = 1 + phi * gTg / pBp
    if denom == 0:
        return math.inf
    return 1 / denom


def extract_phi(U, B, p, H, tol: Tolerance | None = None,
                earlier: Sequence[np.ndarray] = ()):
    """Recover the Broyden parameter of a symmetric update matrix ``U``.

    ``p`` is the latest direction ``p_{k-1}`` and ``earlier`` the directions
    ``p_0 .. p_{k-2}``.  The gradients spanning the admissible range are
    rebuilt from ``B`` and ``H`` along the exact-linesearch step:
    ``g_{k-1} = -Bp`` and ``g_k = g_{k-1} + (p'Bp / p'Hp) Hp``.

    Raises :class:`NotBroyden` with a witness when ``U`` violates a defining
    condition, and ``ValueError`` when ``Hp`` and ``Bp`` are parallel (which
    implies ``g_k = 0``).
    """
    U = np.asarray(U)
    exact = la.is_exact(U) or la.is_exact(B)
    n = U.shape[0]
    Hp = la.matvec(H, p)
    Bp = la.matvec(B, p)
    pHp = la.inner(p, Hp)
    pBp = la.inner(p, Bp)
    if la.rank(np.array([Hp, Bp]), tol) < 2:
        raise ValueError("degenerate frame: Hp and Bp are parallel")
    g_prev = -Bp
    g_next = g_prev + (pBp / pHp) * Hp
    frame = [g_prev, g_next]
    u_scale = float(np.max(np.abs(la.as_float(U)))) if U.size else 0.0

    violations: dict = {}
    for i, pi in enumerate(earlier):
        r = la.matvec(U, pi)
        if not la.is_zero_vector(r, tol, u_scale * la.norm(pi)):
            violations["nullspace"] = {"index": i, "residual": la.norm(r)}
            break
    for j in range(n):
        col = U[:, j]
        if not la.in_span(col, frame, tol):
            violations["range"] = {"basis_index": j,
                                   "residual": la.span_residual(col, frame)}
            break
    r = la.matvec(U, p) - (Hp - Bp)
    if not la.is_zero_vector(r, tol, la.norm(Hp - Bp) + u_scale * la.norm(p)):
        violations["qn"] = {"residual": la.norm(r)}
    for cond in ("nullspace", "range", "qn"):
        if cond in violations:
            raise NotBroyden(cond, violations)

    # U = G M G' with G = [g_prev, g_next]; M = S^-1 G'UG S^-1, S = G'G
    G = np.column_stack(frame)
    S = G.T.dot(G)
    inner_ = G.T.dot(U).dot(G)
    left = np.column_stack([la.solve_symmetric(S, inner_[:, j], tol) for j in range(2)])
    M = np.column_stack([la.solve_symmetric(S, left[j, :], tol) for j in range(2)]).T
    phi = (M[1, 1] - pHp / (pBp * pBp)) * pBp
    rebuilt = broyden_update(B, p, H, phi, tol).U
    resid = la.as_float(rebuilt - U)
    if (exact and any(v != 0 for v in (rebuilt - U).ravel())) or (
        not exact and not (tol or la.DEFAULT_TOL).is_zero(np.max(np.abs(resid)), u_scale)
    ):
        raise NotBroyden("reconstruction", {"reconstruction": {
            "residual": float(np.max(np.abs(resid)))}})
    return phi


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class PhiSchedule:
    """How ``phi_k`` is chosen at each update ``k >= 1``.

    rules: ``bfgs``, ``sr1``, ``constant`` (value = phi), ``sequence``
    (value = list, entry ``k-1`` used at update ``k``), ``degenerate-probe``
    (value = k where the degenerate value is used; BFGS elsewhere),
    ``random`` (value = seed; rational phi in [-5, 5] avoiding the
    degenerate value), ``custom`` (value = callable ``(k, B, p, H, g_next)``).
    """

    rule: str
    value: Any = None
    label: str | None = None

    def phi(self, k: int, B, p, H, g_next, tol: Tolerance | None = None):
        exact = la.is_exact(B)
        if self.rule == "bfgs":
            return _coerce(0, exact)
        if self.rule == "sr1":
            return phi_sr1(B, p, H, tol)
        if self.rule == "constant":
            return _coerce(self.value, exact)
        if self.rule == "sequence":
            if k - 1 >= len(self.value):
                raise ValueError(f"phi sequence exhausted at update {k}")
            return _coerce(self.value[k - 1], exact)
        if self.rule == "degenerate-probe":
            if k == int(self.value):
                return phi_degenerate(B, p, g_next)
            return _coerce(0, exact)
        if self.rule == "random":
            return _random_phi(int(self.value), k, B, p, g_next, exact)
        if self.rule == "custom":
            return _coerce(self.value(k, B, p, H, g_next), exact)
        raise ValueError(f"unknown phi rule {self.rule!r}")

    def describe(self) -> str:
        if self.label:
            return self.label
        if self.rule in ("bfgs", "sr1"):
            return self.rule
        if self.rule == "constant":
            return f"const:{self.value}"
        if self.rule == "sequence":
            return "seq:" + ",".join(str(v) for v in self.value)
        if self.rule == "degenerate-probe":
            return f"degenerate-probe:{self.value}"
        if self.rule == "random":
            return f"random:{self.value}"
        return "custom"

    @property
    def nonnegative(self) -> bool:
        """True when every phi this schedule can produce is known to be >= 0."""
        if self.rule == "bfgs":
            return True
        if self.rule == "constant":
            return Fraction(str(self.value)) >= 0
        if self.rule == "sequence":
            return all(Fraction(str(v)) >= 0 for v in self.value)
        return False


BFGS = PhiSchedule("bfgs")
SR1 = PhiSchedule("sr1")


def _random_phi(seed: int, k: int, B, p, g_next, exact: bool):
    rng = random.Random(f"phi/{seed}/{k}")
    forbidden = phi_degenerate(B, p, g_next)
    while True:
        den = rng.randint(1, 6)
        phi = Fraction(rng.randint(-5 * den, 5 * den), den)
        if not exact:
            phi = float(phi)
        if phi != forbidden:
            return phi


def parse_schedule(text: str) -> PhiSchedule:
    """Parse ``bfgs``, ``sr1``, ``const:<q>``, ``seq:q1,q2,...``,
    ``degenerate-probe:<k>`` or ``random:<seed>``."""
    text = text.strip()
    rule, _, arg = text.partition(":")
    rule = rule.strip().lower()
    try:
        if rule in ("bfgs", "sr1") and not arg:
            return PhiSchedule(rule)
        if rule in ("const", "constant") and arg:
            return PhiSchedule("constant", Fraction(arg.strip()))
        if rule in ("seq", "sequence") and arg:
            values = tuple(Fraction(v.strip()) for v in arg.split(",") if v.strip())
            if values:
                return PhiSchedule("sequence", values)
        if rule == "degenerate-probe" and arg:
            k = int(arg)
            if k >= 1:
                return PhiSchedule("degenerate-probe", k)
        if rule == "random" and arg:
            return PhiSchedule("random", int(arg))
    except (ValueError, ZeroDivisionError):
        pass
    raise ValueError(f"bad phi schedule {text!r}")


# ---------------------------------------------------------------------------
# iteration


@dataclass(frozen=True, eq=False)
class QnState:
    """Iterate ``k``: ``p`` is ``None`` once the gradient has vanished."""

    k: int
    x: np.ndarray
    g: np.ndarray
    p: np.ndarray | None
    B: np.ndarray
    update: BroydenUpdate | None = None
    history: tuple[IterationRecord, ...] = field(default=())


def qn_init(prob: QuadraticProblem) -> QnState:
    B0 = la.identity(prob.n, prob.exact)
    g0 = prob.gradient(prob.x0)
    return QnState(0, prob.x0, g0, la.solve_symmetric(B0, -g0), B0)


def qn_step(state: QnState, prob: QuadraticProblem, sched: PhiSchedule,
            stop: StopPolicy | None = None, tol: Tolerance | None = None,
            g0_norm: float | None = None) -> QnState:
    """Step from ``x_k`` along ``p_k``, update ``B`` and solve for ``p_{k+1}``.

    Raises :class:`Breakdown` if the next direction cannot be formed.
    """
    if state.p is None or la.is_zero_vector(state.g):
        raise ValueError("gradient is zero: already converged")
    stop = stop or StopPolicy()
    exact = prob.exact
    p = state.p
    alpha = -la.inner(p, state.g) / la.inner(p, la.matvec(prob.H, p))
    record = IterationRecord(state.k, state.x, state.g, p, alpha, B=state.B,
                             update=state.update,
                             phi=None if state.update is None else state.update.phi)
    history = state.history + (record,)
    x_next = state.x + alpha * p
    g_next = prob.gradient(x_next)
    k = state.k + 1
    if g0_norm is None:
        g0_norm = la.norm(history[0].g)
    if is_stationary(g_next, g0_norm, exact, stop):
        return QnState(k, x_next, g_next, None, state.B, None, history)

    try:
        upd, B_next, p_next = _next_direction(state.B, p, prob.H, g_next, k, alpha,
                                              sched, tol, exact)
    except Breakdown as exc:
        exc.records = history
        exc.x, exc.g = x_next, g_next
        raise
    return QnState(k, x_next, g_next, p_next, B_next, upd, history)


def _next_direction(B, p, H, g_next, k, alpha, sched, tol, exact):
    try:
        phi = sched.phi(k, B, p, H, g_next, tol)
    except SR1Undefined as exc:
        raise Breakdown(BreakdownKind.SR1_UNDEFINED, k, str(exc), alpha=alpha) from None
    try:
        upd = broyden_update(B, p, H, phi, tol)
    except NotWellDefined as exc:
        raise Breakdown(BreakdownKind.UPDATE_UNDEFINED, k, str(exc), phi=phi,
                        alpha=alpha) from None
    B_next = B + upd.U
    try:
        p_next = la.solve_symmetric(B_next, -g_next, tol)
    except Singular as exc:
        phi_deg = phi_degenerate(B, p, g_next)
        if exact:
            near = phi == phi_deg
        else:
            near = (tol or la.DEFAULT_TOL).is_zero(phi - phi_deg, abs(phi_deg))
        kind = BreakdownKind.DEGENERATE_PHI if near else BreakdownKind.INCOMPATIBLE
        raise Breakdown(kind, k, f"B_{k} is singular ({exc})", phi=phi, B=B_next,
                        alpha=alpha, cond=math.inf if exact else exc.cond,
                        phi_degenerate=phi_deg) from None
    return upd, B_next, p_next


def qn_run(prob: QuadraticProblem, sched: PhiSchedule = BFGS,
           stop: StopPolicy | None = None, tol: Tolerance | None = None) -> Trace:
    """Run quasi-Newton to convergence or breakdown.

    A :class:`Breakdown` propagates with ``.trace`` holding the completed
    records.
    """
    stop = stop or StopPolicy()
    max_iter = prob.n if stop.max_iter is None else stop.max_iter
    state = qn_init(prob)
    g0_norm = la.norm(state.g)
    trace = Trace(f"qn[{sched.describe()}]")
    if is_stationary(state.g, g0_norm, prob.exact, stop):
        state = QnState(0, state.x, state.g, None, state.B)
    while state.p is not None:
        if not prob.exact and state.k >= max_iter:
            break
        if prob.exact and state.k >= prob.n:
            raise RuntimeError("exact quasi-Newton did not terminate within n iterations")
        try:
            state = qn_step(state, prob, sched, stop, tol, g0_norm)
        except Breakdown as exc:
            trace.records = list(exc.records)
            trace.x_final, trace.g_final = exc.x, exc.g
            trace.stop_reason = f"breakdown:{exc.kind.value}"
            exc.trace = trace
            raise
    trace.records = list(state.history)
    trace.x_final, trace.g_final = state.x, state.g
    if state.p is None:
        trace.stop_reason = "gradient-zero" if prob.exact else "tolerance"
    else:
        trace.stop_reason = "max-iter"
    return trace
