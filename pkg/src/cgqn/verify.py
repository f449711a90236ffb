"""Side-by-side checking of quasi-Newton runs against conjugate gradients.

:func:`verify_equivalence` runs both methods on one problem and records, per
iteration, whether each structural property holds: parallel directions and
the predicted scaling, conjugacy, Krylov membership, the three update
conditions, hereditary condition, subspace optimality, and definiteness of
``B_k``.  The independent oracles used (conjugate Gram-Schmidt and the
reduced-system subspace minimizer) live here too.

Exact mode compares with ``==``.  Float mode routes every comparison through
a :class:`~cgqn.linalg.Tolerance`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import linalg as la
from ._json import encode
from .cg import cg_run
from .linalg import Singular, Tolerance
from .problems import QuadraticProblem
from .qn import Breakdown, BreakdownKind, PhiSchedule, delta_of_phi, qn_run
from .trace import StopPolicy, Trace

VERIFY_FLOAT_TOL = Tolerance(rtol=1e-8, atol=1e-300)


class NotParallel(ValueError):
    def __init__(self, residual: float, angle: float):
        super().__init__(f"vectors are not parallel (residual {residual:.3g}, angle {angle:.3g})")
        self.residual = residual
        self.angle = angle


class LinearDependence(ValueError):
    def __init__(self, index: int):
        super().__init__(f"vector {index} depends linearly on its predecessors")
        self.index = index


def angle(p, q) -> float:
    """Angle in radians between the lines spanned by ``p`` and ``q``.

    Exact inputs give an exactly computed ``sin^2`` first, so parallel vectors
    report exactly 0.
    """
    if la.is_exact(p) and la.is_exact(q):
        pq = la.inner(p, q)
        s2 = 1 - pq * pq / (la.inner(p, p) * la.inner(q, q))
        return math.asin(min(1.0, math.sqrt(float(s2))))
    p = la.as_float(p)
    q = la.as_float(q)
    qn = q / np.linalg.norm(q)
    along = p @ qn
    perp = np.linalg.norm(p - along * qn)
    return float(math.atan2(perp, abs(along)))


def check_parallel(p, p_cg, tol: Tolerance | None = None):
    """Return ``delta`` with ``p = delta * p_cg``; raise :class:`NotParallel`.

    Exact mode takes the ratio at the first nonzero component of ``p_cg`` and
    requires every component to match.  Float mode uses the angle test
    ``1 - |cos| <= tol.rtol`` and a least-squares ``delta``.
    """
    if la.is_zero_vector(p_cg):
        raise ValueError("p_cg must be nonzero")
    if la.is_exact(p) and la.is_exact(p_cg):
        j = next(i for i, v in enumerate(p_cg) if v != 0)
        delta = p[j] / p_cg[j]
        resid = p - delta * p_cg
        if delta == 0 or not la.is_zero_vector(resid):
            raise NotParallel(float(np.max(np.abs(la.as_float(resid)))), angle(p, p_cg))
        return delta
    tol = tol or VERIFY_FLOAT_TOL
    p = la.as_float(p)
    q = la.as_float(p_cg)
    np_, nq = np.linalg.norm(p), np.linalg.norm(q)
    if np_ == 0.0:
        raise NotParallel(0.0, math.pi / 2)
    cos = (p @ q) / (np_ * nq)
    if 1.0 - abs(cos) > tol.rtol:
        delta = (p @ q) / (q @ q)
        raise NotParallel(float(np.max(np.abs(p - delta * q))), angle(p, q))
    return float((p @ q) / (q @ q))


@dataclass
class ConditionTriple:
    range_ok: bool
    nullspace_ok: bool
    qn_ok: bool
    witnesses: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.range_ok, self.nullspace_ok, self.qn_ok))


def check_update_conditions(U, g_prev, g_cur, p_hist: Sequence, B_prev, H,
                            tol: Tolerance | None = None) -> ConditionTriple:
    """Check the three update conditions for ``U_k``.

    ``p_hist`` is ``[p_0, ..., p_{k-1}]``: the null-space condition is tested
    on all but the last, the quasi-Newton condition on the last.
    """
    U = np.asarray(U)
    exact = la.is_exact(U)
    tol = tol or VERIFY_FLOAT_TOL
    u_scale = float(np.max(np.abs(la.as_float(U)))) if U.size else 0.0
    out = ConditionTriple(True, True, True)
    frame = [g_prev, g_cur]
    for j in range(U.shape[1]):
        col = U[:, j]
        if not la.in_span(col, frame, None if exact else tol):
            out.range_ok = False
            out.witnesses["range"] = {"basis_index": j,
                                      "residual": la.span_residual(col, frame)}
            break
    for i, pi in enumerate(p_hist[:-1]):
        r = la.matvec(U, pi)
        if not la.is_zero_vector(r, tol, u_scale * la.norm(pi)):
            out.nullspace_ok = False
            out.witnesses["nullspace"] = {"index": i, "residual": la.norm(r)}
            break
    if p_hist:
        p = p_hist[-1]
        target = la.matvec(H, p) - la.matvec(B_prev, p)
        r = la.matvec(U, p) - target
        if not la.is_zero_vector(r, tol, la.norm(target) + u_scale * la.norm(p)):
            out.qn_ok = False
            out.witnesses["qn"] = {"residual": la.norm(r)}
    return out


def gram_schmidt_conjugate(a: Sequence, H, tol: Tolerance | None = None) -> list:
    """H-conjugate vectors spanning the same nested subspaces as ``a``.

    ``p_0 = a_0`` and ``p_k = a_k + sum_j beta_kj p_j`` with
    ``beta_kj = -p_j'H a_k / p_j'H p_j``.
    """
    out: list = []
    Hp_list: list = []
    pHp_list: list = []
    for k, ak in enumerate(a):
        pk = np.array(ak, copy=True)
        for pj, Hpj, dj in zip(out, Hp_list, pHp_list):
            pk = pk - (la.inner(Hpj, ak) / dj) * pj
        Hpk = la.matvec(H, pk)
        dk = la.inner(pk, Hpk)
        if la.is_exact(pk):
            dependent = dk == 0
        else:
            dependent = (tol or VERIFY_FLOAT_TOL).is_zero(
                dk, la.norm(ak) ** 2 * np.linalg.norm(la.as_float(H), 2))
        if dependent:
            raise LinearDependence(k)
        out.append(pk)
        Hp_list.append(Hpk)
        pHp_list.append(dk)
    return out


def subspace_minimizer(prob: QuadraticProblem, basis: Sequence):
    """Minimizer of ``q`` over ``x_0 + span(basis)`` via the reduced system."""
    Z = np.column_stack(basis)
    g0 = prob.gradient(prob.x0)
    HZ = np.column_stack([la.matvec(prob.H, z) for z in basis])
    R = Z.T.dot(HZ)
    if not la.is_exact(R):
        R = (R + R.T) / 2
    y = la.solve_symmetric(R, -Z.T.dot(g0))
    return prob.x0 + Z.dot(y)


def check_subspace_minimizer(x_next, prob: QuadraticProblem, basis: Sequence,
                             tol: Tolerance | None = None) -> bool:
    """Raises :class:`~cgqn.linalg.Singular` if the basis is dependent."""
    x_star = subspace_minimizer(prob, basis)
    diff = np.asarray(x_next) - x_star
    if la.is_exact(diff):
        return la.is_zero_vector(diff)
    return (tol or VERIFY_FLOAT_TOL).is_zero(la.norm(diff), la.norm(x_star) + 1.0)


def pd_status(B, tol: Tolerance | None = None) -> str:
    if la.is_exact(B):
        minors = la.leading_minors(B)
        if all(m > 0 for m in minors):
            return "positive-definite"
        return "singular" if la.det(B) == 0 else "indefinite"
    ev = np.linalg.eigvalsh(B)
    scale = np.max(np.abs(ev))
    if np.min(np.abs(ev)) <= (tol or VERIFY_FLOAT_TOL).rtol * scale:
        return "singular"
    return "positive-definite" if ev.min() > 0 else "indefinite"


# ---------------------------------------------------------------------------
# report


CHECKS = (
    "parallel_ok", "delta_law_ok", "conjugacy_ok", "krylov_membership_ok",
    "range_condition_ok", "nullspace_condition_ok", "qn_condition_ok",
    "rank_ok", "frame_identity_ok", "hereditary_ok", "subspace_min_ok",
    "cg_subspace_min_ok", "gram_schmidt_oracle_ok",
)


@dataclass
class IterationCheck:
    k: int
    phi: Any = None
    delta: Any = None
    delta_predicted: Any = None
    angle: float = 0.0
    parallel_ok: bool | None = None
    delta_law_ok: bool | None = None
    conjugacy_ok: bool | None = None
    krylov_membership_ok: bool | None = None
    range_condition_ok: bool | None = None
    nullspace_condition_ok: bool | None = None
    qn_condition_ok: bool | None = None
    rank_ok: bool | None = None
    frame_identity_ok: bool | None = None
    hereditary_ok: bool | None = None
    subspace_min_ok: bool | None = None
    cg_subspace_min_ok: bool | None = None
    gram_schmidt_oracle_ok: bool | None = None
    pd_status: str = ""
    witnesses: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(getattr(self, c) is not False for c in CHECKS)

    def failed(self) -> list[str]:
        return [c for c in CHECKS if getattr(self, c) is False]

    @property
    def delta_deviation(self) -> float:
        if self.delta is None or self.delta_predicted is None:
            return 0.0
        if self.delta_predicted == math.inf:
            return math.inf
        return abs(float(self.delta - self.delta_predicted))

    def to_dict(self) -> dict:
        out = {"k": self.k, "phi": self.phi, "delta": self.delta,
               "delta_predicted": self.delta_predicted, "angle": self.angle,
               "pd_status": self.pd_status}
        out.update({c: getattr(self, c) for c in CHECKS})
        if self.witnesses:
            out["witnesses"] = self.witnesses
        return encode(out)


@dataclass
class VerificationReport:
    mode: str
    schedule: str
    n: int
    iterations: list[IterationCheck] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    cg_iterations: int = 0
    qn_iterations: int = 0
    qn_stop_reason: str = ""
    final_match: bool | None = None
    notes: list[str] = field(default_factory=list)
    cg_trace: Trace | None = field(default=None, repr=False)
    qn_trace: Trace | None = field(default=None, repr=False)

    @property
    def verdict(self) -> bool:
        return (all(it.ok for it in self.iterations)
                and all(e["predicted"] for e in self.events)
                and self.final_match is not False)

    @property
    def deltas(self) -> list:
        return [it.delta for it in self.iterations]

    @property
    def max_angle(self) -> float:
        return max((it.angle for it in self.iterations), default=0.0)

    @property
    def max_delta_deviation(self) -> float:
        return max((it.delta_deviation for it in self.iterations), default=0.0)

    def failures(self) -> list[tuple[int, str, Any]]:
        out = []
        for it in self.iterations:
            for c in it.failed():
                out.append((it.k, c, it.witnesses.get(c)))
        return out

    def to_dict(self) -> dict:
        return encode({
            "verdict": "pass" if self.verdict else "fail",
            "mode": self.mode,
            "schedule": self.schedule,
            "n": self.n,
            "cg_iterations": self.cg_iterations,
            "qn_iterations": self.qn_iterations,
            "qn_stop_reason": self.qn_stop_reason,
            "final_match": self.final_match,
            "max_angle": self.max_angle,
            "max_delta_deviation": self.max_delta_deviation,
            "events": self.events,
            "iterations": [it.to_dict() for it in self.iterations],
            "failures": [{"k": k, "check": c, "witness": w} for k, c, w in self.failures()],
            "notes": self.notes,
        })


def _classify(exc: Breakdown, tol: Tolerance, exact: bool) -> dict:
    event = {"k": exc.k, "kind": exc.kind.value, "predicted": False, "detail": str(exc)}
    if exc.kind is BreakdownKind.SR1_UNDEFINED:
        unit = exc.alpha == 1 if exact else tol.is_zero(float(exc.alpha) - 1.0, 1.0)
        event["predicted"] = bool(unit)
        event["alpha_prev"] = exc.alpha
        event["reason"] = "SR1 parameter undefined with unit steplength"
    elif exc.kind is BreakdownKind.DEGENERATE_PHI:
        if exact:
            singular = la.det(exc.B) == 0
            event["predicted"] = bool(singular and exc.phi == exc.phi_degenerate)
        else:
            event["predicted"] = True
            event["condition_estimate"] = exc.cond
        event["phi"] = exc.phi
        event["phi_degenerate"] = exc.phi_degenerate
        event["reason"] = "degenerate Broyden parameter makes B_k singular"
    else:
        event["condition_estimate"] = exc.cond
    return encode(event)


def verify_equivalence(prob: QuadraticProblem, sched: PhiSchedule,
                       tol: Tolerance | None = None,
                       stop: StopPolicy | None = None) -> VerificationReport:
    """Run CG and quasi-Newton side by side and check every property."""
    exact = prob.exact
    tol = None if exact else (tol or VERIFY_FLOAT_TOL)
    ftol = tol or VERIFY_FLOAT_TOL
    report = VerificationReport(prob.mode, sched.describe(), prob.n)
    cg_trace = cg_run(prob, stop)
    report.cg_iterations = cg_trace.iterations
    try:
        qn_trace = qn_run(prob, sched, stop, tol)
    except Breakdown as exc:
        qn_trace = exc.trace
        report.events.append(_classify(exc, ftol, exact))
    report.cg_trace, report.qn_trace = cg_trace, qn_trace
    report.qn_iterations = qn_trace.iterations
    report.qn_stop_reason = qn_trace.stop_reason

    H = prob.H
    cg_p = cg_trace.directions()
    gs = _gram_schmidt_safe(cg_trace, H, tol)
    recs = qn_trace.records
    p0 = recs[0].p if recs else None
    for k, rec in enumerate(recs):
        it = IterationCheck(k, phi=rec.phi)
        if k < len(cg_p):
            _check_direction(it, rec.p, cg_p[k], tol)
            if gs is not None:
                try:
                    check_parallel(gs[k], cg_p[k], tol)
                    it.gram_schmidt_oracle_ok = True
                except NotParallel as exc:
                    it.gram_schmidt_oracle_ok = False
                    it.witnesses["gram_schmidt_oracle_ok"] = {"residual": exc.residual}
        if k >= 1:
            prev = recs[k - 1]
            pBp = la.inner(prev.p, la.matvec(prev.B, prev.p))
            it.delta_predicted = delta_of_phi(rec.phi, pBp, la.inner(rec.g, rec.g))
            if it.delta is not None:
                it.delta_law_ok = (it.delta == it.delta_predicted if exact
                                   else ftol.is_zero(it.delta - it.delta_predicted,
                                                     abs(it.delta_predicted)))
                if not it.delta_law_ok:
                    it.witnesses["delta_law_ok"] = {"measured": it.delta,
                                                    "predicted": it.delta_predicted}
            _check_update(it, rec, recs[:k], H, tol)
        else:
            it.delta_predicted = 1 if exact else 1.0
            if it.delta is not None:
                it.delta_law_ok = it.delta == 1 if exact else ftol.is_zero(it.delta - 1, 1)
        _check_conjugacy(it, rec, recs[:k], H, tol)
        krylov = la.krylov_basis(p0, H, k + 1)
        it.krylov_membership_ok = la.in_span(rec.p, krylov, tol)
        if not it.krylov_membership_ok:
            it.witnesses["krylov_membership_ok"] = {
                "residual": la.span_residual(rec.p, krylov)}
        x_next = recs[k + 1].x if k + 1 < len(recs) else qn_trace.x_final
        it.subspace_min_ok = _subspace_ok(x_next, prob, krylov, tol, it, "subspace_min_ok")
        if k < len(cg_trace.records):
            cg_next = (cg_trace.records[k + 1].x if k + 1 < len(cg_trace.records)
                       else cg_trace.x_final)
            it.cg_subspace_min_ok = _subspace_ok(cg_next, prob, krylov, tol, it,
                                                 "cg_subspace_min_ok")
        it.pd_status = pd_status(rec.B, tol)
        report.iterations.append(it)

    if exact:
        if not report.events:
            report.final_match = (la.is_zero_vector(qn_trace.x_final - cg_trace.x_final)
                                  and qn_trace.iterations == cg_trace.iterations)
            if report.qn_iterations > prob.n:
                report.final_match = False
    else:
        report.notes.append(
            "float mode: comparisons use rtol=%g; iterates of the two methods drift "
            "apart under rounding, so deviations are measurements rather than "
            "broken identities" % ftol.rtol)
    if not exact and not report.events:
        diff = la.norm(qn_trace.x_final - cg_trace.x_final)
        report.final_match = bool(diff <= 1e3 * ftol.rtol * (la.norm(cg_trace.x_final) + 1))
    return report


def _gram_schmidt_safe(cg_trace: Trace, H, tol):
    try:
        return gram_schmidt_conjugate([-g for g in cg_trace.gradients()], H, tol)
    except LinearDependence:
        return None


def _check_direction(it: IterationCheck, p, p_cg, tol):
    it.angle = angle(p, p_cg)
    try:
        it.delta = check_parallel(p, p_cg, tol)
        it.parallel_ok = True
    except NotParallel as exc:
        it.parallel_ok = False
        it.witnesses["parallel_ok"] = {"residual": exc.residual, "angle": exc.angle}


def _check_conjugacy(it: IterationCheck, rec, earlier, H, tol):
    ftol = tol or VERIFY_FLOAT_TOL
    Hp = la.matvec(H, rec.p)
    it.conjugacy_ok = True
    it.hereditary_ok = True
    for i, old in enumerate(earlier):
        v = la.inner(old.p, Hp)
        if not (v == 0 if tol is None else ftol.is_zero(v, la.norm(old.p) * la.norm(Hp))):
            it.conjugacy_ok = False
            it.witnesses["conjugacy_ok"] = {"index": i, "value": v}
            break
    for i, old in enumerate(earlier):
        r = la.matvec(rec.B, old.p) - la.matvec(H, old.p)
        if not la.is_zero_vector(r, ftol, la.norm(la.matvec(H, old.p))):
            it.hereditary_ok = False
            it.witnesses["hereditary_ok"] = {"index": i, "residual": la.norm(r)}
            break


def _check_update(it: IterationCheck, rec, earlier, H, tol):
    upd = rec.update
    U = upd.U
    prev = earlier[-1]
    cond = check_update_conditions(U, prev.g, rec.g, [r.p for r in earlier], prev.B, H, tol)
    it.range_condition_ok = cond.range_ok
    it.nullspace_condition_ok = cond.nullspace_ok
    it.qn_condition_ok = cond.qn_ok
    for name, w in cond.witnesses.items():
        it.witnesses[{"range": "range_condition_ok", "nullspace": "nullspace_condition_ok",
                      "qn": "qn_condition_ok"}[name]] = w
    r = la.rank(U, tol)
    it.rank_ok = r <= 2
    if not it.rank_ok:
        it.witnesses["rank_ok"] = {"rank": r}
    hb, gg = upd.expand_hb(), upd.expand_gg()
    if tol is None:
        it.frame_identity_ok = (_all_zero(hb - U) and _all_zero(gg - U)
                                and la.is_zero_vector(upd.gg_basis[0] - prev.g)
                                and la.is_zero_vector(upd.gg_basis[1] - rec.g))
    else:
        scale = float(np.max(np.abs(U))) + 1e-300
        dev = max(float(np.max(np.abs(hb - U))), float(np.max(np.abs(gg - U))))
        it.frame_identity_ok = tol.is_zero(dev, scale * 1e3)
    if not it.frame_identity_ok:
        it.witnesses["frame_identity_ok"] = {
            "hb_residual": float(np.max(np.abs(la.as_float(hb - U)))),
            "gg_residual": float(np.max(np.abs(la.as_float(gg - U))))}


def _all_zero(A) -> bool:
    return all(v == 0 for v in A.ravel())


def _subspace_ok(x_next, prob, basis, tol, it, name) -> bool | None:
    try:
        ok = check_subspace_minimizer(x_next, prob, basis, tol)
    except Singular:
        it.witnesses[name] = {"error": "reduced system singular"}
        return False
    if not ok:
        it.witnesses[name] = {"residual": la.norm(
            np.asarray(x_next) - subspace_minimizer(prob, basis))}
    return ok
