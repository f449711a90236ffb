"""
When the quasi-Newton iteration breaks down
===========================================
"""

from cgqn import linalg as la
from cgqn.problems import ProblemSpec, generate, reference_problem
from cgqn.qn import SR1, Breakdown, parse_schedule, phi_degenerate, qn_run
from cgqn.verify import verify_equivalence

# SR1 has no parameter after a unit step. This problem makes the first step unit.
trap = generate(ProblemSpec("sr1-trap", 4))
try:
    qn_run(trap, SR1)
except Breakdown as exc:
    print(exc.kind.value, "at k =", exc.k, "| previous steplength:", exc.alpha)

# the verifier treats it as an expected event, not a failure
report = verify_equivalence(trap, SR1)
print("report verdict:", "pass" if report.verdict else "fail", "| events:", report.events)

# The degenerate phi makes B_k singular. On the reference problem it is -81/4 at k = 1.
ref = reference_problem()
print("phi_degenerate:", phi_degenerate(la.identity(2, True), la.vector([2, 4]),
                                        ref.gradient(la.vector(["5/9", "10/9"]))))
try:
    qn_run(ref, parse_schedule("const:-81/4"))
except Breakdown as exc:
    print(exc.kind.value, "at k =", exc.k, "| det(B_k) =", la.det(exc.B))
