"""
Every Broyden update follows the CG directions
==============================================

Run quasi-Newton with several phi schedules on one rational problem and
compare each direction against CG's.
"""

from cgqn import linalg as la
from cgqn.cg import cg_run
from cgqn.problems import ProblemSpec, generate
from cgqn.qn import parse_schedule, qn_run
from cgqn.verify import check_parallel, verify_equivalence

prob = generate(ProblemSpec("random-spd", 5, seed=7))
cg = cg_run(prob)

for text in ("bfgs", "const:1", "const:-1/2", "seq:3,-2,1/5,0", "random:7"):
    qn = qn_run(prob, parse_schedule(text))
    deltas = [check_parallel(a.p, b.p) for a, b in zip(qn.records, cg.records)]
    # exact fractions with huge numerators; shown rounded
    print(f"{text:>16}: delta = {', '.join(f'{float(d):.6f}' for d in deltas)}")

# the scaling is predicted by phi alone
qn = qn_run(prob, parse_schedule("const:-1/2"))
for prev, rec in zip(qn.records, qn.records[1:]):
    pBp = la.inner(prev.p, la.matvec(prev.B, prev.p))
    predicted = 1 / (1 + rec.phi * la.inner(rec.g, rec.g) / pBp)
    print(f"k={rec.k}: 1/(1 + phi g'g/p'Bp) = {float(predicted):.6f}")

# the verifier bundles all of the above and more
report = verify_equivalence(prob, parse_schedule("random:7"))
print("verdict:", "pass" if report.verdict else "fail",
      "| max angle:", report.max_angle, "| max delta deviation:", report.max_delta_deviation)
