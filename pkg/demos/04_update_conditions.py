"""
Recognising a Broyden update
============================

An update matrix belongs to the family exactly when three conditions hold.
extract_phi either recovers phi or names the condition that fails.
"""

from cgqn import linalg as la
from cgqn.problems import ProblemSpec, generate
from cgqn.qn import NotBroyden, extract_phi, parse_schedule, qn_run

prob = generate(ProblemSpec("random-spd", 6, seed=3))
recs = qn_run(prob, parse_schedule("const:7/3")).records
k = 3
prev, rec = recs[k - 1], recs[k]
earlier = [r.p for r in recs[:k - 1]]
U = rec.update.U

print("recovered phi:", extract_phi(U, prev.B, prev.p, prob.H, earlier=earlier))
print("rank of U:", la.rank(U))

p0 = recs[0].p
bent = {
    "extra secant term": U + la.outer(prev.g, prev.g),
    "touches p_0": U + la.outer(p0 - la.inner(p0, prev.p) / la.inner(prev.p, prev.p) * prev.p,
                                p0 - la.inner(p0, prev.p) / la.inner(prev.p, prev.p) * prev.p),
    "zero": la.zeros_matrix(prob.n, True),
}
for name, M in bent.items():
    try:
        extract_phi(M, prev.B, prev.p, prob.H, earlier=earlier)
    except NotBroyden as exc:
        print(f"{name:>17}: rejected, {exc.condition} condition")
