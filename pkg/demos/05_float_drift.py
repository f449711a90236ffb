"""
Floating point: equivalent in theory, not in practice
=====================================================

In binary64 the BFGS and CG directions drift apart as the gradient shrinks.
"""

import numpy as np

from cgqn.cg import cg_run
from cgqn.problems import ProblemSpec, generate
from cgqn.qn import BFGS, qn_run
from cgqn.trace import StopPolicy
from cgqn.verify import angle

stop = StopPolicy(tol=1e-10, max_iter=500)
for cond in (10.0, 1e4):
    prob = generate(ProblemSpec("random-spd", 50, seed=0, cond=cond), "float")
    qn, cg = qn_run(prob, BFGS, stop), cg_run(prob, stop)
    g0 = np.linalg.norm(qn.records[0].g)
    print(f"cond {cond:g}: BFGS {qn.iterations} its, CG {cg.iterations} its")
    for a, b in list(zip(qn.records, cg.records))[::5]:
        print(f"  k={a.k:>2}  |g|/|g0|={np.linalg.norm(a.g) / g0:.1e}  angle={angle(a.p, b.p):.1e}")
