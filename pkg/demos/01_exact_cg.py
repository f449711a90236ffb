"""
Conjugate gradients in exact arithmetic
=======================================

A two-variable quadratic small enough to check by hand.
"""

from cgqn import linalg as la
from cgqn.cg import cg_run
from cgqn.problems import ProblemSpec, generate, reference_problem
from cgqn.verify import check_subspace_minimizer

# H = diag(2, 4), c = (-2, -4), start at the origin
prob = reference_problem()
trace = cg_run(prob)

for rec in trace.records:
    print(f"k={rec.k}  x={list(map(str, rec.x))}  p={list(map(str, rec.p))}  alpha={rec.alpha}")
print("minimizer:", list(map(str, trace.x_final)), "after", trace.iterations, "iterations")

# every iterate minimizes q over x0 plus the Krylov space built so far
p0 = trace.records[0].p
xs = [r.x for r in trace.records[1:]] + [trace.x_final]
for k, x in enumerate(xs):
    print(f"x_{k + 1} is the Krylov-subspace minimizer:",
          check_subspace_minimizer(x, prob, la.krylov_basis(p0, prob.H, k + 1)))

# a matrix with 3 distinct eigenvalues needs exactly 3 steps, whatever n is
spec = ProblemSpec("diagonal-spectrum", 7, seed=1,
                   eigenvalues=(1, 1, 2, 2, 2, 5, 5), rotate=True)
print("7x7, 3 distinct eigenvalues:", cg_run(generate(spec)).iterations, "iterations")
