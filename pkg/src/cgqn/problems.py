"""Strictly convex quadratic programs ``min 1/2 x'Hx + c'x``.

Problems carry their scalar mode implicitly through the dtype of ``H``
(object/Fraction = exact, float64 = float).  Generators are seeded and
deterministic; the JSON file format keeps rationals bit-exact as
``"num/den"`` strings.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import linalg as la
from ._json import decode_scalar, encode

KINDS = ("random-spd", "diagonal-spectrum", "hilbert-like", "sr1-trap")


class ProblemFormatError(ValueError):
    pass


class NotPositiveDefinite(ProblemFormatError):
    def __init__(self, minor: int):
        super().__init__(f"H is not positive definite: leading minor {minor} <= 0")
        self.minor = minor


def first_nonpositive_minor(H) -> int | None:
    """1-based index of the first leading principal minor that is not > 0."""
    n = H.shape[0]
    if la.is_exact(H):
        for k in range(1, n + 1):
            if la.det(H[:k, :k]) <= 0:
                return k
        return None
    for k in range(1, n + 1):
        try:
            np.linalg.cholesky(H[:k, :k])
        except np.linalg.LinAlgError:
            return k
    return None


@dataclass(frozen=True, eq=False)
class QuadraticProblem:
    H: np.ndarray
    c: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        n = self.H.shape[0]
        if n < 1:
            raise ProblemFormatError("dimension must be at least 1")
        if self.c.shape != (n,) or self.x0.shape != (n,):
            raise ProblemFormatError(
                f"dimension mismatch: H is {self.H.shape}, c {self.c.shape}, x0 {self.x0.shape}"
            )
        try:
            object.__setattr__(self, "H", la.sym_matrix(self.H))
        except ValueError as exc:
            raise ProblemFormatError(str(exc)) from None
        bad = first_nonpositive_minor(self.H)
        if bad is not None:
            raise NotPositiveDefinite(bad)

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def exact(self) -> bool:
        return la.is_exact(self.H)

    @property
    def mode(self) -> str:
        return "rational" if self.exact else "float"

    def gradient(self, x):
        return gradient(self, x)

    def objective(self, x):
        return objective(self, x)

    def minimizer(self):
        return la.solve_symmetric(self.H, -self.c)

    def with_mode(self, mode: str) -> "QuadraticProblem":
        exact = mode == "rational"
        if exact == self.exact:
            return self
        return QuadraticProblem(
            la.matrix(self.H.tolist(), exact),
            la.vector(self.c, exact),
            la.vector(self.x0, exact),
        )


def make_problem(H, c, x0, exact: bool = True) -> QuadraticProblem:
    return QuadraticProblem(la.matrix(H, exact), la.vector(c, exact), la.vector(x0, exact))


def gradient(prob: QuadraticProblem, x):
    x = np.asarray(x)
    if x.shape != (prob.n,):
        raise ValueError(f"dimension mismatch: x has shape {x.shape}, n = {prob.n}")
    return la.matvec(prob.H, x) + prob.c


def objective(prob: QuadraticProblem, x):
    x = np.asarray(x)
    if x.shape != (prob.n,):
        raise ValueError(f"dimension mismatch: x has shape {x.shape}, n = {prob.n}")
    half = Fraction(1, 2) if prob.exact else 0.5
    return half * la.inner(x, la.matvec(prob.H, x)) + la.inner(prob.c, x)


# ---------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class ProblemSpec:
    """Recipe for :func:`generate`.

    ``eigenvalues`` prescribes the spectrum for ``diagonal-spectrum`` (and the
    diagonal pivots for ``random-spd``); ``cond`` is a condition-number target
    used by float-mode ``random-spd``.  ``rotate`` applies an exactly
    orthogonal rational similarity (Cayley transform) so the Hessian is dense
    while keeping its spectrum.
    """

    kind: str
    n: int
    seed: int = 0
    eigenvalues: tuple | None = None
    cond: float | None = None
    rotate: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.eigenvalues is not None:
            if len(self.eigenvalues) == 0:
                raise ValueError("empty spectrum")
            if len(self.eigenvalues) != self.n:
                raise ValueError("number of eigenvalues must equal n")
            if any(Fraction(str(e)) <= 0 for e in self.eigenvalues):
                raise ValueError("spectrum must be strictly positive")
        if self.cond is not None and self.cond < 1:
            raise ValueError("condition number target must be >= 1")
        if self.kind == "diagonal-spectrum" and self.eigenvalues is None:
            raise ValueError("diagonal-spectrum needs an eigenvalue list")
        if self.kind == "sr1-trap" and self.n < 2:
            raise ValueError("sr1-trap needs n >= 2 (n = 1 converges before any update)")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "seed": self.seed,
            "eigenvalues": None if self.eigenvalues is None else [str(e) for e in self.eigenvalues],
            "cond": self.cond,
            "rotate": self.rotate,
        }


def parse_spec(text: str) -> ProblemSpec:
    """Parse ``kind:key=value,...``, e.g. ``sr1-trap:n=2`` or
    ``diagonal-spectrum:eigs=1|2|2|5,rotate=1,seed=3``."""
    kind, _, rest = text.partition(":")
    kw: dict = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ValueError(f"malformed spec item {item!r}")
        key = key.strip()
        if key == "n":
            kw["n"] = int(value)
        elif key == "seed":
            kw["seed"] = int(value)
        elif key in ("eigs", "eigenvalues"):
            kw["eigenvalues"] = tuple(Fraction(v) for v in value.split("|") if v.strip())
        elif key == "cond":
            kw["cond"] = float(value)
        elif key == "rotate":
            kw["rotate"] = value.strip().lower() in ("1", "true", "yes")
        else:
            raise ValueError(f"unknown spec key {key!r}")
    if "n" not in kw and kw.get("eigenvalues") is not None:
        kw["n"] = len(kw["eigenvalues"])
    if "n" not in kw:
        raise ValueError("spec needs n=<dimension>")
    return ProblemSpec(kind.strip(), **kw)


def _cayley(n: int, rng: random.Random, exact: bool) -> np.ndarray:
    """Exactly orthogonal Q = (I - S)(I + S)^-1 for a random integer skew S."""
    S = la.zeros_matrix(n, exact)
    for i in range(n):
        for j in range(i + 1, n):
            v = rng.randint(-2, 2)
            S[i, j] = Fraction(v) if exact else float(v)
            S[j, i] = -S[i, j]
    I = la.identity(n, exact)
    if exact:
        inv_cols = [_solve_general_exact(I + S, I[:, j]) for j in range(n)]
        inv = np.column_stack(inv_cols).astype(object)
        return (I - S).dot(inv)
    return (I - S) @ np.linalg.inv(I + S)


def _solve_general_exact(A, b):
    # I + S is unsymmetric; plain exact elimination via Fractions suffices at this size
    n = A.shape[0]
    M = [list(A[i]) + [b[i]] for i in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col] / M[col][col]
                M[r] = [a - f * b_ for a, b_ in zip(M[r], M[col])]
    return np.array([M[i][n] / M[i][i] for i in range(n)], dtype=object)


def _rand_vec(rng: random.Random, n: int, lo: int, hi: int, exact: bool):
    return la.vector([rng.randint(lo, hi) for _ in range(n)], exact)


def generate(spec: ProblemSpec, mode: str = "rational") -> QuadraticProblem:
    if mode not in ("rational", "float"):
        raise ValueError(f"unknown mode {mode!r}")
    exact = mode == "rational"
    rng = random.Random(f"{spec.kind}/{spec.n}/{spec.seed}")
    n = spec.n

    if spec.kind == "hilbert-like":
        H = la.matrix([[Fraction(1, i + j + 1) for j in range(n)] for i in range(n)], exact)
        ones = la.vector([1] * n, exact)
        return QuadraticProblem(H, -la.matvec(H, ones), la.zeros(n, exact))

    if spec.kind == "sr1-trap":
        # mean eigenvalue 1 and g0 = -(1,...,1) in the eigenbasis: Rayleigh
        # quotient of g0 is exactly 1, so the first steepest-descent step is unit
        d = [Fraction(2 * i + 1, n) for i in range(n)]
        D = la.matrix([[d[i] if i == j else 0 for j in range(n)] for i in range(n)], exact)
        g0 = -la.vector([1] * n, exact)
        if not spec.rotate:
            return QuadraticProblem(D, g0, la.zeros(n, exact))
        Q = _cayley(n, rng, exact)
        H = _congruence(Q, D, exact)
        g0 = la.matvec(Q, g0)
        x0 = _rand_vec(rng, n, -3, 3, exact)
        return QuadraticProblem(H, g0 - la.matvec(H, x0), x0)

    if spec.kind == "diagonal-spectrum":
        eig = [la.to_fraction(e) for e in spec.eigenvalues]
        D = la.matrix([[eig[i] if i == j else 0 for j in range(n)] for i in range(n)], exact)
        H = _congruence(_cayley(n, rng, exact), D, exact) if spec.rotate else D
        return _with_random_rhs(H, rng, exact)

    # random-spd
    if exact:
        if spec.eigenvalues is not None:
            piv = [la.to_fraction(e) for e in spec.eigenvalues]
        else:
            piv = [Fraction(rng.randint(1, 6), rng.randint(1, 3)) for _ in range(n)]
        L = la.identity(n, True)
        for i in range(n):
            for j in range(i):
                L[i, j] = Fraction(rng.randint(-2, 2))
        D = la.matrix([[piv[i] if i == j else 0 for j in range(n)] for i in range(n)], True)
        return _with_random_rhs(_congruence(L, D, True), rng, True)
    nrng = np.random.default_rng(rng.randrange(2**32))
    Q, _ = np.linalg.qr(nrng.standard_normal((n, n)))
    if spec.eigenvalues is not None:
        eig = np.array([float(e) for e in spec.eigenvalues])
    elif spec.cond is not None:
        eig = np.logspace(0.0, np.log10(spec.cond), n)
    else:
        eig = nrng.uniform(1.0, 10.0, n)
    H = (Q * eig) @ Q.T
    return QuadraticProblem((H + H.T) / 2, nrng.standard_normal(n), nrng.standard_normal(n))


def _congruence(L, D, exact: bool):
    if exact:
        return L.dot(D).dot(L.T)
    return L @ D @ L.T


def _with_random_rhs(H, rng: random.Random, exact: bool) -> QuadraticProblem:
    n = H.shape[0]
    c = _rand_vec(rng, n, -5, 5, exact)
    x0 = _rand_vec(rng, n, -3, 3, exact)
    if la.is_zero_vector(la.matvec(H, x0) + c):
        c[0] += 1
    return QuadraticProblem(H, c, x0)


# ---------------------------------------------------------------------------
# file format


def to_dict(prob: QuadraticProblem) -> dict:
    return {
        "scalar_mode": prob.mode,
        "n": prob.n,
        "H": encode(prob.H.tolist()),
        "c": encode(list(prob.c)),
        "x0": encode(list(prob.x0)),
    }


def from_dict(data: dict) -> QuadraticProblem:
    try:
        mode = data["scalar_mode"]
        H_rows, c, x0 = data["H"], data["c"], data["x0"]
    except (KeyError, TypeError) as exc:
        raise ProblemFormatError(f"missing field {exc}") from None
    if mode not in ("rational", "float"):
        raise ProblemFormatError(f"unknown scalar_mode {mode!r}")
    exact = mode == "rational"
    if not isinstance(H_rows, list) or not H_rows:
        raise ProblemFormatError("H must be a non-empty list of rows")
    n = len(H_rows)
    if any(not isinstance(r, list) or len(r) != n for r in H_rows):
        raise ProblemFormatError("H must be square")
    if len(c) != n or len(x0) != n:
        raise ProblemFormatError("c and x0 must have length n")
    if "n" in data and data["n"] != n:
        raise ProblemFormatError("declared n does not match H")
    try:
        H = la.matrix([[decode_scalar(v, exact) for v in r] for r in H_rows], exact)
        cv = la.vector([decode_scalar(v, exact) for v in c], exact)
        xv = la.vector([decode_scalar(v, exact) for v in x0], exact)
    except (ValueError, ZeroDivisionError) as exc:
        raise ProblemFormatError(f"bad scalar: {exc}") from None
    if exact:
        for i in range(n):
            for j in range(i + 1, n):
                if H[i, j] != H[j, i]:
                    raise ProblemFormatError(f"H is not symmetric at ({i}, {j})")
    elif not np.allclose(H, H.T, rtol=1e-12, atol=0.0):
        raise ProblemFormatError("H is not symmetric")
    return QuadraticProblem(H, cv, xv)


def dumps(prob: QuadraticProblem) -> str:
    """JSON text with one matrix row per line."""
    d = to_dict(prob)
    rows = ",\n    ".join(json.dumps(r) for r in d["H"])
    return (
        "{\n"
        f'  "scalar_mode": {json.dumps(d["scalar_mode"])},\n'
        f'  "n": {d["n"]},\n'
        f'  "H": [\n    {rows}\n  ],\n'
        f'  "c": {json.dumps(d["c"])},\n'
        f'  "x0": {json.dumps(d["x0"])}\n'
        "}"
    )


def loads(text: str) -> QuadraticProblem:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"malformed JSON: {exc}") from None
    return from_dict(data)


def save(prob: QuadraticProblem, path) -> None:
    Path(path).write_text(dumps(prob) + "\n")


def load(path) -> QuadraticProblem:
    return loads(Path(path).read_text())


def reference_problem(exact: bool = True) -> QuadraticProblem:
    """H = diag(2, 4), c = (-2, -4), x0 = 0; minimizer (1, 1), two CG steps."""
    return make_problem([[2, 0], [0, 4]], [-2, -4], [0, 0], exact)
