"""Dense linear algebra over two scalar fields.

Vectors and matrices are plain numpy arrays.  An array with ``dtype=object``
holding :class:`fractions.Fraction` entries is *exact*; a ``float64`` array is
*float*.  Every routine dispatches on that distinction, so the same call works
in both modes.  Float-mode zero tests always go through a caller-supplied
:class:`Tolerance`; nothing here hides a threshold.

Exact solves, ranks and determinants use fraction-free (Bareiss) elimination
on integer-scaled rows.  Float solves use a Bunch-Kaufman ``LDL^T``
factorization so that indefinite matrices are handled.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Sequence

import numpy as np
import scipy.linalg


class Singular(np.linalg.LinAlgError):
    """Raised when a solve meets an (exactly or numerically) singular matrix."""

    def __init__(self, message: str, cond: float | None = None):
        super().__init__(message)
        self.cond = cond


@dataclass(frozen=True)
class Tolerance:
    """Relative + absolute zero test used in float mode.

    ``is_zero(value, scale)`` holds when ``|value| <= atol + rtol * scale``.
    """

    rtol: float = 1e-10
    atol: float = 1e-300

    def is_zero(self, value, scale=0.0) -> bool:
        return abs(float(value)) <= self.atol + self.rtol * abs(float(scale))


DEFAULT_TOL = Tolerance()


# ---------------------------------------------------------------------------
# construction helpers


def is_exact(a) -> bool:
    return np.asarray(a).dtype == object


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (float, np.floating)):
        return Fraction(float(value))
    return Fraction(int(value))


def vector(values: Sequence, exact: bool = True) -> np.ndarray:
    if exact:
        return np.array([to_fraction(v) for v in values] or [], dtype=object)
    return np.array([float(v) for v in values], dtype=float)


def matrix(rows: Sequence[Sequence], exact: bool = True) -> np.ndarray:
    rows = [list(r) for r in rows]
    if exact:
        out = np.empty((len(rows), len(rows[0]) if rows else 0), dtype=object)
        for i, r in enumerate(rows):
            for j, v in enumerate(r):
                out[i, j] = to_fraction(v)
        return out
    return np.array(rows, dtype=float)


def sym_matrix(rows, exact: bool = True) -> np.ndarray:
    """Build a symmetric matrix.

    Exact mode rejects any asymmetry; float mode symmetrizes by averaging.
    """
    A = matrix(rows, exact) if not isinstance(rows, np.ndarray) else rows.copy()
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if is_exact(A):
        n = A.shape[0]
        for i in range(n):
            for j in range(i + 1, n):
                if A[i, j] != A[j, i]:
                    raise ValueError(f"matrix is not symmetric at ({i}, {j})")
        return A
    return (A + A.T) / 2.0


def zeros(n: int, exact: bool) -> np.ndarray:
    if exact:
        return np.array([Fraction(0)] * n, dtype=object)
    return np.zeros(n)


def identity(n: int, exact: bool) -> np.ndarray:
    if exact:
        out = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                out[i, j] = Fraction(int(i == j))
        return out
    return np.eye(n)


def zeros_matrix(n: int, exact: bool) -> np.ndarray:
    if exact:
        out = np.empty((n, n), dtype=object)
        out.fill(Fraction(0))
        return out
    return np.zeros((n, n))


def as_float(a) -> np.ndarray:
    return np.asarray(a, dtype=float) if is_exact(a) else np.asarray(a)


def outer(u, v) -> np.ndarray:
    return np.outer(u, v)


def is_zero_vector(v, tol: Tolerance | None = None, scale=0.0) -> bool:
    if is_exact(v):
        return all(x == 0 for x in v)
    tol = tol or DEFAULT_TOL
    return tol.is_zero(np.linalg.norm(v), scale)


def norm(v) -> float:
    return float(np.linalg.norm(as_float(v)))


# ---------------------------------------------------------------------------
# products


def inner(u, v):
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    if is_exact(u) or is_exact(v):
        return sum((a * b for a, b in zip(u, v)), Fraction(0))
    return float(u @ v)


def matvec(A, v) -> np.ndarray:
    A = np.asarray(A)
    v = np.asarray(v)
    if A.ndim != 2 or v.ndim != 1 or A.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {v.shape}")
    if is_exact(A) or is_exact(v):
        return np.array(
            [sum((a * b for a, b in zip(row, v)), Fraction(0)) for row in A],
            dtype=object,
        )
    return A @ v


# ---------------------------------------------------------------------------
# fraction-free elimination


def _integer_rows(rows) -> list[list[int]]:
    """Scale each row of Fractions by the lcm of its denominators."""
    out = []
    for row in rows:
        row = [to_fraction(x) for x in row]
        m = 1
        for x in row:
            m = lcm(m, x.denominator)
        out.append([int(x * m) for x in row])
    return out


def _bareiss(M: list[list[int]], ncols: int | None = None):
    """In-place Bareiss elimination with row pivoting.

    Only the first ``ncols`` columns are used for pivot selection; any trailing
    columns (an augmented right-hand side) are carried along.  Returns
    ``(pivot_columns, swaps)``.  After the call, ``M[r][pivot_columns[r]]`` are
    the pivots and rows below ``len(pivot_columns)`` are zero in the pivot
    region.
    """
    nrows = len(M)
    if nrows == 0:
        return [], 0
    total = len(M[0])
    ncols = total if ncols is None else ncols
    prev = 1
    r = 0
    swaps = 0
    pivots: list[int] = []
    for c in range(ncols):
        if r >= nrows:
            break
        piv = next((i for i in range(r, nrows) if M[i][c] != 0), None)
        if piv is None:
            continue
        if piv != r:
            M[r], M[piv] = M[piv], M[r]
            swaps += 1
        pr = M[r]
        for i in range(r + 1, nrows):
            row = M[i]
            a = row[c]
            for j in range(c + 1, total):
                row[j] = (pr[c] * row[j] - a * pr[j]) // prev
            row[c] = 0
        prev = pr[c]
        pivots.append(c)
        r += 1
    return pivots, swaps


def _exact_rank(rows) -> int:
    M = _integer_rows(rows)
    if not M:
        return 0
    pivots, _ = _bareiss(M)
    return len(pivots)


def det(A):
    """Determinant; exact in exact mode."""
    A = np.asarray(A)
    n = A.shape[0]
    if n == 0:
        return Fraction(1) if is_exact(A) else 1.0
    if not is_exact(A):
        return float(np.linalg.det(A))
    scale = Fraction(1)
    rows = []
    for row in A:
        m = 1
        for x in row:
            m = lcm(m, to_fraction(x).denominator)
        scale *= m
        rows.append([int(to_fraction(x) * m) for x in row])
    pivots, swaps = _bareiss(rows)
    if len(pivots) < n:
        return Fraction(0)
    d = Fraction(rows[n - 1][n - 1])
    if swaps % 2:
        d = -d
    return d / scale


def leading_minors(A) -> list:
    """All leading principal minors, smallest first."""
    A = np.asarray(A)
    return [det(A[:k, :k]) for k in range(1, A.shape[0] + 1)]


def solve_symmetric(A, b, tol: Tolerance | None = None) -> np.ndarray:
    """Solve ``A x = b`` for symmetric, possibly indefinite ``A``.

    Raises :class:`Singular` when ``A`` is exactly singular (exact mode) or a
    pivot block of the Bunch-Kaufman factorization is negligible relative to
    the largest one (float mode).
    """
    A = np.asarray(A)
    b = np.asarray(b)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"dimension mismatch: {A.shape} vs {b.shape}")
    if n == 0:
        return b.copy()
    if is_exact(A) or is_exact(b):
        return _solve_exact(A, b)
    return _solve_float(A, b, tol or DEFAULT_TOL)


def _solve_exact(A, b) -> np.ndarray:
    n = A.shape[0]
    rows = _integer_rows([list(A[i]) + [b[i]] for i in range(n)])
    pivots, _ = _bareiss(rows, ncols=n)
    if len(pivots) < n:
        raise Singular("matrix is exactly singular")
    x = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        acc = Fraction(rows[i][n])
        for j in range(i + 1, n):
            acc -= rows[i][j] * x[j]
        x[i] = acc / rows[i][i]
    return np.array(x, dtype=object)


def _solve_float(A, b, tol: Tolerance) -> np.ndarray:
    lu, d, perm = scipy.linalg.ldl(A, lower=True)
    eig = np.abs(np.linalg.eigvalsh(d))
    big = eig.max() if eig.size else 0.0
    if big == 0.0 or eig.min() <= tol.atol + tol.rtol * big:
        cond = np.inf if eig.min() == 0.0 else float(big / eig.min())
        raise Singular("pivot below tolerance", cond=cond)
    L = lu[perm]
    y = scipy.linalg.solve_triangular(L, b[perm], lower=True, unit_diagonal=True)
    z = np.linalg.solve(d, y)
    w = scipy.linalg.solve_triangular(L.T, z, lower=False, unit_diagonal=True)
    x = np.empty(A.shape[0])
    x[perm] = w
    return x


def condition_estimate(A) -> float:
    return float(np.linalg.cond(as_float(A)))


# ---------------------------------------------------------------------------
# rank and span


def rank(A, tol: Tolerance | None = None) -> int:
    A = np.asarray(A)
    if A.size == 0:
        return 0
    if is_exact(A):
        return _exact_rank(A.tolist())
    tol = tol or DEFAULT_TOL
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > tol.atol + tol.rtol * s[0])) if s[0] > tol.atol else 0


def in_span(v, basis: Sequence, tol: Tolerance | None = None) -> bool:
    """True iff ``v`` lies in the span of ``basis`` (empty basis spans {0})."""
    v = np.asarray(v)
    if len(basis) == 0:
        return is_zero_vector(v, tol)
    for b in basis:
        if np.asarray(b).shape != v.shape:
            raise ValueError("basis vectors must match the length of v")
    if is_exact(v) or any(is_exact(b) for b in basis):
        rows = [list(b) for b in basis]
        return _exact_rank(rows + [list(v)]) == _exact_rank(rows)
    return span_residual(v, basis) <= (tol or DEFAULT_TOL).atol + (
        tol or DEFAULT_TOL
    ).rtol * norm(v)


def span_residual(v, basis: Sequence) -> float:
    """Euclidean norm of the least-squares residual of ``v`` against ``basis``."""
    v = as_float(v)
    if len(basis) == 0:
        return float(np.linalg.norm(v))
    Z = np.column_stack([as_float(b) for b in basis])
    y, *_ = np.linalg.lstsq(Z, v, rcond=None)
    return float(np.linalg.norm(v - Z @ y))


def krylov_basis(b, A, k: int) -> list[np.ndarray]:
    """A basis of ``span{b, Ab, ..., A^(k-1) b}``.

    Exact mode returns the raw power vectors.  Float mode returns an
    orthonormal basis built by Arnoldi with one reorthogonalization pass, since
    the power basis is useless numerically.
    """
    if is_exact(b) or is_exact(A):
        out = [np.asarray(b)]
        for _ in range(k - 1):
            out.append(matvec(A, out[-1]))
        return out
    q = np.asarray(b, dtype=float)
    nb = np.linalg.norm(q)
    if nb == 0.0:
        return []
    out = [q / nb]
    for _ in range(k - 1):
        w = A @ out[-1]
        for _pass in range(2):
            for u in out:
                w = w - (u @ w) * u
        nw = np.linalg.norm(w)
        if nw <= 1e-14 * np.linalg.norm(A, 2):
            break
        out.append(w / nw)
    return out
