"""Per-iteration records shared by the CG and quasi-Newton drivers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import linalg as la
from ._json import encode


@dataclass(frozen=True)
class StopPolicy:
    """When a run ends.

    Exact mode always stops on an exactly zero gradient.  Float mode stops
    once ``||g_k|| <= tol * ||g_0||`` or after ``max_iter`` steps (``n`` when
    left as ``None``).
    """

    tol: float = 1e-12
    max_iter: int | None = None


@dataclass(frozen=True, eq=False)
class IterationRecord:
    k: int
    x: np.ndarray
    g: np.ndarray
    p: np.ndarray
    alpha: Any
    beta_prev: Any = None
    beta_hessian: Any = None
    B: np.ndarray | None = None
    update: Any = None  # qn.BroydenUpdate that produced B_k (None at k = 0)
    phi: Any = None

    def to_dict(self, with_matrices: bool = True) -> dict:
        out = {"k": self.k, "x": self.x, "g": self.g, "p": self.p, "alpha": self.alpha}
        if self.beta_prev is not None:
            out["beta_prev"] = self.beta_prev
        if self.phi is not None:
            out["phi"] = self.phi
        if with_matrices and self.B is not None:
            out["B"] = self.B.tolist()
        if with_matrices and self.update is not None:
            out["U"] = self.update.U.tolist()
        return encode(out)


@dataclass(eq=False)
class Trace:
    method: str
    records: list[IterationRecord] = field(default_factory=list)
    x_final: np.ndarray | None = None
    g_final: np.ndarray | None = None
    stop_reason: str = ""

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def converged(self) -> bool:
        return self.stop_reason in ("gradient-zero", "tolerance")

    def directions(self) -> list[np.ndarray]:
        return [r.p for r in self.records]

    def gradients(self) -> list[np.ndarray]:
        return [r.g for r in self.records]

    def to_dict(self, with_matrices: bool = True) -> dict:
        return {
            "method": self.method,
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "x_final": encode(self.x_final),
            "g_final": encode(self.g_final),
            "records": [r.to_dict(with_matrices) for r in self.records],
        }


def is_stationary(g, g0_norm: float, exact: bool, stop: StopPolicy) -> bool:
    if exact:
        return la.is_zero_vector(g)
    return la.norm(g) <= stop.tol * g0_norm
