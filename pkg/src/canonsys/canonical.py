"""Generalized and spectral canonical systems ``w' = i lambda j H(x) w``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .linalg import (
    Grid,
    SampledMatrixFunction,
    as_matrix,
    integrate_linear,
    min_eig,
    norm,
)

MatrixFn = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class SignatureConfig:
    """Signature ``j = diag(I_m1, -I_m2)``; ``J`` and ``Theta`` exist when ``m1 == m2``."""

    m1: int
    m2: int

    def __post_init__(self):
        if self.m1 < 1 or self.m2 < 1:
            raise ValueError("m1 and m2 must be positive")

    @property
    def m(self) -> int:
        return self.m1 + self.m2

    @property
    def j(self) -> np.ndarray:
        return np.diag(np.r_[np.ones(self.m1), -np.ones(self.m2)]).astype(complex)

    @property
    def square(self) -> bool:
        return self.m1 == self.m2

    def _require_square(self) -> int:
        if not self.square:
            raise ValueError("J and Theta are only defined for m1 == m2")
        return self.m1

    @property
    def J(self) -> np.ndarray:
        p = self._require_square()
        eye, zero = np.eye(p), np.zeros((p, p))
        return np.block([[zero, eye], [eye, zero]]).astype(complex)

    @property
    def Theta(self) -> np.ndarray:
        p = self._require_square()
        eye = np.eye(p)
        return (np.block([[eye, -eye], [eye, eye]]) / np.sqrt(2)).astype(complex)

    @classmethod
    def square_of(cls, p: int) -> "SignatureConfig":
        return cls(p, p)


@dataclass(frozen=True)
class CanonicalSystemSpec:
    """One system ``w' = i lambda j H(x) w``.

    ``beta`` (with optional first and second derivatives) is present when
    ``H = d j + beta* beta``.
    """

    signature: SignatureConfig
    hamiltonian: MatrixFn
    kind: str = "generalized"
    beta: Optional[MatrixFn] = None
    beta_prime: Optional[MatrixFn] = None
    beta_second: Optional[MatrixFn] = None
    d: float = 0.0
    c: Optional[float] = None
    alpha: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("generalized", "canonical"):
            raise ValueError(f"unknown system kind {self.kind!r}")
        if self.kind == "canonical" and not self.signature.square:
            raise ValueError("a canonical system needs m1 == m2")

    @property
    def j(self) -> np.ndarray:
        return self.signature.j

    def H(self, x: float) -> np.ndarray:
        return self.hamiltonian(x)

    def sample_hamiltonian(self, grid: Grid) -> SampledMatrixFunction:
        return SampledMatrixFunction(grid, np.stack([self.H(x) for x in grid.points]))

    def check_at(self, x: float, herm_tol: float = 1e-12, psd_tol: float = 1e-10) -> None:
        """Raise if ``H(x)`` breaks self-adjointness or (for canonical kind) positivity."""
        h = self.H(x)
        scale = max(1.0, norm(h))
        if norm(h - h.conj().T) > herm_tol * scale:
            raise ValueError(f"H({x}) is not self-adjoint")
        if self.kind == "canonical" and min_eig(h) < -psd_tol * scale:
            raise ValueError(f"H({x}) is not positive semidefinite")
        if self.beta is not None and self.d == 0:
            b = self.beta(x)
            if norm(b @ self.j @ b.conj().T) > 1e-10 * max(1.0, norm(b) ** 2):
                raise ValueError(f"beta j beta* != 0 at x={x}")


def make_beta_exponential(c: float, d: float, alpha) -> CanonicalSystemSpec:
    """System with ``beta(x) = [e^{icx} I, e^{-icx} alpha]`` and ``H = d j + beta* beta``."""
    alpha = as_matrix(alpha)
    m1, m2 = alpha.shape
    if m2 < m1 or norm(alpha @ alpha.conj().T - np.eye(m1)) > 1e-12:
        raise ValueError("alpha must satisfy alpha alpha* = I (a co-isometry)")
    c, d = float(c), float(d)
    sig = SignatureConfig(m1, m2)
    eye = np.eye(m1, dtype=complex)
    j = sig.j

    def beta(x):
        return np.hstack([np.exp(1j * c * x) * eye, np.exp(-1j * c * x) * alpha])

    def beta_prime(x):
        return np.hstack([1j * c * np.exp(1j * c * x) * eye, -1j * c * np.exp(-1j * c * x) * alpha])

    def beta_second(x):
        return -(c**2) * beta(x)

    def hamiltonian(x):
        b = beta(x)
        return d * j + b.conj().T @ b

    kind = "canonical" if (d == 0 and sig.square) else "generalized"
    return CanonicalSystemSpec(
        signature=sig,
        hamiltonian=hamiltonian,
        kind=kind,
        beta=beta,
        beta_prime=beta_prime,
        beta_second=beta_second,
        d=d,
        c=c,
        alpha=alpha,
    )


def fundamental_solution_oracle(
    spec: CanonicalSystemSpec, lam: complex, grid: Grid
) -> SampledMatrixFunction:
    """RK4 integration of ``W' = i lambda j H W`` from ``W(start) = I``."""
    j = spec.j
    lam = complex(lam)
    m = spec.signature.m
    if lam == 0:
        return SampledMatrixFunction(grid, np.broadcast_to(np.eye(m, dtype=complex), (grid.nodes, m, m)).copy())
    return integrate_linear(lambda x: 1j * lam * (j @ spec.H(x)), np.eye(m), grid)


@dataclass(frozen=True)
class MonotonicityReport:
    worst_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst_violation <= self.tolerance


def check_j_monotonicity(
    W: SampledMatrixFunction, lam: complex, j: Optional[np.ndarray] = None, tol: float = 1e-8
) -> MonotonicityReport:
    """Loewner ordering of ``A(r) = W(r)* j W(r)`` along the grid.

    For ``Im lam > 0``: ``A(r2) <= A(r1) <= j`` when ``r1 <= r2``; for
    ``Im lam < 0`` the reversed chain.  Real ``lam`` must satisfy both, i.e.
    ``A(r) = j``.  ``worst_violation`` is the largest negative eigenvalue
    (sign flipped) among the tested differences.
    """
    if j is None:
        half = W.shape[0] // 2
        j = SignatureConfig(half, W.shape[0] - half).j
    forms = np.einsum("nki,kl,nlj->nij", W.values.conj(), j, W.values)
    chain = np.concatenate([j[None], forms])
    directions = []
    if lam.imag >= 0:
        directions.append(1.0)
    if lam.imag <= 0:
        directions.append(-1.0)
    worst = 0.0
    for sign in directions:
        diffs = sign * (chain[:-1] - chain[1:])
        for dmat in diffs:
            worst = max(worst, -min_eig(dmat))
    return MonotonicityReport(worst, tol)
