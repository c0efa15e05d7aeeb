"""Explicit solutions of the dynamical system ``H~ dY/dt = j dY/dx``.

For a GBDT state with ``S > 0`` and invertible ``A`` the functions

    Y(x, t) = j Lambda* (A*)^{-1} S^{-1} e^{itA} R

solve the dynamical system of the transformed Hamiltonian for every
constant right factor ``R``.  ``R = A`` gives ``j w_A(x,0)* Lambda* S^{-1} e^{itA}``
and ``R = A^{-1}`` the shorter product form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gbdt import GBDTSeed, GBDTState, PreconditionError, q0_tilde, transfer_matrix_wA
from .linalg import matrix_exp, min_eig, norm


def exp_itA(A: np.ndarray, t: float) -> np.ndarray:
    """``e^{itA}``; closed form for ``A = xi I + a [[0, 1], [0, 0]]``, else :func:`matrix_exp`."""
    A = np.asarray(A, dtype=complex)
    if A.shape == (2, 2) and A[1, 0] == 0 and A[0, 0] == A[1, 1]:
        return exp_itA_jordan(A[0, 0], A[0, 1], t)
    return matrix_exp(1j * t * A)


def exp_itA_jordan(xi: complex, a: complex, t: float) -> np.ndarray:
    """``e^{it xi} (I + i t a [[0, 1], [0, 0]])``."""
    return np.exp(1j * t * xi) * np.array([[1, 1j * t * a], [0, 1]], dtype=complex)


@dataclass(frozen=True)
class DynamicalSolution:
    """Lazy evaluator of ``Y(x, t) = j Lambda* (A*)^{-1} S^{-1} e^{itA} R``."""

    seed: GBDTSeed
    state: GBDTState
    right: np.ndarray

    def left_factor(self, x: float) -> np.ndarray:
        """``j Lambda(x)* (A*)^{-1} S(x)^{-1}``."""
        seed = self.seed
        lam = seed.Lambda(x)
        # (S^{-1} A^{-1} Lambda)* = Lambda* (A*)^{-1} S^{-1}
        inner = self.state.S_solve(x, seed.A_inv @ lam)
        return seed.j @ inner.conj().T

    def Y(self, x: float, t: float) -> np.ndarray:
        return self.left_factor(x) @ exp_itA(self.seed.A, t) @ self.right


def dynamical_solution(state: GBDTState, form: str = "product") -> DynamicalSolution:
    """Solution for ``state``; ``form`` is ``"product"`` (``R = A^{-1}``) or ``"darboux"`` (``R = A``)."""
    seed = state.seed
    if state.system.kind != "canonical":
        raise PreconditionError("the dynamical solution needs a nonnegative initial Hamiltonian")
    if min_eig(seed.S0) <= 0:
        raise PreconditionError("the dynamical solution needs S(0) > 0")
    if abs(np.linalg.det(seed.A)) < 1e-14 * max(1.0, norm(seed.A)) ** seed.n:
        raise PreconditionError("the dynamical solution needs an invertible A")
    if form == "product":
        right = seed.A_inv
    elif form == "darboux":
        right = seed.A.copy()
    else:
        raise ValueError(f"unknown form {form!r}")
    return DynamicalSolution(seed=seed, state=state, right=right)


def darboux_form_Y(state: GBDTState, x: float, t: float) -> np.ndarray:
    """``j w_A(x,0)* Lambda* S^{-1} e^{itA}`` evaluated directly from ``w_A``."""
    seed = state.seed
    w0 = transfer_matrix_wA(state, x, 0.0)
    lam = seed.Lambda(x)
    ls = state.S_solve(x, lam).conj().T
    return seed.j @ w0.conj().T @ ls @ exp_itA(seed.A, t)


def simplification_residual(state: GBDTState, x: float) -> float:
    """``||w_A(x,0)* Lambda* S^{-1} - Lambda* (A*)^{-1} S^{-1} A||``."""
    seed = state.seed
    w0 = transfer_matrix_wA(state, x, 0.0)
    lam = seed.Lambda(x)
    ls = state.S_solve(x, lam).conj().T
    rhs = state.S_solve(x, seed.A_inv @ lam).conj().T @ seed.A
    return norm(w0.conj().T @ ls - rhs)


def lambda_s_residual(state: GBDTState, x: float, h: float = 1e-4) -> float:
    """``||(Lambda* S^{-1})' - i H j Lambda* S^{-1} A - q~0* Lambda* S^{-1}||`` (central differences)."""
    seed = state.seed

    def ls(y):
        return state.S_solve(y, seed.Lambda(y)).conj().T

    deriv = (ls(x + h) - ls(x - h)) / (2 * h)
    here = ls(x)
    H = state.system.H(x)
    rhs = 1j * H @ seed.j @ here @ seed.A + q0_tilde(state, x).conj().T @ here
    return norm(deriv - rhs)


def pde_residual(solution: DynamicalSolution, x: float, t: float, hx: float, ht: float) -> float:
    """``||H~ dY/dt - j dY/dx||`` with central differences."""
    state = solution.state
    w0 = transfer_matrix_wA(state, x, 0.0)
    Ht = w0.conj().T @ state.system.H(x) @ w0
    dt = (solution.Y(x, t + ht) - solution.Y(x, t - ht)) / (2 * ht)
    dx = (solution.Y(x + hx, t) - solution.Y(x - hx, t)) / (2 * hx)
    return norm(Ht @ dt - solution.seed.j @ dx)


@dataclass(frozen=True)
class PDEReport:
    steps: tuple
    residuals: tuple

    @property
    def max_residual(self) -> float:
        return self.residuals[0]

    @property
    def orders(self) -> tuple:
        r = self.residuals
        return tuple(float(np.log2(a / b)) for a, b in zip(r[:-1], r[1:]) if a > 0 and b > 0)

    @property
    def order(self) -> float:
        orders = self.orders
        return orders[-1] if orders else float("nan")


def verify_dynamical_pde(
    solution: DynamicalSolution,
    xs: Sequence[float],
    ts: Sequence[float],
    step: float = 1e-2,
    halvings: int = 1,
) -> PDEReport:
    """Max residual over ``xs x ts`` at ``step`` and after each simultaneous halving of both steps."""
    steps, residuals = [], []
    h = step
    for _ in range(halvings + 1):
        worst = max(pde_residual(solution, x, t, h, h) for x in xs for t in ts)
        steps.append(h)
        residuals.append(worst)
        h /= 2
    return PDEReport(tuple(steps), tuple(residuals))
