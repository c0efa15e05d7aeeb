"""GBDT seeds, explicit generalized eigenfunctions and Darboux matrices.

A seed is the triple ``(A, S(0), Lambda(0))`` with
``A S(0) - S(0) A* = i Lambda(0) j Lambda(0)*`` together with the data of the
initial Hamiltonian ``H = d j + beta* beta``,
``beta(x) = [e^{icx} I, e^{-icx} alpha]``.  ``Lambda(x)`` is evaluated in
closed form and ``S(x)`` is recovered either by quadrature of
``S' = Lambda j H j Lambda*`` or from the Sylvester identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .canonical import CanonicalSystemSpec, SignatureConfig, make_beta_exponential
from .initial import initial_params, initial_W
from .linalg import (
    BRANCHES,
    Grid,
    SampledMatrixFunction,
    SylvesterSingularError,
    as_matrix,
    cumulative_simpson,
    herm,
    integrate_linear,
    matrix_exp,
    matrix_sqrt_primary,
    min_eig,
    norm,
    solve_sylvester,
)

COND_LIMIT = 1e12
ROUTES = ("quadrature", "sylvester")


class PreconditionError(ValueError):
    """A seed or evaluation point violates a documented precondition."""


class SpectralCollisionError(PreconditionError):
    """The spectral parameter is an eigenvalue of ``A``."""


class IsolatedPointError(PreconditionError):
    """``v(0, lambda)`` (or a derived block) is singular at this ``lambda``."""


def _expm_i(x: float, m: np.ndarray) -> np.ndarray:
    return matrix_exp(1j * x * m)


@dataclass(frozen=True, eq=False)
class GBDTSeed:
    """GBDT data for the initial Hamiltonian ``H = d j + beta* beta``."""

    A: np.ndarray
    S0: np.ndarray
    signature: SignatureConfig
    c: float
    d: float
    alpha: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    Q: np.ndarray
    _ainv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_ainv", np.linalg.inv(self.A))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def j(self) -> np.ndarray:
        return self.signature.j

    @property
    def Lambda0(self) -> np.ndarray:
        return self.Lambda(0.0)

    @property
    def A_inv(self) -> np.ndarray:
        return self._ainv

    def system(self) -> CanonicalSystemSpec:
        return make_beta_exponential(self.c, self.d, self.alpha)

    def Lambda(self, x: float) -> np.ndarray:
        """Closed-form generalized eigenfunction ``Lambda(x) = [Phi_1, Phi_2]``."""
        n = self.n
        eye = np.eye(n)
        A, Q, c, d = self.A, self.Q, self.c, self.d
        grow, decay = _expm_i(x, Q), _expm_i(-x, Q)
        phi1 = _expm_i(x, c * eye - d * A) @ (grow @ self.f1 + decay @ self.f2)
        plus = (A + c * eye + Q) @ self._ainv @ self.f1
        minus = (A + c * eye - Q) @ self._ainv @ self.f2
        phi2 = _expm_i(-x, c * eye + d * A) @ (grow @ plus + decay @ minus) @ self.alpha
        return np.hstack([phi1, phi2])

    def identity_residual(self, S: np.ndarray, Lam: np.ndarray) -> float:
        """``|| A S - S A* - i Lambda j Lambda* ||``."""
        return norm(self.A @ S - S @ self.A.conj().T - 1j * Lam @ self.j @ Lam.conj().T)

    def validate(self) -> None:
        n = self.n
        if np.linalg.matrix_rank(self.A) < n:
            raise PreconditionError("A must be invertible")
        scale = 1.0 + norm(self.S0)
        if norm(self.S0 - self.S0.conj().T) > 1e-12 * scale:
            raise PreconditionError("S(0) must be self-adjoint")
        if self.identity_residual(self.S0, self.Lambda0) > 1e-10 * scale:
            raise PreconditionError("S(0) and Lambda(0) violate the GBDT identity")
        A, Q = self.A, self.Q
        qscale = 1.0 + norm(A) + abs(self.c) ** 2
        if norm(A @ Q - Q @ A) > 1e-9 * qscale:
            raise PreconditionError("Q must commute with A")
        if norm(Q @ Q - self.c * (2 * A + self.c * np.eye(n))) > 1e-9 * qscale:
            raise PreconditionError("Q^2 must equal c(2A + cI)")


def build_seed(
    A,
    f1,
    f2,
    alpha,
    c: float = 0.0,
    d: float = 0.0,
    S0=None,
    Q=None,
    q_branch: str = "upper",
) -> GBDTSeed:
    """Assemble and validate a seed.

    ``Q`` defaults to the primary square root of ``c(2A + cI)`` on the chosen
    branch (zero when ``c == 0``).  ``S0`` defaults to the Sylvester solution,
    which needs disjoint spectra of ``A`` and ``A*``.
    """
    A = as_matrix(A)
    n = A.shape[0]
    alpha = as_matrix(alpha)
    m1, m2 = alpha.shape
    f1, f2 = as_matrix(f1).reshape(n, m1), as_matrix(f2).reshape(n, m1)
    if norm(alpha @ alpha.conj().T - np.eye(m1)) > 1e-12:
        raise PreconditionError("alpha must satisfy alpha alpha* = I")
    if np.linalg.matrix_rank(A) < n:
        raise PreconditionError("A must be invertible")
    if Q is None:
        if c == 0:
            Q = np.zeros((n, n), dtype=complex)
        else:
            if q_branch not in BRANCHES:
                raise ValueError(f"unknown branch {q_branch!r}; choose from {sorted(BRANCHES)}")
            Q = matrix_sqrt_primary(c * (2 * A + c * np.eye(n)), BRANCHES[q_branch])
    Q = as_matrix(Q)
    sig = SignatureConfig(m1, m2)
    provisional = GBDTSeed(A, np.zeros((n, n), complex), sig, float(c), float(d), alpha, f1, f2, Q)
    if S0 is None:
        lam0 = provisional.Lambda0
        S0 = solve_sylvester(A, A.conj().T, 1j * lam0 @ sig.j @ lam0.conj().T)
        S0 = herm(S0)
    seed = GBDTSeed(A, as_matrix(S0), sig, float(c), float(d), alpha, f1, f2, Q)
    seed.validate()
    return seed


def example_7_1_seed(
    a: complex = 1 + 1j,
    c: float = 1.0,
    alpha: complex = 1.0,
    f1: complex = 1.0,
    f2: complex = 0.3,
    q_branch: str = "upper",
) -> GBDTSeed:
    """Scalar seed ``n = p = 1``, ``A = a`` non-real, ``d = 0``, ``S(0) > 0`` required."""
    a = complex(a)
    if a.imag == 0:
        raise PreconditionError("a must be non-real")
    if c == 0:
        raise PreconditionError("the scalar example needs c != 0")
    if abs(abs(complex(alpha)) - 1) > 1e-12:
        raise PreconditionError("|alpha| must equal 1")
    seed = build_seed([[a]], [[f1]], [[f2]], [[alpha]], c=c, d=0.0, q_branch=q_branch)
    if seed.S0[0, 0].real <= 0:
        raise PreconditionError(
            f"S(0) not positive: positivity inequality for S(0) violated (S(0) = {seed.S0[0, 0].real:.6g})"
        )
    return seed


def example_7_2_seed(
    xi: float = 1.0,
    q: complex = 1.0,
    f: complex = 1.0,
    g: complex = 1.0,
    alpha: complex = 1.0,
    S22: float = 1.0,
    margin: float = 1.0,
) -> GBDTSeed:
    """Seed with ``A = [[xi, a], [0, xi]]``, nilpotent ``Q = [[0, q], [0, 0]]``, ``c = 0``.

    ``a`` and ``S(0)`` are solved for: ``a = M_12 / S22`` with
    ``M = i Lambda(0) j Lambda(0)*``, ``S_12`` from the ``(1,1)`` entry of the
    identity, and ``S_11 = |S_12|^2 / S22 + margin`` so that ``S(0) > 0``.
    """
    xi = float(xi)
    if xi == 0:
        raise PreconditionError("xi must be a nonzero real number")
    if f == 0 or g == 0:
        raise PreconditionError("f and g must be nonzero")
    if S22 <= 0 or margin <= 0:
        raise PreconditionError("S22 and margin must be positive")
    Q = np.array([[0, q], [0, 0]], dtype=complex)
    f1 = np.array([[f], [0]], dtype=complex)
    f2 = np.array([[0], [g]], dtype=complex)
    alpha_m = as_matrix(alpha)
    sig = SignatureConfig(1, 1)
    # Lambda does not depend on the off-diagonal entry of A, so A = xi I is used here.
    probe = GBDTSeed(xi * np.eye(2, dtype=complex), np.zeros((2, 2), complex), sig, 0.0, 0.0, alpha_m, f1, f2, Q)
    lam0 = probe.Lambda0
    M = 1j * lam0 @ sig.j @ lam0.conj().T
    if abs(M[0, 1]) <= 1e-14 * (1 + norm(M)):
        raise PreconditionError("identity unsatisfiable with a != 0 (the required a S22 vanishes)")
    a = M[0, 1] / S22
    m11 = (M[0, 0] / 1j).real
    s12 = -1j * m11 / (2 * np.conj(a))
    S0 = np.array([[abs(s12) ** 2 / S22 + margin, s12], [np.conj(s12), S22]], dtype=complex)
    A = np.array([[xi, a], [0, xi]], dtype=complex)
    seed = GBDTSeed(A, S0, sig, 0.0, 0.0, alpha_m, f1, f2, Q)
    seed.validate()
    if min_eig(S0) <= 0:
        raise PreconditionError("S(0) not positive")
    return seed


def trivial_seed(c: float = 1.0, alpha=1.0, a: float = 1.0) -> GBDTSeed:
    """Seed with ``Lambda(0) = 0`` (so ``w_A = I`` and nothing is transformed)."""
    alpha = as_matrix(alpha)
    m1 = alpha.shape[0]
    zero = np.zeros((1, m1))
    return build_seed([[a]], zero, zero, alpha, c=c, d=0.0, S0=[[1.0]])


def eigenfunction_explicit(seed: GBDTSeed, grid: Grid) -> SampledMatrixFunction:
    """``Lambda`` sampled at the grid nodes."""
    return SampledMatrixFunction(grid, np.stack([seed.Lambda(x) for x in grid.points]))


def eigenfunction_residual(seed: GBDTSeed, x: float, h: float = 1e-3) -> float:
    """Central-difference residual of ``Lambda' = -i A Lambda j H``."""
    H = seed.system().H(x)
    deriv = (seed.Lambda(x + h) - seed.Lambda(x - h)) / (2 * h)
    return norm(deriv + 1j * seed.A @ seed.Lambda(x) @ seed.j @ H)


def _S_derivative(seed: GBDTSeed, system: CanonicalSystemSpec, x: float) -> np.ndarray:
    lam = seed.Lambda(x)
    j = seed.j
    return lam @ j @ system.H(x) @ j @ lam.conj().T


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def recover_S(seed: GBDTSeed, Lambda: SampledMatrixFunction, route: str = "quadrature") -> SampledMatrixFunction:
    """``S`` at the nodes of ``Lambda.grid``.

    ``quadrature`` integrates ``S' = Lambda j H j Lambda*`` (always
    applicable); ``sylvester`` solves the identity node by node and needs
    disjoint spectra of ``A`` and ``A*``.
    """
    grid = Lambda.grid
    j = seed.j
    if route == "quadrature":
        system = seed.system()
        hs = np.stack([system.H(x) for x in grid.points])
        lam = Lambda.values
        deriv = lam @ j @ hs @ j @ lam.conj().swapaxes(-1, -2)
        vals = seed.S0[None] + cumulative_simpson(deriv, grid.spacing)
    elif route == "sylvester":
        At = seed.A.conj().T
        vals = np.stack(
            [solve_sylvester(seed.A, At, 1j * lam @ j @ lam.conj().T) for lam in Lambda.values]
        )
    else:
        raise ValueError(f"unknown recovery route {route!r}; choose from {ROUTES}")
    return SampledMatrixFunction(grid, herm(vals))


def _solve_S(S: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if np.linalg.cond(S) > COND_LIMIT:
        raise PreconditionError("S(x) is singular or ill-conditioned (condition number > 1e12)")
    return scipy.linalg.solve(S, rhs, assume_a="her")


@dataclass(frozen=True, eq=False)
class GBDTState:
    """Sampled ``Lambda`` and ``S`` of one seed, with exact off-grid evaluation."""

    seed: GBDTSeed
    Lambda: SampledMatrixFunction
    S: SampledMatrixFunction
    route: str
    system: CanonicalSystemSpec

    @property
    def grid(self) -> Grid:
        return self.S.grid

    def S_at(self, x: float) -> np.ndarray:
        """``S(x)``: the node value on the grid, otherwise a Gauss-Legendre step from the nearest node."""
        i = self.grid.index_of(x, tol=1e-12)
        if i is not None:
            return self.S.values[i]
        if self.route == "sylvester":
            lam = self.seed.Lambda(x)
            return herm(solve_sylvester(self.seed.A, self.seed.A.conj().T, 1j * lam @ self.seed.j @ lam.conj().T))
        k = int(round((x - self.grid.start) / self.grid.spacing))
        k = min(max(k, 0), self.grid.nodes - 1)
        x0 = self.grid.points[k]
        half = 0.5 * (x - x0)
        mid = 0.5 * (x + x0)
        acc = sum(
            w * _S_derivative(self.seed, self.system, mid + half * t)
            for t, w in zip(_GL_NODES, _GL_WEIGHTS)
        )
        return herm(self.S.values[k] + half * acc)

    def S_solve(self, x: float, rhs: np.ndarray) -> np.ndarray:
        return _solve_S(self.S_at(x), rhs)

    def identity_residuals(self) -> np.ndarray:
        """Relative identity residual ``||AS - SA* - i Lambda j Lambda*|| / (1 + ||S||)`` per node."""
        return np.array(
            [
                self.seed.identity_residual(S, lam) / (1 + norm(S))
                for S, lam in zip(self.S.values, self.Lambda.values)
            ]
        )


def gbdt_state(seed: GBDTSeed, grid: Grid, route: str = "quadrature") -> GBDTState:
    Lam = eigenfunction_explicit(seed, grid)
    S = recover_S(seed, Lam, route)
    return GBDTState(seed, Lam, S, route, seed.system())


def _resolvent(A: np.ndarray, lam: complex) -> np.ndarray:
    n = A.shape[0]
    eig = np.linalg.eigvals(A)
    if np.min(np.abs(eig - lam)) <= 1e-12 * max(1.0, abs(lam)):
        raise SpectralCollisionError("spectral parameter collides with eigenvalue of A")
    return np.linalg.inv(A - lam * np.eye(n))


def transfer_matrix_wA(state: GBDTState, x: float, lam: complex) -> np.ndarray:
    """``w_A(x, lambda) = I - i j Lambda* S^{-1} (A - lambda)^{-1} Lambda``."""
    seed = state.seed
    lam_x = seed.Lambda(x)
    inner = state.S_solve(x, _resolvent(seed.A, complex(lam)) @ lam_x)
    return np.eye(seed.signature.m) - 1j * seed.j @ lam_x.conj().T @ inner


def darboux_matrix_v(state: GBDTState, x: float, lam: complex) -> np.ndarray:
    """``v(x, lambda) = I - i lambda j Lambda* (A*)^{-1} S^{-1} (A - lambda)^{-1} Lambda``."""
    seed = state.seed
    lam = complex(lam)
    m = seed.signature.m
    if lam == 0:
        return np.eye(m, dtype=complex)
    lam_x = seed.Lambda(x)
    inner = state.S_solve(x, _resolvent(seed.A, lam) @ lam_x)
    left = lam_x.conj().T @ seed.A_inv.conj().T
    return np.eye(m) - 1j * lam * seed.j @ left @ inner


def jform_residual(state: GBDTState, x: float, lam: complex, mu: complex) -> float:
    """Residual of ``w(mu-bar)* j w(lambda) = j + i(mu - lambda) Lambda*(A*-mu)^{-1} S^{-1} (A-lambda)^{-1} Lambda``."""
    seed = state.seed
    j = seed.j
    lhs = transfer_matrix_wA(state, x, np.conj(mu)).conj().T @ j @ transfer_matrix_wA(state, x, lam)
    lam_x = seed.Lambda(x)
    inner = state.S_solve(x, _resolvent(seed.A, lam) @ lam_x)
    left = lam_x.conj().T @ _resolvent(seed.A.conj().T, mu)
    rhs = j + 1j * (mu - lam) * left @ inner
    return norm(lhs - rhs)


def beta_tilde(state: GBDTState, x: float) -> np.ndarray:
    """Transformed factor ``beta(x) w_A(x, 0)``."""
    return state.system.beta(x) @ transfer_matrix_wA(state, x, 0.0)


def transformed_hamiltonian(state: GBDTState) -> CanonicalSystemSpec:
    """System with ``H~ = w_A(x,0)* H w_A(x,0) = d j + beta~* beta~``."""
    system = state.system
    seed = state.seed

    def hamiltonian(x):
        w0 = transfer_matrix_wA(state, x, 0.0)
        return herm(w0.conj().T @ system.H(x) @ w0)

    def beta(x):
        return beta_tilde(state, x)

    return CanonicalSystemSpec(
        signature=seed.signature,
        hamiltonian=hamiltonian,
        kind=system.kind,
        beta=beta,
        d=seed.d,
        c=seed.c,
        alpha=seed.alpha,
    )


def initial_fundamental_solution(seed: GBDTSeed, lam: complex, grid: Grid) -> SampledMatrixFunction:
    """``W(x, lambda)`` of the initial system: closed form when available, else RK4."""
    lam = complex(lam)
    square = seed.signature.square and seed.d == 0
    if square and (seed.c == 0 or lam.imag != 0):
        params = initial_params(seed.c, seed.alpha, lam)
        return SampledMatrixFunction(grid, np.stack([initial_W(params, x) for x in grid.points]))
    system = seed.system()
    return integrate_linear(lambda x: 1j * lam * (system.j @ system.H(x)), np.eye(seed.signature.m), grid)


def initial_W_at(seed: GBDTSeed, lam: complex, x: float) -> np.ndarray:
    if not (seed.signature.square and seed.d == 0):
        raise PreconditionError("pointwise initial solution needs d = 0 and m1 = m2")
    return initial_W(initial_params(seed.c, seed.alpha, lam), x)


def v0_inverse(state: GBDTState, lam: complex) -> np.ndarray:
    v0 = darboux_matrix_v(state, 0.0, lam)
    if np.linalg.cond(v0) > COND_LIMIT:
        raise IsolatedPointError(f"v(0, {lam}) is singular; lambda is an excluded isolated point")
    return np.linalg.inv(v0)


def transformed_W_at(state: GBDTState, lam: complex, x: float, v0inv: Optional[np.ndarray] = None) -> np.ndarray:
    """Normalized ``W~(x, lambda) = v(x) W(x) v(0)^{-1}`` at a single point."""
    if v0inv is None:
        v0inv = v0_inverse(state, lam)
    return darboux_matrix_v(state, x, lam) @ initial_W_at(state.seed, lam, x) @ v0inv


def transformed_fundamental_solution(
    state: GBDTState, lam: complex, grid: Optional[Grid] = None
) -> SampledMatrixFunction:
    """``W~ = v W v(0)^{-1}`` at the nodes of ``grid`` (default: the state grid)."""
    grid = grid or state.grid
    lam = complex(lam)
    m = state.seed.signature.m
    if lam == 0:
        return SampledMatrixFunction(grid, np.broadcast_to(np.eye(m, dtype=complex), (grid.nodes, m, m)).copy())
    v0inv = v0_inverse(state, lam)
    W = initial_fundamental_solution(state.seed, lam, grid)
    vals = np.stack([darboux_matrix_v(state, x, lam) @ Wx @ v0inv for x, Wx in zip(grid.points, W.values)])
    return SampledMatrixFunction(grid, vals)


def q0_tilde(state: GBDTState, x: float) -> np.ndarray:
    """``j Lambda* S^{-1} Lambda j H - j H j Lambda* S^{-1} Lambda``."""
    seed = state.seed
    j = seed.j
    lam = seed.Lambda(x)
    H = state.system.H(x)
    core = j @ lam.conj().T @ state.S_solve(x, lam)
    return core @ j @ H - j @ H @ core


def structure_residuals(state: GBDTState, x: float, h: float = 1e-4) -> tuple[float, float]:
    """``(||b j b*||, ||b' j b* - beta' j beta*||)`` for ``b = beta~`` (central differences)."""
    seed = state.seed
    j = seed.j
    b = beta_tilde(state, x)
    db = (beta_tilde(state, x + h) - beta_tilde(state, x - h)) / (2 * h)
    beta, dbeta = state.system.beta(x), state.system.beta_prime(x)
    return norm(b @ j @ b.conj().T), norm(db @ j @ b.conj().T - dbeta @ j @ beta.conj().T)


def S_positive(state: GBDTState) -> bool:
    return all(min_eig(S) > 0 for S in state.S.values)


def square_integrability(state: GBDTState) -> tuple[float, float]:
    """``(||int ||beta j Lambda* S^{-1}||^2||, ||S(0)^{-1}|| n)`` over the state grid."""
    seed = state.seed
    j = seed.j
    vals = []
    for x, lam, S in zip(state.grid.points, state.Lambda.values, state.S.values):
        row = state.system.beta(x) @ j @ lam.conj().T @ np.linalg.inv(S)
        vals.append(row.conj().T @ row)
    acc = cumulative_simpson(np.stack(vals), state.grid.spacing)[-1]
    return norm(acc), norm(np.linalg.inv(seed.S0)) * seed.n


def has_sylvester_route(seed: GBDTSeed) -> bool:
    try:
        solve_sylvester(seed.A, seed.A.conj().T, np.zeros_like(seed.A))
    except SylvesterSingularError:
        return False
    return True

