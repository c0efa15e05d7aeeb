"""Volterra operators ``K``, ``A``, the similarity ``K = V A V^{-1}`` and transfer functions.

Here ``K f = i beta(x) j int_0^x beta(t)* f(t) dt`` and
``A f = int_0^x (t - x) f(t) dt`` act on ``C^p``-valued functions on
``[0, T]``; ``V = u(x) (I + int_0^x V(x, t) . dt)``.  Operators are
discretized with trapezoid weights on a uniform grid and stored as dense
``((N+1) p) x ((N+1) p)`` matrices in node-major order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .canonical import CanonicalSystemSpec
from .gbdt import PreconditionError
from .linalg import Grid, cumulative_simpson, integrate_linear, norm


def _ct(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def trapezoid_row_weights(nodes: int, h: float) -> np.ndarray:
    """``w[i, m]``: weight of node ``m`` in the trapezoid rule over ``[0, x_i]``."""
    w = np.tril(np.full((nodes, nodes), h))
    idx = np.arange(nodes)
    w[:, 0] = h / 2
    w[idx, idx] = h / 2
    w[0, 0] = 0.0
    return w


def trapezoid_weights(nodes: int, h: float) -> np.ndarray:
    q = np.full(nodes, h)
    q[0] = q[-1] = h / 2
    return q


@dataclass(frozen=True)
class Auxiliaries:
    """Coefficient functions of the similarity construction, sampled at the grid nodes.

    ``U4_half[k]`` is ``int_0^{k h/2} u4``, i.e. it lives on the half-step grid.
    """

    grid: Grid
    beta: np.ndarray
    beta_prime: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    u4: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    u: np.ndarray
    U4_half: np.ndarray

    @property
    def p(self) -> int:
        return self.beta.shape[1]

    @property
    def F_left(self) -> np.ndarray:
        """``u* h1`` so that ``F(s, eta) = F_left(s) F_right(eta)``."""
        return _ct(self.u) @ self.h1

    @property
    def F_right(self) -> np.ndarray:
        return self.h2 @ self.u


def build_auxiliaries(spec: CanonicalSystemSpec, grid: Grid, tol: float = 1e-9) -> Auxiliaries:
    """``u1, u2, u3, u4, h1, h2, u`` for ``H = beta* beta`` with ``beta j beta* = 0``, ``beta' j beta* = iI``."""
    if spec.beta is None or spec.beta_prime is None or spec.beta_second is None:
        raise PreconditionError("the similarity construction needs beta with two derivatives")
    j = spec.j
    b, db, ddb = spec.beta, spec.beta_prime, spec.beta_second
    fine = Grid(grid.start, grid.end, 2 * grid.nodes - 1)
    xs = fine.points
    beta = np.stack([b(x) for x in xs])
    p = beta.shape[1]
    dbeta = np.stack([db(x) for x in xs])
    ddbeta = np.stack([ddb(x) for x in xs])
    eye = np.eye(p)
    if np.max(np.abs(beta @ j @ _ct(beta))) > tol or np.max(np.abs(dbeta @ j @ _ct(beta) - 1j * eye)) > tol:
        raise PreconditionError("normalization violated: need beta j beta* = 0 and beta' j beta* = iI")
    u1 = integrate_linear(lambda x: 1j * j @ _ct(b(x)) @ ddb(x), np.eye(2 * p), fine).values
    u2 = -1j * dbeta @ j @ _ct(dbeta)
    u3 = 1j * ddbeta @ j @ _ct(dbeta)
    u = integrate_linear(lambda x: -0.5 * (-1j * db(x) @ j @ _ct(db(x))), eye, fine).values
    u4 = _ct(u) @ (0.5 * (u3 + _ct(u3)) - 0.75 * u2 @ u2) @ u
    h1 = 1j * ddbeta @ u1
    jb = j @ _ct(beta)
    h2 = np.linalg.solve(
        u1, jb @ u2 @ u2 - jb @ _ct(u3) - j @ _ct(dbeta) @ u2 + j @ _ct(ddbeta)
    )
    U4_half = cumulative_simpson(u4, fine.spacing)
    take = slice(None, None, 2)
    return Auxiliaries(
        grid=grid,
        beta=beta[take],
        beta_prime=dbeta[take],
        u1=u1[take],
        u2=u2[take],
        u3=u3[take],
        u4=u4[take],
        h1=h1[take],
        h2=h2[take],
        u=u[take],
        U4_half=U4_half,
    )


def _column_cumulative(values: np.ndarray, h: float) -> np.ndarray:
    """``out[l, m] = trapezoid int from node m to node l`` along axis 0 (entries ``l < m`` zero).

    ``values[l, m]`` must vanish for ``l < m``.
    """
    n = values.shape[0]
    csum = np.cumsum(values, axis=0)
    idx = np.arange(n)
    diag = values[idx, idx]
    out = h * (csum - 0.5 * diag[None] - 0.5 * values)
    mask = np.tril(np.ones((n, n), dtype=bool))
    out[~mask] = 0
    return out


def _triangle_terms(arr: np.ndarray, h: float) -> np.ndarray:
    """Sum of the three line integrals appearing in each kernel term.

    ``arr[t, s]`` holds a function of ``(t, s)`` on ``s <= t`` that vanishes on
    ``s = t``.  For every ``(i, m)`` (``x = x_i``, ``zeta = x_m``) this returns

    ``int_{x-zeta}^{x} f(t, zeta + t - x) dt + int_{(x+zeta)/2}^{x} f(t, x + zeta - t) dt
    + int_{(x-zeta)/2}^{x-zeta} f(t, x - zeta - t) dt``

    by the trapezoid rule along grid diagonals and anti-diagonals.
    """
    n = arr.shape[0]
    block = arr.shape[2:]
    idx = np.arange(n)

    # diagonals t - s = D: skew[D, k] = arr[k + D, k]
    D = idx[:, None]
    k = idx[None, :]
    valid = k + D < n
    skew = np.zeros((n, n) + block, dtype=complex)
    skew[valid] = arr[(k + D)[valid], np.broadcast_to(k, (n, n))[valid]]
    skew_cs = np.cumsum(skew, axis=1)

    # anti-diagonals t + s = S: anti[S, l] = arr[l, S - l] for S - l <= l
    S = np.arange(2 * n - 1)[:, None]
    lgrid = idx[None, :]
    sv = S - lgrid
    avalid = (sv >= 0) & (sv <= lgrid)
    anti = np.zeros((2 * n - 1, n) + block, dtype=complex)
    rows, cols = np.nonzero(avalid)
    anti[rows, cols] = arr[cols, rows - cols]
    anti_cs = np.cumsum(anti, axis=1)

    def anti_integral(Ssum: np.ndarray, upper: np.ndarray) -> np.ndarray:
        lo = (Ssum + 1) // 2
        before = np.where(lo > 0, lo - 1, 0)
        head = np.where((lo > 0)[(...,) + (None,) * len(block)], anti_cs[Ssum, before], 0)
        full = anti_cs[Ssum, upper] - head
        val = h * (full - 0.5 * (anti[Ssum, lo] + anti[Ssum, upper]))
        odd = (Ssum % 2 == 1)[(...,) + (None,) * len(block)]
        return val + np.where(odd, 0.25 * h * anti[Ssum, lo], 0)

    ii, mm = np.tril_indices(n)
    out = np.zeros((n, n) + block, dtype=complex)
    Dd = ii - mm
    term_a = h * (skew_cs[Dd, mm] - 0.5 * (skew[Dd, 0] + skew[Dd, mm]))
    term_b = anti_integral(ii + mm, ii)
    term_c = anti_integral(Dd, Dd)
    out[ii, mm] = term_a + term_b + term_c
    return out


@dataclass(frozen=True)
class SimilarityKernel:
    """``u`` and the lower-triangular kernel ``V[i, m] = V(x_i, x_m)`` (zero for ``m > i``)."""

    grid: Grid
    u: np.ndarray
    V: np.ndarray
    terms: int
    tail_bound: float
    C: float
    term_sups: tuple

    @property
    def p(self) -> int:
        return self.u.shape[1]


def tail_bound(C: float, T: float, terms: int) -> float:
    """Bound on ``sum_{k > terms} ||V_k||`` from ``||V_k|| <= (3C^2)^{k-1} C T^{k-1} / (k-1)!``."""
    y = 3 * C**2 * T
    tail, r = 0.0, terms
    term = y**r / math.factorial(r)
    while term > 0 and (r < terms + 5 or term > 1e-18 * max(tail, 1e-300)):
        tail += term
        r += 1
        term *= y / r
    return C * tail


def term_bound(C: float, x: float, k: int) -> float:
    return (3 * C**2) ** (k - 1) * C * x ** (k - 1) / math.factorial(k - 1)


def _first_term(aux: Auxiliaries) -> np.ndarray:
    n = aux.grid.nodes
    h = aux.grid.spacing
    a, b = aux.F_left, aux.F_right
    Acum = cumulative_simpson(a, h)
    # breve F(t, eta) = (int_eta^t a) b(eta), stored as [t, eta]
    breve = (Acum[:, None] - Acum[None, :]) @ b[None, :]
    breve[~np.tril(np.ones((n, n), dtype=bool))] = 0
    ii, mm = np.tril_indices(n)
    V1 = np.zeros((n, n, aux.p, aux.p), dtype=complex)
    V1[ii, mm] = 0.5 * (aux.U4_half[ii + mm] + aux.U4_half[ii - mm])
    V1 -= 0.5 * _triangle_terms(breve, h)
    return V1


def _next_term(aux: Auxiliaries, prev: np.ndarray) -> np.ndarray:
    h = aux.grid.spacing
    a, b = aux.F_left, aux.F_right
    inner = _column_cumulative(b[:, None] @ prev, h)
    G = aux.u4[:, None] @ prev - a[:, None] @ inner
    P = _column_cumulative(G, h)
    return 0.5 * _triangle_terms(P, h)


def kernel_constant(aux: Auxiliaries, V1: np.ndarray) -> float:
    h = aux.grid.spacing
    q = trapezoid_weights(aux.grid.nodes, h)
    norms = lambda arr: np.array([norm(m) for m in arr])
    int_h1 = float(q @ norms(aux.h1))
    int_h2 = float(q @ norms(aux.h2))
    int_u4 = float(q @ norms(aux.u4))
    sup_v1 = max(norm(m) for m in V1.reshape(-1, aux.p, aux.p))
    return max(int_h1, int_h2, math.sqrt(int_u4), sup_v1)


def kernel_series(aux: Auxiliaries, kmax: int = 12, tol: float = 1e-8) -> SimilarityKernel:
    """Sum kernel terms until the factorial tail bound drops below ``tol`` (at most ``kmax``)."""
    if kmax < 1:
        raise ValueError("kmax must be at least 1")
    T = aux.grid.end - aux.grid.start
    term = _first_term(aux)
    C = kernel_constant(aux, term)
    total = term.copy()
    sups = [float(np.max(np.linalg.norm(term, 2, axis=(-2, -1))))]
    k = 1
    bound = tail_bound(C, T, k)
    while bound >= tol and k < kmax:
        term = _next_term(aux, term)
        total += term
        sups.append(float(np.max(np.linalg.norm(term, 2, axis=(-2, -1)))))
        k += 1
        bound = tail_bound(C, T, k)
    if bound >= tol:
        warnings.warn(f"kernel series tail bound {bound:.3g} not below {tol:g} after {k} terms")
    return SimilarityKernel(aux.grid, aux.u, total, k, bound, C, tuple(sups))


@dataclass(frozen=True)
class DiscretizedOperator:
    """Block matrix of an operator on ``C^p``-valued samples over ``grid`` (node-major)."""

    grid: Grid
    p: int
    matrix: np.ndarray

    def apply(self, f: np.ndarray) -> np.ndarray:
        """``f`` has shape ``(nodes, p, cols)``."""
        n, p = self.grid.nodes, self.p
        cols = f.shape[-1]
        return (self.matrix @ f.reshape(n * p, cols)).reshape(n, p, cols)

    def compose(self, other: "DiscretizedOperator") -> "DiscretizedOperator":
        return DiscretizedOperator(self.grid, self.p, self.matrix @ other.matrix)

    def truncate(self, nodes: int) -> "DiscretizedOperator":
        """Restriction to the first ``nodes`` grid nodes (exact for Volterra operators)."""
        k = nodes * self.p
        return DiscretizedOperator(Grid(self.grid.start, self.grid.points[nodes - 1], nodes), self.p, self.matrix[:k, :k])

    def gram(self) -> np.ndarray:
        return np.kron(np.diag(trapezoid_weights(self.grid.nodes, self.grid.spacing)), np.eye(self.p))

    def adjoint(self) -> "DiscretizedOperator":
        """Adjoint for the trapezoid inner product ``<f, g> = sum q_i g_i* f_i``."""
        q = np.repeat(trapezoid_weights(self.grid.nodes, self.grid.spacing), self.p)
        return DiscretizedOperator(self.grid, self.p, (self.matrix.conj().T * q[None, :]) / q[:, None])

    def l2_norm(self) -> float:
        q = np.sqrt(np.repeat(trapezoid_weights(self.grid.nodes, self.grid.spacing), self.p))
        return norm(q[:, None] * self.matrix / q[None, :])


def _blocks_to_matrix(blocks: np.ndarray) -> np.ndarray:
    n, _, p, _ = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(n * p, n * p)


def operator_A(grid: Grid, p: int) -> DiscretizedOperator:
    n, h = grid.nodes, grid.spacing
    x = grid.points
    w = trapezoid_row_weights(n, h) * (x[None, :] - x[:, None])
    return DiscretizedOperator(grid, p, np.kron(w, np.eye(p)))


def operator_K(aux: Auxiliaries) -> DiscretizedOperator:
    grid = aux.grid
    n, h = grid.nodes, grid.spacing
    j = np.diag(np.r_[np.ones(aux.p), -np.ones(aux.p)])
    w = trapezoid_row_weights(n, h)
    blocks = 1j * w[:, :, None, None] * (aux.beta[:, None] @ j @ _ct(aux.beta)[None, :])
    return DiscretizedOperator(grid, aux.p, _blocks_to_matrix(blocks))


def operator_V(kernel: SimilarityKernel) -> DiscretizedOperator:
    grid = kernel.grid
    n, h, p = grid.nodes, grid.spacing, kernel.p
    w = trapezoid_row_weights(n, h)
    blocks = w[:, :, None, None] * kernel.V
    idx = np.arange(n)
    blocks[idx, idx] += np.eye(p)
    blocks = kernel.u[:, None] @ blocks
    return DiscretizedOperator(grid, p, _blocks_to_matrix(blocks))


def apply_V(kernel: SimilarityKernel, f: np.ndarray) -> np.ndarray:
    """``u(x) (f(x) + int_0^x V(x, t) f(t) dt)`` for samples ``f`` of shape ``(nodes, p, cols)``."""
    f = np.asarray(f, dtype=complex)
    if f.shape[0] != kernel.grid.nodes:
        raise ValueError("f must be sampled on the kernel grid")
    return operator_V(kernel).apply(f)


def forward_substitution(op: DiscretizedOperator, rhs: np.ndarray, shift: complex = 0.0) -> np.ndarray:
    """Solve ``(op - shift I) X = rhs`` for a block lower-triangular ``op``."""
    n, p = op.grid.nodes, op.p
    M = op.matrix
    rhs = np.asarray(rhs, dtype=complex).reshape(n * p, -1)
    out = np.zeros_like(rhs)
    eye = np.eye(p)
    for i in range(n):
        rows = slice(i * p, (i + 1) * p)
        acc = rhs[rows] - M[rows, : i * p] @ out[: i * p]
        diag = M[rows, rows] - shift * eye
        out[rows] = np.linalg.solve(diag, acc)
    return out


def inverse_lower(op: DiscretizedOperator) -> DiscretizedOperator:
    n, p = op.grid.nodes, op.p
    return DiscretizedOperator(op.grid, p, forward_substitution(op, np.eye(n * p)))


@dataclass(frozen=True)
class SNode:
    """Discrete ``(A_l, S_l, Pi_l)`` on ``[0, l]`` with ``S_l = V_l^{-1} (V_l*)^{-1}``."""

    A: DiscretizedOperator
    V: DiscretizedOperator
    Pi: np.ndarray
    beta: np.ndarray

    @property
    def grid(self) -> Grid:
        return self.A.grid

    @property
    def p(self) -> int:
        return self.A.p

    def S_inverse_apply(self, f: np.ndarray) -> np.ndarray:
        """``S^{-1} f = V* V f``."""
        V = self.V
        return V.adjoint().matrix @ (V.matrix @ f)

    def S(self) -> DiscretizedOperator:
        Vinv = inverse_lower(self.V)
        return Vinv.compose(Vinv.adjoint())

    def transfer(self, mu: complex) -> np.ndarray:
        """``w_A(l, mu) = I - i j Pi* S^{-1} (A - mu)^{-1} Pi``."""
        p = self.p
        j = np.diag(np.r_[np.ones(p), -np.ones(p)])
        Pi = self.Pi
        res = forward_substitution(self.A, Pi, shift=mu)
        q = np.repeat(trapezoid_weights(self.grid.nodes, self.grid.spacing), p)
        left = Pi.conj().T * q[None, :]
        return np.eye(2 * p) - 1j * j @ left @ self.S_inverse_apply(res)

    def identity_residual(self) -> float:
        """L2 operator norm of ``A S - S A* - i Pi j Pi*``."""
        p = self.p
        j = np.diag(np.r_[np.ones(p), -np.ones(p)])
        S = self.S()
        q = np.repeat(trapezoid_weights(self.grid.nodes, self.grid.spacing), p)
        rank = 1j * self.Pi @ j @ (self.Pi.conj().T * q[None, :])
        M = self.A.matrix @ S.matrix - S.matrix @ self.A.adjoint().matrix - rank
        return DiscretizedOperator(self.grid, p, M).l2_norm()

    def accumulated_hamiltonian(self) -> np.ndarray:
        """``int_0^l Pi* S^{-1} Pi dx``."""
        p = self.p
        q = np.repeat(trapezoid_weights(self.grid.nodes, self.grid.spacing), p)
        return (self.Pi.conj().T * q[None, :]) @ self.S_inverse_apply(self.Pi)


def s_node(kernel: SimilarityKernel, aux: Auxiliaries, ell: float) -> SNode:
    """The truncated node on ``[0, ell]``; ``ell`` must be a grid node."""
    i = kernel.grid.index_of(ell)
    if i is None or i < 1:
        raise ValueError(f"ell={ell} must be a positive grid node")
    nodes = i + 1
    V = operator_V(kernel).truncate(nodes)
    A = operator_A(kernel.grid, kernel.p).truncate(nodes)
    beta = aux.beta[:nodes].reshape(nodes * kernel.p, 2 * kernel.p)
    Pi = forward_substitution(V, beta)
    return SNode(A=A, V=V, Pi=Pi, beta=beta)


def transfer_function_wA_ell(kernel: SimilarityKernel, aux: Auxiliaries, ell: float, mu: complex) -> np.ndarray:
    """``w_A(ell, mu)``; the fundamental solution is ``W(ell, lambda) = w_A(ell, 1/lambda)``."""
    mu = complex(mu)
    if mu == 0:
        raise ValueError("mu = 0 lies in the spectrum of A")
    return s_node(kernel, aux, ell).transfer(mu)


def similarity_residual(kernel: SimilarityKernel, aux: Auxiliaries, f: Optional[np.ndarray] = None) -> float:
    """``||K V f - V A f|| / ||f||`` in the trapezoid L2 norm (``f = 1`` by default)."""
    grid = kernel.grid
    p = kernel.p
    if f is None:
        f = np.broadcast_to(np.eye(p), (grid.nodes, p, p)).astype(complex)
    K, A, V = operator_K(aux), operator_A(grid, p), operator_V(kernel)
    diff = K.apply(V.apply(f)) - V.apply(A.apply(f))
    q = trapezoid_weights(grid.nodes, grid.spacing)
    l2 = lambda g: math.sqrt(float(np.real(np.einsum("i,iab,iab->", q, g.conj(), g))))
    return l2(diff) / l2(f)


def hamiltonian_recovery_error(
    kernel: SimilarityKernel, aux: Auxiliaries, ells: Sequence[float]
) -> float:
    """Max over ``ell`` of ``|| d/dl int_0^l Pi* S^{-1} Pi - beta(l)* beta(l) ||`` (central differences)."""
    h = kernel.grid.spacing
    worst = 0.0
    for ell in ells:
        i = kernel.grid.index_of(ell)
        if i is None or i < 2 or i >= kernel.grid.nodes - 1:
            raise ValueError(f"ell={ell} must be an interior grid node")
        up = s_node(kernel, aux, kernel.grid.points[i + 1]).accumulated_hamiltonian()
        down = s_node(kernel, aux, kernel.grid.points[i - 1]).accumulated_hamiltonian()
        deriv = (up - down) / (2 * h)
        b = aux.beta[i]
        worst = max(worst, norm(deriv - b.conj().T @ b))
    return worst


def y1_from_kernel(kernel: SimilarityKernel, z: complex) -> np.ndarray:
    """``cos(z x) I + int_0^x cos(z zeta) V(x, zeta) d zeta`` at every node."""
    grid = kernel.grid
    x = grid.points
    w = trapezoid_row_weights(grid.nodes, grid.spacing)
    c = np.cos(z * x)
    integral = np.einsum("im,m,imab->iab", w, c, kernel.V)
    return c[:, None, None] * np.eye(kernel.p) + integral


def b_operator_residual(kernel: SimilarityKernel, aux: Auxiliaries, z: complex) -> float:
    """Max-norm residual of ``y1 + A(u4 y1) - A(int_0^x F(x,t) y1(t) dt) = I + z^2 A y1``."""
    grid = kernel.grid
    p = kernel.p
    y1 = y1_from_kernel(kernel, z)
    A = operator_A(grid, p)
    w = trapezoid_row_weights(grid.nodes, grid.spacing)
    inner = np.einsum("im,mab->iab", w, aux.F_right @ y1)
    F_term = aux.F_left @ inner
    lhs = y1 + A.apply(aux.u4 @ y1) - A.apply(F_term)
    rhs = np.eye(p) + z**2 * A.apply(y1)
    return float(np.max(np.abs(lhs - rhs)))
