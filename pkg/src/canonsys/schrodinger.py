"""Canonical systems, matrix string equations and matrix Schrodinger equations.

With ``Theta`` the unitary taking ``j`` to ``J = [[0, I], [I, 0]]``, a
system ``w' = i lambda j H w`` with ``H = beta* beta`` becomes
``W' = i lambda J Hc W`` with ``Hc = vartheta* vartheta`` and
``vartheta = beta Theta*``.  Splitting ``vartheta = [v1 v2]`` gives the
string data ``kappa = (i (v1^{-1} v2)')^{-1}`` and ``omega = v1* v1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .canonical import CanonicalSystemSpec, SignatureConfig, fundamental_solution_oracle
from .gbdt import PreconditionError
from .linalg import Grid, SampledMatrixFunction, as_matrix, herm, hermitian_defect, integrate_ode, norm

MatrixFn = Callable[[float], np.ndarray]

COND_LIMIT = 1e10


class StringTransformError(PreconditionError):
    """Raised when ``vartheta_1`` or the derivative of ``vartheta_1^{-1} vartheta_2`` is singular."""


def theta(p: int) -> np.ndarray:
    return SignatureConfig.square_of(p).Theta


def block_J(p: int) -> np.ndarray:
    return SignatureConfig.square_of(p).J


def block_J1(p: int) -> np.ndarray:
    """``J1 = i [[0, -I], [I, 0]]``."""
    eye, zero = np.eye(p), np.zeros((p, p))
    return 1j * np.block([[zero, -eye], [eye, zero]])


def theta1(p: int) -> np.ndarray:
    """Initial value ``B(0) = (1/sqrt 2) [[iI, I], [iI, -I]]`` of ``B = [vartheta; vartheta']``."""
    eye = np.eye(p)
    return np.block([[1j * eye, eye], [1j * eye, -eye]]) / np.sqrt(2)


def to_theta_form(H: np.ndarray) -> np.ndarray:
    """``Theta H Theta*``."""
    t = theta(H.shape[0] // 2)
    return t @ H @ t.conj().T


def from_theta_form(Hc: np.ndarray) -> np.ndarray:
    """``Theta* Hc Theta``, the inverse of :func:`to_theta_form`."""
    t = theta(Hc.shape[0] // 2)
    return t.conj().T @ Hc @ t


def vartheta_of(beta: np.ndarray) -> np.ndarray:
    """``vartheta = beta Theta*``."""
    beta = np.atleast_2d(beta)
    return beta @ theta(beta.shape[0]).conj().T


@dataclass(frozen=True)
class StringData:
    """String coefficients of a canonical system, valid on ``[grid.start, valid_end]``."""

    vartheta: MatrixFn
    grid: Grid
    valid_nodes: int
    sub_spacing: float

    @property
    def p(self) -> int:
        return np.atleast_2d(self.vartheta(self.grid.start)).shape[0]

    @property
    def valid_end(self) -> float:
        return float(self.grid.points[self.valid_nodes - 1])

    @property
    def complete(self) -> bool:
        return self.valid_nodes == self.grid.nodes

    def blocks(self, x: float) -> tuple[np.ndarray, np.ndarray]:
        v = self.vartheta(x)
        p = v.shape[0]
        return v[:, :p], v[:, p:]

    def ratio(self, x: float) -> np.ndarray:
        """``vartheta_1^{-1} vartheta_2``."""
        v1, v2 = self.blocks(x)
        return np.linalg.solve(v1, v2)

    def ratio_derivative(self, x: float) -> np.ndarray:
        h = self.sub_spacing
        return (self.ratio(x + h) - self.ratio(x - h)) / (2 * h)

    def kappa(self, x: float) -> np.ndarray:
        return np.linalg.inv(1j * self.ratio_derivative(x))

    def omega(self, x: float) -> np.ndarray:
        v1, _ = self.blocks(x)
        return v1.conj().T @ v1

    def Z(self, x: float, W: np.ndarray) -> np.ndarray:
        """``vartheta_1^{-1} vartheta W`` for a solution ``W`` of the ``J``-form system."""
        v1, _ = self.blocks(x)
        return np.linalg.solve(v1, self.vartheta(x) @ W)


def _node_ok(vartheta: MatrixFn, x: float, h: float) -> bool:
    """Scale-aware invertibility of ``vartheta_1`` and of the ratio derivative near ``x``."""
    v = vartheta(x)
    p = v.shape[0]
    for y in (x - h, x, x + h):
        w = vartheta(y)
        if np.linalg.svd(w[:, :p], compute_uv=False)[-1] * COND_LIMIT < norm(w):
            return False

    def ratio(y):
        w = vartheta(y)
        return np.linalg.solve(w[:, :p], w[:, p:])

    deriv = (ratio(x + h) - ratio(x - h)) / (2 * h)
    return np.linalg.svd(deriv, compute_uv=False)[-1] * COND_LIMIT >= max(norm(deriv), 1.0)


def canonical_to_string(spec: CanonicalSystemSpec, grid: Grid, strict: bool = False) -> StringData:
    """String data for ``spec`` (which must carry ``beta``).

    Invertibility is checked node by node; the result covers the longest
    valid prefix of ``grid``.  ``strict`` raises at the first bad node
    instead.  An invalid first node always raises.
    """
    if spec.beta is None or not spec.signature.square:
        raise ValueError("the string transform needs beta and m1 = m2")
    beta = spec.beta

    def vartheta(x):
        return vartheta_of(beta(x))

    sub = grid.spacing / 10
    valid = 0
    for x in grid.points:
        if not _node_ok(vartheta, x, sub):
            break
        valid += 1
    if valid == 0 or (strict and valid < grid.nodes):
        bad = grid.points[valid]
        raise StringTransformError(
            f"vartheta_1 or (vartheta_1^-1 vartheta_2)' is singular at x={bad:.6g}"
        )
    return StringData(vartheta=vartheta, grid=grid, valid_nodes=valid, sub_spacing=sub)


def kappa_selfadjoint_defect(data: StringData) -> float:
    """Largest ``||kappa - kappa*||`` over the valid nodes."""
    return max(hermitian_defect(data.kappa(x)) for x in data.grid.points[: data.valid_nodes])


def omega_min_eigenvalue(data: StringData) -> float:
    return min(float(np.linalg.eigvalsh(herm(data.omega(x)))[0]) for x in data.grid.points[: data.valid_nodes])


def string_residual(data: StringData, spec: CanonicalSystemSpec, lam: complex) -> float:
    """Max over interior valid nodes of ``||(kappa Z')' - lambda omega Z||``.

    ``W`` solves ``W' = i lambda J Hc W`` (RK4 at half the grid spacing),
    ``Z = vartheta_1^{-1} vartheta W``, and both derivatives are central
    differences with step ``h``, so the residual is ``O(h^2)``.
    """
    lam = complex(lam)
    g = data.grid
    h = g.spacing
    end = data.valid_end
    nodes = data.valid_nodes
    if nodes < 3:
        raise ValueError("need at least three valid nodes for the string residual")
    fine = Grid(g.start, end, 2 * nodes - 1)
    p = spec.signature.m1
    t = theta(p)
    W = fundamental_solution_oracle(spec, lam, fine).values
    # Theta W solves the J-form system
    Wc = np.einsum("ij,njk->nik", t, W)
    xs = fine.points
    Z = np.stack([data.Z(xs[k], Wc[k]) for k in range(0, fine.nodes, 2)])
    # kappa Z' at midpoints between grid nodes
    flux = np.stack(
        [data.kappa(xs[2 * i + 1]) @ (Z[i + 1] - Z[i]) / h for i in range(nodes - 1)]
    )
    worst = 0.0
    for i in range(1, nodes - 1):
        lhs = (flux[i] - flux[i - 1]) / h
        rhs = lam * data.omega(xs[2 * i]) @ Z[i]
        worst = max(worst, norm(lhs - rhs))
    return worst


@dataclass(frozen=True)
class SchrodingerData:
    """Potential ``u`` with ``B = [vartheta; vartheta']`` sampled on ``grid``."""

    u: MatrixFn
    grid: Grid
    B: SampledMatrixFunction

    @property
    def p(self) -> int:
        return self.B.values.shape[1] // 2

    def _rhs(self, x: float) -> np.ndarray:
        p = self.p
        eye, zero = np.eye(p), np.zeros((p, p))
        return np.block([[zero, eye], [as_matrix(self.u(x), p), zero]])

    def B_at(self, x: float) -> np.ndarray:
        """``B(x)``: node value, or one RK4 step from the node below."""
        g = self.grid
        i = g.index_of(x)
        if i is not None:
            return self.B.values[i]
        k = int(np.clip(np.floor((x - g.start) / g.spacing), 0, g.nodes - 1))
        x0 = g.points[k]
        y = self.B.values[k]
        h = x - x0
        k1 = self._rhs(x0) @ y
        k2 = self._rhs(x0 + h / 2) @ (y + (h / 2) * k1)
        k3 = self._rhs(x0 + h / 2) @ (y + (h / 2) * k2)
        k4 = self._rhs(x0 + h) @ (y + h * k3)
        return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)

    def vartheta(self, x: float) -> np.ndarray:
        return self.B_at(x)[: self.p]

    def vartheta_prime(self, x: float) -> np.ndarray:
        return self.B_at(x)[self.p :]

    def hamiltonian_J(self, x: float) -> np.ndarray:
        """``Hc = vartheta* vartheta`` of the ``J``-form system."""
        v = self.vartheta(x)
        return v.conj().T @ v

    def canonical_spec(self) -> CanonicalSystemSpec:
        """Equivalent ``j``-form system with ``beta = vartheta Theta`` and ``H = beta* beta``."""
        p = self.p
        t = theta(p)

        def beta(x):
            return self.vartheta(x) @ t

        def beta_prime(x):
            return self.vartheta_prime(x) @ t

        def hamiltonian(x):
            b = beta(x)
            return b.conj().T @ b

        return CanonicalSystemSpec(
            signature=SignatureConfig.square_of(p),
            hamiltonian=hamiltonian,
            kind="canonical",
            beta=beta,
            beta_prime=beta_prime,
        )

    def J1_defects(self) -> np.ndarray:
        """``||B J B* - J1||`` at every node."""
        p = self.p
        J, J1 = block_J(p), block_J1(p)
        return np.array([norm(b @ J @ b.conj().T - J1) for b in self.B.values])

    def structure_defects(self) -> tuple[float, float]:
        """Max over nodes of ``||vartheta J vartheta*||`` and ``||vartheta' J vartheta* - iI||``."""
        p = self.p
        J = block_J(p)
        first = second = 0.0
        for b in self.B.values:
            v, vp = b[:p], b[p:]
            first = max(first, norm(v @ J @ v.conj().T))
            second = max(second, norm(vp @ J @ v.conj().T - 1j * np.eye(p)))
        return first, second


def schrodinger_to_canonical(u: MatrixFn, grid: Grid, p: Optional[int] = None) -> SchrodingerData:
    """Integrate ``B' = [[0, I], [u, 0]] B`` from ``B(0) = Theta_1`` (RK4 on ``grid``)."""
    if p is None:
        p = as_matrix(u(grid.start)).shape[0]
    eye, zero = np.eye(p), np.zeros((p, p))

    def rhs(x, y):
        return np.block([[zero, eye], [as_matrix(u(x), p), zero]]) @ y

    B = integrate_ode(rhs, theta1(p), grid)
    return SchrodingerData(u=u, grid=grid, B=B)


def verify_schrodinger_solution(data: SchrodingerData, lam: complex, spacing: Optional[float] = None) -> float:
    """Max interior ``||-Z'' + u Z - lambda Z||`` for ``Z = vartheta W``.

    ``B`` and ``W`` (``W' = i lambda J Hc W``, ``W(0) = I``) are integrated
    jointly by RK4 on a grid of the given spacing (default: the data grid);
    ``Z''`` is the second central difference.
    """
    lam = complex(lam)
    p = data.p
    g = data.grid
    if spacing is None:
        grid = g
    else:
        grid = Grid(g.start, g.end, int(round((g.end - g.start) / spacing)) + 1)
    J = block_J(p)
    eye, zero = np.eye(p), np.zeros((p, p))

    def rhs(x, y):
        b, w = y[: 2 * p], y[2 * p :]
        v = b[:p]
        db = np.block([[zero, eye], [as_matrix(data.u(x), p), zero]]) @ b
        dw = 1j * lam * J @ (v.conj().T @ (v @ w))
        return np.vstack([db, dw])

    y0 = np.vstack([theta1(p), np.eye(2 * p)])
    sol = integrate_ode(rhs, y0, grid).values
    Z = np.einsum("nij,njk->nik", sol[:, :p, :], sol[:, 2 * p :, :])
    h = grid.spacing
    xs = grid.points
    worst = 0.0
    for i in range(1, grid.nodes - 1):
        second = (Z[i + 1] - 2 * Z[i] + Z[i - 1]) / h**2
        res = -second + as_matrix(data.u(xs[i]), p) @ Z[i] - lam * Z[i]
        worst = max(worst, norm(res))
    return worst


def schrodinger_defect(beta: MatrixFn, u, points: Sequence[float], h: float = 1e-3) -> float:
    """Max ``||vartheta'' - u vartheta||`` for ``vartheta = beta Theta*`` and constant ``u``."""
    worst = 0.0
    for x in points:
        v = vartheta_of(beta(x))
        second = (vartheta_of(beta(x + h)) - 2 * v + vartheta_of(beta(x - h))) / h**2
        worst = max(worst, norm(second - as_matrix(u, v.shape[0]) @ v))
    return worst


def best_constant_potential(beta: MatrixFn, points: Sequence[float], h: float = 1e-3) -> tuple[np.ndarray, float]:
    """Least-squares constant ``u`` in ``vartheta'' = u vartheta`` and its defect."""
    num = den = 0
    for x in points:
        v = vartheta_of(beta(x))
        second = (vartheta_of(beta(x + h)) - 2 * v + vartheta_of(beta(x - h))) / h**2
        num = num + second @ v.conj().T
        den = den + v @ v.conj().T
    u = num @ np.linalg.inv(den)
    return u, schrodinger_defect(beta, u, points, h)
