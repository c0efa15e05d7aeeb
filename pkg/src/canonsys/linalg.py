"""Dense complex linear algebra and quadrature primitives.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Matrix-valued
functions sampled on a uniform grid are carried by
:class:`SampledMatrixFunction`, whose ``values`` array has shape
``(nodes, rows, cols)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

Branch = Callable[[complex], complex]


class SylvesterSingularError(ValueError):
    """Raised when the spectra in a Sylvester equation (nearly) collide."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``start = x_0 < ... < x_{nodes-1} = end``."""

    start: float
    end: float
    nodes: int

    def __post_init__(self):
        if self.nodes < 2:
            raise ValueError("a grid needs at least two nodes")
        if not self.end > self.start:
            raise ValueError("grid end must exceed grid start")

    @classmethod
    def on(cls, length: float, nodes: int) -> "Grid":
        return cls(0.0, float(length), int(nodes))

    @property
    def spacing(self) -> float:
        return (self.end - self.start) / (self.nodes - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.start, self.end, self.nodes)

    def index_of(self, x: float, tol: float = 1e-9) -> Optional[int]:
        """Index of the node equal to ``x`` (up to ``tol`` spacings), else None."""
        k = (x - self.start) / self.spacing
        i = int(round(k))
        if 0 <= i < self.nodes and abs(k - i) <= tol:
            return i
        return None

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.start, self.end, (self.nodes - 1) * factor + 1)


@dataclass(frozen=True)
class SampledMatrixFunction:
    """Matrix values of a function at the nodes of a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[0] != self.grid.nodes:
            raise ValueError(
                f"values must have shape (nodes, rows, cols); got {self.values.shape}"
            )

    @property
    def x(self) -> np.ndarray:
        return self.grid.points

    @property
    def shape(self) -> tuple:
        return self.values.shape[1:]

    def __len__(self) -> int:
        return self.grid.nodes

    def __getitem__(self, i: int) -> np.ndarray:
        return self.values[i]

    def at(self, x: float) -> np.ndarray:
        """Value at a grid node; raises for off-grid positions."""
        i = self.grid.index_of(x)
        if i is None:
            raise KeyError(f"x={x} is not a node of the grid")
        return self.values[i]

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "SampledMatrixFunction":
        return SampledMatrixFunction(self.grid, np.stack([fn(v) for v in self.values]))


def sample(fn: Callable[[float], np.ndarray], grid: Grid) -> SampledMatrixFunction:
    """Evaluate a matrix-valued callable at every grid node."""
    return SampledMatrixFunction(
        grid, np.stack([np.atleast_2d(np.asarray(fn(x), dtype=complex)) for x in grid.points])
    )


def as_matrix(value, rows: Optional[int] = None) -> np.ndarray:
    """Coerce scalars, lists and arrays to a 2-d complex array."""
    m = np.atleast_2d(np.asarray(value, dtype=complex))
    if rows is not None and m.shape[0] != rows:
        raise ValueError(f"expected {rows} rows, got shape {m.shape}")
    return m


def herm(m: np.ndarray) -> np.ndarray:
    """Hermitian part ``(M + M*)/2``."""
    return 0.5 * (m + m.conj().swapaxes(-1, -2))


def norm(m: np.ndarray) -> float:
    """Spectral norm; the 2-norm for vectors."""
    m = np.asarray(m)
    if m.ndim < 2:
        return float(np.linalg.norm(m))
    return float(np.linalg.norm(m, 2))


def hermitian_defect(m: np.ndarray) -> float:
    return norm(m - m.conj().T)


def min_eig(m: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian part of ``m``."""
    return float(np.linalg.eigvalsh(herm(np.asarray(m)))[0])


def is_hermitian(m: np.ndarray, tol: float = 1e-12) -> bool:
    return hermitian_defect(m) <= tol * max(1.0, norm(m))


def is_psd(m: np.ndarray, tol: float = 1e-10) -> bool:
    return min_eig(m) >= -tol * max(1.0, norm(m))


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Hermitian positive semidefinite square root via an eigendecomposition."""
    w, v = np.linalg.eigh(herm(m))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def matrix_exp(m) -> np.ndarray:
    """Matrix exponential.

    Nilpotent input is summed as a finite series; everything else goes to
    scaling-and-squaring with a degree-13 Padé approximant
    (:func:`scipy.linalg.expm`).
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix_exp needs a square matrix, got shape {m.shape}")
    n = m.shape[0]
    power = m.copy()
    terms = [np.eye(n, dtype=complex)]
    for k in range(1, n + 1):
        if not power.any():
            return sum(terms)
        terms.append(power / math.factorial(k))
        power = power @ m
    if not power.any():
        return sum(terms)
    return scipy.linalg.expm(m)


def upper_branch(z: complex) -> complex:
    """Square root with ``Im > 0``; positive reals map to the positive root."""
    s = cmath.sqrt(z)
    if s.imag < 0 or (s.imag == 0 and s.real < 0):
        s = -s
    return s


def lower_branch(z: complex) -> complex:
    """The opposite root of :func:`upper_branch`."""
    return -upper_branch(z)


BRANCHES = {"upper": upper_branch, "lower": lower_branch}


def matrix_sqrt_primary(m, branch: Branch = upper_branch, tol: float = 1e-14) -> np.ndarray:
    """Primary square root through the complex Schur form.

    ``branch`` picks the root of each eigenvalue; equal eigenvalues always get
    equal roots, so the result is a primary matrix function of ``m`` and
    commutes with everything that commutes with ``m``.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix_sqrt_primary needs a square matrix, got {m.shape}")
    t, z = scipy.linalg.schur(m, output="complex")
    n = t.shape[0]
    scale = max(norm(m), 1.0)
    diag = np.diag(t)
    if np.min(np.abs(diag)) <= tol * scale:
        raise ValueError("square-root branch undefined at zero eigenvalue")
    r = np.zeros_like(t)
    for i in range(n):
        r[i, i] = branch(complex(diag[i]))
    for d in range(1, n):
        for i in range(n - d):
            j = i + d
            denom = r[i, i] + r[j, j]
            if abs(denom) <= tol * scale:
                raise ValueError("branch choice gives opposite roots of one eigenvalue")
            s = t[i, j] - r[i, i + 1:j] @ r[i + 1:j, j]
            r[i, j] = s / denom
    return z @ r @ z.conj().T


def solve_sylvester(a, b, c, gap_tol: float = 1e-8) -> np.ndarray:
    """Solve ``a X - X b = c``.

    The GBDT identity uses ``b = a*``.  A relative spectral gap below
    ``gap_tol`` is treated as a collision.
    """
    a, b, c = as_matrix(a), as_matrix(b), as_matrix(c)
    ea, eb = np.linalg.eigvals(a), np.linalg.eigvals(b)
    scale = max(1.0, np.max(np.abs(ea)), np.max(np.abs(eb)))
    gap = np.min(np.abs(ea[:, None] - eb[None, :]))
    if gap < gap_tol * scale:
        raise SylvesterSingularError(
            "Sylvester equation singular; use quadrature route for S(x)"
        )
    return scipy.linalg.solve_sylvester(a, -b, c)


def integrate_ode(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    initial,
    grid: Grid,
) -> SampledMatrixFunction:
    """Classical fixed-step RK4 for ``Y' = rhs(x, Y)`` on ``grid``."""
    y = as_matrix(initial).copy()
    h = grid.spacing
    xs = grid.points
    out = np.empty((grid.nodes,) + y.shape, dtype=complex)
    out[0] = y
    for i in range(grid.nodes - 1):
        x = xs[i]
        k1 = rhs(x, y)
        k2 = rhs(x + h / 2, y + (h / 2) * k1)
        k3 = rhs(x + h / 2, y + (h / 2) * k2)
        k4 = rhs(x + h, y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = y
    return SampledMatrixFunction(grid, out)


def integrate_linear(
    coefficient: Callable[[float], np.ndarray],
    initial,
    grid: Grid,
) -> SampledMatrixFunction:
    """RK4 for the linear system ``Y' = M(x) Y``; ``M`` is evaluated once per point."""
    y = as_matrix(initial).copy()
    h = grid.spacing
    xs = grid.points
    out = np.empty((grid.nodes,) + y.shape, dtype=complex)
    out[0] = y
    m_left = coefficient(xs[0])
    for i in range(grid.nodes - 1):
        x = xs[i]
        m_mid = coefficient(x + h / 2)
        m_right = coefficient(x + h)
        k1 = m_left @ y
        k2 = m_mid @ (y + (h / 2) * k1)
        k3 = m_mid @ (y + (h / 2) * k2)
        k4 = m_right @ (y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = y
        m_left = m_right
    return SampledMatrixFunction(grid, out)


def cumulative_simpson(values: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral of samples along axis 0 at every node.

    Even nodes use composite Simpson; odd nodes add a one-panel rule that is
    exact for quadratics (built on three neighbouring nodes), which keeps the
    O(h^4) error at every node.  Two nodes fall back to the trapezoid rule.
    """
    f = np.asarray(values)
    n = f.shape[0]
    out = np.zeros_like(f, dtype=np.result_type(f.dtype, float))
    if n == 1:
        return out
    if n == 2:
        out[1] = 0.5 * h * (f[0] + f[1])
        return out
    pairs = (h / 3.0) * (f[0:-2:2] + 4 * f[1:-1:2] + f[2::2])
    out[2::2] = np.cumsum(pairs, axis=0)
    out[1] = (h / 12.0) * (5 * f[0] + 8 * f[1] - f[2])
    odd = np.arange(3, n, 2)
    if odd.size:
        out[odd] = out[odd - 1] + (h / 12.0) * (-f[odd - 2] + 8 * f[odd - 1] + 5 * f[odd])
    return out


def quadrature_cumulative(f: SampledMatrixFunction) -> SampledMatrixFunction:
    """``x -> int_start^x f`` at every node of ``f``'s grid."""
    return SampledMatrixFunction(f.grid, cumulative_simpson(f.values, f.grid.spacing))


def central_difference(fn: Callable[[float], np.ndarray], x: float, h: float) -> np.ndarray:
    return (np.asarray(fn(x + h)) - np.asarray(fn(x - h))) / (2 * h)


def second_difference(fn: Callable[[float], np.ndarray], x: float, h: float) -> np.ndarray:
    return (np.asarray(fn(x + h)) - 2 * np.asarray(fn(x)) + np.asarray(fn(x - h))) / h**2


def adjugate(m) -> np.ndarray:
    """Classical adjoint: ``adj(M) M = det(M) I``, defined for singular ``M`` too."""
    m = as_matrix(m)
    n = m.shape[0]
    if n == 1:
        return np.ones((1, 1), dtype=complex)
    out = np.empty((n, n), dtype=complex)
    for i in range(n):
        for k in range(n):
            minor = np.delete(np.delete(m, i, axis=0), k, axis=1)
            out[k, i] = (-1) ** (i + k) * np.linalg.det(minor)
    return out
