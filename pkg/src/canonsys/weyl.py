"""Weyl disks of canonical systems and explicit Weyl functions of GBDT-transformed systems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .canonical import CanonicalSystemSpec, fundamental_solution_oracle
from .gbdt import GBDTState, IsolatedPointError, PreconditionError
from .initial import initial_params
from .linalg import Grid, adjugate, cumulative_simpson, herm, min_eig, norm, psd_sqrt


@dataclass(frozen=True)
class WeylDisk:
    """Disk ``{rhoL w rhoR + center : w* w <= I}`` built from ``A = W(r)* j W(r)``."""

    r: float
    lam: complex
    form: np.ndarray
    rhoL: np.ndarray
    rhoR: np.ndarray
    center: np.ndarray

    @property
    def p(self) -> int:
        return self.form.shape[0] // 2

    def membership_value(self, phi: np.ndarray) -> np.ndarray:
        """``[I phi*] A [I; phi]``; nonnegative exactly when ``phi`` lies in the disk."""
        p = self.p
        col = np.vstack([np.eye(p), np.atleast_2d(phi)])
        return herm(col.conj().T @ self.form @ col)

    def membership(self, phi: np.ndarray) -> float:
        """Smallest eigenvalue of :meth:`membership_value`."""
        return min_eig(self.membership_value(phi))

    def contains(self, phi: np.ndarray, tol: float = 1e-8) -> bool:
        return self.membership(phi) >= -tol


def weyl_disk_from_W(W: np.ndarray, lam: complex, r: float = float("nan")) -> WeylDisk:
    """Disk data from the normalized fundamental solution value ``W(r, lambda)``."""
    lam = complex(lam)
    if lam.imag <= 0:
        raise ValueError("Weyl disks need Im(lambda) > 0")
    W = np.asarray(W, dtype=complex)
    p = W.shape[0] // 2
    j = np.diag(np.r_[np.ones(p), -np.ones(p)])
    form = herm(W.conj().T @ j @ W)
    a11, a12, a21, a22 = form[:p, :p], form[:p, p:], form[p:, :p], form[p:, p:]
    if min_eig(-a22) < 1 - 1e-8:
        raise ArithmeticError("internal inconsistency: -A22 >= I fails (is H nonnegative?)")
    a22_inv = np.linalg.inv(a22)
    rhoL = psd_sqrt(-a22_inv)
    rhoR = psd_sqrt(a11 - a12 @ a22_inv @ a21)
    center = -a22_inv @ a21
    return WeylDisk(r=r, lam=lam, form=form, rhoL=rhoL, rhoR=rhoR, center=center)


def weyl_disk(spec: CanonicalSystemSpec, lam: complex, r: float, step: float = 1e-3) -> WeylDisk:
    """Disk at ``r`` with ``W(r, lambda)`` from the RK4 oracle."""
    if complex(lam).imag <= 0:
        raise ValueError("Weyl disks need Im(lambda) > 0")
    if spec.kind != "canonical":
        raise ValueError("Weyl disks are defined for canonical (nonnegative) systems")
    m = spec.signature.m
    if r == 0:
        return weyl_disk_from_W(np.eye(m), lam, 0.0)
    nodes = max(2, int(np.ceil(r / step)) + 1)
    W = fundamental_solution_oracle(spec, lam, Grid.on(r, nodes)).values[-1]
    return weyl_disk_from_W(W, lam, r)


def disk_point(disk: WeylDisk, omega) -> np.ndarray:
    """``rhoL omega rhoR + center`` for a contraction ``omega``."""
    omega = np.atleast_2d(np.asarray(omega, dtype=complex))
    if norm(omega) > 1 + 1e-12:
        raise ValueError("omega must be a contraction (omega* omega <= I)")
    return disk.rhoL @ omega @ disk.rhoR + disk.center


def semi_radii_monotone(disks: Sequence[WeylDisk], tol: float = 1e-8) -> float:
    """Worst increase of either semi-radius along disks ordered by ``r`` (<= tol means monotone)."""
    worst = 0.0
    for first, second in zip(disks[:-1], disks[1:]):
        worst = max(worst, -min_eig(first.rhoL - second.rhoL), -min_eig(first.rhoR - second.rhoR))
    return worst


def _scaled_v0(state: GBDTState, lam: complex) -> np.ndarray:
    """``det(A - lambda) v(0, lambda)``, which stays finite on the spectrum of ``A``."""
    seed = state.seed
    n = seed.n
    shifted = seed.A - lam * np.eye(n)
    lam0 = seed.Lambda(0.0)
    inner = state.S_solve(0.0, adjugate(shifted) @ lam0)
    left = lam0.conj().T @ seed.A_inv.conj().T
    m = seed.signature.m
    return np.linalg.det(shifted) * np.eye(m) - 1j * lam * seed.j @ left @ inner


def weyl_function_explicit(state: GBDTState) -> Callable[[complex], np.ndarray]:
    """Evaluator ``lambda -> [0 I] v(0) E1 ([I 0] v(0) E1)^{-1}``.

    ``v(0, lambda)`` is replaced by ``det(A - lambda) v(0, lambda)``; the
    scalar factor cancels in the ratio and the evaluator extends to the
    eigenvalues of ``A``.  Singular denominators raise
    :class:`IsolatedPointError`.
    """
    seed = state.seed
    if seed.c == 0:
        raise PreconditionError("the explicit Weyl function needs c != 0")
    if seed.d != 0 or not seed.signature.square:
        raise PreconditionError("the explicit Weyl function needs d = 0 and m1 = m2")
    if min_eig(seed.S0) <= 0:
        raise PreconditionError("the explicit Weyl function needs S(0) > 0")
    p = seed.signature.m1

    def phi(lam: complex) -> np.ndarray:
        lam = complex(lam)
        if lam.imag <= 0:
            raise ValueError("the Weyl function is evaluated in the upper half-plane")
        E1 = initial_params(seed.c, seed.alpha, lam).E1
        col = _scaled_v0(state, lam) @ E1
        top, bottom = col[:p], col[p:]
        if np.linalg.cond(top) > 1e12:
            raise IsolatedPointError(f"Weyl function denominator is singular at lambda={lam}")
        return bottom @ np.linalg.inv(top)

    return phi


def scalar_weyl_closed_form(state: GBDTState) -> Callable[[complex], complex]:
    """Rational closed form ``psi1 / psi2`` of the Weyl function for ``n = p = 1``."""
    seed = state.seed
    if seed.n != 1 or seed.signature.m1 != 1 or seed.c == 0:
        raise PreconditionError("the scalar closed form needs n = p = 1 and c != 0")
    a = complex(seed.A[0, 0])
    c = seed.c
    al = complex(seed.alpha[0, 0])
    f1, f2 = complex(seed.f1[0, 0]), complex(seed.f2[0, 0])
    Q = complex(seed.Q[0, 0])
    S0 = float(seed.S0[0, 0].real)
    ca = np.conj(a)
    k = ca * abs(a) ** 2 * S0
    mix = (ca + c + np.conj(Q)) * np.conj(f1) + (ca + c - np.conj(Q)) * np.conj(f2)

    def phi(lam: complex) -> complex:
        z1 = initial_params(c, al, lam).z1
        h = al * ((a + c + Q) * f1 + (a + c - Q) * f2) * (lam + c - z1) - al * a * (f1 + f2) * lam
        psi1 = k * (a - lam) * (lam + c - z1) + 1j * np.conj(al) * mix * lam * h
        psi2 = al * k * (lam - a) * lam - 1j * ca * (np.conj(f1) + np.conj(f2)) * lam * h
        return psi1 / psi2

    return phi


@dataclass(frozen=True)
class L2Report:
    lengths: tuple
    max_eigenvalues: tuple
    bound: float

    @property
    def bounded(self) -> bool:
        return all(v <= self.bound + 1e-6 for v in self.max_eigenvalues)

    @property
    def monotone(self) -> bool:
        vals = self.max_eigenvalues
        return all(b >= a - 1e-10 for a, b in zip(vals[:-1], vals[1:]))


def verify_L2_membership(
    spec: CanonicalSystemSpec,
    W_at: Callable[[float], np.ndarray],
    phi: np.ndarray,
    lam: complex,
    lengths: Sequence[float],
    spacing: float = 1e-2,
) -> L2Report:
    """``int_0^L [I phi*] W* H W [I; phi] dx`` for each ``L`` against ``1/(2 Im lambda)``."""
    lam = complex(lam)
    if lam.imag <= 0:
        raise ValueError("the L2 bound is stated for Im(lambda) > 0")
    Lmax = max(lengths)
    nodes = int(round(Lmax / spacing)) + 1
    grid = Grid.on(Lmax, nodes)
    phi = np.atleast_2d(phi)
    p = phi.shape[0]
    col = np.vstack([np.eye(p), phi])
    vals = []
    for x in grid.points:
        y = W_at(x) @ col
        vals.append(y.conj().T @ spec.H(x) @ y)
    acc = cumulative_simpson(np.stack(vals), grid.spacing)
    eigs = []
    for L in lengths:
        i = grid.index_of(L)
        if i is None:
            raise ValueError(f"length {L} is not a multiple of the spacing")
        eigs.append(float(np.linalg.eigvalsh(herm(acc[i]))[-1]))
    return L2Report(tuple(lengths), tuple(eigs), 1.0 / (2 * lam.imag))


def darboux_jform_bounds(state: GBDTState, lam: complex) -> tuple[float, float]:
    """Smallest eigenvalues of ``v0* j v0 - j`` and ``v0 j v0* - j`` (both >= 0 in the upper half-plane)."""
    from .gbdt import darboux_matrix_v

    v0 = darboux_matrix_v(state, 0.0, lam)
    j = state.seed.j
    return min_eig(v0.conj().T @ j @ v0 - j), min_eig(v0 @ j @ v0.conj().T - j)


def disk_exit_radius(
    W_at: Callable[[float], np.ndarray],
    lam: complex,
    phi: np.ndarray,
    radii: Sequence[float],
    tol: float = 1e-8,
) -> Optional[float]:
    """First radius whose disk excludes ``phi``; None if every disk contains it."""
    for r in radii:
        if not weyl_disk_from_W(W_at(r), lam, r).contains(phi, tol):
            return r
    return None


def uniqueness_threshold_met(c: float, alpha, lam: complex, threshold: float = 2.0) -> bool:
    """Whether ``Im z1(lambda)`` reaches the threshold used for uniqueness spot checks."""
    return initial_params(c, alpha, lam).z1.imag >= threshold
