"""Closed-form fundamental solutions of the initial system ``H = e^{-icxj} K e^{icxj}``."""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, norm


def block_K(alpha: np.ndarray) -> np.ndarray:
    """``K = [[I, alpha], [alpha*, I]]``."""
    p = alpha.shape[0]
    eye = np.eye(p)
    return np.block([[eye, alpha], [alpha.conj().T, eye]]).astype(complex)


def signature_j(p: int) -> np.ndarray:
    return np.diag(np.r_[np.ones(p), -np.ones(p)]).astype(complex)


def spectral_root(c: float, lam: complex) -> complex:
    """``z1`` with ``z1^2 = c(2 lam + c)`` and ``Im z1 > 0``."""
    z = cmath.sqrt(c * (2 * lam + c))
    if z.imag <= 0:
        z = -z
    return z


@dataclass(frozen=True)
class InitialSolutionParams:
    """Data of the explicit initial solution at a fixed spectral parameter."""

    c: float
    alpha: np.ndarray
    lam: complex
    z1: complex
    z2: complex

    @property
    def p(self) -> int:
        return self.alpha.shape[0]

    def E_block(self, z: complex) -> np.ndarray:
        p = self.p
        return np.vstack([-self.alpha, ((self.lam + self.c - z) / self.lam) * np.eye(p)])

    @property
    def E1(self) -> np.ndarray:
        return self.E_block(self.z1)

    @property
    def E2(self) -> np.ndarray:
        return self.E_block(self.z2)

    @property
    def E(self) -> np.ndarray:
        return np.hstack([self.E1, self.E2])

    @property
    def Z(self) -> np.ndarray:
        p = self.p
        return np.diag(np.r_[np.full(p, self.z1), np.full(p, self.z2)])


def initial_params(c: float, alpha, lam: complex, z1: complex | None = None) -> InitialSolutionParams:
    """Build the parameters; ``z1`` may be supplied to test the other branch."""
    alpha = as_matrix(alpha)
    p = alpha.shape[0]
    if alpha.shape != (p, p) or norm(alpha @ alpha.conj().T - np.eye(p)) > 1e-12:
        raise ValueError("alpha must be a p x p unitary matrix")
    lam = complex(lam)
    c = float(c)
    if c != 0 and lam.imag == 0:
        raise ValueError(
            "explicit initial solution needs Im(lambda) != 0 when c != 0; use the ODE oracle"
        )
    if z1 is None:
        z1 = spectral_root(c, lam) if c != 0 else 0j
    return InitialSolutionParams(c=c, alpha=alpha, lam=lam, z1=complex(z1), z2=-complex(z1))


def initial_W(params: InitialSolutionParams, x: float) -> np.ndarray:
    """Normalized fundamental solution ``W(x, lambda)`` with ``W(0) = I``."""
    p = params.p
    j = signature_j(p)
    if params.c == 0:
        return np.eye(2 * p) + 1j * params.lam * x * (j @ block_K(params.alpha))
    c = params.c
    phase = np.r_[np.full(p, np.exp(-1j * c * x)), np.full(p, np.exp(1j * c * x))]
    growth = np.r_[np.full(p, np.exp(1j * params.z1 * x)), np.full(p, np.exp(1j * params.z2 * x))]
    E = params.E
    return (phase[:, None] * E) @ (growth[:, None] * np.linalg.inv(E))


def initial_hamiltonian(c: float, alpha, x: float) -> np.ndarray:
    alpha = as_matrix(alpha)
    p = alpha.shape[0]
    rot = np.r_[np.full(p, np.exp(-1j * c * x)), np.full(p, np.exp(1j * c * x))]
    return rot[:, None] * block_K(alpha) * rot.conj()[None, :]


def verify_eigenrelation(params: InitialSolutionParams) -> float:
    """``|| E Z E^{-1} - (lambda j K + c j) ||``."""
    if params.c == 0:
        raise ValueError("the eigenrelation is stated for c != 0")
    j = signature_j(params.p)
    E = params.E
    lhs = E @ params.Z @ np.linalg.inv(E)
    rhs = params.lam * (j @ block_K(params.alpha)) + params.c * j
    return norm(lhs - rhs)
