"""Independent closed forms used as test oracles.

Nothing here calls into the package; every formula is written out from
scalar arithmetic so that a bug in the library cannot cancel itself.
"""

from __future__ import annotations

import cmath

import numpy as np

J2 = np.diag([1.0, -1.0]).astype(complex)


class Scalar71:
    """Closed forms of the scalar seed ``n = p = 1``, ``A = a``, ``d = 0``."""

    def __init__(self, a, c, alpha, f1, f2, Q):
        self.a, self.c, self.al = complex(a), float(c), complex(alpha)
        self.f1, self.f2, self.Q = complex(f1), complex(f2), complex(Q)

    def _e(self, x):
        return cmath.exp(1j * x * self.Q), cmath.exp(-1j * x * self.Q)

    def a_Lambda(self, x):
        """``a Lambda(x)`` as a 1 x 2 row."""
        a, c, Q, f1, f2 = self.a, self.c, self.Q, self.f1, self.f2
        e1, e2 = self._e(x)
        first = a * (f1 * e1 + f2 * e2)
        second = self.al * ((a + c + Q) * f1 * e1 + (a + c - Q) * f2 * e2)
        return np.array([[first * cmath.exp(1j * c * x), second * cmath.exp(-1j * c * x)]])

    def S(self, x):
        a, c, Q, f1, f2 = self.a, self.c, self.Q, self.f1, self.f2
        e1, e2 = self._e(x)
        val = 1j / (a - a.conjugate()) * (
            abs(f1 * e1 + f2 * e2) ** 2 - abs((a + c + Q) * f1 * e1 + (a + c - Q) * f2 * e2) ** 2 / abs(a) ** 2
        )
        return val.real

    def positivity_lhs(self):
        """``i(a-bar - a)(|a(f1+f2)|^2 - |(a+c+Q) f1 + (a+c-Q) f2|^2)``; positive iff S(0) > 0."""
        a, c, Q, f1, f2 = self.a, self.c, self.Q, self.f1, self.f2
        val = 1j * (a.conjugate() - a) * (abs(a * (f1 + f2)) ** 2 - abs((a + c + Q) * f1 + (a + c - Q) * f2) ** 2)
        return val.real

    def beta(self, x):
        return np.array([[cmath.exp(1j * self.c * x), cmath.exp(-1j * self.c * x) * self.al]])

    def beta_tilde(self, x):
        a, c, Q, f1, f2, al = self.a, self.c, self.Q, self.f1, self.f2, self.al
        cq = Q.conjugate()
        e1, e2 = cmath.exp(-1j * x * cq), cmath.exp(1j * x * cq)
        coef = a.conjugate() * (f1.conjugate() * e1 + f2.conjugate() * e2) - al.conjugate() * (
            ((a + c + Q) * f1).conjugate() * e1 + ((a + c - Q) * f2).conjugate() * e2
        )
        return self.beta(x) - 1j / (a * abs(a) ** 2 * self.S(x)) * coef * self.a_Lambda(x)

    def v(self, x, lam):
        a = self.a
        aL = self.a_Lambda(x)
        return np.eye(2) - 1j * lam / (a.conjugate() * abs(a) ** 2 * (a - lam) * self.S(x)) * J2 @ aL.conj().T @ aL

    def z1(self, lam):
        z = cmath.sqrt(self.c * (2 * lam + self.c))
        return z if z.imag > 0 else -z

    def weyl(self, lam, S0):
        """Rational form ``psi1 / psi2`` of the Weyl function."""
        a, c, Q, f1, f2, al = self.a, self.c, self.Q, self.f1, self.f2, self.al
        ca = a.conjugate()
        z1 = self.z1(lam)
        h = al * ((a + c + Q) * f1 + (a + c - Q) * f2) * (lam + c - z1) - al * a * (f1 + f2) * lam
        mix = (ca + c + Q.conjugate()) * f1.conjugate() + (ca + c - Q.conjugate()) * f2.conjugate()
        k = ca * abs(a) ** 2 * S0
        psi1 = k * (a - lam) * (lam + c - z1) + 1j * al.conjugate() * mix * lam * h
        psi2 = al * k * (lam - a) * lam - 1j * ca * (f1.conjugate() + f2.conjugate()) * lam * h
        return psi1 / psi2


class Jordan72:
    """Closed forms of the seed ``A = [[xi, a], [0, xi]]``, ``Q = [[0, q], [0, 0]]``, ``c = d = 0``."""

    def __init__(self, xi, a, q, f, g, alpha, S0):
        self.xi, self.a, self.q = float(xi), complex(a), complex(q)
        self.f, self.g, self.al = complex(f), complex(g), complex(alpha)
        self.S0 = np.asarray(S0, dtype=complex)

    @property
    def A(self):
        return np.array([[self.xi, self.a], [0, self.xi]], dtype=complex)

    def Lambda(self, x):
        """Columns from the generalized eigenfunction with the unitary factor kept in the second column."""
        f, g, q, xi, al = self.f, self.g, self.q, self.xi, self.al
        return np.array(
            [[f - 1j * q * g * x, al * (f - q * g * (1j * x + 1 / xi))], [g, al * g]], dtype=complex
        )

    def constants(self):
        """``Lambda j beta* = [C1 x + C2; C3]``."""
        f, g, q, xi, al = self.f, self.g, self.q, self.xi, self.al
        w = abs(al) ** 2
        C1 = 1j * q * g * (w - 1)
        C2 = f * (1 - w) + w * q * g / xi
        C3 = g * (1 - w)
        return C1, C2, C3

    def S(self, x):
        C1, C2, C3 = self.constants()
        inc = np.array(
            [
                [abs(C1) ** 2 * x**3 / 3 + (C1 * C2.conjugate()).real * x**2 + abs(C2) ** 2 * x,
                 0.5 * C1 * C3.conjugate() * x**2 + C2 * C3.conjugate() * x],
                [0.5 * C1.conjugate() * C3 * x**2 + C2.conjugate() * C3 * x, abs(C3) ** 2 * x],
            ],
            dtype=complex,
        )
        return self.S0 + inc

    def beta_tilde(self, x):
        C1, C2, C3 = self.constants()
        row = np.array([[(C1 * x + C2).conjugate(), C3.conjugate()]])
        return np.array([[1, self.al]]) - 1j * row @ np.linalg.inv(self.S(x)) @ np.linalg.inv(self.A) @ self.Lambda(x)

    def exp_itA(self, t):
        return cmath.exp(1j * t * self.xi) * np.array([[1, 1j * t * self.a], [0, 1]])


def initial_W_scalar(c: float, alpha: complex, lam: complex, x: float) -> np.ndarray:
    """``W(x)`` for ``H = e^{-icxj} K e^{icxj}``, ``p = 1``, as a 2 x 2 exponential product.

    In rotated coordinates ``y = e^{icxj} w`` the system has the constant
    coefficient ``i(lam j K + c j)``, so ``W = e^{-icxj} expm(i x (lam jK + c j))``.
    The exponential is summed by eigen-decomposition of the 2 x 2 coefficient.
    """
    K = np.array([[1, alpha], [np.conj(alpha), 1]], dtype=complex)
    M = 1j * (lam * J2 @ K + c * J2)
    vals, vecs = np.linalg.eig(M)
    E = vecs @ np.diag(np.exp(vals * x)) @ np.linalg.inv(vecs)
    rot = np.diag([cmath.exp(-1j * c * x), cmath.exp(1j * c * x)])
    return rot @ E
