import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from canonsys.linalg import (
    Grid,
    SampledMatrixFunction,
    SylvesterSingularError,
    adjugate,
    cumulative_simpson,
    integrate_linear,
    integrate_ode,
    is_psd,
    lower_branch,
    matrix_exp,
    matrix_sqrt_primary,
    norm,
    psd_sqrt,
    solve_sylvester,
    upper_branch,
)

finite = st.floats(min_value=-2, max_value=2, allow_nan=False, allow_infinity=False)


def complex_matrices(n):
    return st.lists(st.tuples(finite, finite), min_size=n * n, max_size=n * n).map(
        lambda vals: np.array([complex(a, b) for a, b in vals]).reshape(n, n)
    )


def test_grid_nodes_and_lookup():
    g = Grid.on(2.0, 2001)
    assert g.spacing == pytest.approx(1e-3)
    assert g.index_of(1.0) == 1000
    assert g.index_of(1.0005) is None
    assert g.refined(2).nodes == 4001


def test_grid_rejects_degenerate():
    with pytest.raises(ValueError):
        Grid.on(1.0, 1)
    with pytest.raises(ValueError):
        Grid(1.0, 1.0, 5)


def test_sampled_function_at_requires_nodes():
    g = Grid.on(1.0, 11)
    f = SampledMatrixFunction(g, np.zeros((11, 1, 1), complex))
    assert f.at(0.5).shape == (1, 1)
    with pytest.raises(KeyError):
        f.at(0.55)


def test_matrix_exp_nilpotent_is_exact():
    N = np.array([[0, 1, 0], [0, 0, 1], [0, 0, 0]], dtype=complex)
    expected = np.array([[1, 1, 0.5], [0, 1, 1], [0, 0, 1]], dtype=complex)
    assert norm(matrix_exp(N) - expected) == 0.0


def test_matrix_exp_diagonal():
    d = np.diag([1j, -0.5, 2.0])
    assert norm(matrix_exp(d) - np.diag(np.exp(np.diag(d)))) < 1e-14


@settings(max_examples=40, deadline=None)
@given(complex_matrices(3))
def test_matrix_exp_inverse_property(m):
    assert norm(matrix_exp(m) @ matrix_exp(-m) - np.eye(3)) < 1e-9 * max(1.0, np.exp(2 * norm(m)))


def test_sqrt_branches_scalar():
    z = 3 + 4j
    assert upper_branch(z) == pytest.approx(2 + 1j)
    assert lower_branch(z) == pytest.approx(-2 - 1j)
    assert upper_branch(-4) == pytest.approx(2j)


def test_sqrt_primary_of_known_matrix():
    # c(2A + c) for A = 1+i, c = 1 is 3+2i
    root = matrix_sqrt_primary(np.array([[3 + 2j]]), lower_branch)[0, 0]
    assert root == pytest.approx(-1.8173540210239707 - 0.5502505227003375j, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(complex_matrices(3))
def test_sqrt_primary_squares_back(m):
    m = m + 5 * np.eye(3)  # keep the spectrum away from the branch cut
    r = matrix_sqrt_primary(m)
    assert norm(r @ r - m) < 1e-9 * max(1.0, norm(m))
    assert np.all(np.linalg.eigvals(r).imag >= -1e-9)


def test_sqrt_rejects_zero_eigenvalue():
    with pytest.raises(ValueError):
        matrix_sqrt_primary(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_sylvester_scalar_convention():
    # a X - X b = c with a = i, b = -i, c = 1 gives X = 1 / (2i)
    x = solve_sylvester(np.array([[1j]]), np.array([[-1j]]), np.array([[1.0]]))
    assert x[0, 0] == pytest.approx(-0.5j)


def test_sylvester_singular_raises():
    with pytest.raises(SylvesterSingularError):
        solve_sylvester(np.array([[1.0]]), np.array([[1.0]]), np.array([[1.0]]))


@settings(max_examples=40, deadline=None)
@given(complex_matrices(2), complex_matrices(2))
def test_sylvester_residual(a, c):
    a = a + 3j * np.eye(2)
    b = a.conj().T
    x = solve_sylvester(a, b, c)
    assert norm(a @ x - x @ b - c) < 1e-9 * (1 + norm(c)) * (1 + norm(a)) * (1 + norm(x))


def test_sylvester_matches_kronecker_solve():
    # vec(aX - Xb) = (I kron a - b^T kron I) vec(X) with column-major vec
    a = np.array([[1 + 1j, 0.3], [0, 2 + 1j]])
    b = a.conj().T
    c = np.array([[1, 2j], [0.5, 1]])
    eye = np.eye(2)
    op = np.kron(eye, a) - np.kron(b.T, eye)
    expected = np.linalg.solve(op, c.reshape(-1, order="F")).reshape(2, 2, order="F")
    assert norm(solve_sylvester(a, b, c) - expected) < 1e-12


@pytest.mark.parametrize("nodes", [3, 4, 11, 12])
def test_cumulative_simpson_exact_for_quadratics(nodes):
    g = Grid.on(1.3, nodes)
    x = g.points
    vals = 1 - 2 * x + 3 * x**2
    expected = x - x**2 + x**3
    got = cumulative_simpson(vals, g.spacing)
    assert np.max(np.abs(got - expected)) < 1e-13


def test_cumulative_simpson_two_nodes_is_trapezoid():
    got = cumulative_simpson(np.array([1.0, 3.0]), 0.5)
    assert got.tolist() == [0.0, 1.0]


def test_cumulative_simpson_fourth_order():
    errs = []
    for nodes in (41, 81):
        g = Grid.on(2.0, nodes)
        got = cumulative_simpson(np.cos(3 * g.points), g.spacing)
        errs.append(np.max(np.abs(got - np.sin(3 * g.points) / 3)))
    assert errs[0] / errs[1] > 12


@settings(max_examples=30, deadline=None)
@given(st.lists(finite, min_size=4, max_size=4), st.integers(min_value=3, max_value=40))
def test_cumulative_simpson_cubics_at_every_node(coef, nodes):
    g = Grid.on(1.0, nodes)
    x = g.points
    c0, c1, c2, c3 = coef
    vals = c0 + c1 * x + c2 * x**2 + c3 * x**3
    exact = c0 * x + c1 * x**2 / 2 + c2 * x**3 / 3 + c3 * x**4 / 4
    got = cumulative_simpson(vals, g.spacing)
    # odd nodes use a quadratic panel; the cubic term leaves an O(h^4) remainder
    assert np.max(np.abs(got - exact)) < 1e-12 + abs(c3) * g.spacing**4


def test_integrate_linear_rotation():
    g = Grid.on(2.0, 2001)
    gen = np.array([[0, 1], [-1, 0]], dtype=complex)
    sol = integrate_linear(lambda x: gen, np.eye(2), g)
    exact = np.array([[np.cos(2), np.sin(2)], [-np.sin(2), np.cos(2)]])
    assert norm(sol.values[-1] - exact) < 1e-12


def test_integrate_ode_fourth_order():
    errs = []
    for nodes in (21, 41):
        g = Grid.on(1.0, nodes)
        sol = integrate_ode(lambda x, y: 1j * x * y, 1.0, g)
        errs.append(abs(sol.values[-1][0, 0] - cmath.exp(0.5j)))
    assert 12 < errs[0] / errs[1] < 20


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=4).flatmap(complex_matrices))
def test_adjugate_identity(m):
    n = m.shape[0]
    assert norm(adjugate(m) @ m - np.linalg.det(m) * np.eye(n)) < 1e-9 * max(1.0, norm(m)) ** n


def test_adjugate_of_singular_matrix():
    m = np.array([[1, 2], [2, 4]], dtype=complex)
    assert norm(adjugate(m) - np.array([[4, -2], [-2, 1]])) == 0


def test_psd_sqrt():
    m = np.array([[2, 1j], [-1j, 2]])
    r = psd_sqrt(m)
    assert norm(r @ r - m) < 1e-14
    assert is_psd(r)
