import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import Scalar71

from canonsys.canonical import make_beta_exponential
from canonsys.gbdt import PreconditionError, build_seed, gbdt_state, transformed_hamiltonian, transformed_W_at, v0_inverse
from canonsys.initial import initial_params, initial_W
from canonsys.linalg import Grid, norm
from canonsys.weyl import (
    darboux_jform_bounds,
    disk_exit_radius,
    disk_point,
    scalar_weyl_closed_form,
    semi_radii_monotone,
    verify_L2_membership,
    weyl_disk,
    weyl_disk_from_W,
    weyl_function_explicit,
)

# frozen from the rational closed form of the scalar seed (lower Q branch)
FROZEN_PHI = {
    1j: -0.7695070763512164 - 0.22474420438954734j,
    1 + 1j: -0.8625680074588403 - 0.15885675045132952j,
    -0.5 + 2j: -0.8493341210077465 - 0.26085579875193615j,
}
RADII = [0.5, 1.0, 2.0, 5.0]


@pytest.fixture(scope="module")
def phi71(state71_long):
    return weyl_function_explicit(state71_long)


@pytest.mark.parametrize("lam", list(FROZEN_PHI))
def test_explicit_weyl_matches_rational_oracle(state71, seed71, phi71, lam):
    oracle = Scalar71(1 + 1j, 1.0, 1.0, 1.0, 0.3, seed71.Q[0, 0]).weyl(lam, seed71.S0[0, 0].real)
    assert abs(phi71(lam)[0, 0] - oracle) <= 1e-9
    assert abs(scalar_weyl_closed_form(state71)(lam) - oracle) <= 1e-12
    assert oracle == pytest.approx(FROZEN_PHI[lam], abs=1e-13)


def test_explicit_weyl_at_spectrum_of_A(phi71, seed71):
    # lambda = a is handled by the determinant scaling of v(0)
    oracle = Scalar71(1 + 1j, 1.0, 1.0, 1.0, 0.3, seed71.Q[0, 0]).weyl(1 + 1j, seed71.S0[0, 0].real)
    assert np.isfinite(phi71(1 + 1j)).all()
    assert abs(phi71(1 + 1j)[0, 0] - oracle) < 1e-9


def test_weyl_of_initial_system_lies_in_disks():
    # without a transformation the Weyl function is E1 ratio of the initial system
    spec = make_beta_exponential(1.0, 0.0, 1.0)
    lam = 1j
    E1 = initial_params(1.0, 1.0, lam).E1
    phi = E1[1:] @ np.linalg.inv(E1[:1])
    disks = [weyl_disk(spec, lam, r) for r in RADII]
    assert min(d.membership(phi) for d in disks) >= -1e-8
    assert semi_radii_monotone(disks) <= 1e-8
    W = lambda x: initial_W(initial_params(1.0, 1.0, lam), x)
    assert disk_exit_radius(W, lam, phi, RADII) is None
    assert disk_exit_radius(W, lam, phi + 0.5, RADII) is not None


@pytest.mark.parametrize("lam", [1j, 0.5 + 1.5j])
def test_disk_membership_and_semi_radii(state71_long, phi71, lam):
    f = phi71(lam)
    v0inv = v0_inverse(state71_long, lam)
    disks = [weyl_disk_from_W(transformed_W_at(state71_long, lam, r, v0inv), lam, r) for r in RADII]
    assert min(d.membership(f) for d in disks) >= -1e-8
    assert semi_radii_monotone(disks) <= 1e-8
    # the semi-radii shrink strictly for a growing interval
    assert disks[-1].rhoL[0, 0] < disks[0].rhoL[0, 0]


def test_l2_bound(state71_long, phi71):
    lam = 1j
    v0inv = v0_inverse(state71_long, lam)
    W = lambda x: transformed_W_at(state71_long, lam, x, v0inv)
    rep = verify_L2_membership(transformed_hamiltonian(state71_long), W, phi71(lam), lam, [1.0, 2.0, 4.0])
    assert rep.bound == pytest.approx(0.5)
    assert all(v <= rep.bound + 1e-6 for v in rep.max_eigenvalues)
    assert rep.bounded and rep.monotone


def test_l2_rejects_lower_half_plane(state71_long):
    with pytest.raises(ValueError):
        verify_L2_membership(transformed_hamiltonian(state71_long), lambda x: np.eye(2), np.zeros((1, 1)), -1j, [1.0])


@settings(max_examples=30, deadline=None)
@given(
    st.floats(min_value=0, max_value=1),
    st.floats(min_value=0, max_value=6.28),
    st.floats(min_value=0.1, max_value=3),
)
def test_disk_points_are_members(rad, angle, r):
    W = initial_W(initial_params(1.0, 1.0, 0.3 + 1j), r)
    disk = weyl_disk_from_W(W, 0.3 + 1j, r)
    point = disk_point(disk, rad * np.exp(1j * angle))
    assert disk.membership(point) >= -1e-9 * (1 + norm(disk.form))


def test_disk_point_rejects_non_contraction():
    disk = weyl_disk_from_W(np.eye(2), 1j)
    with pytest.raises(ValueError):
        disk_point(disk, 1.5)


def test_darboux_matrix_is_j_expansive(state71):
    for lam in (1j, 2 + 0.5j):
        a, b = darboux_jform_bounds(state71, lam)
        assert a >= -1e-12 and b >= -1e-12


def test_explicit_weyl_preconditions():
    seed0 = build_seed([[1 + 1j]], [[1.0]], [[0.3]], [[1.0]], c=0.0)
    with pytest.raises(PreconditionError):
        weyl_function_explicit(gbdt_state(seed0, Grid.on(1.0, 11)))


def test_explicit_weyl_rejects_lower_half_plane(phi71):
    with pytest.raises(ValueError):
        phi71(-1j)
