import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fefetsim.constants import Q
from fefetsim.traps import TrapDistribution, equilibrium_occupancy, trap_charge_density

from oracles import trap_sheet_charge

VT = 0.025852


def test_occupancy_symmetry_point():
    assert equilibrium_occupancy(0.3, 0.3, 300.0) == pytest.approx(0.5)


def test_occupancy_tail():
    assert equilibrium_occupancy(10 * VT, 0.0, 300.0) < 5e-5


@given(e=st.floats(-1, 1), ef=st.floats(-0.5, 0.5))
def test_occupancy_complement(e, ef):
    f1 = equilibrium_occupancy(e, ef, 300.0)
    f2 = equilibrium_occupancy(2 * ef - e, ef, 300.0)
    assert f1 + f2 == pytest.approx(1.0, abs=1e-12)


def test_occupancy_rejects_zero_temperature():
    with pytest.raises(ValueError):
        equilibrium_occupancy(0.0, 0.0, 0.0)


def test_zero_density_zero_charge():
    d = TrapDistribution(0.0, 0.0)
    np.testing.assert_array_equal(trap_charge_density(d, np.linspace(-1, 1, 7)), 0.0)


def test_saturation_limit():
    d = TrapDistribution(density_donor=0.0)
    rho = trap_charge_density(d, 5.0)  # Fermi level far above the window
    assert rho == pytest.approx(-Q * 8e26 * 1.12, rel=1e-9)
    # saturated sheet charge over 1 nm, about 1.4e-5 C/cm^2
    assert abs(rho) * 1e-9 * 1e-4 == pytest.approx(1.435e-5, rel=2e-3)


@pytest.mark.parametrize("psi", [-0.4, -0.1, 0.0, 0.05, 0.3])
def test_matches_quadrature(psi):
    d = TrapDistribution()
    sheet = trap_charge_density(d, psi) * 1e-9
    ref = trap_sheet_charge(8e26, 4e26, d.acceptor_window, d.donor_window, psi, 0.0, 1e-9, 300.0)
    assert sheet == pytest.approx(ref, rel=1e-4, abs=1e-9)


def test_energy_grid_convergence():
    a = trap_charge_density(TrapDistribution(energy_grid_points=129), 0.17)
    b = trap_charge_density(TrapDistribution(energy_grid_points=257), 0.17)
    assert abs(a - b) < 1e-3 * abs(b)


def test_low_temperature_step_limit():
    d = TrapDistribution(energy_grid_points=2049)
    psi = 0.2
    # levels e - psi below E_F=0 are full: acceptors in (-0.56, psi) filled,
    # donors in (psi, 0.56) empty
    analytic = -Q * 8e26 * (psi + 0.56) + Q * 4e26 * (0.56 - psi)
    assert trap_charge_density(d, psi, T=30.0) == pytest.approx(analytic, rel=0.01)


@settings(max_examples=50)
@given(
    da=st.floats(0, 2e27), dd=st.floats(0, 2e27),
    lo=st.floats(-1.0, 0.4), width=st.floats(0.05, 1.5),
    psi=st.floats(-1.0, 1.0), dpsi=st.floats(1e-4, 0.5),
)
def test_charge_nonincreasing_in_potential(da, dd, lo, width, psi, dpsi):
    d = TrapDistribution(da, dd, (lo, lo + width), (lo, lo + width))
    assert trap_charge_density(d, psi + dpsi) <= trap_charge_density(d, psi) + 1e-6


def test_derivative_matches_finite_difference():
    d = TrapDistribution()
    psi = np.array([-0.3, 0.0, 0.2])
    rho, drho = trap_charge_density(d, psi, derivative=True)
    h = 1e-6
    fd = (trap_charge_density(d, psi + h) - trap_charge_density(d, psi - h)) / (2 * h)
    np.testing.assert_allclose(drho, fd, rtol=1e-5)


def test_invalid_window():
    with pytest.raises(ValueError):
        TrapDistribution(acceptor_window=(0.5, 0.1))
