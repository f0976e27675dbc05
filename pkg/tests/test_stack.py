import numpy as np
import pytest

from fefetsim.constants import EPS0, NI_SI, thermal_voltage
from fefetsim.ferro import LandauCoefficients
from fefetsim.stack import (
    CHANNEL,
    ConfigurationError,
    SolverError,
    Stack1D,
    build_mesh,
    initial_slice_state,
    self_consistent_point,
    solve_poisson,
)
from fefetsim.traps import TrapDistribution

from oracles import mis_surface_potential


def _neutrality(sol):
    tot = sol.q_gate + sol.q_trap + sol.q_semi + sol.q_back
    return abs(tot) / max(abs(sol.q_gate), abs(sol.q_back), 1e-12)


def test_mesh_node_count_and_tags():
    st = build_mesh(Stack1D())
    assert 80 <= st.x.size <= 400
    assert np.all(np.diff(st.x) > 0)
    assert st.x[-1] == pytest.approx(10e-9 + 1e-9 + 6e-9 + 30e-9)
    assert (st.tags == CHANNEL).sum() > 10


def test_bad_thickness():
    with pytest.raises(ConfigurationError):
        build_mesh(Stack1D(t_IL=0.0))


def test_linear_dielectric_stack():
    # no free charge: MIM-like series capacitor, gate charge = V * C_series
    st = build_mesh(Stack1D(t_ch=6e-9))
    sol = solve_poisson(st, 0.0, -0.3)
    c = EPS0 / (10e-9 / 30 + 1e-9 / 3.9 + 6e-9 / 11.7 + 30e-9 / 3.9)
    assert sol.q_gate == pytest.approx(-0.3 * c, rel=1e-3)
    assert _neutrality(sol) < 1e-6


@pytest.mark.parametrize("v", [-1.0, 0.0, 1.0, 3.0])
def test_charge_neutrality_with_traps(v):
    sol = solve_poisson(build_mesh(Stack1D()), 0.1, v, TrapDistribution())
    assert sol.converged
    assert _neutrality(sol) < 1e-6


def _mis_psi_s(v, refine):
    na = 1e23  # m^-3
    phi_b = thermal_voltage(300.0) * np.log(na / NI_SI)
    st = build_mesh(Stack1D(t_ch=400e-9, t_BOX=2e-9, doping=-na, back_workfunction=4.61 + phi_b,
                            gate_workfunction=4.61, mesh_refine=refine))
    sol = solve_poisson(st, 0.0, v)
    il_end = np.flatnonzero(st.tags == CHANNEL)[0]
    t_eq = 10e-9 * 3.9 / 30 + 1e-9  # ferro + IL as one SiO2-equivalent layer
    return sol.psi[il_end] + phi_b, mis_surface_potential(v + phi_b, na, t_eq, 3.9, NI_SI)


@pytest.mark.parametrize("v", [0.3, 1.0])
def test_mis_surface_potential_against_charge_sheet(v):
    psi_s, ref = _mis_psi_s(v, 1)
    assert psi_s == pytest.approx(ref, abs=1e-3)


def test_mis_strong_inversion_converges_with_mesh():
    errs = [abs(np.subtract(*_mis_psi_s(2.0, r))) for r in (1, 2, 4)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_polarization_sensitivity_matches_finite_difference():
    st = build_mesh(Stack1D())
    a = solve_poisson(st, 0.05, 0.5, TrapDistribution())
    b = solve_poisson(st, 0.05 + 1e-5, 0.5, TrapDistribution(), psi0=a.psi)
    fd = (b.e_ferro - a.e_ferro) / 1e-5
    assert a.de_ferro_dP == pytest.approx(fd, rel=1e-3)


def test_mesh_halving_inversion_density():
    for v in (-1.0, 0.5, 1.5, 3.0):
        a = solve_poisson(build_mesh(Stack1D()), 0.15, v, TrapDistribution()).n_inv
        b = solve_poisson(build_mesh(Stack1D(mesh_refine=2)), 0.15, v, TrapDistribution()).n_inv
        assert abs(b / a - 1) < 5e-3


def test_nonconvergence_raises_with_history():
    with pytest.raises(SolverError) as err:
        solve_poisson(build_mesh(Stack1D()), 0.1, 2.0, TrapDistribution(), max_iter=1)
    assert len(err.value.history) == 2


def test_self_consistent_point_relaxes_to_remanence_at_high_bias():
    st = build_mesh(Stack1D())
    c = LandauCoefficients()
    s = initial_slice_state(st, c, TrapDistribution(), -0.2, 3.0)
    s = self_consistent_point(s, 3.0, 0.05)
    assert s.converged
    assert s.polarization > 0.15
    assert s.poisson_residual < 1e-6


def test_trap_screening_outweighs_inversion_at_high_bias():
    st = build_mesh(Stack1D())
    s = self_consistent_point(initial_slice_state(st, LandauCoefficients(), TrapDistribution(), 0.18, 3.0), 3.0, 0.05)
    assert abs(s.q_trap) > 1.602176634e-19 * s.n_inv


def test_flat_band_equilibrium_in_one_outer_iteration():
    st = build_mesh(Stack1D(gate_workfunction=4.61, back_workfunction=4.61))
    s = initial_slice_state(st, LandauCoefficients(), None, 0.0, 0.0)
    s = self_consistent_point(s, 0.0, 0.05)
    assert abs(s.polarization) < 1e-12
    assert s.outer_iterations == 1
