"""Border traps in the interfacial oxide, in quasi-static equilibrium.

Trap energies are given relative to the local intrinsic level (midgap),
so the default window (-Eg/2, +Eg/2) spans the silicon gap.  Levels move
rigidly with the local electrostatic potential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .constants import EG_SI, Q, thermal_voltage


@dataclass(frozen=True)
class TrapDistribution:
    density_acceptor: float = 8e26  # eV^-1 m^-3
    density_donor: float = 4e26  # eV^-1 m^-3
    acceptor_window: tuple = (-EG_SI / 2, EG_SI / 2)  # eV from midgap
    donor_window: tuple = (-EG_SI / 2, EG_SI / 2)
    spatial_extent: float = 1e-9  # m
    energy_grid_points: int = 129

    def __post_init__(self):
        if self.density_acceptor < 0 or self.density_donor < 0:
            raise ValueError("trap densities must be non-negative")
        for lo, hi in (self.acceptor_window, self.donor_window):
            if not lo < hi:
                raise ValueError(f"empty energy window ({lo}, {hi})")
        if self.energy_grid_points < 2:
            raise ValueError("need at least 2 energy grid points")

    def grid(self, window):
        e = np.linspace(window[0], window[1], self.energy_grid_points)
        w = np.full(e.size, e[1] - e[0])
        w[[0, -1]] *= 0.5
        return e, w


def equilibrium_occupancy(E_t, E_F, T: float):
    """Fermi-Dirac occupancy of a level at E_t (eV) for Fermi level E_F (eV)."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    return expit(-(np.asarray(E_t) - E_F) / thermal_voltage(T))


def trap_charge_density(dist: TrapDistribution, local_potential, fermi_level: float = 0.0,
                        T: float = 300.0, derivative: bool = False):
    """Trap charge (C/m^3) at each IL node for the given potentials (V).

    ``fermi_level`` is in eV on the same scale as the midgap energy -psi.
    With ``derivative`` the slope d(rho)/d(psi) is returned as well.
    """
    psi = np.atleast_1d(np.asarray(local_potential, dtype=float))
    vt = thermal_voltage(T)
    rho = np.zeros_like(psi)
    drho = np.zeros_like(psi)
    for density, window, sign in ((dist.density_acceptor, dist.acceptor_window, -1.0),
                                  (dist.density_donor, dist.donor_window, 1.0)):
        if density == 0:
            continue
        e, w = dist.grid(window)
        # level energy e - psi against the Fermi level
        f = equilibrium_occupancy(e[None, :] - psi[:, None], fermi_level, T)
        if sign < 0:
            rho -= Q * density * (f @ w)
        else:
            rho += Q * density * ((1.0 - f) @ w)
        drho -= Q * density * ((f * (1.0 - f)) @ w) / vt
    if np.ndim(local_potential) == 0:
        rho, drho = rho[0], drho[0]
    return (rho, drho) if derivative else rho
