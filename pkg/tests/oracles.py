"""Independent reference calculations used by the tests.

None of these import the package's numerics; they use brute-force root
bracketing, adaptive quadrature and textbook charge-sheet relations.
"""

import math

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

EPS0 = 8.8541878128e-12
Q = 1.602176634e-19
KB = 1.380649e-23


def landau_field(p, a, b, g):
    return 2 * a * p + 4 * b * p**3 + 6 * g * p**5


def landau_slope(p, a, b, g):
    return 2 * a + 12 * b * p**2 + 30 * g * p**4


def bracket_roots(f, lo, hi, n=20001):
    xs = np.linspace(lo, hi, n)
    ys = np.array([f(x) for x in xs])
    roots = []
    for i in range(n - 1):
        if ys[i] == 0:
            roots.append(xs[i])
        elif ys[i] * ys[i + 1] < 0:
            roots.append(brentq(f, xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15))
    return roots


def ec_pr_bruteforce(a, b, g, p_max=1.0):
    """P_r as the largest positive zero of E(P); E_c as |E| at the slope zero."""
    pr = max(r for r in bracket_roots(lambda p: landau_field(p, a, b, g), 1e-6, p_max))
    pc = min(r for r in bracket_roots(lambda p: landau_slope(p, a, b, g), 1e-6, p_max))
    return abs(landau_field(pc, a, b, g)), pr


def relaxation_rate(a, b, g, rho, p0=1e-6, t_end=5e-9):
    """Fit the initial exponential growth away from P=0 of rho dP/dt = -E(P)."""
    sol = solve_ivp(lambda t, p: -landau_field(p, a, b, g) / rho, (0, t_end), [p0],
                    rtol=1e-11, atol=1e-18, dense_output=True)
    t = np.linspace(0, t_end, 50)
    p = sol.sol(t)[0]
    slope = np.polyfit(t, np.log(p), 1)[0]
    return slope


def trap_sheet_charge(d_acc, d_don, window_acc, window_don, psi, e_f, t_il, T):
    """Sheet charge of a uniform trap slab at uniform potential, by quad."""
    vt = KB * T / Q

    def f(e):
        return 1.0 / (1.0 + math.exp((e - psi - e_f) / vt))

    acc = quad(f, *window_acc, limit=200, epsabs=1e-14)[0]
    don = quad(lambda e: 1.0 - f(e), *window_don, limit=200, epsabs=1e-14)[0]
    return Q * t_il * (-d_acc * acc + d_don * don)


def mis_surface_potential(v_gate, na, t_ox, eps_ox, ni, T=300.0, eps_s=11.7, phi_ms=0.0):
    """Surface potential of a bulk p-type MIS capacitor (exact 1D Boltzmann charge)."""
    vt = KB * T / Q
    p0 = na
    n0 = ni * ni / na
    cox = EPS0 * eps_ox / t_ox

    def qs(psi):
        # charge in the semiconductor per area, opposite in sign to psi
        F2 = (p0 * (math.exp(-psi / vt) + psi / vt - 1.0) + n0 * (math.exp(psi / vt) - psi / vt - 1.0))
        mag = math.sqrt(2.0 * Q * EPS0 * eps_s * vt * max(F2, 0.0))
        return -math.copysign(mag, psi)

    return brentq(lambda psi: v_gate - phi_ms - psi + qs(psi) / cox, -1.0, 2.0, xtol=1e-13)
