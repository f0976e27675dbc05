"""1D electrostatics of one gate-stack slice and its coupling to LGK.

Slice layout along x, gate at x = 0:

    gate | ferroelectric | interfacial oxide | channel | buried oxide | back

Box-method discretization: the displacement D = -eps dpsi/dx + P is
evaluated per element and every interior node balances the net D flux
against the charge in its control volume.  A uniform P_S in the
ferroelectric therefore shows up only as the +-P_S bound sheets at its
two boundaries.  Potentials are measured from the intrinsic level of the
channel at zero quasi-Fermi level.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .constants import EPS0, EPS_SI, EPS_SIO2, NI_SI, PHI_INTRINSIC, Q, thermal_voltage
from .ferro import LandauCoefficients, lgk_advance
from .traps import TrapDistribution, trap_charge_density

log = logging.getLogger(__name__)

FERRO, IL, CHANNEL, BOX = 0, 1, 2, 3
LAYER_NAMES = ("ferroelectric", "interfacial", "channel", "box")

# normalized charge unit for residuals: eps0 * V_T(300 K) / 1 nm
Q_NORM = EPS0 * 0.025852 / 1e-9


class ConfigurationError(ValueError):
    pass


class SolverError(RuntimeError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


@dataclass(frozen=True)
class Stack1D:
    t_F: float = 10e-9
    t_IL: float = 1e-9
    t_ch: float = 6e-9
    t_BOX: float = 30e-9
    eps_F: float = 30.0
    eps_IL: float = EPS_SIO2
    eps_ch: float = EPS_SI
    eps_BOX: float = EPS_SIO2
    doping: float = 0.0  # m^-3, donors positive
    gate_workfunction: float = 4.6  # eV
    back_workfunction: float = 4.6  # eV
    temperature: float = 300.0
    mesh_refine: int = 1
    x: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    tags: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def vt(self) -> float:
        return thermal_voltage(self.temperature)

    @property
    def meshed(self) -> bool:
        return self.x is not None


def _uniform(length, h):
    n = max(1, int(np.ceil(length / h - 1e-9)))
    return np.full(n, length / n)


def _graded(length, h0, h_max, ratio, fine_span):
    """Spacing h0 over fine_span, then growing by ratio up to h_max."""
    if length <= fine_span + 1e-15:
        return _uniform(length, h0)
    steps = list(_uniform(fine_span, h0))
    pos = fine_span
    h = h0
    rest = []
    while pos < length - 1e-15:
        h = min(h * ratio, h_max)
        rest.append(h)
        pos += h
    rest = np.array(rest)
    rest *= (length - fine_span) / rest.sum()
    return np.concatenate([steps, rest])


def build_mesh(stack: Stack1D) -> Stack1D:
    """Attach a deterministic nonuniform mesh to the stack."""
    for name in ("t_F", "t_IL", "t_ch", "t_BOX"):
        if not getattr(stack, name) > 0:
            raise ConfigurationError(f"{name} must be positive")
    if stack.mesh_refine < 1:
        raise ConfigurationError("mesh_refine must be >= 1")
    nm = 1e-9 / stack.mesh_refine
    parts = [
        (FERRO, _uniform(stack.t_F, 0.5 * nm)),
        (IL, _uniform(stack.t_IL, 0.025 * nm)),
        (CHANNEL, _graded(stack.t_ch, 0.25 * nm, 1.0 * nm, 1.25, 5 * 1e-9)),
        (BOX, _graded(stack.t_BOX, 1.0 * nm, 5.0 * nm, 1.25, min(stack.t_BOX, 1e-9) / 2)),
    ]
    h = np.concatenate([p for _, p in parts])
    tags = np.concatenate([np.full(p.size, t) for t, p in parts])
    x = np.concatenate([[0.0], np.cumsum(h)])
    if np.any(np.diff(x) <= 0):
        raise ConfigurationError("degenerate mesh")
    return replace(stack, x=x, tags=tags)


def semiconductor_charge(psi, phi_n, phi_p, doping, T):
    """Boltzmann carriers and space charge.

    Returns ``(n, p, rho)`` in m^-3, m^-3 and C/m^3.  Exponents are clamped
    at +-40 V_T with a logged warning.
    """
    if T <= 0:
        raise ValueError("temperature must be positive")
    vt = thermal_voltage(T)
    un = (np.asarray(psi) - phi_n) / vt
    up = (phi_p - np.asarray(psi)) / vt
    if np.any(np.abs(un) > 40) or np.any(np.abs(up) > 40):
        log.warning("carrier exponent clamped at 40 V_T")
        un = np.clip(un, -40, 40)
        up = np.clip(up, -40, 40)
    n = NI_SI * np.exp(un)
    p = NI_SI * np.exp(up)
    return n, p, Q * (p - n + doping)


@dataclass
class PoissonSolution:
    psi: np.ndarray
    n: np.ndarray
    p: np.ndarray
    rho_trap: np.ndarray
    displacement: np.ndarray  # per element, C/m^2
    iterations: int
    residual_history: list
    converged: bool
    e_ferro: float  # V/m, uniform field in the ferroelectric
    n_inv: float  # m^-2
    q_trap: float  # C/m^2
    q_semi: float  # C/m^2
    q_gate: float
    q_back: float
    dpsi_dP: np.ndarray = field(repr=False, default=None)

    @property
    def de_ferro_dP(self) -> float:
        """Depolarization slope dE_F/dP_S at fixed gate bias."""
        return -self.dpsi_dP[self.ferro_node] / self.t_F

    ferro_node: int = 0
    t_F: float = 0.0


class _Discretization:
    """Geometry-derived arrays reused by every Newton iteration."""

    def __init__(self, stack: Stack1D):
        if not stack.meshed:
            stack = build_mesh(stack)
        self.stack = stack
        x, tags = stack.x, stack.tags
        self.h = np.diff(x)
        eps_by_tag = np.array([stack.eps_F, stack.eps_IL, stack.eps_ch, stack.eps_BOX]) * EPS0
        self.eps = eps_by_tag[tags]
        self.c = self.eps / self.h  # element conductances
        nn = x.size
        self.vol_s = np.zeros(nn)
        self.vol_t = np.zeros(nn)
        for tag, vol in ((CHANNEL, self.vol_s), (IL, self.vol_t)):
            m = tags == tag
            np.add.at(vol, np.flatnonzero(m), 0.5 * self.h[m])
            np.add.at(vol, np.flatnonzero(m) + 1, 0.5 * self.h[m])
        self.ferro_mask = tags == FERRO
        self.ferro_node = int(np.flatnonzero(self.ferro_mask)[-1] + 1)
        self.semi_nodes = np.flatnonzero(self.vol_s > 0)
        self.trap_nodes = np.flatnonzero(self.vol_t > 0)
        self.n_nodes = nn
        self.clamped = self.vol_s[1:-1] > 0

    def boundary(self, v_gate):
        s = self.stack
        return (v_gate - (s.gate_workfunction - PHI_INTRINSIC),
                0.0 - (s.back_workfunction - PHI_INTRINSIC))

    def initial_guess(self, v_gate):
        s = self.stack
        vt = s.vt
        psi_b = vt * np.arcsinh(s.doping / (2 * NI_SI))
        g, b = self.boundary(v_gate)
        x = s.x
        psi = np.interp(x, [0, x[self.ferro_node], x[-1]], [g, psi_b, b])
        psi[self.semi_nodes] = psi_b
        return psi

    def charges(self, psi, P, traps, phi_n, phi_p):
        s = self.stack
        n = np.zeros_like(psi)
        p = np.zeros_like(psi)
        rho_s = np.zeros_like(psi)
        drho_s = np.zeros_like(psi)
        sn = self.semi_nodes
        n[sn], p[sn], rho_s[sn] = semiconductor_charge(psi[sn], phi_n, phi_p, s.doping, s.temperature)
        drho_s[sn] = -Q * (n[sn] + p[sn]) / s.vt
        rho_t = np.zeros_like(psi)
        drho_t = np.zeros_like(psi)
        if traps is not None:
            tn = self.trap_nodes
            rho_t[tn], drho_t[tn] = trap_charge_density(traps, psi[tn], -phi_n, s.temperature, derivative=True)
        D = -self.c * np.diff(psi) + np.where(self.ferro_mask, P, 0.0)
        return n, p, rho_s, drho_s, rho_t, drho_t, D

    def residual_jacobian(self, psi, P, traps, phi_n, phi_p):
        n, p, rho_s, drho_s, rho_t, drho_t, D = self.charges(psi, P, traps, phi_n, phi_p)
        Qn = self.vol_s * rho_s + self.vol_t * rho_t
        dQn = self.vol_s * drho_s + self.vol_t * drho_t
        F = D[1:] - D[:-1] - Qn[1:-1]
        c = self.c
        ab = np.zeros((3, self.n_nodes - 2))
        ab[0, 1:] = -c[1:-1]  # upper
        ab[1] = c[1:] + c[:-1] - dQn[1:-1]
        ab[2, :-1] = -c[1:-1]  # lower
        return F, ab, (n, p, rho_s, rho_t, D)


_DISC_CACHE: dict = {}


def _discretization(stack: Stack1D) -> _Discretization:
    key = id(stack)
    d = _DISC_CACHE.get(key)
    if d is None or d.stack is not stack:
        if len(_DISC_CACHE) > 256:
            _DISC_CACHE.clear()
        d = _Discretization(stack)
        _DISC_CACHE[key] = d
    return d


def solve_poisson(
    stack: Stack1D,
    P_S: float,
    V_gate: float,
    traps: Optional[TrapDistribution] = None,
    fermi_levels=(0.0, 0.0),
    tol: float = 1e-6,
    psi0: Optional[np.ndarray] = None,
    max_iter: int = 200,
    clamp: float = 1.0,
) -> PoissonSolution:
    """Damped Newton solution of the slice's nonlinear Poisson equation.

    ``tol`` bounds the infinity norm of the nodal residual in units of
    eps0*V_T/1nm.  Updates are clipped to ``clamp`` thermal voltages on the
    channel nodes, where the Boltzmann charge makes full Newton steps
    overshoot; oxide nodes take the full step.  Dirichlet values at gate and back contact include the work
    function offsets from intrinsic silicon.
    """
    if abs(P_S) >= 1.0:
        raise ConfigurationError(f"|P_S| = {abs(P_S)} C/m^2 is out of range")
    d = _discretization(stack)
    stack = d.stack
    phi_n, phi_p = fermi_levels
    g, b = d.boundary(V_gate)
    psi = d.initial_guess(V_gate) if psi0 is None else np.array(psi0, dtype=float)
    psi[0], psi[-1] = g, b
    step_cap = clamp * stack.vt
    history = []
    converged = False
    for it in range(max_iter + 1):
        F, ab, _ = d.residual_jacobian(psi, P_S, traps, phi_n, phi_p)
        res = float(np.max(np.abs(F))) / Q_NORM
        history.append(res)
        if not np.isfinite(res):
            break
        if res < tol:
            converged = True
            break
        if it == max_iter:
            break
        delta = solve_banded((1, 1), ab, -F)
        psi[1:-1] += np.where(d.clamped, np.clip(delta, -step_cap, step_cap), delta)
    if not converged:
        raise SolverError(f"Poisson Newton did not converge in {max_iter} iterations "
                          f"(last residual {history[-1]:.3e})", history)

    F, ab, (n, p, rho_s, rho_t, D) = d.residual_jacobian(psi, P_S, traps, phi_n, phi_p)
    rhs = np.zeros(d.n_nodes - 2)
    rhs[d.ferro_node - 1] = 1.0  # dF/dP = -1 at the ferroelectric/IL node
    dpsi = np.zeros(d.n_nodes)
    dpsi[1:-1] = solve_banded((1, 1), ab, rhs)
    return PoissonSolution(
        psi=psi, n=n, p=p, rho_trap=rho_t, displacement=D,
        iterations=it, residual_history=history, converged=True,
        e_ferro=float((psi[0] - psi[d.ferro_node]) / stack.t_F),
        n_inv=float(d.vol_s @ n),
        q_trap=float(d.vol_t @ rho_t),
        q_semi=float(d.vol_s @ rho_s),
        q_gate=float(D[0]),
        q_back=float(-D[-1]),
        dpsi_dP=dpsi,
        ferro_node=d.ferro_node,
        t_F=stack.t_F,
    )


@dataclass
class SliceState:
    """Converged state of one grain column at one gate bias."""

    stack: Stack1D
    coeffs: LandauCoefficients
    traps: Optional[TrapDistribution]
    polarization: float
    v_gate: float
    solution: Optional[PoissonSolution] = field(default=None, repr=False)
    outer_iterations: int = 0
    last_dp: float = 0.0
    converged: bool = False

    @property
    def psi(self):
        return self.solution.psi

    @property
    def n(self):
        return self.solution.n

    @property
    def p(self):
        return self.solution.p

    @property
    def rho_trap(self):
        return self.solution.rho_trap

    @property
    def n_inv(self) -> float:
        return self.solution.n_inv

    @property
    def q_trap(self) -> float:
        return self.solution.q_trap

    @property
    def e_ferro(self) -> float:
        return self.solution.e_ferro

    @property
    def poisson_residual(self) -> float:
        return self.solution.residual_history[-1]


def initial_slice_state(stack, coeffs, traps, polarization, v_gate, tol=1e-6) -> SliceState:
    """Electrostatics at frozen polarization; the starting point of a sweep."""
    stack = stack if stack.meshed else build_mesh(stack)
    sol = solve_poisson(stack, polarization, v_gate, traps, tol=tol)
    return SliceState(stack, coeffs, traps, float(polarization), float(v_gate), sol, 0, 0.0, True)


def self_consistent_point(
    state: SliceState,
    V_gate: float,
    wave_dt: float,
    p_tol: float = 1e-4,
    dp_max: float = 0.02,
    tol: float = 1e-6,
    max_outer: int = 2000,
) -> SliceState:
    """Advance a slice to gate bias ``V_gate`` held for ``wave_dt``.

    Each outer iteration solves Poisson at the current P_S, linearizes the
    ferroelectric field around it (value and depolarization slope) and
    advances P_S with the LGK equation under that field.  Sub-steps are cut
    until |dP| <= dp_max so the coupled flow cannot skip past the nearest
    stable state; a sub-step over the whole remaining interval that moves
    P_S by less than ``p_tol`` ends the loop.  Twenty whole-interval
    corrections in a row without convergence count as a stall; the trust
    region is halved once before the solver gives up.
    """
    p_start = state.polarization
    base_substep = float(state.coeffs.tau) / 10.0
    history = []
    for trust in (dp_max, 0.5 * dp_max):
        P = p_start
        t_left = float(wave_dt)
        dt_try = t_left
        sol = solve_poisson(state.stack, P, V_gate, state.traps, tol=tol,
                            psi0=None if state.solution is None else state.solution.psi)
        history = []
        corrections = 0
        for it in range(1, max_outer + 1):
            s = min(sol.de_ferro_dP, 0.0)
            c_eff = replace(state.coeffs, alpha=state.coeffs.alpha - 0.5 * s)
            e_a = sol.e_ferro - s * P
            step = min(dt_try, t_left)
            while True:
                p_new = lgk_advance(P, e_a, step, c_eff, max_substep=base_substep)
                if abs(p_new - P) <= trust or step <= base_substep:
                    break
                step *= 0.25
            dP = p_new - P
            history.append(abs(dP))
            full = step >= t_left
            if full and abs(dP) < p_tol:
                P = p_new
                sol = solve_poisson(state.stack, P, V_gate, state.traps, tol=tol,
                                    psi0=sol.psi + sol.dpsi_dP * dP)
                return SliceState(state.stack, state.coeffs, state.traps, P, float(V_gate), sol,
                                  it, abs(dP), True)
            if not full:
                # truncated sub-steps consume time; full-interval ones only
                # correct the linearization
                t_left -= step
                dt_try = 4.0 * step
                corrections = 0
            else:
                corrections += 1
                if corrections > 20:
                    break
            P = p_new
            sol = solve_poisson(state.stack, P, V_gate, state.traps, tol=tol,
                                psi0=sol.psi + sol.dpsi_dP * dP)
        log.debug("outer loop stalled with trust region %s at V=%s", trust, V_gate)
    raise SolverError(f"self-consistent loop failed at V_gate={V_gate} (last |dP|={history[-1]:.3e})",
                      history)
