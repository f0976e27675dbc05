"""Landau-Khalatnikov ferroelectric grains and MFM capacitor loops.

The static relation between polarization and the field that holds it is

    E(P) = 2*alpha*P + 4*beta*P**3 + 6*gamma*P**5

and a grain relaxes toward it with rho * dP/dt = E_applied - E(P).
Coefficient fields may hold numpy arrays so that a whole ensemble of
grains is advanced in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .constants import EPS0


class InvalidCoefficientsError(ValueError):
    """Landau coefficients do not describe a double-well free energy."""


class LGKIntegrationError(RuntimeError):
    def __init__(self, message, polarization=None, residual=None):
        super().__init__(message)
        self.polarization = polarization
        self.residual = residual


@dataclass(frozen=True)
class LandauCoefficients:
    alpha: float = -5.37e8  # m/F
    beta: float = 9.62e8  # m^5/(F C^2)
    gamma: float = 9.59e10  # m^9/(F C^4)
    eps_r_background: float = 30.0
    resistivity: float = 30.0  # Ohm m

    def validate(self) -> "LandauCoefficients":
        a, b, g = (np.asarray(v, dtype=float) for v in (self.alpha, self.beta, self.gamma))
        if np.any(a >= 0) or np.any(b <= 0) or np.any(g <= 0):
            raise InvalidCoefficientsError(
                f"need alpha < 0 and beta, gamma > 0 (got {self.alpha}, {self.beta}, {self.gamma})"
            )
        if np.any(np.asarray(self.resistivity) <= 0):
            raise InvalidCoefficientsError("resistivity must be positive")
        if np.any(np.asarray(self.eps_r_background) < 1):
            raise InvalidCoefficientsError("background permittivity must be >= 1")
        return self

    @property
    def tau(self):
        """Small-signal switching time rho / (2|alpha|)."""
        return self.resistivity / (2.0 * np.abs(self.alpha))

    def scaled(self, k) -> "LandauCoefficients":
        """Multiply alpha, beta, gamma by k: E_c scales by k, P_r is kept."""
        return replace(self, alpha=self.alpha * k, beta=self.beta * k, gamma=self.gamma * k)


def stack_coefficients(coeffs: Sequence[LandauCoefficients]) -> LandauCoefficients:
    """Pack per-grain coefficients into one array-valued instance."""
    return LandauCoefficients(
        alpha=np.array([c.alpha for c in coeffs], dtype=float),
        beta=np.array([c.beta for c in coeffs], dtype=float),
        gamma=np.array([c.gamma for c in coeffs], dtype=float),
        eps_r_background=np.array([c.eps_r_background for c in coeffs], dtype=float),
        resistivity=np.array([c.resistivity for c in coeffs], dtype=float),
    )


def ferro_field(P, coeffs: LandauCoefficients):
    P2 = P * P
    return P * (2.0 * coeffs.alpha + P2 * (4.0 * coeffs.beta + 6.0 * coeffs.gamma * P2))


def ferro_slope(P, coeffs: LandauCoefficients):
    """dE/dP."""
    P2 = P * P
    return 2.0 * coeffs.alpha + P2 * (12.0 * coeffs.beta + 30.0 * coeffs.gamma * P2)


def _positive_quadratic_root(a, b, c):
    # positive root of a*x^2 + b*x + c = 0 with a > 0, c < 0, in the stable form
    disc = b * b - 4.0 * a * c
    if np.any(disc < 0):
        raise InvalidCoefficientsError("negative discriminant: no double well")
    sq = np.sqrt(disc)
    return np.where(b >= 0, -2.0 * c / (b + sq), (sq - b) / (2.0 * a))


def extract_ec_pr(coeffs: LandauCoefficients):
    """Closed-form coercive field and remanent polarization.

    Both E(P) = 0 and dE/dP = 0 are quadratic in P**2.  Returns
    ``(E_c, P_r)``; array-valued coefficients give arrays.
    """
    a, b, g = coeffs.alpha, coeffs.beta, coeffs.gamma
    if np.any(np.asarray(a) >= 0) or np.any(np.asarray(g) <= 0):
        raise InvalidCoefficientsError("need alpha < 0 and gamma > 0 for a double well")
    pr2 = _positive_quadratic_root(6.0 * g, 4.0 * b, 2.0 * a)
    pc2 = _positive_quadratic_root(30.0 * g, 12.0 * b, 2.0 * a)
    p_r = np.sqrt(pr2)
    e_c = np.abs(ferro_field(np.sqrt(pc2), coeffs))
    if np.ndim(e_c) == 0:
        return float(e_c), float(p_r)
    return e_c, p_r


_FIELDS = ("alpha", "beta", "gamma", "eps_r_background", "resistivity")


def _take(coeffs: LandauCoefficients, idx) -> LandauCoefficients:
    return LandauCoefficients(*(getattr(coeffs, f)[idx] for f in _FIELDS))


def _inflection(alpha, beta, gamma):
    # |P| where dE/dP changes sign; 0 when E(P) is monotone everywhere
    a = np.minimum(alpha, 0.0)
    return np.sqrt(_positive_quadratic_root(30.0 * gamma, 12.0 * beta, 2.0 * a))


def _settle(p, e, t_rem, coeffs, tol):
    """Find grains already inside the well they will end in.

    A grain qualifies when it and the root of E(P) = E_applied lie on the
    same monotone branch and the slowest slope along the way brings it
    within ``tol`` of the root before the interval ends.  Returns the mask
    and the end-of-interval polarization for those grains.
    """
    r = p.copy()
    for _ in range(8):
        r = r - (ferro_field(r, coeffs) - e) / ferro_slope(r, coeffs)
    p_c = _inflection(coeffs.alpha, coeffs.beta, coeffs.gamma)
    resid = np.abs(ferro_field(r, coeffs) - e)
    same_sign = np.sign(r) == np.sign(p)
    p_min = np.where(same_sign, np.minimum(np.abs(r), np.abs(p)), 0.0)
    same_branch = (p_c == 0) | (same_sign & (p_min > p_c))
    ok = same_branch & np.isfinite(r) & (resid <= 1e-9 * (np.abs(e) + np.abs(coeffs.alpha) * np.abs(r)))
    m = ferro_slope(p_min, coeffs)
    dist = np.abs(p - r)
    with np.errstate(divide="ignore"):
        t_need = coeffs.resistivity / np.where(m > 0, m, np.inf) * np.log(np.maximum(dist / tol, 1.0))
    ok &= (m > 0) & (t_need <= t_rem)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        tau_loc = coeffs.resistivity / ferro_slope(r, coeffs)
        p_end = r + (p - r) * np.exp(-t_rem / tau_loc)
    return ok, p_end


def _scalar_advance(p, e, t_rem, a, b, g, rho, h, settle_tol, newton_tol, max_newton):
    """Backward-Euler substepping of one grain; plain floats for speed."""
    p_c = float(_inflection(a, b, g))
    while t_rem > 0.0:
        # inside the final well: relax exactly for the remaining time
        s = 2 * a + p * p * (12 * b + 30 * g * p * p)
        if s > 0 and abs(p) >= p_c:
            r = p
            for _ in range(8):
                r -= (r * (2 * a + r * r * (4 * b + 6 * g * r * r)) - e) / (
                    2 * a + r * r * (12 * b + 30 * g * r * r))
            pm = min(abs(r), abs(p)) if r * p > 0 else 0.0
            resid = abs(r * (2 * a + r * r * (4 * b + 6 * g * r * r)) - e)
            if (p_c == 0 or pm > p_c) and resid <= 1e-9 * (abs(e) + abs(a * r)):
                m = 2 * a + pm * pm * (12 * b + 30 * g * pm * pm)
                dist = abs(p - r)
                if m > 0 and (dist <= settle_tol or rho / m * math.log(dist / settle_tol) <= t_rem):
                    sr = 2 * a + r * r * (12 * b + 30 * g * r * r)
                    return r + (p - r) * math.exp(-t_rem * sr / rho)
        hk = min(h, t_rem)
        rk = rho / hk
        x = p
        for _ in range(max_newton):
            x2 = x * x
            res = rk * (x - p) + x * (2 * a + x2 * (4 * b + 6 * g * x2)) - e
            dx = res / (rk + 2 * a + x2 * (12 * b + 30 * g * x2))
            x -= dx
            if abs(dx) <= newton_tol * max(1.0, abs(x)):
                break
        else:
            raise LGKIntegrationError(
                f"implicit LGK step did not converge in {max_newton} iterations",
                polarization=x, residual=abs(res))
        if not math.isfinite(x):
            raise LGKIntegrationError("non-finite polarization in LGK step", polarization=x)
        p = x
        t_rem -= hk
        if t_rem <= 1e-12 * hk:
            break
    return p


def lgk_advance(
    P,
    E_applied,
    dt: float,
    coeffs: LandauCoefficients,
    max_substep: Optional[float] = None,
    settle_tol: float = 1e-12,
    newton_tol: float = 1e-13,
    max_newton: int = 100,
):
    """Integrate rho dP/dt = E_applied - E(P) over ``dt`` with backward Euler.

    Substeps never exceed tau/10 (or ``max_substep`` if smaller), which keeps
    the implicit step's scalar equation strictly monotone.  A grain that is
    provably inside the well it will relax into within the remaining time is
    finished with the exact linear relaxation, so long quasi-static steps
    stay cheap.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    scalar = np.ndim(P) == 0 and np.ndim(E_applied) == 0 and np.ndim(coeffs.alpha) == 0
    P = np.array(P, dtype=float, ndmin=1)
    E_applied = np.broadcast_to(np.asarray(E_applied, dtype=float), P.shape)
    bc = LandauCoefficients(*(np.broadcast_to(np.asarray(getattr(coeffs, f), dtype=float), P.shape)
                              for f in _FIELDS))
    h_cap = np.abs(bc.tau) / 10.0
    if max_substep is not None:
        h_cap = np.minimum(h_cap, max_substep)
    n_sub = np.maximum(1, np.ceil(dt / h_cap - 1e-9))
    h = dt / n_sub

    settled, p_end = _settle(P, E_applied, np.full(P.shape, float(dt)), bc, settle_tol)
    out = np.where(settled, p_end, P)
    for i in np.flatnonzero(~settled):
        out[i] = _scalar_advance(
            float(P[i]), float(E_applied[i]), float(dt), float(bc.alpha[i]), float(bc.beta[i]),
            float(bc.gamma[i]), float(bc.resistivity[i]), float(h[i]),
            settle_tol, newton_tol, max_newton)
    return float(out[0]) if scalar else out


@dataclass
class Grain:
    coeffs: LandauCoefficients
    length_along_channel: float
    polarization: float = 0.0

    def __post_init__(self):
        if self.length_along_channel <= 0:
            raise ValueError("grain length must be positive")
        self.coeffs.validate()
        self._ec, self._pr = extract_ec_pr(self.coeffs)

    @property
    def coercive_field(self) -> float:
        return self._ec

    @property
    def remanent_polarization(self) -> float:
        return self._pr


@dataclass
class GrainEnsemble:
    grains: list
    spacer_thickness: float = 5e-10
    spacer_eps_r: float = 30.0
    rng_seed: Optional[int] = None

    def __post_init__(self):
        if not self.grains:
            raise ValueError("ensemble needs at least one grain")

    def __len__(self):
        return len(self.grains)

    @property
    def coefficients(self) -> LandauCoefficients:
        return stack_coefficients([g.coeffs for g in self.grains])

    @property
    def lengths(self) -> np.ndarray:
        return np.array([g.length_along_channel for g in self.grains])

    @property
    def polarizations(self) -> np.ndarray:
        return np.array([g.polarization for g in self.grains])

    @property
    def coercive_fields(self) -> np.ndarray:
        return np.array([g.coercive_field for g in self.grains])

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum() + (len(self) - 1) * self.spacer_thickness)

    def with_polarization(self, P) -> "GrainEnsemble":
        P = np.broadcast_to(np.asarray(P, dtype=float), (len(self),))
        grains = [replace(g, polarization=float(p)) for g, p in zip(self.grains, P)]
        return replace(self, grains=grains)


def sample_ensemble(
    n_grains: int,
    grain_length: float,
    base: LandauCoefficients,
    sigma_ratio: float,
    seed=None,
    spacer_thickness: float = 5e-10,
    spacer_eps_r: Optional[float] = None,
) -> GrainEnsemble:
    """Draw grains whose coercive fields are Normal(E_c0, sigma_ratio*E_c0).

    Draws at or below 0.1*E_c0 are redrawn.  Each grain gets the base
    coefficients scaled by E_c,i/E_c0, and starts at -P_r.
    """
    if n_grains < 1:
        raise ValueError("n_grains must be >= 1")
    if not 0 <= sigma_ratio < 1:
        raise ValueError("sigma_ratio must lie in [0, 1)")
    base.validate()
    ec0, pr = extract_ec_pr(base)
    rng = np.random.default_rng(seed)
    grains = []
    for _ in range(n_grains):
        ec = ec0
        if sigma_ratio > 0:
            ec = rng.normal(ec0, sigma_ratio * ec0)
            while ec <= 0.1 * ec0:
                ec = rng.normal(ec0, sigma_ratio * ec0)
        c = base.scaled(ec / ec0) if sigma_ratio > 0 else base
        grains.append(Grain(c, grain_length, -pr))
    return GrainEnsemble(
        grains,
        spacer_thickness=spacer_thickness,
        spacer_eps_r=base.eps_r_background if spacer_eps_r is None else spacer_eps_r,
        rng_seed=seed if isinstance(seed, (int, np.integer)) else None,
    )


@dataclass(frozen=True)
class TriangularWave:
    """-amplitude -> +amplitude -> -amplitude over one period (plus offset)."""

    amplitude: float = 3.0
    period: float = 1e-3
    steps_per_branch: int = 150
    offset: float = 0.0
    invert: bool = False

    def samples(self):
        n = self.steps_per_branch
        up = np.linspace(-1.0, 1.0, n + 1)
        shape = np.concatenate([up, up[-2::-1]])
        t = np.linspace(0.0, self.period, 2 * n + 1)
        v = self.offset + self.amplitude * shape
        if self.invert:
            v = -v
        branch = np.array(["forward"] * (n + 1) + ["backward"] * n)
        return t, v, branch


@dataclass
class PVTrace:
    time: np.ndarray
    voltage: np.ndarray
    field: np.ndarray
    p_s: np.ndarray
    p_t: np.ndarray
    branch: np.ndarray
    grain_p: np.ndarray = field(repr=False, default=None)

    def branch_mask(self, name):
        return self.branch == name


def mfm_loop(
    ensemble: GrainEnsemble,
    waveform: TriangularWave,
    eps_r_F: float = 30.0,
    t_F: float = 10e-9,
    initial_polarization=None,
) -> PVTrace:
    """Quasi-static P-V loop of a metal-ferroelectric-metal capacitor.

    Every grain sees the same field V/t_F.  The first sample is taken after
    one step of relaxation at the starting voltage.
    """
    coeffs = ensemble.coefficients
    lengths = ensemble.lengths
    weight = lengths / ensemble.total_length
    P = ensemble.polarizations if initial_polarization is None else np.broadcast_to(
        np.asarray(initial_polarization, dtype=float), (len(ensemble),)).copy()
    t, v, branch = waveform.samples()
    dt = t[1] - t[0]
    E = v / t_F
    grain_p = np.empty((t.size, P.size))
    for k in range(t.size):
        P = lgk_advance(P, E[k], dt, coeffs)
        grain_p[k] = P
    p_s = grain_p @ weight
    p_t = p_s + EPS0 * eps_r_F * E
    return PVTrace(t, v, E, p_s, p_t, branch, grain_p)


def switched_fraction(trace: PVTrace, lengths=None) -> np.ndarray:
    """Length-weighted fraction of grains with positive polarization."""
    up = trace.grain_p > 0
    if lengths is None:
        return up.mean(axis=1)
    return up @ (lengths / lengths.sum())


def _crossing(v, y, level):
    above = np.flatnonzero(y >= level)
    if above.size == 0:
        raise ValueError(f"switched fraction never reaches {level}")
    k = above[0]
    if k == 0:
        return float(v[0])
    return float(v[k - 1] + (level - y[k - 1]) * (v[k] - v[k - 1]) / (y[k] - y[k - 1]))


def switching_spread(trace: PVTrace, lo: float = 0.1, hi: float = 0.9, lengths=None) -> float:
    """Voltage span over which the forward branch goes from lo to hi switched."""
    m = trace.branch_mask("forward")
    frac = switched_fraction(trace, lengths)[m]
    v = trace.voltage[m]
    return _crossing(v, frac, hi) - _crossing(v, frac, lo)
