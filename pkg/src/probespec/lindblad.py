"""Probe in the thermodynamic limit: Born-Markov master equation.

drho/dt = w [ (1 + s n) D[sigma^-] + n D[sigma^+] ] rho,   s = +1 bosons, -1 fermions

with D[L] rho = L rho L^+ - {L^+ L, rho}/2 and w = g^2 d(k) |J_0 gamma(k)|^2
the resonance-shell weight.  Starting from |g><g| the excited population
relaxes exponentially to n/(2n+1) (bosons) or n (fermions).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares

from .models import BOSONIC, FERMIONIC


class IntegrationError(RuntimeError):
    pass


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class LindbladParams:
    weight: float
    occupation: float
    statistics: str = BOSONIC

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("weight must be non-negative")
        if self.statistics == BOSONIC:
            if self.occupation < 0:
                raise ValueError("bosonic occupation must be non-negative")
        elif self.statistics == FERMIONIC:
            if not 0 <= self.occupation <= 1:
                raise ValueError("fermionic occupation must lie in [0, 1]")
        else:
            raise ValueError(f"unknown statistics {self.statistics!r}")

    @property
    def sign(self) -> int:
        return 1 if self.statistics == BOSONIC else -1


def decay_rate(params: LindbladParams) -> float:
    if params.statistics == BOSONIC:
        return params.weight * (2 * params.occupation + 1)
    return params.weight


def stationary_population(params: LindbladParams) -> float:
    n = params.occupation
    return n / (2 * n + 1) if params.statistics == BOSONIC else n


def excited_population(params: LindbladParams, t):
    t = np.asarray(t, dtype=float)
    return stationary_population(params) * -np.expm1(-decay_rate(params) * t)


@dataclass
class Trajectory:
    times: np.ndarray
    rho: np.ndarray      # (T, 2, 2), basis (g, e)

    @property
    def excited(self) -> np.ndarray:
        return self.rho[:, 1, 1].real

    @property
    def trace(self) -> np.ndarray:
        return np.trace(self.rho, axis1=1, axis2=2).real

    def to_columns(self) -> dict:
        return {"t": self.times, "rho_ee": self.excited}


_SM = np.array([[0, 1], [0, 0]], dtype=complex)   # sigma^- = |g><e|
_SP = _SM.T.copy()


def _dissipator(L, rho):
    LdL = L.conj().T @ L
    return L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)


def evolve_numeric(params: LindbladParams, t_grid, rtol: float = 1e-9, atol: float = 1e-12,
                   rho0=None) -> Trajectory:
    """Integrate the full 2x2 Lindblad equation (adaptive DOP853)."""
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0:
        return Trajectory(t, np.zeros((0, 2, 2), dtype=complex))
    if np.any(np.diff(t) < 0) or t[0] < 0:
        raise ValueError("time grid must be non-negative and increasing")
    rho0 = np.diag([1.0, 0.0]).astype(complex) if rho0 is None else np.asarray(rho0, dtype=complex)
    w, n = params.weight, params.occupation
    down = w * (1 + params.sign * n)
    up = w * n

    def rhs(_, y):
        rho = y.view(complex).reshape(2, 2)
        d = down * _dissipator(_SM, rho) + up * _dissipator(_SP, rho)
        return d.reshape(-1).view(float)

    y0 = rho0.reshape(-1).view(float).copy()
    if w == 0 or t[-1] == 0:
        return Trajectory(t, np.repeat(rho0[None], t.size, axis=0))
    sol = solve_ivp(rhs, (0.0, float(t[-1])), y0, method="DOP853", t_eval=t, rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(sol.message)
    rho = sol.y.T.copy().view(complex).reshape(-1, 2, 2)
    return Trajectory(t, rho)


@dataclass
class CouplingFit:
    weight: float
    residual: float          # rms residual relative to the stationary value
    flagged: bool
    message: str = ""


def extract_coupling(times, populations, occupation: float, statistics: str = BOSONIC,
                     residual_tolerance: float = 0.05) -> CouplingFit:
    """Least-squares fit of the closed-form relaxation curve for the weight w.

    The fit is flagged when the residual exceeds ``residual_tolerance`` or
    the samples do not span one decay time.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(populations, dtype=float)
    if t.size < 10 or t.size != y.size:
        raise EstimationError("need at least 10 (t, population) samples")
    probe = LindbladParams(1.0, occupation, statistics)
    s = stationary_population(probe)
    if s <= 0:
        raise EstimationError("zero occupation: the population never rises")
    scale = decay_rate(probe)   # gamma per unit weight

    frac = np.clip(y / s, 0, 1)
    ok = (frac > 0.02) & (frac < 0.9) & (t > 0)
    guess = np.median(-np.log1p(-frac[ok]) / t[ok]) if ok.any() else 1.0 / max(t[-1], 1e-300)

    def resid(q):
        return (s * -np.expm1(-np.exp(q[0]) * t) - y) / s

    sol = least_squares(resid, [np.log(max(guess, 1e-300))], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if not sol.success:
        raise EstimationError(f"fit did not converge: {sol.message}")
    gamma = float(np.exp(sol.x[0]))
    rms = float(np.sqrt(np.mean(sol.fun**2)))
    msgs = []
    if rms > residual_tolerance:
        msgs.append(f"residual {rms:.3g} exceeds {residual_tolerance}")
    if gamma * (t[-1] - t[0]) < 1:
        msgs.append("samples span less than one decay time")
    return CouplingFit(gamma / scale, rms, bool(msgs), "; ".join(msgs))
