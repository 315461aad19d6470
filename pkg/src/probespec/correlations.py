"""Two entangled probes: thermal two-time correlators and the rate Gamma-bar.

Gamma-bar is the part of the two-probe transition probability that is not
explained by the two single-probe rates,

    Gamma-bar = Gamma^(2) - Gamma^(1)_A / 2 - Gamma^(1)_B / 2
              = g^2/2 int int <X_l^+(t1) X_j(t2) + X_j^+(t1) X_l(t2)> e^{-i nu (t1 - t2)},

with X = c (Kitaev ring, local fermion) or X = delta n (Bose-Hubbard,
linearised density).  Every e^{+-i omega tau} component integrates to
t^2 sinc^2((nu -+ omega) t / 2).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import BHModel, KitaevModel, model_modes
from .rates import rate_integral, sinc

HOPPING = "fermionic-hopping"
DENSITY = "density-density"


class CorrelationError(ValueError):
    pass


@dataclass(frozen=True)
class ProbePair:
    """Two identical probes at ``site_a`` (l) and ``site_b`` (j), Bell-state prepared."""

    site_a: object
    site_b: object
    level_gap: float
    coupling: float = 1e-3

    def __post_init__(self):
        if np.array_equal(np.atleast_1d(self.site_a), np.atleast_1d(self.site_b)):
            raise CorrelationError("the two probes must sit on different sites")
        if self.coupling <= 0:
            raise CorrelationError("coupling must be positive")

    def displacement(self, model) -> np.ndarray:
        """(j - l) per axis, folded onto the ring."""
        n = model.grid.sites_per_axis
        d = np.atleast_1d(self.site_b) - np.atleast_1d(self.site_a)
        if d.size != model.dimension:
            raise CorrelationError("site dimension does not match the model")
        return np.mod(d, n)

    def moved(self, separation) -> "ProbePair":
        a = np.atleast_1d(self.site_a)
        b = tuple((a + np.atleast_1d(separation)).tolist())
        site_b = b[0] if len(b) == 1 else b
        return ProbePair(self.site_a, site_b, self.level_gap, self.coupling)


@dataclass
class CorrelationMap:
    separations: np.ndarray        # (R,) in 1D or (R, 2)
    times: np.ndarray              # (T,)
    values: np.ndarray             # (R, T), real
    observable: str = HOPPING
    nu: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.separations), len(self.times))
        if not np.all(np.isfinite(self.values)):
            raise CorrelationError("correlation map contains non-finite values")

    def normalized(self) -> np.ndarray:
        """Each time slice divided by its largest |value| over separations."""
        top = np.max(np.abs(self.values), axis=0, initial=0.0)
        return np.divide(self.values, top, out=np.zeros_like(self.values), where=top > 0)

    def arrival_times(self, threshold: float = 0.1, normalize: bool = False) -> np.ndarray:
        """First time |value| reaches ``threshold`` x the map's global max (NaN if never).

        With ``normalize`` the threshold applies to the per-time normalised map instead.
        """
        if self.values.size == 0:
            return np.zeros(len(self.separations))
        v = np.abs(self.normalized() if normalize else self.values / np.max(np.abs(self.values)))
        hit = v >= threshold
        first = np.argmax(hit, axis=1)
        return np.where(hit.any(axis=1), self.times[first], np.nan)

    def to_columns(self, normalized: bool = False) -> dict:
        r, t = len(self.separations), len(self.times)
        sep = np.asarray(self.separations, dtype=float).reshape(r, -1)
        cols = {}
        names = ("separation",) if sep.shape[1] == 1 else ("dx", "dy")
        for i, name in enumerate(names):
            cols[name] = np.repeat(sep[:, i], t)
        cols["t"] = np.tile(self.times, r)
        cols["gamma_bar"] = self.values.ravel()
        if normalized:
            cols["normalized"] = self.normalized().ravel()
        return cols


# -- correlators ---------------------------------------------------------------

def _phase(model, modes, displacement):
    return np.cos(modes.momenta @ np.atleast_1d(displacement).astype(float)
                  * model.lattice_constant)


def kitaev_correlator(model: KitaevModel, l: int, j: int, tau, beta: float):
    """<c_l^+(tau) c_j(0)> in the thermal state (broadcasts over ``tau``)."""
    modes = model_modes(model, beta)
    k = modes.momenta[:, 0] * model.lattice_constant
    c2 = modes.coupling**2
    n = modes.occupation
    w = modes.frequency
    tau = np.asarray(tau, dtype=float)
    ph = np.exp(1j * k * (j - l)) / model.sites
    e = np.exp(1j * np.multiply.outer(tau, w))
    return (e * (ph * c2 * n) + e.conj() * (ph * (1 - c2) * (1 - n))).sum(axis=-1)


def bh_density_correlator(model: BHModel, l, j, tau, beta: float):
    """<dn_l(tau) dn_j(0)> at Bogoliubov level, dn = Phi_0 (b + b^+) - fluctuation part only."""
    modes = model_modes(model, beta)
    d = (np.atleast_1d(l) - np.atleast_1d(j)).astype(float) * model.lattice_constant
    ph = np.exp(1j * modes.momenta @ d) / len(model.grid)
    amp = model.condensate_filling * modes.coupling**2
    n = modes.occupation
    e = np.exp(1j * np.multiply.outer(np.asarray(tau, dtype=float), modes.frequency))
    return (e.conj() * (ph * amp * (1 + n)) + e * (ph * amp * n)).sum(axis=-1)


def _observable(model, observable):
    if observable in (None, "auto"):
        return DENSITY if isinstance(model, BHModel) else HOPPING
    if observable == HOPPING and not isinstance(model, KitaevModel):
        raise CorrelationError("fermionic hopping observable needs the Kitaev model")
    if observable == DENSITY and not isinstance(model, BHModel):
        raise CorrelationError("density-density observable needs the Bose-Hubbard model")
    if observable not in (HOPPING, DENSITY):
        raise CorrelationError(f"unknown observable {observable!r}")
    return observable


def _line_weights(model, modes):
    """(weight at +omega, weight at -omega) per mode for <X^+(t1) X(t2)>."""
    n = modes.occupation
    if isinstance(model, KitaevModel):
        c2 = modes.coupling**2
        return c2 * n, (1 - c2) * (1 - n)
    amp = model.condensate_filling * modes.coupling**2
    return amp * n, amp * (1 + n)


def _kernels(modes, nu, times):
    t = np.asarray(times, dtype=float)[None, :]
    w = modes.frequency[:, None]
    return t**2 * sinc((nu - w) * t / 2) ** 2, t**2 * sinc((nu + w) * t / 2) ** 2


def gamma_bar(model, pair: ProbePair, t, beta: float, observable: str | None = None):
    """Closed-form Gamma-bar(t) (real); ``t`` may be an array."""
    _observable(model, observable)
    modes = model_modes(model, beta)
    plus, minus = _line_weights(model, modes)
    kp, km = _kernels(modes, pair.level_gap, np.atleast_1d(t))
    phase = _phase(model, modes, pair.displacement(model))
    g2 = pair.coupling**2 / len(model.grid)
    val = g2 * ((phase * plus) @ kp + (phase * minus) @ km)
    return float(val[0]) if np.ndim(t) == 0 else val


def site_operator_rate(model, coefficients: dict, nu: float, t, beta: float, coupling: float = 1.0):
    """Single-probe transition probability for X = sum_s a_s O_s.

    O_s is c_s (Kitaev) or dn_s (Bose-Hubbard).  A probe overlapping several
    sites, or the Bell-state pair, reduces to such an X.
    """
    modes = model_modes(model, beta)
    a = model.lattice_constant
    phi = np.zeros(len(modes), dtype=complex)
    for site, coef in coefficients.items():
        s = np.atleast_1d(site).astype(float) * a
        phi += coef * np.exp(1j * modes.momenta @ s)
    phi2 = np.abs(phi) ** 2 / len(model.grid)
    plus, minus = _line_weights(model, modes)
    kp, km = _kernels(modes, nu, np.atleast_1d(t))
    val = coupling**2 * ((phi2 * plus) @ kp + (phi2 * minus) @ km)
    return float(val[0]) if np.ndim(t) == 0 else val


def gamma_bar_assembled(model, pair: ProbePair, t, beta: float):
    """Gamma-bar from three separate rate computations: two-probe minus half of each single probe."""
    r = 1 / np.sqrt(2)
    la, lb = pair.site_a, pair.site_b
    key = (lambda s: tuple(np.atleast_1d(s).tolist()))
    two = site_operator_rate(model, {key(la): r, key(lb): r}, pair.level_gap, t, beta, pair.coupling)
    one_a = site_operator_rate(model, {key(la): 1.0}, pair.level_gap, t, beta, pair.coupling)
    one_b = site_operator_rate(model, {key(lb): 1.0}, pair.level_gap, t, beta, pair.coupling)
    return two - 0.5 * one_a - 0.5 * one_b


def gamma_bar_integral(model, pair: ProbePair, t: float, beta: float, quadrature_points: int = 200):
    """Gamma-bar by numerical double integration of the symmetrised correlator."""
    l, j = pair.site_a, pair.site_b
    if isinstance(model, KitaevModel):
        def corr(t1, t2):
            tau = t1 - t2
            return 0.5 * (kitaev_correlator(model, l, j, tau, beta) + kitaev_correlator(model, j, l, tau, beta))
    else:
        # density is Hermitian: <dn_l(t1) dn_j(t2)> is already <X^+ X>
        def corr(t1, t2):
            tau = t1 - t2
            return 0.5 * (bh_density_correlator(model, l, j, tau, beta) + bh_density_correlator(model, j, l, tau, beta))
    return rate_integral(corr, pair.level_gap, t, quadrature_points, pair.coupling)


def lightcone_map(model, pair_template: ProbePair, separations, times, beta: float,
                  observable: str | None = None) -> CorrelationMap:
    """Gamma-bar on the (separation, time) product grid, probe A fixed at the template site."""
    obs = _observable(model, observable)
    times = np.asarray(times, dtype=float)
    seps = [np.atleast_1d(s) for s in separations]
    if not seps:
        shape = (0,) if model.dimension == 1 else (0, model.dimension)
        return CorrelationMap(np.zeros(shape), times, np.zeros((0, times.size)), obs, pair_template.level_gap)
    modes = model_modes(model, beta)
    plus, minus = _line_weights(model, modes)
    kp, km = _kernels(modes, pair_template.level_gap, times)
    a = model.lattice_constant
    d = np.array(seps, dtype=float) * a
    for s in seps:
        if not np.any(np.mod(s, model.grid.sites_per_axis)):
            raise CorrelationError("zero separation puts both probes on one site")
    phase = np.cos(d @ modes.momenta.T)
    g2 = pair_template.coupling**2 / len(model.grid)
    values = g2 * ((phase * plus) @ kp + (phase * minus) @ km)
    sep_out = np.array([s[0] for s in seps]) if model.dimension == 1 else np.array(seps)
    return CorrelationMap(sep_out, times, values, obs, pair_template.level_gap,
                          {"beta": beta, "model": type(model).__name__})


def default_probe_gap(model, beta: float) -> float:
    """Median quasiparticle frequency: a probe gap inside the band."""
    return float(np.median(model_modes(model, beta).frequency))
