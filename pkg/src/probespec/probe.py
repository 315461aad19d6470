"""Probe geometry: overlap integrals, position-dependent amplitudes, G_i(k).

Probe eigenfunctions are harmonic-oscillator states (Hermite x Gaussian) and
the lowest-band Wannier function is approximated by a normalised Gaussian,
so every overlap integral is an exact Gaussian moment sum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite as H
from numpy.polynomial import polynomial as P

from .models import BHModel, KitaevModel, ModeTable, SyntheticModel

# measurement bases in units of the lattice constant
POSITIONS_1D = {"I": (0.0,), "II": (0.5,)}
POSITIONS_2D = {"I": (0.0, 0.0), "II": (0.5, 0.0), "III": (0.5, 0.5)}

KITAEV_FORMS = ("kitaev", "bond")


class ProbeError(ValueError):
    pass


@dataclass(frozen=True)
class ProbeConfig:
    """Two selected probe levels and where the probe sits.

    ``ground_levels``/``excited_levels`` are oscillator quantum numbers per
    axis; ``wavefunction_widths`` the oscillator lengths.  ``elastic_overlap``
    is gamma_0 = <e|g> weighted overlap entering the BH elastic term.
    """

    level_gap: float = 0.0
    coupling: float = 1e-3
    position_offset: tuple = (0.0,)
    wavefunction_widths: tuple = (0.15,)
    ground_levels: tuple = (0,)
    excited_levels: tuple = (0,)
    wannier_width: float = 0.2
    wannier_power: int = 1
    elastic_overlap: float = 0.0

    def __post_init__(self):
        if self.coupling <= 0:
            raise ProbeError("probe coupling g must be positive")
        n = len(self.wavefunction_widths)
        if not (len(self.ground_levels) == len(self.excited_levels) == n):
            raise ProbeError("levels and widths must have one entry per axis")

    def with_offset(self, offset) -> "ProbeConfig":
        return ProbeConfig(**{**self.__dict__, "position_offset": tuple(offset)})


@dataclass(frozen=True)
class OverlapSet:
    J_values: tuple

    def __post_init__(self):
        if self.J_values[0] == 0:
            raise ProbeError("J_0 vanishes; the on-site measurement carries no signal")

    @property
    def ratios(self) -> tuple:
        j0 = self.J_values[0]
        return tuple(abs(j / j0) ** 2 for j in self.J_values)


def oscillator_polynomial(n: int, width: float) -> np.ndarray:
    """Power-series coefficients (in y) of the normalised oscillator prefactor
    N_n H_n(y / width); the Gaussian exp(-y^2 / 2 width^2) is kept separate."""
    norm = 1.0 / math.sqrt(2.0**n * math.factorial(n)) / (math.pi * width**2) ** 0.25
    herm = np.zeros(n + 1)
    herm[n] = 1.0
    coeffs = H.herm2poly(herm)
    return norm * coeffs / width ** np.arange(n + 1)


def oscillator_function(n: int, width: float, x):
    x = np.asarray(x, dtype=float)
    return P.polyval(x, oscillator_polynomial(n, width)) * np.exp(-x**2 / (2 * width**2))


def wannier_gaussian(x, width: float):
    x = np.asarray(x, dtype=float)
    return (math.pi * width**2) ** -0.25 * np.exp(-x**2 / (2 * width**2))


def axis_overlap(n_g: int, n_e: int, width: float, shift: float, wannier_width: float,
                 power: int = 1) -> float:
    """int psi_e(x - s) psi_g(x - s) W(x)**power dx in closed form.

    With y = x - s the integrand is poly(y) exp(-A y^2 - B y - C); the
    Gaussian moments give the exact value.
    """
    if width <= 0 or wannier_width <= 0:
        raise ProbeError("widths must be positive")
    poly = P.polymul(oscillator_polynomial(n_g, width), oscillator_polynomial(n_e, width))
    A = 1.0 / width**2 + power / (2 * wannier_width**2)
    B = power * shift / wannier_width**2
    C = power * shift**2 / (2 * wannier_width**2)
    pref = (math.pi * wannier_width**2) ** (-0.25 * power)
    mu = B / (2 * A)
    # y = z - mu, int z^j exp(-A z^2) dz = Gamma((j+1)/2) / A^((j+1)/2) for even j
    total = 0.0
    for n, c in enumerate(poly):
        if c == 0:
            continue
        for j in range(0, n + 1, 2):
            total += c * math.comb(n, j) * (-mu) ** (n - j) * math.gamma((j + 1) / 2) / A ** ((j + 1) / 2)
    return pref * math.exp(B**2 / (4 * A) - C) * total


def probe_overlap(probe: ProbeConfig, offset) -> float:
    offset = tuple(offset)
    if len(offset) != len(probe.wavefunction_widths):
        raise ProbeError("offset dimension does not match the probe axes")
    value = 1.0
    for axis, s in enumerate(offset):
        value *= axis_overlap(probe.ground_levels[axis], probe.excited_levels[axis],
                              probe.wavefunction_widths[axis], s, probe.wannier_width,
                              probe.wannier_power)
    return value


def overlap_integrals(probe: ProbeConfig, wannier_width: float | None = None,
                      dimension: int | None = None, lattice_constant: float = 1.0) -> OverlapSet:
    """J_0, J_1[, J_2] for the on-site and displaced measurement positions.

    ``J_i`` is the overlap of the displaced probe density with the Wannier
    function of the site at the origin.
    """
    if wannier_width is not None:
        if wannier_width <= 0:
            raise ProbeError("wannier width must be positive")
        probe = ProbeConfig(**{**probe.__dict__, "wannier_width": wannier_width})
    dimension = dimension or len(probe.wavefunction_widths)
    basis = POSITIONS_1D if dimension == 1 else POSITIONS_2D
    extra = len(probe.wavefunction_widths) - dimension
    if extra < 0:
        raise ProbeError("probe has fewer axes than the lattice")
    vals = []
    for pos in basis.values():
        offset = tuple(p * lattice_constant for p in pos) + (0.0,) * extra
        vals.append(probe_overlap(probe, offset))
    return OverlapSet(tuple(vals))


def geometry_factor(config_index: int, k, dimension: int, lattice_constant: float = 1.0):
    """G_i(k) relating the displaced-probe peak to the on-site one.

    1D, i = 1: 4 cos^2(k a / 2).  2D, i = 1: 2[cos^2(k_x a/2) + cos^2(k_y a/2)];
    i = 2: 16 cos^2(k_x a/2) cos^2(k_y a/2).
    """
    k = np.asarray(k, dtype=float)
    a = lattice_constant
    if dimension == 1:
        if config_index != 1:
            raise ProbeError("1D geometry only defines i = 1")
        kk = k[..., 0] if (k.ndim and k.shape[-1] == 1) else k
        return 4 * np.cos(kk * a / 2) ** 2
    if dimension == 2:
        cx = np.cos(k[..., 0] * a / 2) ** 2
        cy = np.cos(k[..., 1] * a / 2) ** 2
        if config_index == 1:
            return 2 * (cx + cy)
        if config_index == 2:
            return 16 * cx * cy
        raise ProbeError("2D geometry defines i = 1, 2")
    raise ProbeError(f"unsupported dimension {dimension}")


def kitaev_geometry_factor(k, lattice_constant: float = 1.0):
    """(1 + cos k a)^2 = 4 cos^4(k a / 2), the squared config-II amplitude factor."""
    k = np.asarray(k, dtype=float)
    return (1 + np.cos(k * lattice_constant)) ** 2


def geometry_mean(form: str) -> float:
    """Brillouin-zone average of a geometry factor."""
    return {"cos2": 2.0, "cos4": 1.5, "2d_1": 2.0, "2d_2": 4.0}[form]


def _config_number(config) -> int:
    if isinstance(config, str):
        try:
            return {"I": 0, "II": 1, "III": 2}[config]
        except KeyError:
            raise ProbeError(f"unknown configuration {config!r}") from None
    return int(config)


def mode_amplitudes(model, config, modes: ModeTable, overlaps: OverlapSet | None = None,
                    form: str = "kitaev") -> np.ndarray:
    """Real interaction amplitude of every mode for measurement position ``config``.

    Kitaev: config I -> cos(theta/2); config II -> [1 + cos k] cos(theta/2)
    (``form="kitaev"``) or |1 + e^{ik}| cos(theta/2) (``form="bond"``),
    scaled by J_1/J_0 when overlaps are given.  BH: J_i gamma_k times the
    modulus of the nearest-neighbour phase sum.
    """
    i = _config_number(config)
    if isinstance(model, KitaevModel):
        if i not in (0, 1):
            raise ProbeError("Kitaev measurements use configurations I and II")
        c = modes.coupling
        if i == 0:
            return c.copy()
        k = modes.momenta[:, 0] * model.lattice_constant
        scale = 1.0 if overlaps is None else overlaps.J_values[1] / overlaps.J_values[0]
        if form == "kitaev":
            return scale * (1 + np.cos(k)) * c
        if form == "bond":
            return scale * 2 * np.abs(np.cos(k / 2)) * c
        raise ProbeError(f"unknown Kitaev amplitude form {form!r}")
    if isinstance(model, BHModel):
        if i not in (0, 1, 2):
            raise ProbeError("BH measurements use configurations I, II, III")
        jv = (1.0, 1.0, 1.0) if overlaps is None else overlaps.J_values
        a = model.lattice_constant
        k = modes.momenta
        base = jv[i] * modes.coupling
        if i == 0:
            return base
        cx = np.abs(np.cos(k[:, 0] * a / 2))
        if i == 1:
            return base * 2 * cx
        cy = np.abs(np.cos(k[:, 1] * a / 2))
        return base * 4 * cx * cy
    if isinstance(model, SyntheticModel):
        if i != 0:
            raise ProbeError("synthetic models only define configuration I")
        return modes.coupling.copy()
    raise ProbeError(f"unsupported model {type(model).__name__}")


def interaction_amplitude(model, probe: ProbeConfig | None, config_index, mode,
                          form: str = "kitaev") -> float:
    """Amplitude of a single mode; thin wrapper over :func:`mode_amplitudes`."""
    table = ModeTable(momenta=np.atleast_2d(mode.momentum).astype(float),
                      frequency=np.array([mode.frequency]), coupling=np.array([mode.coupling_factor]),
                      degeneracy=np.array([mode.degeneracy]), occupation=np.array([mode.occupation]),
                      statistics=mode.statistics, orbit=np.zeros(1, dtype=int))
    if isinstance(model, KitaevModel) and table.momenta.shape[1] != 1:
        raise ProbeError("mode does not belong to a 1D model")
    if isinstance(model, BHModel) and table.momenta.shape[1] != 2:
        raise ProbeError("mode does not belong to a 2D model")
    overlaps = None
    if probe is not None and not isinstance(model, SyntheticModel):
        overlaps = overlap_integrals(probe, dimension=model.dimension,
                                     lattice_constant=model.lattice_constant)
    return float(mode_amplitudes(model, config_index, table, overlaps, form)[0])
