"""Exactly solvable lattice models probed by the impurity.

Three models are provided: the long-range Kitaev ring (1D, fermionic), the
2D Bose-Hubbard superfluid at Bogoliubov level (bosonic), and a synthetic
list of modes used by tests and oracles.  Every model produces a
:class:`ModeTable`: per-mode frequency, coupling factor, degeneracy and
thermal occupation on a Brillouin-zone grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import numpy as np

FERMIONIC = "fermionic"
BOSONIC = "bosonic"


class ModelError(ValueError):
    """Invalid model parameters or a request outside the model's domain."""


@dataclass(frozen=True)
class BrillouinGrid:
    dimension: int
    sites_per_axis: int
    lattice_constant: float = 1.0

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ModelError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.sites_per_axis < 1:
            raise ModelError("sites_per_axis must be positive")
        if self.lattice_constant <= 0:
            raise ModelError("lattice_constant must be positive")

    @property
    def spacing(self) -> float:
        """Momentum step 2*pi/(N_s a)."""
        return 2 * np.pi / (self.sites_per_axis * self.lattice_constant)

    @cached_property
    def indices(self) -> np.ndarray:
        """Integer labels m per axis, shape (N_s**dim, dim), folded to (-N/2, N/2]."""
        n = self.sites_per_axis
        m = np.arange(n)
        m = np.where(m > n // 2, m - n, m)
        if self.dimension == 1:
            return m[:, None]
        mx, my = np.meshgrid(m, m, indexing="ij")
        return np.stack([mx.ravel(), my.ravel()], axis=1)

    @cached_property
    def momenta(self) -> np.ndarray:
        """Momenta in the symmetric zone (-pi/a, pi/a], shape (N_s**dim, dim)."""
        return self.indices * self.spacing

    @cached_property
    def orbit_labels(self) -> np.ndarray:
        """Canonical label of each momentum's point-group orbit.

        1D orbits are {k, -k}; 2D orbits are generated by sign flips and the
        k_x <-> k_y swap.
        """
        folded = np.abs(self.indices)
        if self.dimension == 1:
            return folded[:, 0]
        lo = folded.min(axis=1)
        hi = folded.max(axis=1)
        return lo * (self.sites_per_axis + 1) + hi

    @cached_property
    def orbit_sizes(self) -> np.ndarray:
        """Number of grid momenta sharing each momentum's orbit."""
        _, inverse, counts = np.unique(self.orbit_labels, return_inverse=True, return_counts=True)
        return counts[inverse]

    def __len__(self) -> int:
        return self.sites_per_axis ** self.dimension


@dataclass(frozen=True)
class ModeData:
    momentum: np.ndarray
    frequency: float
    coupling_factor: float
    degeneracy: int
    statistics: str
    occupation: float


@dataclass(frozen=True)
class ModeTable:
    """Array-of-modes view of a model at one temperature.

    ``gapless`` flags modes whose Bogoliubov angle was undefined (omega = 0)
    and set to zero by convention.
    """

    momenta: np.ndarray
    frequency: np.ndarray
    coupling: np.ndarray
    degeneracy: np.ndarray
    occupation: np.ndarray
    statistics: str
    orbit: np.ndarray
    theta: np.ndarray | None = None
    gapless: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.frequency)

    def __iter__(self) -> Iterator[ModeData]:
        for i in range(len(self)):
            yield ModeData(self.momenta[i], float(self.frequency[i]), float(self.coupling[i]),
                           int(self.degeneracy[i]), self.statistics, float(self.occupation[i]))

    def distinct(self):
        """Representative index and full membership of every orbit.

        Returns ``(representatives, members)`` where ``members`` is a list of
        index arrays.  The representative is the member with non-negative,
        sorted momentum components.
        """
        labels, first = np.unique(self.orbit, return_index=True)
        members = [np.flatnonzero(self.orbit == lab) for lab in labels]
        reps = []
        for idx in members:
            k = self.momenta[idx]
            score = np.all(k >= 0, axis=1)
            if k.shape[1] == 2:
                score &= k[:, 0] <= k[:, 1]
            reps.append(idx[np.argmax(score)])
        return np.asarray(reps), members

    def to_columns(self) -> dict[str, np.ndarray]:
        cols = {}
        names = ("kx", "ky")[: self.momenta.shape[1]]
        for i, name in enumerate(names):
            cols[name] = self.momenta[:, i]
        cols.update(omega=self.frequency, coupling=self.coupling,
                    degeneracy=self.degeneracy.astype(float), occupation=self.occupation)
        return cols


def thermal_occupation(frequency, inverse_temperature, statistics):
    """Bose-Einstein or Fermi-Dirac occupation; ``inverse_temperature=inf`` is T = 0."""
    w = np.asarray(frequency, dtype=float)
    beta = float(inverse_temperature)
    if beta < 0 or math.isnan(beta):
        raise ModelError("inverse temperature must be non-negative")
    if statistics == BOSONIC:
        if np.any(w <= 0):
            raise ModelError("bosonic occupation needs omega > 0 (handle the condensate upstream)")
        if math.isinf(beta):
            return np.zeros_like(w) if w.ndim else 0.0
        with np.errstate(over="ignore"):
            return 1.0 / np.expm1(beta * w)
    if statistics == FERMIONIC:
        if math.isinf(beta):
            out = np.where(w > 0, 0.0, np.where(w < 0, 1.0, 0.5))
            return out if w.ndim else float(out)
        # logistic form stays finite for large |beta*w|
        return 0.5 * (1.0 - np.tanh(0.5 * beta * w))
    raise ModelError(f"unknown statistics {statistics!r}")


@dataclass(frozen=True)
class KitaevModel:
    """Kitaev ring with long-range hopping J_r = J |pi / (N sin(pi r / N))|**alpha.

    ``pairing`` is Delta, the energy unit.  Odd rings are the physical case;
    even rings are accepted when ``allow_even`` is set (oracle comparisons).
    """

    hopping_strength: float
    pairing: float
    range_exponent: float
    sites: int
    lattice_constant: float = 1.0
    allow_even: bool = field(default=False, repr=False)

    def __post_init__(self):
        if self.pairing < 0:
            raise ModelError("pairing must be non-negative")
        if self.sites < 3:
            raise ModelError("need at least 3 sites")
        if self.sites % 2 == 0 and not self.allow_even:
            raise ModelError("Kitaev ring needs an odd number of sites")

    @property
    def grid(self) -> BrillouinGrid:
        return BrillouinGrid(1, self.sites, self.lattice_constant)

    @property
    def dimension(self) -> int:
        return 1

    @property
    def statistics(self) -> str:
        return FERMIONIC

    @cached_property
    def hopping_table(self) -> np.ndarray:
        """J_r for r = 1 .. N_s - 1."""
        r = np.arange(1, self.sites)
        return kitaev_hopping(self, r)

    def hopping_matrix(self) -> np.ndarray:
        n = self.sites
        sep = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
        h = np.zeros((n, n))
        off = sep != 0
        h[off] = self.hopping_table[sep[off] - 1]
        return h

    def single_particle_energy(self, k):
        """epsilon_k = sum_{r=1}^{N-1} J_r cos(k r) (ring sum)."""
        k = np.asarray(k, dtype=float)
        r = np.arange(1, self.sites)
        return np.cos(np.multiply.outer(k, r)) @ self.hopping_table

    def pairing_gap(self, k):
        return 2.0 * self.pairing * np.sin(np.asarray(k, dtype=float))

    def dispersion(self, k):
        k = np.asarray(k, dtype=float)
        if k.ndim and k.shape[-1] == 1:
            k = k[..., 0]
        return np.hypot(self.single_particle_energy(k), self.pairing_gap(k))


def kitaev_hopping(model: KitaevModel, separation):
    r = np.asarray(separation)
    if np.any(r < 1) or np.any(r > model.sites - 1):
        raise ModelError(f"separation must lie in [1, {model.sites - 1}]")
    n = model.sites
    return model.hopping_strength * np.abs(np.pi / (n * np.sin(np.pi * r / n))) ** model.range_exponent


def kitaev_modes(model: KitaevModel, inverse_temperature: float) -> ModeTable:
    grid = model.grid
    k = grid.momenta[:, 0]
    eps = model.single_particle_energy(k)
    gap = model.pairing_gap(k)
    omega = np.hypot(eps, gap)
    gapless = omega <= 1e-14 * max(1.0, float(np.max(np.abs(eps))))
    theta = np.where(gapless, 0.0, np.arctan2(gap, eps))
    return ModeTable(
        momenta=grid.momenta,
        frequency=omega,
        coupling=np.cos(theta / 2),
        degeneracy=grid.orbit_sizes,
        occupation=thermal_occupation(omega, inverse_temperature, FERMIONIC),
        statistics=FERMIONIC,
        orbit=grid.orbit_labels,
        theta=theta,
        gapless=gapless,
    )


@dataclass(frozen=True)
class BHModel:
    """Bose-Hubbard superfluid on an N x N square lattice, Bogoliubov level."""

    hopping: float
    interaction: float
    sites_per_axis: int
    condensate_filling: float = 1.0
    lattice_constant: float = 1.0

    def __post_init__(self):
        if self.hopping <= 0:
            raise ModelError("hopping J must be positive")
        if self.interaction < 0:
            raise ModelError("interaction U must be non-negative")
        if self.condensate_filling <= 0:
            raise ModelError("condensate filling must be positive")
        if self.sites_per_axis < 2:
            raise ModelError("need at least 2 sites per axis")

    @property
    def grid(self) -> BrillouinGrid:
        return BrillouinGrid(2, self.sites_per_axis, self.lattice_constant)

    @property
    def dimension(self) -> int:
        return 2

    @property
    def statistics(self) -> str:
        return BOSONIC

    @property
    def superfluid_regime(self) -> bool:
        """True when U n0 << J (Bogoliubov theory trustworthy); flagged, not enforced."""
        return self.interaction * self.condensate_filling < 0.5 * self.hopping

    @property
    def sound_velocity(self) -> float:
        return self.lattice_constant * math.sqrt(2 * self.interaction * self.condensate_filling * self.hopping)

    def free_energy(self, k):
        k = np.atleast_2d(np.asarray(k, dtype=float))
        a = self.lattice_constant
        return 4 * self.hopping * np.sum(np.sin(k * a / 2) ** 2, axis=-1)

    def dispersion(self, k):
        e0 = self.free_energy(k)
        return np.sqrt(e0 * (e0 + 2 * self.interaction * self.condensate_filling))


def bh_modes(model: BHModel, inverse_temperature: float, include_condensate: bool = False) -> ModeTable:
    """Bogoliubov phonons; the k = 0 condensate mode is excluded."""
    if include_condensate:
        raise ModelError("k = 0 is the condensate and is excluded from the mode list")
    if not inverse_temperature > 0:
        raise ModelError("inverse temperature must be positive")
    grid = model.grid
    keep = np.any(grid.indices != 0, axis=1)
    k = grid.momenta[keep]
    e0 = model.free_energy(k)
    omega = np.sqrt(e0 * (e0 + 2 * model.interaction * model.condensate_filling))
    return ModeTable(
        momenta=k,
        frequency=omega,
        coupling=np.sqrt(e0 / omega),
        degeneracy=grid.orbit_sizes[keep],
        occupation=thermal_occupation(omega, inverse_temperature, BOSONIC),
        statistics=BOSONIC,
        orbit=grid.orbit_labels[keep],
    )


@dataclass(frozen=True)
class SyntheticModel:
    """Explicit list of modes; occupations may be pinned instead of thermal."""

    frequencies: tuple
    couplings: tuple
    statistics: str = FERMIONIC
    occupations: tuple | None = None

    @property
    def dimension(self) -> int:
        return 1

    def modes(self, inverse_temperature: float = math.inf) -> ModeTable:
        w = np.asarray(self.frequencies, dtype=float)
        c = np.asarray(self.couplings, dtype=float)
        if w.shape != c.shape:
            raise ModelError("frequencies and couplings must have equal length")
        if self.occupations is not None:
            n = np.asarray(self.occupations, dtype=float)
        else:
            n = thermal_occupation(w, inverse_temperature, self.statistics)
        idx = np.arange(len(w))
        return ModeTable(momenta=np.zeros((len(w), 1)), frequency=w, coupling=c,
                         degeneracy=np.ones(len(w), dtype=int), occupation=np.asarray(n, float),
                         statistics=self.statistics, orbit=idx)


def model_modes(model, inverse_temperature: float) -> ModeTable:
    if isinstance(model, KitaevModel):
        return kitaev_modes(model, inverse_temperature)
    if isinstance(model, BHModel):
        return bh_modes(model, inverse_temperature)
    if isinstance(model, SyntheticModel):
        return model.modes(inverse_temperature)
    raise ModelError(f"unsupported model {type(model).__name__}")


def group_velocity(model, k) -> np.ndarray:
    """Central finite difference of omega over the neighbouring grid momenta.

    Neighbours outside the zone wrap periodically, so a grid point next to a
    band extremum reports the (small) one-step slope.
    """
    grid = model.grid
    k = np.atleast_2d(np.asarray(k, dtype=float))
    dk = grid.spacing
    v = np.empty_like(k)
    for axis in range(grid.dimension):
        step = np.zeros(grid.dimension)
        step[axis] = dk
        v[:, axis] = (model.dispersion(k + step) - model.dispersion(k - step)) / (2 * dk)
    return v
