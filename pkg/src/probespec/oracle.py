"""Exact small-system references for the perturbative formulas.

* :class:`FockSystem` - a two-level probe coupled to M quasiparticle modes,
  evolved exactly by dense diagonalisation.
* :func:`bdg_spectrum` - real-space Bogoliubov-de Gennes matrix of the ring.
* :func:`exact_thermal_correlator` - <c_l^+(tau) c_j(0)> from the many-body
  Fock space (Jordan-Wigner matrices) or from the BdG transformation.

Nothing here uses the closed forms in ``rates`` or ``correlations``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .models import BOSONIC, FERMIONIC, KitaevModel, thermal_occupation

DEFAULT_CAP = 2**16


class CapacityError(RuntimeError):
    pass


class ContractError(ValueError):
    pass


# -- operators ---------------------------------------------------------------

def fermion_operators(m: int) -> list:
    """Annihilators c_0..c_{m-1} on 2^m states (Jordan-Wigner, mode 0 most significant)."""
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    z = np.diag([1.0, -1.0])
    eye = np.eye(2)
    ops = []
    for j in range(m):
        op = np.ones((1, 1))
        for i in range(m):
            op = np.kron(op, z if i < j else (a if i == j else eye))
        ops.append(op)
    return ops


def boson_operators(m: int, truncation: int) -> list:
    d = truncation + 1
    a = np.diag(np.sqrt(np.arange(1, d)), 1)
    eye = np.eye(d)
    ops = []
    for j in range(m):
        op = np.ones((1, 1))
        for i in range(m):
            op = np.kron(op, a if i == j else eye)
        ops.append(op)
    return ops


def _boltzmann(energies, beta):
    e = np.asarray(energies, dtype=float)
    if beta == 0:
        return np.full(e.size, 1.0 / e.size)
    if math.isinf(beta):
        p = (e <= e.min() + 1e-10 * max(1.0, abs(e.min()))).astype(float)
    else:
        p = np.exp(-beta * (e - e.min()))
    return p / p.sum()


# -- probe + modes -------------------------------------------------------------

@dataclass(frozen=True)
class FockSystem:
    """H = nu |e><e| + sum_k omega_k b_k^+ b_k + g sum_k A_k (sigma^+ b_k + b_k^+ sigma^-)."""

    mode_frequencies: tuple
    mode_couplings: tuple
    statistics: str = FERMIONIC
    probe_gap: float = 1.0
    coupling: float = 0.01
    truncation: int = 6
    cap: int = DEFAULT_CAP
    occupations: tuple | None = None   # pinned per-mode occupations instead of thermal

    def __post_init__(self):
        if len(self.mode_frequencies) != len(self.mode_couplings):
            raise ContractError("one coupling per mode")
        if self.statistics not in (FERMIONIC, BOSONIC):
            raise ContractError(f"unknown statistics {self.statistics!r}")
        if self.dimension > self.cap:
            raise CapacityError(f"state space {self.dimension} exceeds cap {self.cap}")

    @property
    def local_dim(self) -> int:
        return 2 if self.statistics == FERMIONIC else self.truncation + 1

    @property
    def dimension(self) -> int:
        return 2 * self.local_dim ** len(self.mode_frequencies)

    @cached_property
    def _ops(self):
        m = len(self.mode_frequencies)
        return fermion_operators(m) if self.statistics == FERMIONIC else boson_operators(m, self.truncation)

    def hamiltonian(self) -> np.ndarray:
        dm = self.local_dim ** len(self.mode_frequencies)
        bath = np.zeros((dm, dm))
        coup = np.zeros((dm, dm))
        for w, amp, b in zip(self.mode_frequencies, self.mode_couplings, self._ops):
            bath += w * b.T @ b
            coup += amp * b
        sp = np.array([[0.0, 0.0], [1.0, 0.0]])  # |e><g|, basis (g, e)
        pe = np.diag([0.0, 1.0])
        h = (self.probe_gap * np.kron(pe, np.eye(dm)) + np.kron(np.eye(2), bath)
             + self.coupling * (np.kron(sp, coup) + np.kron(sp.T, coup.T)))
        if np.max(np.abs(h - h.T)) > 1e-12:
            raise ContractError("Hamiltonian is not Hermitian")
        return h

    def mode_weights(self, beta: float) -> np.ndarray:
        """Product-state probabilities of every bath occupation configuration."""
        d = self.local_dim
        if self.occupations is not None:
            occ = np.asarray(self.occupations, dtype=float)
            if self.statistics != FERMIONIC:
                raise ContractError("pinned occupations are supported for fermions only")
            per = [np.array([1 - n, n]) for n in occ]
        else:
            per = []
            for w in self.mode_frequencies:
                levels = np.arange(d) * w
                per.append(_boltzmann(levels, beta))
        p = np.ones(1)
        for q in per:
            p = np.kron(p, q)
        return p

    def mean_occupations(self, beta: float) -> np.ndarray:
        p = self.mode_weights(beta)
        return np.array([p @ np.diag(b.T @ b) for b in self._ops])


def exact_transition_probability(system: FockSystem, beta: float, times) -> np.ndarray:
    """Excited-probe population after time t from |g> (x) thermal bath, exact."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    h = system.hamiltonian()
    e, v = np.linalg.eigh(h)
    dm = h.shape[0] // 2
    p = system.mode_weights(beta)
    keep = p > 0
    # initial states |g, config>: the first dm basis vectors
    vg = v[:dm][keep]              # (configs, eig)
    ve = v[dm:]                    # (dm, eig) rows for |e, .>
    out = np.empty(times.size)
    for i, t in enumerate(times):
        ph = np.exp(-1j * e * t)
        amp = (vg * ph) @ ve.T     # <e, c'| U |g, c>
        out[i] = float(p[keep] @ np.sum(np.abs(amp) ** 2, axis=1))
    return out


def fgr_probability(system: FockSystem, beta: float, times) -> np.ndarray:
    """g^2 t^2 sum_k A_k^2 n_k sinc^2((nu - omega_k) t / 2) for the same system."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    w = np.asarray(system.mode_frequencies, dtype=float)
    a = np.asarray(system.mode_couplings, dtype=float)
    if system.occupations is not None:
        n = np.asarray(system.occupations, dtype=float)
    else:
        n = thermal_occupation(w, beta, system.statistics)
    x = np.multiply.outer(t, system.probe_gap - w) / 2
    return system.coupling**2 * t**2 * (np.sinc(x / np.pi) ** 2 @ (a**2 * n))


# -- Kitaev ring ---------------------------------------------------------------

def pairing_matrix(sites: int, pairing: float) -> np.ndarray:
    d = np.zeros((sites, sites))
    for j in range(sites):
        d[j, (j + 1) % sites] += pairing
        d[(j + 1) % sites, j] -= pairing
    return d


def bdg_matrix(hopping, pairing: float) -> np.ndarray:
    h = np.asarray(hopping, dtype=float)
    n = h.shape[0]
    if h.shape != (n, n) or np.max(np.abs(h - h.T.conj())) > 1e-12:
        raise ContractError("hopping matrix must be square and Hermitian")
    d = pairing_matrix(n, pairing)
    return np.block([[h, d], [d.T.conj(), -h.T]])


def bdg_spectrum(sites: int, hopping, pairing: float):
    """(non-negative quasiparticle energies, eigenvalues, Nambu eigenvectors).

    Rows of the eigenvector matrix are (c_0..c_{N-1}, c_0^+..c_{N-1}^+).
    """
    if sites > 64:
        raise CapacityError("dense BdG oracle limited to 64 sites")
    m = bdg_matrix(hopping, pairing)
    if m.shape[0] != 2 * sites:
        raise ContractError("hopping matrix size does not match the number of sites")
    e, w = np.linalg.eigh(m)
    return np.sort(e)[sites:], e, w


def kitaev_hamiltonian_fock(model: KitaevModel) -> tuple:
    n = model.sites
    if n > 12:
        raise CapacityError("Fock-space Kitaev oracle limited to 12 sites")
    c = fermion_operators(n)
    h = model.hopping_matrix()
    dim = 2**n
    ham = np.zeros((dim, dim))
    for l in range(n):
        for j in range(n):
            if h[l, j]:
                ham += h[l, j] * c[l].T @ c[j]
    for j in range(n):
        pair = c[j].T @ c[(j + 1) % n].T  # c_j^+ c_{j+1}^+
        ham += model.pairing * (pair + pair.T)
    return ham, c


def exact_thermal_correlator(model: KitaevModel, l: int, j: int, tau, beta: float,
                             route: str = "fock"):
    """<c_l^+(tau) c_j(0)> in the thermal state of the real-space ring."""
    tau = np.asarray(tau, dtype=float)
    if route == "fock":
        if model.sites > 10:
            raise CapacityError("Fock route limited to 10 sites; use route='bdg'")
        ham, c = kitaev_hamiltonian_fock(model)
        e, v = np.linalg.eigh(ham)
        p = _boltzmann(e, beta)
        cl_dag = v.T @ c[l].T @ v
        cj = v.T @ c[j] @ v
        # sum_{m,n} p_m <m|c_l^+|n><n|c_j|m> e^{i (E_m - E_n) tau}
        w = p[:, None] * cl_dag * cj.T
        gaps = np.subtract.outer(e, e)
        mask = np.abs(w) > 0
        return np.exp(1j * np.multiply.outer(tau, gaps[mask])) @ w[mask]
    if route == "bdg":
        _, e, w = bdg_spectrum(model.sites, model.hopping_matrix(), model.pairing)
        if beta == 0:
            f = np.full(e.size, 0.5)
        else:
            f = 0.5 * (1 - np.tanh(0.5 * beta * e)) if not math.isinf(beta) else (e < 0) + 0.5 * (e == 0)
        # <Psi_a^+(tau) Psi_b> = sum_c conj(W_ac) W_bc f(E_c) e^{i E_c tau}
        coef = np.conj(w[l]) * w[j] * f
        return np.exp(1j * np.multiply.outer(tau, e)) @ coef
    raise ContractError(f"unknown route {route!r}")
