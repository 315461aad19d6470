"""Single-probe transition probabilities.

The closed form is the thermally weighted sinc^2 sum

    Gamma~(nu, t) = sum_k |A_k|^2 n_k sinc^2[(nu - omega_k) t / 2],

``rate_integral`` evaluates the underlying double time integral for an
arbitrary two-time correlation function, and ``bh_rate_components`` splits
the Bose-Hubbard rate into elastic, emission and absorption parts.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .models import BHModel, ModeTable, SyntheticModel, model_modes
from .probe import mode_amplitudes, overlap_integrals


class RateError(ValueError):
    pass


class ContractViolation(RateError):
    """Input correlation function is not Hermitian."""


def sinc(x):
    """sin(x)/x with sinc(0) = 1 (unnormalised)."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


@dataclass
class TransitionCurve:
    nu_grid: np.ndarray
    values: np.ndarray
    time: float
    config_index: str = "I"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nu_grid = np.asarray(self.nu_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.nu_grid.shape != self.values.shape:
            raise RateError("nu_grid and values differ in length")
        if self.nu_grid.size > 1 and np.any(np.diff(self.nu_grid) <= 0):
            raise RateError("nu_grid must be strictly increasing")

    @property
    def spacing(self) -> float:
        if self.nu_grid.size < 2:
            return 0.0
        return float(np.max(np.diff(self.nu_grid)))

    @property
    def resolved(self) -> bool:
        """Grid resolves sinc^2 peaks (spacing <= 2 pi / (5 t))."""
        return self.spacing <= 2 * np.pi / (5 * self.time) * (1 + 1e-6)

    def __len__(self):
        return self.nu_grid.size


# -- sinc^2 sums -------------------------------------------------------------

@numba.njit(cache=True, fastmath=True)
def _accumulate(nu, cos_nt, sin_nt, half_t, omega, cos_wt, sin_wt, weights, lo, hi, out):
    # blocked over nu so the partial sums stay in cache
    n = nu.shape[0]
    rows = weights.shape[0]
    block = 4096
    buf = np.empty(block)
    for b0 in range(0, n, block):
        b1 = min(b0 + block, n)
        for k in range(omega.shape[0]):
            w0 = omega[k]
            cw = cos_wt[k]
            sw = sin_wt[k]
            a = min(max(lo[k], b0), b1)
            b = min(max(hi[k], b0), b1)
            for i in range(b0, a):
                x = (nu[i] - w0) * half_t
                buf[i - b0] = 0.5 * (1.0 - cos_nt[i] * cw - sin_nt[i] * sw) / (x * x)
            for i in range(a, b):
                x = (nu[i] - w0) * half_t
                if x == 0.0:
                    buf[i - b0] = 1.0
                else:
                    s = math.sin(x) / x
                    buf[i - b0] = s * s
            for i in range(b, b1):
                x = (nu[i] - w0) * half_t
                buf[i - b0] = 0.5 * (1.0 - cos_nt[i] * cw - sin_nt[i] * sw) / (x * x)
            for j in range(rows):
                wj = weights[j, k]
                for i in range(b0, b1):
                    out[j, i] += wj * buf[i - b0]
    return out


def group_frequencies(frequencies, weights, t: float, tol: float = 1e-10):
    """Merge modes with the same frequency (|d omega| t < tol); weights add.

    Only an algebraic regrouping of identical sinc^2 kernels, not a
    degeneracy shortcut: every mode's weight still enters explicitly.
    """
    w = np.asarray(frequencies, dtype=float)
    wt = np.atleast_2d(np.asarray(weights, dtype=float))
    if w.size == 0:
        return w, wt
    order = np.argsort(w, kind="stable")
    ws = w[order]
    starts = np.concatenate([[True], np.diff(ws) * t >= tol])
    group = np.cumsum(starts) - 1
    freqs = ws[starts]
    summed = np.zeros((wt.shape[0], freqs.size))
    np.add.at(summed.T, group, wt[:, order].T)
    return freqs, summed


def sinc2_sum(nu, t: float, frequencies, weights) -> np.ndarray:
    """sum_k weights[:, k] sinc^2((nu - omega_k) t / 2) for one or several weight rows.

    Returns an array shaped ``(rows, len(nu))`` (or ``(len(nu),)`` for a
    single weight vector).
    """
    if t <= 0:
        raise RateError("measurement time must be positive")
    nu = np.asarray(nu, dtype=float)
    scalar = nu.ndim == 0
    nu = np.atleast_1d(nu)
    single = np.asarray(weights).ndim == 1
    freqs, wts = group_frequencies(frequencies, weights, t)
    out = np.zeros((wts.shape[0], nu.size))
    if freqs.size and nu.size:
        if nu.size * freqs.size < 200_000 or np.any(np.diff(nu) <= 0):
            x = np.subtract.outer(nu, freqs) * (t / 2)
            out = (sinc(x) ** 2 @ wts.T).T
        else:
            half_t = 0.5 * t
            # |x| < 1 handled with the direct formula to avoid cancellation
            lo = np.searchsorted(nu, freqs - 1.0 / half_t, side="left")
            hi = np.searchsorted(nu, freqs + 1.0 / half_t, side="right")
            phase = nu * t
            _accumulate(nu, np.cos(phase), np.sin(phase), half_t, freqs,
                        np.cos(freqs * t), np.sin(freqs * t), np.ascontiguousarray(wts),
                        lo, hi, out)
    if single:
        out = out[0]
        return float(out[0]) if scalar else out
    return out[:, 0] if scalar else out


# -- model-level rates -------------------------------------------------------

def _overlaps_for(model, probe):
    if probe is None or isinstance(model, SyntheticModel):
        return None
    return overlap_integrals(probe, dimension=model.dimension, lattice_constant=model.lattice_constant)


def absorption_weights(model, probe, config_index, modes: ModeTable, form: str = "kitaev"):
    """|A_k|^2 n_k for every mode (the sinc^2 weights on the absorption side)."""
    amp = mode_amplitudes(model, config_index, modes, _overlaps_for(model, probe), form)
    return amp**2 * modes.occupation


def rate_sinc(model, probe, config_index, nu, t: float, beta: float, form: str = "kitaev"):
    """Time-rescaled transition rate Gamma / (g^2 t^2) at probe frequency ``nu``.

    Absorption form (rotating-wave): weights |A_k|^2 n_k at nu = omega_k.  For
    the Bose-Hubbard model use :func:`bh_rate_components`.
    """
    if t <= 0:
        raise RateError("measurement time must be positive")
    modes = model_modes(model, beta)
    w = absorption_weights(model, probe, config_index, modes, form)
    return sinc2_sum(nu, t, modes.frequency, w)


def rate_integral(bath_correlation, nu: float, t: float, quadrature_points: int = 200,
                  coupling: float = 1.0, check_hermitian: bool = True) -> float:
    """g^2 int_0^t int_0^t C(t1, t2) exp(-i nu (t1 - t2)) dt1 dt2 by Gauss-Legendre.

    ``bath_correlation`` must accept broadcast arrays (t1, t2) and satisfy
    C(t1, t2) = conj(C(t2, t1)); this is spot-checked.
    """
    if t <= 0:
        raise RateError("measurement time must be positive")
    x, w = np.polynomial.legendre.leggauss(quadrature_points)
    s = 0.5 * t * (x + 1)
    w = 0.5 * t * w
    t1, t2 = np.meshgrid(s, s, indexing="ij")
    c = np.asarray(bath_correlation(t1, t2), dtype=complex) * np.ones_like(t1)
    if check_hermitian:
        idx = np.linspace(0, quadrature_points - 1, min(7, quadrature_points)).astype(int)
        sub = c[np.ix_(idx, idx)]
        scale = max(np.max(np.abs(sub)), 1e-300)
        if np.max(np.abs(sub - sub.conj().T)) > 1e-8 * scale:
            raise ContractViolation("bath correlation is not Hermitian: C(t1,t2) != conj(C(t2,t1))")
    phase = np.exp(-1j * nu * s)
    val = coupling**2 * np.einsum("i,j,ij->", w * phase, w * phase.conj(), c)
    if abs(val.imag) > 1e-9 * max(abs(val.real), 1e-300) and abs(val.imag) > 1e-14:
        warnings.warn(f"rate integral has imaginary part {val.imag:.3e}; discarded")
    return max(float(val.real), 0.0) if val.real > -1e-12 * abs(val) else float(val.real)


def mode_sum_correlation(frequencies, weights):
    """C(t1, t2) = sum_k w_k exp(i omega_k (t1 - t2)), the thermal mode-sum correlator."""
    f = np.asarray(frequencies, float)
    w = np.asarray(weights, float)

    def corr(t1, t2):
        tau = np.asarray(t1) - np.asarray(t2)
        return np.tensordot(np.exp(1j * np.multiply.outer(tau, f)), w, axes=([-1], [0]))

    return corr


def elastic_kernel(nu, t: float, kind: str = "sinc2"):
    """Time-rescaled elastic factor: sinc^2(nu t / 2) (double integral of a
    constant) or the literal sinc(nu t)."""
    nu = np.asarray(nu, dtype=float)
    if kind == "sinc2":
        return sinc(nu * t / 2) ** 2
    if kind == "literal":
        return sinc(nu * t)
    raise RateError(f"unknown elastic kernel {kind!r}")


def bh_weights(model: BHModel, probe, config_index, modes: ModeTable):
    """Emission and absorption weights Phi_0^2 |J_i gamma_k|^2 (1 + n), ... n."""
    amp2 = mode_amplitudes(model, config_index, modes, _overlaps_for(model, probe)) ** 2
    phi2 = model.condensate_filling
    return phi2 * amp2 * (1 + modes.occupation), phi2 * amp2 * modes.occupation


def bh_rate_components(model: BHModel, probe, nu, t: float, beta: float, config_index="I",
                       elastic: str = "sinc2"):
    """(Gamma_0, sum_k Gamma^-_k, sum_k Gamma^+_k), all time-rescaled.

    Gamma^- peaks at nu = -omega_k with weight (1 + n), Gamma^+ at nu = +omega_k
    with weight n; Gamma_0 = |gamma_0|^2 Phi_0^4 times the elastic kernel.
    """
    if t <= 0:
        raise RateError("measurement time must be positive")
    modes = model_modes(model, beta)
    w_em, w_abs = bh_weights(model, probe, config_index, modes)
    gamma0 = 0.0 if probe is None else probe.elastic_overlap
    g0 = gamma0**2 * model.condensate_filling**2 * elastic_kernel(nu, t, elastic)
    minus = sinc2_sum(nu, t, -modes.frequency, w_em)
    plus = sinc2_sum(nu, t, modes.frequency, w_abs)
    return g0, minus, plus


def default_nu_grid(model, t: float, beta: float = 1.0, margin: float | None = None,
                    emission: bool = False) -> np.ndarray:
    """Uniform grid of spacing 2 pi / (5 t) covering the spectrum (plus a margin)."""
    modes = model_modes(model, beta)
    step = 2 * np.pi / (5 * t)
    margin = 20 * step if margin is None else margin
    top = float(np.max(modes.frequency)) + margin
    bottom = -top if emission else max(float(np.min(modes.frequency)) - margin, step)
    n = int(math.floor((top - bottom) / step)) + 1
    return bottom + step * np.arange(n)


def sweep(model, probe, config_index, nu_grid, t: float, beta: float, form: str = "kitaev",
          elastic: str = "sinc2", seed: int | None = None) -> TransitionCurve:
    """Evaluate the rescaled rate across ``nu_grid`` and wrap it in a curve."""
    nu = np.asarray(nu_grid, dtype=float)
    label = config_index if isinstance(config_index, str) else ("I", "II", "III")[int(config_index)]
    meta = {
        "g": None if probe is None else probe.coupling,
        "beta": beta,
        "model": type(model).__name__,
        "seed": seed,
        "form": form,
        "warnings": [],
    }
    if nu.size == 0:
        return TransitionCurve(nu, nu.copy(), t, label, meta)
    if isinstance(model, BHModel):
        g0, minus, plus = bh_rate_components(model, probe, nu, t, beta, label, elastic)
        values = g0 + minus + plus
        if elastic == "literal":
            values = np.clip(values, 0.0, None)
    else:
        if np.any(nu < 0):
            meta["warnings"].append("negative nu requested for an absorption-only model")
        values = rate_sinc(model, probe, label, nu, t, beta, form)
    curve = TransitionCurve(nu, np.atleast_1d(values), t, label, meta)
    if len(curve) > 1 and not curve.resolved:
        meta["warnings"].append(
            f"nu spacing {curve.spacing:.3e} exceeds 2pi/(5t) = {2 * np.pi / (5 * t):.3e}")
    return curve

