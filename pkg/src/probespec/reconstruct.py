"""From transition curves back to physics.

Peaks are located in each curve, the on-site (config I) amplitudes are
compared with those of displaced probes, the coupling ratio is calibrated and
every peak's amplitude ratio is inverted into a momentum magnitude on the
lattice grid.  ``bloch_reconstruct`` recovers a real Bloch function from
the modulus of its overlap with a known probe density.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .models import BHModel, BrillouinGrid, group_velocity
from .probe import geometry_mean
from .rates import TransitionCurve, sinc

EPS = np.finfo(float).eps

class ReconstructionError(ValueError):
    pass


class CalibrationError(ReconstructionError):
    pass


class InversionError(ReconstructionError):
    pass


class DeconvolutionError(ReconstructionError):
    pass


# -- data types --------------------------------------------------------------

@dataclass
class PeakSet:
    frequencies: np.ndarray
    amplitudes: np.ndarray
    widths: np.ndarray
    config_index: str = "I"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        self.widths = np.broadcast_to(np.asarray(self.widths, dtype=float), self.frequencies.shape).copy()
        if not (self.frequencies.shape == self.amplitudes.shape):
            raise ReconstructionError("frequencies and amplitudes differ in length")
        if np.any(np.diff(self.frequencies) <= 0):
            raise ReconstructionError("peak frequencies must be strictly increasing")
        if np.any(self.amplitudes <= 0):
            raise ReconstructionError("peak amplitudes must be positive")

    @property
    def peaks(self) -> list:
        return list(zip(self.frequencies.tolist(), self.amplitudes.tolist(), self.widths.tolist()))

    def __len__(self):
        return self.frequencies.size

    @classmethod
    def empty(cls, config_index="I", metadata=None) -> "PeakSet":
        z = np.zeros(0)
        return cls(z, z, z, config_index, dict(metadata or {}))


@dataclass(frozen=True)
class MeasurementWindow:
    t_min: float
    t_max: float
    convention: str = "grid"
    limiting_momentum: tuple = ()

    @property
    def empty(self) -> bool:
        return not self.t_min < self.t_max

    def contains(self, t: float) -> bool:
        return self.t_min <= t <= self.t_max


@dataclass
class Calibration:
    estimate: float
    mode: str
    matched: np.ndarray          # (n, 2) indices into base / alt
    orphans_base: np.ndarray     # frequencies
    orphans_alt: np.ndarray


@dataclass
class ReconstructedDispersion:
    frequencies: np.ndarray
    momenta: np.ndarray          # snapped |k| (n,) in 1D or sorted pairs (n, 2) in 2D
    raw_momenta: np.ndarray
    unassigned: np.ndarray
    calibration: dict
    ratios: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def points(self) -> list:
        if self.momenta.ndim == 1:
            return [(float(k), float(w)) for k, w in zip(self.momenta, self.frequencies)]
        return [(tuple(map(float, k)), float(w)) for k, w in zip(self.momenta, self.frequencies)]

    def to_columns(self) -> dict:
        n_a, n_u = self.frequencies.size, self.unassigned.size
        dim = 1 if self.momenta.ndim == 1 else self.momenta.shape[1]
        k = self.momenta.reshape(n_a, dim)
        cols = {}
        for i, name in enumerate(("kx", "ky")[:dim] if dim == 2 else ("k",)):
            cols[name] = np.concatenate([k[:, i], np.full(n_u, np.nan)])
        cols["omega"] = np.concatenate([self.frequencies, self.unassigned])
        cols["assigned"] = np.concatenate([np.ones(n_a), np.zeros(n_u)])
        return cols


# -- sinc^2 kernel -------------------------------------------------------------

def _kernel(nu, omega, t):
    return sinc((np.asarray(nu) - omega) * (t / 2)) ** 2


def _kernel_jac(nu, omega, t):
    """K and dK/domega for K = sinc^2((nu - omega) t / 2)."""
    x = (np.asarray(nu) - omega) * (t / 2)
    s = sinc(x)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    ds = np.where(small, -x / 3, (np.cos(xs) - s) / xs)
    return s * s, -t * s * ds


def _model(nu, omegas, amps, t):
    if len(omegas) == 0:
        return np.zeros_like(nu, dtype=float)
    return _kernel(np.subtract.outer(nu, np.asarray(omegas)), 0.0, t) @ np.asarray(amps)


def _local_maxima(y, threshold):
    core = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]) & (y[1:-1] >= threshold)
    return np.flatnonzero(core) + 1


def _parabola(nu, y, i):
    """Vertex of the parabola through (i-1, i, i+1)."""
    ym, y0, yp = y[i - 1], y[i], y[i + 1]
    den = ym - 2 * y0 + yp
    if den >= 0:
        return float(nu[i]), float(y0)
    d = 0.5 * (ym - yp) / den
    step = nu[i + 1] - nu[i] if d > 0 else nu[i] - nu[i - 1]
    return float(nu[i] + d * step), float(y0 - 0.25 * (ym - yp) * d)


def _merge(freqs, amps, radius):
    """Chain-merge components closer than ``radius``; the merged peak sits at
    the amplitude-weighted mean position and carries the summed amplitude."""
    if len(freqs) == 0:
        return np.zeros(0), np.zeros(0)
    order = np.argsort(freqs)
    f = np.asarray(freqs, float)[order]
    a = np.asarray(amps, float)[order]
    group = np.concatenate([[0], np.cumsum(np.diff(f) >= radius)])
    tot = np.bincount(group, weights=a)
    wpos = np.bincount(group, weights=a * f)
    first = np.concatenate([[True], np.diff(group) > 0])
    pos = np.where(tot > 0, wpos / np.where(tot > 0, tot, 1), f[first])
    return pos, tot


def _windows(nu, centers, half):
    idx = np.searchsorted(nu, centers)
    rows = (idx[:, None] + np.arange(-half, half + 1)[None, :]).ravel()
    rows = rows[(rows >= 0) & (rows < nu.size)]
    return np.unique(rows)


def _joint_refit(nu, y, t, freqs, amps, half, radius):
    rows = _windows(nu, freqs, half)
    x_nu, x_y = nu[rows], y[rows]
    p = len(freqs)
    lo = np.concatenate([freqs - radius / 2, np.zeros(p)])
    hi = np.concatenate([freqs + radius / 2, np.full(p, np.inf)])
    x0 = np.concatenate([freqs, np.maximum(amps, 0)])
    x0 = np.clip(x0, lo, np.nextafter(hi, -np.inf))
    scale = max(float(np.max(np.abs(x_y))), 1e-300)

    def fun(q):
        return (_model(x_nu, q[:p], q[p:], t) - x_y) / scale

    def jac(q):
        k, dk = _kernel_jac(np.subtract.outer(x_nu, q[:p]), 0.0, t)
        return np.hstack([dk * q[p:], k]) / scale

    sol = least_squares(fun, x0, jac=jac, bounds=(lo, hi), x_scale="jac", xtol=1e-14, ftol=1e-14,
                        gtol=1e-14, max_nfev=200)
    return sol.x[:p], sol.x[p:]


def detect_peaks(curve: TransitionCurve, threshold: float = 1e-3, method: str = "clean",
                 merge_radius: float | None = None, max_components: int = 5000) -> PeakSet:
    """Resonance peaks of a transition curve.

    ``method="quadratic"`` keeps local maxima above ``threshold`` x max,
    refines them by three-point parabolic interpolation and merges maxima
    closer than 4 pi / t.  The default ``"clean"`` additionally models each
    peak with the exact sinc^2 line shape and subtracts it before looking at
    the next one, so side lobes and overlapping tails are not reported as
    peaks; a final joint least-squares fit refines all positions and heights.
    """
    nu, y, t = curve.nu_grid, curve.values, curve.time
    radius = 4 * np.pi / t if merge_radius is None else merge_radius
    meta = {**curve.metadata, "method": method, "threshold": threshold}
    label = curve.config_index
    if y.size < 3 or not np.all(np.isfinite(y)):
        return PeakSet.empty(label, meta)
    ymax = float(np.max(y))
    if ymax <= 0 or ymax == float(np.min(y)):
        return PeakSet.empty(label, meta)
    thr = threshold * ymax
    cand = _local_maxima(y, thr)
    if cand.size == 0:
        return PeakSet.empty(label, meta)

    if method == "quadratic":
        pos, hts = np.array([_parabola(nu, y, i) for i in cand]).T
        order = np.argsort(pos)
        pos, hts = pos[order], hts[order]
        group = np.concatenate([[0], np.cumsum(np.diff(pos) >= radius)])
        keep = np.array([np.flatnonzero(group == g)[np.argmax(hts[group == g])] for g in np.unique(group)])
        freqs, amps = pos[keep], hts[keep]
    elif method == "clean":
        h = float(np.median(np.diff(nu)))
        half = int(math.ceil(2 * np.pi / (t * h))) + 1
        resid = y[cand].astype(float)
        done = np.zeros(cand.size, dtype=bool)
        fw, fa = [], []
        for _ in range(max_components):
            open_ = np.where(done, -np.inf, resid)
            j = int(np.argmax(open_))
            if open_[j] < thr:
                break
            i = cand[j]
            lo, hi = max(i - half, 0), min(i + half + 1, y.size)
            seg_nu = nu[lo:hi]
            seg = y[lo:hi] - _model(seg_nu, fw, fa, t)
            w0, a0 = _parabola(seg_nu, seg, min(max(i - lo, 1), seg.size - 2))
            a0 = max(a0, resid[j])
            sol = least_squares(lambda q: q[1] * _kernel(seg_nu, q[0], t) - seg, [w0, a0],
                                x_scale=[1 / t, max(a0, 1e-300)], xtol=1e-13, ftol=1e-13)
            w_fit, a_fit = sol.x
            if not (a_fit > 0 and abs(w_fit - nu[i]) < radius):
                done[j] = True
                continue
            fw.append(float(w_fit))
            fa.append(float(a_fit))
            resid = resid - a_fit * _kernel(nu[cand], w_fit, t)
            if resid[j] >= thr:
                done[j] = True
        if not fw:
            return PeakSet.empty(label, meta)
        freqs, amps = _merge(fw, fa, radius)
        freqs, amps = _joint_refit(nu, y, t, freqs, amps, half, radius)
        freqs, amps = _merge(freqs, amps, radius)
    else:
        raise ReconstructionError(f"unknown detection method {method!r}")

    good = amps > 0
    return PeakSet(freqs[good], amps[good], np.full(int(good.sum()), 4 * np.pi / t), label, meta)


def fit_amplitudes(curve: TransitionCurve, frequencies, half_window: int | None = None,
                   background: bool = True) -> np.ndarray:
    """Linear least-squares heights of sinc^2 lines at fixed ``frequencies``.

    With ``background`` every contiguous block of fitted rows also gets
    c0 + c1 cos(nu t) + c2 sin(nu t), the shape of the far tails of lines
    outside the grid (e.g. emission lines at negative nu).
    """
    f = np.asarray(frequencies, dtype=float)
    if f.size == 0:
        return np.zeros(0)
    nu, t = curve.nu_grid, curve.time
    if half_window is None:
        h = float(np.median(np.diff(nu)))
        half_window = int(math.ceil(2 * np.pi / (t * h))) + 1
    rows = _windows(nu, f, half_window)
    design = _kernel(np.subtract.outer(nu[rows], f), 0.0, t)
    if background:
        block = np.concatenate([[0], np.cumsum(np.diff(rows) > 1)])
        x = nu[rows]
        extra = np.zeros((rows.size, 3 * (block[-1] + 1)))
        for b in range(block[-1] + 1):
            sel = block == b
            ph = (x[sel] - x[sel][0]) * t
            extra[sel, 3 * b:3 * b + 3] = np.column_stack([np.ones(ph.size), np.cos(ph), np.sin(ph)])
        scale = max(float(np.max(np.abs(curve.values[rows]))), 1e-300)
        design = np.hstack([design, extra * scale])
    amps, *_ = np.linalg.lstsq(design, curve.values[rows], rcond=None)
    return amps[:f.size]


def alt_peaks_at(curve: TransitionCurve, base: PeakSet) -> PeakSet:
    """Displaced-probe peaks measured at the on-site peak frequencies.

    Lines whose fitted height is not positive (nodes of G) are left out and
    show up as orphans when matching.
    """
    amps = fit_amplitudes(curve, base.frequencies)
    keep = amps > 0
    return PeakSet(base.frequencies[keep], amps[keep], base.widths[keep], curve.config_index,
                   {**curve.metadata, "method": "fixed-frequency fit"})


# -- noise -------------------------------------------------------------------

def inject_noise(peaks: PeakSet, relative_error: float, seed=None) -> PeakSet:
    """Multiply every amplitude by (1 + eps u), u ~ U[-1, 1].

    ``seed`` may be an int, a ``SeedSequence`` (e.g. a spawned child) or a
    ``Generator``.
    """
    if relative_error < 0:
        raise ReconstructionError("relative error must be non-negative")
    if relative_error == 0:
        return PeakSet(peaks.frequencies.copy(), peaks.amplitudes.copy(), peaks.widths.copy(),
                       peaks.config_index, dict(peaks.metadata))
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, size=len(peaks))
    meta = {**peaks.metadata, "noise": relative_error}
    return PeakSet(peaks.frequencies.copy(), peaks.amplitudes * (1 + relative_error * u),
                   peaks.widths.copy(), peaks.config_index, meta)


# -- calibration -------------------------------------------------------------

def match_peaks(base: PeakSet, alt: PeakSet, tolerance: float):
    """Greedy one-to-one nearest-frequency matching within ``tolerance``."""
    if len(base) == 0 or len(alt) == 0:
        return np.zeros((0, 2), dtype=int)
    d = np.abs(np.subtract.outer(base.frequencies, alt.frequencies))
    pairs, used_b, used_a = [], set(), set()
    for flat in np.argsort(d, axis=None):
        i, j = np.unravel_index(flat, d.shape)
        if d[i, j] > tolerance:
            break
        if i in used_b or j in used_a:
            continue
        pairs.append((i, j))
        used_b.add(i)
        used_a.add(j)
    pairs.sort()
    return np.array(pairs, dtype=int).reshape(-1, 2)


def orbit_momenta(sites: int, dimension: int, lattice_constant: float = 1.0,
                  exclude_zero: bool = False) -> np.ndarray:
    """One representative (|k_x| <= |k_y|) per point-group orbit of the grid."""
    grid = BrillouinGrid(dimension, sites, lattice_constant)
    _, first = np.unique(grid.orbit_labels, return_index=True)
    k = np.sort(np.abs(grid.momenta[first]), axis=1)
    if exclude_zero:
        k = k[np.any(grid.indices[first] != 0, axis=1)]
    return k


def geometry_values(form: str, k, lattice_constant: float = 1.0) -> np.ndarray:
    """G(k) for ``form`` in {cos2, cos4, 2d_1, 2d_2}; ``k`` is (n,) or (n, 2)."""
    k = np.asarray(k, dtype=float)
    a = lattice_constant
    if form in ("cos2", "cos4"):
        c = np.cos(k.reshape(-1) * a / 2) ** 2
        return 4 * c if form == "cos2" else 4 * c * c
    k = k.reshape(-1, 2)
    cx, cy = np.cos(k[:, 0] * a / 2) ** 2, np.cos(k[:, 1] * a / 2) ** 2
    if form == "2d_1":
        return 2 * (cx + cy)
    if form == "2d_2":
        return 16 * cx * cy
    raise CalibrationError(f"unknown geometry {form!r}")


def calibrate_ratio(peaks_base: PeakSet, peaks_alt: PeakSet, geometry: str, mode: str = "blind",
                    sites: int | None = None, lattice_constant: float = 1.0,
                    exclude_zero: bool = False, true_momenta=None, tolerance: float | None = None,
                    strict: bool = False) -> Calibration:
    """Estimate |J_i/J_0|^2 (or g'/g for the Kitaev chain) from matched peaks.

    Modes: ``blind`` divides the mean ratio by the analytic zone average of
    G; ``grid`` by the average of G over the distinct orbits of the known
    lattice; ``exact`` by sum G(k_true) over the matched peaks
    (``true_momenta`` per base peak, diagnostics only).
    """
    if tolerance is None:
        w = peaks_base.widths
        tolerance = float(w[0]) if w.size else 0.0
    pairs = match_peaks(peaks_base, peaks_alt, tolerance)
    orph_b = np.setdiff1d(np.arange(len(peaks_base)), pairs[:, 0])
    orph_a = np.setdiff1d(np.arange(len(peaks_alt)), pairs[:, 1])
    if strict and (orph_b.size or orph_a.size):
        raise CalibrationError(
            f"unmatched peaks: base {peaks_base.frequencies[orph_b].tolist()}, "
            f"alt {peaks_alt.frequencies[orph_a].tolist()}")
    if len(pairs) < 3:
        raise CalibrationError(f"need at least 3 matched peaks, got {len(pairs)}")
    r = peaks_alt.amplitudes[pairs[:, 1]] / peaks_base.amplitudes[pairs[:, 0]]
    if mode == "blind":
        est = float(np.mean(r)) / geometry_mean(geometry)
    elif mode == "grid":
        if sites is None:
            raise CalibrationError("grid calibration needs the number of sites")
        dim = 1 if geometry in ("cos2", "cos4") else 2
        k = orbit_momenta(sites, dim, lattice_constant, exclude_zero)
        est = float(np.mean(r)) / float(np.mean(geometry_values(geometry, k, lattice_constant)))
    elif mode == "exact":
        if true_momenta is None:
            raise CalibrationError("exact calibration needs the true momenta")
        g = geometry_values(geometry, np.asarray(true_momenta)[pairs[:, 0]], lattice_constant)
        est = float(np.sum(r) / np.sum(g))
    else:
        raise CalibrationError(f"unknown calibration mode {mode!r}")
    return Calibration(est, mode, pairs, peaks_base.frequencies[orph_b], peaks_alt.frequencies[orph_a])


# -- inversion ---------------------------------------------------------------

def _angle(c2, s2):
    """2 * angle whose cos^2 is c2 and sin^2 is s2, from the better-conditioned one."""
    return 2 * np.arcsin(math.sqrt(s2)) if c2 > 0.5 else 2 * np.arccos(math.sqrt(c2))


def invert_1d(ratio: float, calibration: float, form: str = "cos2", lattice_constant: float = 1.0,
              tolerance: float = 0.05) -> float:
    """|k| from a peak's amplitude ratio; cos2: r/c = 4cos^2(ka/2), cos4: 4cos^4(ka/2)."""
    if calibration <= 0:
        raise InversionError("calibration must be positive")
    q = ratio / calibration / 4
    if q > 1 + tolerance:
        raise InversionError(f"ratio/calibration = {4 * q:.4g} exceeds 4 beyond tolerance")
    q = min(max(q, 0.0), 1.0)
    if form == "cos2":
        c2 = q
    elif form == "cos4":
        c2 = math.sqrt(q)
    else:
        raise InversionError(f"unknown 1D form {form!r}")
    return float(_angle(c2, 1.0 - c2)) / lattice_constant


def invert_2d(r2: float, r3: float, c1: float, c2: float, lattice_constant: float = 1.0,
              tolerance: float = 0.05) -> tuple:
    """Unordered pair (|k_x|, |k_y|), returned sorted ascending.

    u = cos^2(k_x a/2), v = cos^2(k_y a/2) solve x^2 - s x + p = 0 with
    s = r2/(2 c1), p = r3/(16 c2).  The discriminant is evaluated as
    (s - 2 sqrt p)(s + 2 sqrt p) and set to zero when it is below rounding
    (a double root is otherwise only recovered to sqrt(eps)), and
    sin^2 = 1 - u comes from the companion quadratic so that angles near the
    zone centre keep full relative precision.
    """
    if c1 <= 0 or c2 <= 0:
        raise InversionError("calibrations must be positive")
    if r2 < 0 or r3 < 0:
        raise InversionError("ratios must be non-negative")
    s = r2 / (2 * c1)
    p = r3 / (16 * c2)
    if s > 2 * (1 + tolerance) or p > 1 + tolerance:
        raise InversionError(f"ratios out of range: u+v={s:.4g}, uv={p:.4g}")
    rp = math.sqrt(p)
    disc = (s - 2 * rp) * (s + 2 * rp)
    if abs(disc) < 16 * EPS * s * s:
        disc = 0.0  # below rounding: a double root (k_x = k_y)
    if disc < -tolerance * max(s * s, 1e-300):
        raise InversionError(f"negative discriminant {disc:.3e}")
    rd = math.sqrt(max(disc, 0.0))
    u = 0.5 * (s + rd)
    v = p / u if u > 0 else 0.0
    # a = 1 - u, b = 1 - v solve y^2 - (2 - s) y + (1 - s + p) = 0, same discriminant
    q = 1.0 - s + p
    if abs(q) < 8 * EPS * (1.0 + s + p):
        q = 0.0  # below rounding: one of the momenta is zero
    b = 0.5 * (2.0 - s + rd)
    a = q / b if b > 0 else 0.0
    for x in (u, v, a, b):
        if x < -tolerance or x > 1 + tolerance:
            raise InversionError(f"cos^2 root {x:.4g} outside [0, 1]")
    u, v, a, b = (min(max(x, 0.0), 1.0) for x in (u, v, a, b))
    kx = _angle(u, a) / lattice_constant
    ky = _angle(v, b) / lattice_constant
    return tuple(sorted((float(kx), float(ky))))


def snap_momentum(k, sites: int, lattice_constant: float = 1.0):
    """Nearest grid magnitude m * 2 pi / (N a), m = 0 .. N // 2."""
    dk = 2 * np.pi / (sites * lattice_constant)
    m = np.clip(np.rint(np.asarray(k, dtype=float) / dk), 0, sites // 2)
    return m * dk


# -- measurement window ------------------------------------------------------

def measurement_window(model, g: float, convention: str = "grid") -> MeasurementWindow:
    """[t_min, t_max] with t_max = 1/g and t_min = max_k 4 pi / (|v_k| dk).

    ``convention="grid"`` uses dk = 2 pi / (N a); ``"phonon"`` uses the
    normalisation that gives 4 pi N a / c_s for a linear phonon branch,
    i.e. 2 pi times larger.  Modes with vanishing velocity (symmetric band
    extrema) carry no resolution requirement and are skipped.
    """
    if g < 0:
        raise ReconstructionError("coupling must be non-negative")
    grid = model.grid
    k = grid.momenta
    if isinstance(model, BHModel):
        k = k[np.any(grid.indices != 0, axis=1)]
    speed = np.linalg.norm(group_velocity(model, k), axis=1)
    top = float(np.max(speed)) if speed.size else 0.0
    if top <= 0:
        raise ReconstructionError("model has zero group velocity everywhere")
    ok = speed > 1e-9 * top
    if convention == "grid":
        bound = 4 * np.pi / (speed[ok] * grid.spacing)
    elif convention == "phonon":
        bound = 4 * np.pi * grid.sites_per_axis * grid.lattice_constant / speed[ok]
    else:
        raise ReconstructionError(f"unknown convention {convention!r}")
    j = int(np.argmax(bound))
    t_max = math.inf if g == 0 else 1.0 / g
    return MeasurementWindow(float(bound[j]), t_max, convention, tuple(k[ok][j].tolist()))


# -- pipeline ----------------------------------------------------------------

@dataclass
class ReconstructionOptions:
    sites_per_axis: int
    dimension: int = 1
    form: str = "cos4"                # 1D only; 2D uses 2d_1 / 2d_2
    lattice_constant: float = 1.0
    threshold: float = 1e-3
    detection: str = "clean"
    calibration: str = "grid"
    exclude_zero: bool = False        # drop k = 0 from grid means (condensate)
    noise: float = 0.0
    seed: int | None = None
    tolerance: float = 0.05
    true_momenta: object = None       # callable omega -> k, exact calibration only


def reconstruct_dispersion(curves, options: ReconstructionOptions) -> ReconstructedDispersion:
    """detect -> match -> calibrate -> invert -> snap.

    ``curves`` is [I, II] in 1D and [I, II, III] in 2D on a common grid.
    Displaced-probe heights are fitted at the on-site frequencies; noise
    (if any) perturbs those heights, i.e. the measured ratios.
    """
    need = 2 if options.dimension == 1 else 3
    if len(curves) < need:
        raise ReconstructionError(f"{options.dimension}D reconstruction needs {need} curves, got {len(curves)}")
    curves = list(curves)[:need]
    t = curves[0].time
    for c in curves[1:]:
        if c.time != t or not np.array_equal(c.nu_grid, curves[0].nu_grid):
            raise ReconstructionError("curves must share the probe-frequency grid and time")
    base = detect_peaks(curves[0], options.threshold, options.detection)
    alts = [alt_peaks_at(c, base) for c in curves[1:]]
    out = assign_momenta(base, alts, options)
    out.metadata["time"] = t
    out.metadata["warnings"] = list(curves[0].metadata.get("warnings", []))
    return out


def assign_momenta(base: PeakSet, alts, options: ReconstructionOptions) -> ReconstructedDispersion:
    """Calibrate and invert already-detected peaks (noise is applied here)."""
    need = 2 if options.dimension == 1 else 3
    if len(alts) != need - 1:
        raise ReconstructionError(f"expected {need - 1} displaced-probe peak sets, got {len(alts)}")
    forms = [options.form] if options.dimension == 1 else ["2d_1", "2d_2"]
    children = np.random.SeedSequence(options.seed).spawn(need - 1)
    true_k = None
    if options.calibration == "exact" and len(base):
        true_k = np.array([options.true_momenta(w) for w in base.frequencies])
    cals, ratios = [], []
    for alt, form, child in zip(alts, forms, children):
        alt = inject_noise(alt, options.noise, child)
        cal = calibrate_ratio(base, alt, form, options.calibration, options.sites_per_axis,
                              options.lattice_constant, options.exclude_zero, true_k)
        r = np.zeros(len(base))
        r[cal.matched[:, 0]] = alt.amplitudes[cal.matched[:, 1]] / base.amplitudes[cal.matched[:, 0]]
        cals.append(cal)
        ratios.append(r)
    ratios = np.array(ratios).T.reshape(len(base), need - 1)

    freqs, raw, snapped, bad = [], [], [], []
    a, n = options.lattice_constant, options.sites_per_axis
    for w, r in zip(base.frequencies, ratios):
        try:
            if options.dimension == 1:
                k = invert_1d(r[0], cals[0].estimate, options.form, a, options.tolerance)
                ks = float(snap_momentum(k, n, a))
            else:
                k = invert_2d(r[0], r[1], cals[0].estimate, cals[1].estimate, a, options.tolerance)
                ks = tuple(sorted(snap_momentum(k, n, a).tolist()))
        except InversionError:
            bad.append(w)
            continue
        freqs.append(w)
        raw.append(k)
        snapped.append(ks)
    calibration = {f"config_{lab}": c.estimate for lab, c in zip(("II", "III"), cals)}
    calibration["mode"] = options.calibration
    meta = {
        "peaks": len(base),
        "seed": options.seed,
        "noise": options.noise,
        "orphans": [c.orphans_base.tolist() for c in cals],
    }
    dim = options.dimension
    return ReconstructedDispersion(np.array(freqs), np.array(snapped).reshape(-1, dim).squeeze(axis=1)
                                   if dim == 1 else np.array(snapped).reshape(-1, 2),
                                   np.array(raw), np.array(bad), calibration, ratios, meta)


# -- Bloch functions -----------------------------------------------------------

@dataclass
class BlochReconstruction:
    x: np.ndarray
    w: np.ndarray
    kept_modes: int

    def to_columns(self) -> dict:
        return {"x": self.x, "w_k": self.w}


def bloch_reconstruct(amplitude_samples, probe_density, sample_spacing: float,
                      regularization: float = 1e-6, images: int = 4,
                      max_gain: float = 1e4) -> BlochReconstruction:
    """Deconvolve |A(s)| = |int psi(x - s) w(x) dx| sampled over one period.

    ``amplitude_samples[j]`` is taken at s_j = j h; the grid is periodic with
    period len * h.  ``probe_density`` is psi(x) as a callable (real).  The
    reconstruction is returned on the centred grid x in [-L/2, L/2).
    """
    A = np.abs(np.asarray(amplitude_samples, dtype=float))
    m = A.size
    h = float(sample_spacing)
    if m < 4 or h <= 0:
        raise DeconvolutionError("need at least 4 samples and a positive spacing")
    period = m * h
    j = np.arange(m)
    xc = np.where(j < (m + 1) // 2, j, j - m) * h  # circular coordinates
    psi = sum(np.asarray(probe_density(xc + n * period), dtype=float) for n in range(-images, images + 1))
    P = np.fft.fft(psi)
    Ahat = np.fft.fft(A)
    keep = np.abs(P) >= regularization * np.max(np.abs(P))
    W = np.zeros(m, dtype=complex)
    W[keep] = Ahat[keep] / (h * np.conj(P[keep]))
    w = np.fft.ifft(W).real
    gain = np.linalg.norm(w) * h * abs(P[0]) / max(np.linalg.norm(A), 1e-300)
    if not np.all(np.isfinite(w)) or gain > max_gain:
        raise DeconvolutionError(f"deconvolution amplified the data by {gain:.3g}")
    if w[0] < 0:
        w = -w
    order = np.argsort(xc)
    return BlochReconstruction(xc[order], w[order], int(keep.sum()))
