"""The ten acceptance criteria, each at its stated tolerance and time budget.

Every test prints one PASS/FAIL line (also collected in the pytest summary).
"""
import math
import time

import numpy as np
import pytest

from probespec.correlations import ProbePair, gamma_bar, gamma_bar_assembled, kitaev_correlator, \
    lightcone_map
from probespec.lindblad import LindbladParams, evolve_numeric, excited_population, stationary_population, \
    decay_rate
from probespec.models import BHModel, KitaevModel, bh_modes, kitaev_modes
from probespec.oracle import exact_thermal_correlator, exact_transition_probability, fgr_probability
from probespec.probe import ProbeConfig
from probespec.rates import bh_rate_components, default_nu_grid, mode_sum_correlation, rate_integral, \
    rate_sinc, sweep
from probespec.reconstruct import ReconstructionOptions, alt_peaks_at, assign_momenta, bloch_reconstruct, \
    detect_peaks, geometry_values, invert_2d, measurement_window, reconstruct_dispersion
from probespec.validate import fgr_test_system


def _probe(dim, g):
    return ProbeConfig(coupling=g, position_offset=(0.0,) * dim, wavefunction_widths=(0.3,) * dim,
                       ground_levels=(0,) * dim, excited_levels=(0,) * dim, wannier_width=0.3)


def _kitaev_curves():
    model = KitaevModel(5.0, 1.0, 0.3, 51)
    g, beta = 1e-6, 0.01
    win = measurement_window(model, g)
    t = 1.05 * win.t_min
    nu = default_nu_grid(model, t, beta)
    curves = [sweep(model, _probe(1, g), p, nu, t, beta) for p in ("I", "II")]
    return model, win, t, nu, curves, beta


def _correct_fraction(model, beta, result):
    """Share of distinct true frequencies assigned to their own |k|."""
    modes = kitaev_modes(model, beta)
    reps, _ = modes.distinct()
    true_w, true_k = modes.frequency[reps], np.abs(modes.momenta[reps, 0])
    hits = 0
    for w, k in zip(true_w, true_k):
        j = np.flatnonzero(np.abs(result.frequencies - w) < 1e-6)
        hits += bool(j.size == 1 and abs(result.momenta[j[0]] - k) < 1e-9)
    return hits / len(reps)


def test_1_kitaev_reconstruction(report):
    t0 = time.perf_counter()
    model, win, t, nu, curves, beta = _kitaev_curves()
    res = reconstruct_dispersion(curves, ReconstructionOptions(51, 1, "cos4", threshold=1e-6))
    frac = _correct_fraction(model, beta, res)
    dt = time.perf_counter() - t0
    step = nu[1] - nu[0]
    ok = (frac == 1.0 and win.contains(t) and abs(step - 2 * np.pi / (5 * t)) < 1e-9 * step
          and dt < 10)
    report(1, "Kitaev dispersion reconstruction", ok,
           f"{frac:.0%} of {len(res.frequencies) + len(res.unassigned)} peaks correct, "
           f"t={t:.4g} in [{win.t_min:.4g}, {win.t_max:.4g}]", dt)
    assert ok


def test_2_noise_robustness(report):
    t0 = time.perf_counter()
    model, _, _, _, curves, beta = _kitaev_curves()
    base = detect_peaks(curves[0], 1e-6)
    alts = [alt_peaks_at(curves[1], base)]
    medians, failure = {}, {}
    for eps in (0.0, 0.01, 0.02, 0.05):
        fr = [_correct_fraction(model, beta, assign_momenta(
            base, alts, ReconstructionOptions(51, 1, "cos4", threshold=1e-6, noise=eps, seed=s)))
              for s in range(100)]
        medians[eps] = float(np.median(fr))
        failure[eps] = 1 - float(np.mean(fr))
    dt = time.perf_counter() - t0
    rates = [failure[e] for e in sorted(failure)]
    monotone = all(b >= a for a, b in zip(rates, rates[1:]))
    ok = medians[0.02] >= 0.9 and monotone and dt < 60
    report(2, "noise robustness", ok,
           f"median@2% = {medians[0.02]:.3f}, failure rates {np.round(rates, 3).tolist()}", dt)
    assert ok


def test_3_two_dimensional_inversion(report):
    t0 = time.perf_counter()
    n = 31
    idx = np.arange(n) - n // 2
    kx, ky = np.meshgrid(2 * np.pi * idx / n, 2 * np.pi * idx / n, indexing="ij")
    k = np.column_stack([kx.ravel(), ky.ravel()])
    c1, c2 = 0.157, 0.0246
    r2 = c1 * geometry_values("2d_1", k)
    r3 = c2 * geometry_values("2d_2", k)
    err = max(np.max(np.abs(np.array(invert_2d(a, b, c1, c2)) - np.sort(np.abs(kk))))
              for a, b, kk in zip(r2, r3, k))

    model = BHModel(1.0, 0.1, n)
    g, t, beta = 5e-6, 1e5, 1.0
    win = measurement_window(model, g)
    nu = default_nu_grid(model, t, beta)
    curves = [sweep(model, _probe(2, g), p, nu, t, beta) for p in ("I", "II", "III")]
    res = reconstruct_dispersion(curves, ReconstructionOptions(n, 2, threshold=1e-6, exclude_zero=True))
    step = nu[1] - nu[0]
    off = np.abs(res.frequencies - model.dispersion(res.momenta))
    orbits = len(bh_modes(model, beta).distinct()[0])
    dt = time.perf_counter() - t0
    ok = (err < 1e-9 and len(res.unassigned) == 0 and len(res.frequencies) == orbits
          and np.all(off <= step) and win.contains(t) and dt < 60)
    report(3, "2D inversion and BH reconstruction", ok,
           f"round-trip error {err:.2e}; {len(res.frequencies)}/{orbits} orbits assigned, "
           f"max |w - w(k)| = {off.max() / step:.1e} steps", dt)
    assert ok


def test_4_golden_rule_validity(report):
    t0 = time.perf_counter()
    devs = {}
    for g in (0.005, 0.01):
        s = fgr_test_system(g)
        ts = np.linspace(0, 1 / g, 600)
        fgr = fgr_probability(s, 1.0, ts)
        devs[g] = float(np.max(np.abs(exact_transition_probability(s, 1.0, ts) - fgr)) / np.max(fgr))
    horizon = np.linspace(0, 100, 400)
    resid = {}
    for g in (0.005, 0.01):
        s = fgr_test_system(g)
        resid[g] = np.max(np.abs(exact_transition_probability(s, 1.0, horizon) - fgr_probability(s, 1.0, horizon)))
    ratio = float(resid[0.01] / resid[0.005])
    dt = time.perf_counter() - t0
    ok = max(devs.values()) <= 0.05 and 8 <= ratio <= 32 and dt < 120
    report(4, "golden rule vs exact dynamics", ok,
           f"deviation {devs[0.005]:.2%} (g=0.005), {devs[0.01]:.2%} (g=0.01); D(2g)/D(g) = {ratio:.2f}", dt)
    assert ok


def test_5_closed_form_vs_double_integral(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = {}

    kit = KitaevModel(5.0, 1.0, 0.3, 51)
    km = kitaev_modes(kit, 0.5)
    corr_k = mode_sum_correlation(km.frequency, km.coupling**2 * km.occupation)
    bh = BHModel(1.0, 0.1, 31)
    bm = bh_modes(bh, 1.0)
    amp = bh.condensate_filling * bm.coupling**2
    em, ab = amp * (1 + bm.occupation), amp * bm.occupation
    corr_b = mode_sum_correlation(np.concatenate([bm.frequency, -bm.frequency]), np.concatenate([ab, em]))

    for name, wmax, closed, corr in (
        ("kitaev", km.frequency.max(), lambda nu, t: rate_sinc(kit, None, "I", nu, t, 0.5), corr_k),
        ("bose-hubbard", bm.frequency.max(),
         lambda nu, t: sum(np.sum(c) for c in bh_rate_components(bh, None, nu, t, 1.0)), corr_b),
    ):
        err = 0.0
        for _ in range(20):
            nu = rng.uniform(-wmax if name == "bose-hubbard" else 0.0, wmax)
            t = rng.uniform(0.5, 3.0)
            points = int(t * wmax) + 80
            num = rate_integral(corr, nu, t, points) / t**2
            err = max(err, abs(closed(nu, t) - num) / abs(num))
        worst[name] = err
    dt = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-6 and dt < 30
    report(5, "closed form vs double integral", ok,
           ", ".join(f"{k} max rel err {v:.1e}" for k, v in worst.items()), dt)
    assert ok


def test_6_lindblad_limits(report):
    t0 = time.perf_counter()
    dev, stat = 0.0, 0.0
    for stats, occ in (("bosonic", 0.3), ("bosonic", 2.0), ("fermionic", 0.2), ("fermionic", 0.9)):
        p = LindbladParams(0.7, occ, stats)
        gamma = decay_rate(p)
        ts = np.linspace(0, 20 / gamma, 401)
        num = evolve_numeric(p, ts).excited
        dev = max(dev, float(np.max(np.abs(num - excited_population(p, ts)))))
        target = occ / (2 * occ + 1) if stats == "bosonic" else occ
        stat = max(stat, abs(num[-1] - target), abs(stationary_population(p) - target))
    dt = time.perf_counter() - t0
    ok = dev <= 1e-8 and stat <= 1e-6 and dt < 5
    report(6, "Lindblad limits", ok, f"numeric vs closed {dev:.1e}, stationary error {stat:.1e}", dt)
    assert ok


def _quad_complex(model, pair, t, beta, points=160):
    """Complex double integral of the symmetrised correlator (no real part taken)."""
    x, w = np.polynomial.legendre.leggauss(points)
    s, w = 0.5 * t * (x + 1), 0.5 * t * w
    tau = np.subtract.outer(s, s)
    l, j = pair.site_a, pair.site_b
    c = 0.5 * (kitaev_correlator(model, l, j, tau, beta) + kitaev_correlator(model, j, l, tau, beta))
    ph = np.exp(-1j * pair.level_gap * tau)
    return pair.coupling**2 * np.einsum("i,j,ij->", w, w, c * ph)


def test_7_two_probe_identity(report):
    t0 = time.perf_counter()
    times = np.linspace(0.05, 6, 40)
    ident, imag, trans, swap = 0.0, 0.0, 0.0, 0.0
    cases = [(KitaevModel(5.0, 1.0, 0.3, 51), 0.5, (3, 11), (7, 15), 2.0),
             (KitaevModel(1.0, 1.0, 50.0, 51), 0.5, (0, 4), (20, 24), 0.0),
             (BHModel(1.0, 0.1, 31), 1.0, ((0, 0), (3, 2)), ((5, 9), (8, 11)), 0.5)]
    for model, beta, (a, b), (a2, b2), nu in cases:
        pair = ProbePair(a, b, nu, 1.0)
        direct = gamma_bar(model, pair, times, beta)
        ident = max(ident, float(np.max(np.abs(gamma_bar_assembled(model, pair, times, beta) - direct))))
        trans = max(trans, float(np.max(np.abs(gamma_bar(model, ProbePair(a2, b2, nu, 1.0), times, beta) - direct))))
        swap = max(swap, float(np.max(np.abs(gamma_bar(model, ProbePair(b, a, nu, 1.0), times, beta) - direct))))
        if isinstance(model, KitaevModel):
            for t in (0.7, 2.5):
                z = _quad_complex(model, pair, t, beta)
                imag = max(imag, abs(z.imag))
                # the quadrature agrees with the closed form as well
                ident = max(ident, abs(z.real - gamma_bar(model, pair, t, beta)))
    dt = time.perf_counter() - t0
    ok = ident <= 1e-10 and imag <= 1e-9 and trans <= 1e-12 and swap <= 1e-12 and dt < 30
    report(7, "two-probe identity", ok,
           f"identity {ident:.1e}, imaginary part {imag:.1e}, translation {trans:.1e}, swap {swap:.1e}", dt)
    assert ok


def _monotone(arrivals):
    a = np.asarray(arrivals, dtype=float)
    seen = a[np.isfinite(a)]
    tail_ok = np.all(~np.isfinite(a[np.argmax(~np.isfinite(a)):])) if np.any(~np.isfinite(a)) else True
    return bool(np.all(np.diff(seen) >= 0) and tail_ok)


def test_8_light_cone(report):
    t0 = time.perf_counter()
    seps = np.arange(1, 26)
    times = np.linspace(0.01, 6, 300)
    arrivals = {}
    for alpha in (50.0, 0.3):
        model = KitaevModel(5.0, 1.0, alpha, 51)
        cmap = lightcone_map(model, ProbePair(0, 1, 0.0, 1e-3), seps, times, 0.5)
        arrivals[alpha] = cmap.arrival_times(0.1, normalize=False)
    short_mono = _monotone(arrivals[50.0])
    a = arrivals[0.3]
    inverted = int(np.sum(np.diff(a[np.isfinite(a)]) < 0))
    dt = time.perf_counter() - t0
    ok = short_mono and inverted >= 1 and dt < 120
    bad = int(np.sum(np.diff(arrivals[50.0][np.isfinite(arrivals[50.0])]) < 0))
    report(8, "light cone", ok,
           f"alpha=50 monotone: {short_mono} ({bad} inverted neighbour pairs); "
           f"alpha=0.3 inverted neighbour pairs: {inverted}", dt)
    assert ok


def test_9_bloch_reconstruction(report):
    t0 = time.perf_counter()
    m, sp, sw = 64, 0.05, 0.08
    h = 1.0 / m

    def gauss(x, w):
        return np.exp(-np.asarray(x) ** 2 / (2 * w * w)) / (math.sqrt(2 * math.pi) * w)

    def periodic(f, x):
        return sum(f(np.asarray(x) + n) for n in range(-8, 9))

    samples = periodic(lambda x: gauss(x, math.hypot(sp, sw)), np.arange(m) * h)
    res = bloch_reconstruct(samples, lambda x: gauss(x, sp), h)
    err = float(np.max(np.abs(res.w - periodic(lambda x: gauss(x, sw), res.x))))
    dt = time.perf_counter() - t0
    ok = err <= 1e-3 and dt < 5
    report(9, "Bloch reconstruction", ok, f"max abs error {err:.1e} at spacing a/64", dt)
    assert ok


def test_10_correlator_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(20):
        model = KitaevModel(float(rng.uniform(0.2, 5)), float(rng.uniform(0.1, 2)), float(rng.uniform(0, 3)), 8,
                            allow_even=True)
        l, j = (int(x) for x in rng.integers(0, 8, 2))
        tau, beta = float(rng.uniform(-5, 5)), float(rng.uniform(0.05, 5))
        ref = exact_thermal_correlator(model, l, j, tau, beta, route="fock")
        worst = max(worst, abs(kitaev_correlator(model, l, j, tau, beta) - ref))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 60
    report(10, "correlator vs Fock-space oracle", ok, f"max |difference| {worst:.1e} over 20 tuples", dt)
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
