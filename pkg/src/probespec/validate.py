"""Quick oracle suites behind ``probespec validate``.

Each suite compares a closed form against an independent reference and
returns ``{"name", "passed", "metric", "tolerance"}``.  Sizes are kept
small so the whole table runs in seconds.
"""
from __future__ import annotations

import math

import numpy as np

from .correlations import ProbePair, gamma_bar, gamma_bar_assembled, kitaev_correlator
from .lindblad import LindbladParams, evolve_numeric, excited_population
from .models import KitaevModel, kitaev_modes
from .oracle import FockSystem, bdg_spectrum, exact_thermal_correlator, exact_transition_probability, \
    fgr_probability
from .rates import mode_sum_correlation, rate_integral, rate_sinc
from .reconstruct import bloch_reconstruct, geometry_values, invert_2d, orbit_momenta


def _row(name, metric, tol):
    return {"name": name, "passed": bool(metric <= tol), "metric": float(metric), "tolerance": tol}


def suite_bdg(seed):
    m = KitaevModel(1.0, 1.0, 1.5, 11)
    pos, _, _ = bdg_spectrum(m.sites, m.hopping_matrix(), m.pairing)
    w = np.sort(kitaev_modes(m, 1.0).frequency)
    return _row("BdG spectrum vs k-space dispersion", np.max(np.abs(np.sort(pos) - w)), 1e-10)


def suite_correlator(seed):
    rng = np.random.default_rng(seed)
    m = KitaevModel(1.0, 1.0, 1.5, 8, allow_even=True)
    err = 0.0
    for _ in range(5):
        l, j = rng.integers(0, 8, 2)
        tau = rng.uniform(-3, 3)
        beta = rng.uniform(0.2, 3)
        ref = exact_thermal_correlator(m, int(l), int(j), tau, beta)
        err = max(err, abs(kitaev_correlator(m, int(l), int(j), tau, beta) - ref))
    return _row("thermal correlator vs Fock space", err, 1e-9)


def fgr_test_system(coupling, nu=1.0):
    """Six distinct Kitaev orbits (N=11, alpha=0.3, J=5), frequencies in mean-omega units."""
    m = KitaevModel(5.0, 1.0, 0.3, 11)
    modes = kitaev_modes(m, 1.0)
    reps, _ = modes.distinct()
    w = modes.frequency[reps]
    return FockSystem(tuple(w / w.mean()), tuple(modes.coupling[reps]), "fermionic", nu, coupling)


def suite_fgr(seed):
    g = 0.01
    s = fgr_test_system(g)
    t = np.linspace(0, 1 / g, 300)
    fgr = fgr_probability(s, 1.0, t)
    dev = np.max(np.abs(exact_transition_probability(s, 1.0, t) - fgr)) / np.max(fgr)
    return _row("golden rule vs exact evolution (g=0.01)", dev, 0.05)


def suite_rate_integral(seed):
    rng = np.random.default_rng(seed)
    m = KitaevModel(5.0, 1.0, 0.3, 11)
    modes = kitaev_modes(m, 0.5)
    err = 0.0
    for _ in range(3):
        nu = rng.uniform(0.5, 1.5) * np.median(modes.frequency)
        t = rng.uniform(0.5, 3.0)
        closed = rate_sinc(m, None, "I", nu, t, 0.5)
        corr = mode_sum_correlation(modes.frequency, modes.coupling**2 * modes.occupation)
        num = rate_integral(corr, nu, t, 120) / t**2
        err = max(err, abs(closed - num) / abs(num))
    return _row("closed-form rate vs double integral", err, 1e-6)


def suite_two_probe(seed):
    m = KitaevModel(1.0, 1.0, 1.5, 11)
    pair = ProbePair(2, 6, 1.3, 0.01)
    t = np.linspace(0.1, 5, 20)
    err = np.max(np.abs(gamma_bar_assembled(m, pair, t, 0.5) - gamma_bar(m, pair, t, 0.5)))
    return _row("two-probe identity", err / max(np.max(np.abs(gamma_bar(m, pair, t, 0.5))), 1e-300), 1e-10)


def suite_lindblad(seed):
    err = 0.0
    for stats, n in (("bosonic", 0.7), ("fermionic", 0.3)):
        p = LindbladParams(1.3, n, stats)
        t = np.linspace(0, 10, 101)
        err = max(err, np.max(np.abs(evolve_numeric(p, t).excited - excited_population(p, t))))
    return _row("master equation vs closed form", err, 1e-8)


def suite_invert_2d(seed):
    k = orbit_momenta(31, 2)
    r2 = geometry_values("2d_1", k)
    r3 = geometry_values("2d_2", k)
    err = max(np.max(np.abs(np.array(invert_2d(a, b, 1.0, 1.0)) - kk)) for a, b, kk in zip(r2, r3, k))
    return _row("2D inversion round trip (31x31)", err, 1e-9)


def suite_bloch(seed):
    m, sp, sw = 64, 0.05, 0.08
    h = 1.0 / m
    s = np.arange(m) * h

    def gauss(x, w):
        return np.exp(-x**2 / (2 * w * w)) / (math.sqrt(2 * math.pi) * w)

    def periodic(f, x):
        return sum(f(x + n) for n in range(-6, 7))

    amp = periodic(lambda x: gauss(x, math.hypot(sp, sw)), s)
    res = bloch_reconstruct(amp, lambda x: gauss(x, sp), h)
    err = np.max(np.abs(res.w - periodic(lambda x: gauss(x, sw), res.x)))
    return _row("Bloch deconvolution (Gaussian)", err, 1e-3)


SUITES = (suite_bdg, suite_correlator, suite_fgr, suite_rate_integral, suite_two_probe,
          suite_lindblad, suite_invert_2d, suite_bloch)


def run_suites(seed: int = 0) -> list:
    return [suite(seed) for suite in SUITES]
