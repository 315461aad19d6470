import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from probespec.models import BHModel, KitaevModel, SyntheticModel, kitaev_modes
from probespec.rates import (ContractViolation, RateError, TransitionCurve, bh_rate_components,
                             default_nu_grid, elastic_kernel, group_frequencies, mode_sum_correlation,
                             rate_integral, rate_sinc, sinc, sinc2_sum, sweep)


def _direct(nu, t, freqs, weights):
    x = np.subtract.outer(nu, freqs) * t / 2
    return (np.sinc(x / np.pi) ** 2) @ weights


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), t=st.floats(10.0, 5e3))
def test_fast_sinc2_sum_matches_direct_evaluation(seed, t):
    rng = np.random.default_rng(seed)
    freqs = rng.uniform(0.5, 2.0, 40)
    weights = rng.uniform(0.1, 1.0, 40)
    nu = np.linspace(0.4, 2.1, 6000)  # 240k evaluations: takes the accelerated path
    fast = sinc2_sum(nu, t, freqs, weights)
    assert np.allclose(fast, _direct(nu, t, freqs, weights), rtol=1e-9, atol=1e-12 * weights.sum())


def test_sinc2_sum_shapes_and_scalar():
    w = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = sinc2_sum(np.array([1.0, 1.5]), 10.0, [1.0, 1.5], w)
    assert out.shape == (2, 2)
    assert sinc2_sum(1.0, 10.0, [1.0], [2.0]) == pytest.approx(2.0)
    with pytest.raises(RateError):
        sinc2_sum(1.0, 0.0, [1.0], [1.0])


def test_group_frequencies_merges_identical_lines():
    f, w = group_frequencies([1.0, 2.0, 1.0, 2.0 + 1e-16], [[1, 2, 3, 4]], 10.0)
    assert f.tolist() == [1.0, 2.0]
    assert w.tolist() == [[4.0, 6.0]]


def test_sinc_is_unnormalised():
    assert sinc(0.0) == 1.0
    assert sinc(np.pi) == pytest.approx(0.0, abs=1e-16)
    assert sinc(1.0) == pytest.approx(np.sin(1.0))


def test_resonant_height_equals_mode_weight():
    m = KitaevModel(5.0, 1.0, 0.3, 11)
    modes = kitaev_modes(m, 0.5)
    reps, members = modes.distinct()
    t = 1e6  # all lines resolved
    for r, idx in zip(reps, members):
        expect = np.sum(modes.coupling[idx] ** 2 * modes.occupation[idx])
        assert rate_sinc(m, None, "I", modes.frequency[r], t, 0.5) == pytest.approx(expect, rel=1e-6)


def test_rate_integral_reproduces_closed_form():
    rng = np.random.default_rng(1)
    f = rng.uniform(0.5, 3.0, 8)
    w = rng.uniform(0.1, 1.0, 8)
    corr = mode_sum_correlation(f, w)
    for nu, t in ((1.0, 2.0), (2.2, 5.0), (-0.5, 1.0)):
        closed = t**2 * sinc2_sum(nu, t, f, w)
        assert rate_integral(corr, nu, t, 120) == pytest.approx(closed, rel=1e-10)


def test_rate_integral_checks_hermiticity():
    with pytest.raises(ContractViolation):
        rate_integral(lambda t1, t2: np.exp(1j * (t1 + t2)), 1.0, 1.0, 20)
    with pytest.raises(RateError):
        rate_integral(mode_sum_correlation([1.0], [1.0]), 1.0, -1.0)


def test_elastic_kernels():
    assert elastic_kernel(0.0, 3.0) == 1.0
    assert elastic_kernel(2 * np.pi / 3.0, 3.0) == pytest.approx(0.0, abs=1e-30)
    assert elastic_kernel(np.pi / 3.0, 3.0, "literal") == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(RateError):
        elastic_kernel(0.0, 1.0, "other")


def test_bh_components_against_double_integral_with_elastic_term():
    from probespec.probe import ProbeConfig
    m = BHModel(1.0, 0.1, 7)
    p = ProbeConfig(wavefunction_widths=(0.3, 0.3), ground_levels=(0, 0), excited_levels=(0, 0),
                    position_offset=(0, 0), wannier_width=0.3, elastic_overlap=0.2)
    g0, minus, plus = bh_rate_components(m, p, 0.3, 2.0, 1.0)
    assert g0 == pytest.approx(0.04 * np.sinc(0.3 * 2.0 / 2 / np.pi) ** 2)
    # the elastic sinc^2 is exactly the double integral of a constant correlator
    num = rate_integral(lambda a, b: 0.04 + 0 * a, 0.3, 2.0, 60) / 4.0
    assert g0 == pytest.approx(num, rel=1e-12)
    assert minus > 0 and plus > 0


def test_sweep_metadata_and_warnings():
    m = KitaevModel(5.0, 1.0, 0.3, 11)
    nu = np.linspace(0.5, 10, 50)
    c = sweep(m, None, "I", nu, 100.0, 0.5)
    assert isinstance(c, TransitionCurve)
    assert not c.resolved
    assert any("spacing" in w for w in c.metadata["warnings"])
    fine = default_nu_grid(m, 100.0, 0.5)
    c2 = sweep(m, None, "I", fine, 100.0, 0.5)
    assert c2.resolved and not c2.metadata["warnings"]
    assert sweep(m, None, "I", [], 1.0, 0.5).values.size == 0


def test_transition_curve_validation():
    with pytest.raises(RateError):
        TransitionCurve([1.0, 0.5], [1.0, 2.0], 1.0)
    with pytest.raises(RateError):
        TransitionCurve([1.0, 2.0], [1.0], 1.0)


def test_synthetic_pinned_occupation():
    m = SyntheticModel((1.0, 2.0), (1.0, 0.5), occupations=(1.0, 1.0))
    tail = np.sin(0.5e5) ** 2 / 0.5e5**2  # the other line, one unit away
    assert rate_sinc(m, None, "I", 2.0, 1e5, 1.0) == pytest.approx(0.25 + tail, rel=1e-12)
