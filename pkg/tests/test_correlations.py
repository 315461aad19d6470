import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from probespec.correlations import (DENSITY, HOPPING, CorrelationError, CorrelationMap, ProbePair,
                                    bh_density_correlator, default_probe_gap, gamma_bar, gamma_bar_assembled,
                                    gamma_bar_integral, kitaev_correlator, lightcone_map, site_operator_rate)
from probespec.models import BHModel, KitaevModel
from probespec.oracle import exact_thermal_correlator

KIT = KitaevModel(5.0, 1.0, 0.3, 21)
BH = BHModel(1.0, 0.1, 9)


@settings(max_examples=15, deadline=None)
@given(l=st.integers(0, 20), j=st.integers(0, 20), tau=st.floats(-4, 4), beta=st.floats(0.05, 5))
def test_kitaev_correlator_matches_real_space_bdg(l, j, tau, beta):
    ref = exact_thermal_correlator(KIT, l, j, tau, beta, route="bdg")
    assert abs(kitaev_correlator(KIT, l, j, tau, beta) - ref) < 1e-12


def test_correlators_are_hermitian_in_time():
    tau = np.linspace(-3, 3, 13)
    c = kitaev_correlator(KIT, 2, 7, tau, 0.5)
    assert np.allclose(c, np.conj(kitaev_correlator(KIT, 7, 2, -tau, 0.5)))
    d = bh_density_correlator(BH, (0, 0), (2, 1), tau, 1.0)
    assert np.allclose(d, np.conj(bh_density_correlator(BH, (2, 1), (0, 0), -tau, 1.0)))


@pytest.mark.parametrize("model,pair,beta", [
    (KIT, ProbePair(1, 4, 2.0, 0.1), 0.5),
    (BH, ProbePair((0, 0), (2, 1), 0.7, 0.1), 1.0),
])
def test_gamma_bar_equals_the_double_integral(model, pair, beta):
    for t in (0.8, 2.5):
        closed = gamma_bar(model, pair, t, beta)
        num = gamma_bar_integral(model, pair, t, beta, 200)
        assert closed == pytest.approx(num, rel=1e-9, abs=1e-15)


def test_assembled_rate_matches_cross_term():
    t = np.linspace(0.1, 4, 9)
    for model, pair, beta in ((KIT, ProbePair(3, 8, 1.0), 0.5), (BH, ProbePair((1, 1), (4, 2), 0.2), 1.0)):
        assert np.allclose(gamma_bar_assembled(model, pair, t, beta), gamma_bar(model, pair, t, beta),
                           rtol=0, atol=1e-12 * np.max(np.abs(gamma_bar(model, pair, t, beta))))


def test_single_probe_rate_is_nonnegative():
    t = np.linspace(0.1, 5, 20)
    assert np.all(site_operator_rate(KIT, {(0,): 1.0, (3,): -0.5j}, 1.3, t, 0.5) >= 0)


def test_lightcone_map_rows_equal_pointwise_gamma_bar():
    times = np.linspace(0.1, 3, 7)
    cmap = lightcone_map(KIT, ProbePair(0, 1, 0.5), [1, 4, 9], times, 0.5)
    for r, sep in enumerate((1, 4, 9)):
        assert np.allclose(cmap.values[r], gamma_bar(KIT, ProbePair(0, sep, 0.5), times, 0.5))
    assert cmap.observable == HOPPING
    bh_map = lightcone_map(BH, ProbePair((0, 0), (1, 0), 0.0), [(1, 0), (2, 0)], times, 1.0)
    assert bh_map.observable == DENSITY and bh_map.values.shape == (2, 7)
    with pytest.raises(CorrelationError):
        lightcone_map(KIT, ProbePair(0, 1, 0.5), [21], times, 0.5)
    with pytest.raises(CorrelationError):
        lightcone_map(KIT, ProbePair(0, 1, 0.5), [1], times, 0.5, observable=DENSITY)


def test_arrival_times_and_normalisation():
    times = np.array([0.0, 1.0, 2.0, 3.0])
    values = np.array([[0.0, 5.0, 10.0, 1.0],
                       [0.0, 0.0, 0.5, 2.0],
                       [0.0, 0.0, 0.0, 0.0]])
    cmap = CorrelationMap(np.array([1, 2, 3]), times, values)
    glob = cmap.arrival_times(0.1, normalize=False)
    assert glob[0] == 1.0 and glob[1] == 3.0 and np.isnan(glob[2])
    per = cmap.arrival_times(0.1, normalize=True)
    assert per[1] == 3.0 and per[0] == 1.0  # at t = 2 the slice maximum is 10, so 0.5 is below 10%
    norm = cmap.normalized()
    assert np.allclose(np.max(np.abs(norm), axis=0), [0, 1, 1, 1])
    cols = cmap.to_columns(normalized=True)
    assert list(cols) == ["separation", "t", "gamma_bar", "normalized"] and cols["t"].size == 12
    with pytest.raises(CorrelationError):
        CorrelationMap(np.array([1]), times, np.array([[np.nan, 0, 0, 0]]))


def test_probe_pair_contracts():
    with pytest.raises(CorrelationError):
        ProbePair(2, 2, 1.0)
    with pytest.raises(CorrelationError):
        ProbePair(0, 1, 1.0, coupling=0)
    with pytest.raises(CorrelationError):
        ProbePair(0, 1, 1.0).displacement(BH)
    assert ProbePair((0, 0), (1, 0), 1.0).moved((3, 2)).site_b == (3, 2)
    assert 0 < default_probe_gap(KIT, 0.5)
