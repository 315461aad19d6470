import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from probespec.models import (BOSONIC, FERMIONIC, BHModel, BrillouinGrid, KitaevModel, ModelError,
                              SyntheticModel, bh_modes, group_velocity, kitaev_hopping, kitaev_modes,
                              model_modes, thermal_occupation)
from probespec.oracle import bdg_spectrum


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0.0, 4.0), hop=st.floats(0.1, 6.0), pairing=st.floats(0.05, 2.0),
       sites=st.sampled_from([5, 7, 11, 15]))
def test_kitaev_dispersion_matches_real_space_bdg(alpha, hop, pairing, sites):
    model = KitaevModel(hop, pairing, alpha, sites)
    pos, _, _ = bdg_spectrum(sites, model.hopping_matrix(), pairing)
    omega = np.sort(kitaev_modes(model, 1.0).frequency)
    assert np.allclose(np.sort(pos), omega, atol=1e-10 * max(1.0, omega.max()))


def test_hopping_profile_is_symmetric_around_the_ring():
    m = KitaevModel(5.0, 1.0, 0.3, 51)
    r = np.arange(1, 51)
    j = kitaev_hopping(m, r)
    assert np.allclose(j, j[::-1])
    # r = 1 limit: |pi / (N sin(pi/N))|^alpha -> 1 for large N
    assert j[0] == pytest.approx(5.0 * (math.pi / (51 * math.sin(math.pi / 51))) ** 0.3)
    with pytest.raises(ModelError):
        kitaev_hopping(m, 0)


def test_bogoliubov_coupling_is_cos_half_theta():
    m = KitaevModel(2.0, 1.0, 1.0, 21)
    modes = kitaev_modes(m, 1.0)
    k = modes.momenta[:, 0]
    eps = m.single_particle_energy(k)
    # cos^2(theta/2) = (1 + eps/omega) / 2
    assert np.allclose(modes.coupling**2, 0.5 * (1 + eps / modes.frequency))


def test_kitaev_parameter_checks():
    with pytest.raises(ModelError):
        KitaevModel(1.0, 1.0, 1.0, 10)
    KitaevModel(1.0, 1.0, 1.0, 10, allow_even=True)
    with pytest.raises(ModelError):
        KitaevModel(1.0, -1.0, 1.0, 11)


def test_grid_orbits_partition_the_zone():
    for dim, n, orbits in ((1, 51, 26), (2, 31, 136), (2, 7, 10)):
        g = BrillouinGrid(dim, n)
        assert np.sum(np.unique(g.orbit_labels, return_counts=True)[1]) == n**dim
        assert len(np.unique(g.orbit_labels)) == orbits


def test_bh_modes_exclude_condensate_and_follow_bogoliubov():
    m = BHModel(1.0, 0.1, 31)
    modes = bh_modes(m, 1.0)
    assert len(modes) == 31**2 - 1
    e0 = 4 * np.sum(np.sin(modes.momenta / 2) ** 2, axis=1)
    assert np.allclose(modes.frequency, np.sqrt(e0 * (e0 + 0.2)))
    assert np.allclose(modes.coupling**2, e0 / modes.frequency)
    with pytest.raises(ModelError):
        bh_modes(m, 1.0, include_condensate=True)


def test_bh_phonon_branch_is_linear_at_small_k():
    m = BHModel(1.0, 0.1, 401)
    k = np.array([[2 * np.pi / 401, 0.0]])
    assert m.dispersion(k)[0] / (m.sound_velocity * k[0, 0]) == pytest.approx(1.0, rel=1e-3)


def test_group_velocity_against_analytic_derivative():
    m = BHModel(1.0, 0.1, 31)
    k = np.array([[0.8, 1.3]])
    e0 = m.free_energy(k)[0]
    w = m.dispersion(k)[0]
    de0 = 2 * np.sin(k[0])  # d e0 / d k_i with a = 1, J = 1
    exact = (2 * e0 + 0.2) * de0 / (2 * w)
    assert np.allclose(group_velocity(m, k)[0], exact, rtol=1e-2)


def test_thermal_occupations():
    w = np.array([0.3, 1.0, 4.0])
    assert np.allclose(thermal_occupation(w, 2.0, BOSONIC), 1 / (np.exp(2 * w) - 1))
    nf = thermal_occupation(w, 2.0, FERMIONIC)
    assert np.allclose(nf + thermal_occupation(-w, 2.0, FERMIONIC), 1.0)
    assert np.allclose(thermal_occupation(w, math.inf, FERMIONIC), 0.0)
    assert thermal_occupation(1e4, 1e3, FERMIONIC) == 0.0
    with pytest.raises(ModelError):
        thermal_occupation(np.array([0.0]), 1.0, BOSONIC)
    with pytest.raises(ModelError):
        thermal_occupation(w, -1.0, BOSONIC)


def test_synthetic_model_and_mode_table_columns():
    m = SyntheticModel((1.0, 2.0), (0.5, 0.7), occupations=(1.0, 0.0))
    modes = model_modes(m, 1.0)
    cols = modes.to_columns()
    assert list(cols) == ["kx", "omega", "coupling", "degeneracy", "occupation"]
    assert cols["occupation"].tolist() == [1.0, 0.0]
    with pytest.raises(ModelError):
        model_modes(object(), 1.0)


def test_bh_superfluid_flag():
    assert BHModel(1.0, 0.1, 5).superfluid_regime
    assert not BHModel(1.0, 5.0, 5).superfluid_regime
