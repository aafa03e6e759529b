"""Moment-cancelling initial data: windows, presets, and sampling."""

import numpy as np
import pytest
from numpy.polynomial import Polynomial
from scipy.special import eval_gegenbauer

from vpdecay.core import multi_indices, total_charge
from vpdecay.initial_data import (
    InitialDataSpec,
    build_initial_data,
    bump,
    default_dipole_velocity_profile,
    gaussian_dipole,
    gegenbauer,
    mu_m,
    neutral_pair,
    sample,
    single_species,
    species_profiles,
    weighted_phi,
)
from vpdecay.profiles import PolyBump1D, SeparableProfile3D


def net_spatial_moment(data, beta):
    return sum(a.species.charge * a.x_profile.moment(beta)
               * a.v_profile.integral() for a in data)


class TestGegenbauer:
    @pytest.mark.parametrize("k", range(7))
    def test_matches_scipy(self, k):
        z = np.linspace(-1.0, 1.0, 11)
        ours = gegenbauer(k, 3.5)(z)
        ref = eval_gegenbauer(k, 3.5, z)
        assert np.allclose(ours, ref, rtol=1e-12, atol=1e-12)

    def test_negative_degree_rejected(self):
        with pytest.raises(ValueError):
            gegenbauer(-1, 3.0)


class TestWeightedPhi:
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_moment_pattern(self, m):
        phi = weighted_phi(m)
        for j in range(m):
            assert abs(phi.moment(j)) < 1e-12
        assert phi.moment(m) == pytest.approx(1.0, rel=1e-12)

    def test_weight_exponent_floor(self):
        with pytest.raises(ValueError):
            weighted_phi(2, 4.0)
        assert weighted_phi(2, 4.5).moment(2) == pytest.approx(1.0)

    def test_rescaled_halfwidth_keeps_normalization(self):
        phi = weighted_phi(1, halfwidth=2.5)
        assert phi.moment(1) == pytest.approx(1.0, rel=1e-12)
        assert abs(phi.moment(0)) < 1e-12


class TestBump:
    def test_unit_integral_and_support(self):
        b = bump(2, center=0.5, halfwidth=2.0)
        assert b.moment(0) == pytest.approx(1.0, rel=1e-13)
        assert b.support == (-1.5, 2.5)
        u = np.linspace(-1.5, 2.5, 101)
        assert (b(u) >= 0.0).all()

    def test_negative_smoothness_rejected(self):
        with pytest.raises(ValueError):
            bump(-1)


class TestMuM:
    def test_order_zero_has_no_tensor_form(self):
        with pytest.raises(ValueError):
            mu_m(0)

    def test_kronecker_moment_pattern(self):
        prof = mu_m(2)
        for beta in multi_indices(0) + multi_indices(1):
            assert abs(prof.moment(beta)) < 1e-12
        assert prof.moment((2, 0, 0)) == pytest.approx(1.0, rel=1e-12)
        # mixed order-2 indices vanish too: the window sits on axis 1
        assert abs(prof.moment((1, 1, 0))) < 1e-12


class TestSpeciesProfiles:
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_net_moments_vanish_below_order_m(self, m):
        data = species_profiles(m, None)
        for ell in range(m):
            for beta in multi_indices(ell):
                assert abs(net_spatial_moment(data, beta)) < 1e-12
        assert net_spatial_moment(data, (m, 0, 0)) == pytest.approx(1.0, rel=1e-10)

    def test_order_zero_cancels_in_velocity(self):
        plus, minus = species_profiles(0, None)
        net = (plus.species.charge * plus.phase_integral()
               + minus.species.charge * minus.phase_integral())
        assert abs(net) < 1e-12
        assert plus.v_profile.min_on_lattice(31) >= -1e-12

    def test_profiles_stay_nonnegative(self):
        plus, _ = species_profiles(2, None)
        assert plus.x_profile.min_on_lattice(31) >= -1e-12

    def test_charge_and_mass_propagate(self):
        plus, minus = species_profiles(1, None, charge=0.25, mass=2.0)
        assert plus.species.charge == 0.25 and minus.species.charge == -0.25
        assert plus.species.mass == 2.0
        assert net_spatial_moment((plus, minus), (1, 0, 0)) == pytest.approx(
            0.25, rel=1e-10)

    def test_shared_velocity_profile(self):
        plus, minus = species_profiles(1, None)
        pts = np.array([[0.1, -0.2, 0.3], [0.5, 0.0, -0.4]])
        assert np.array_equal(plus.v_profile(pts), minus.v_profile(pts))


class TestGaussianDipole:
    def test_masses_cancel(self):
        plus, minus = gaussian_dipole((0, 0, 0), 0.7, (0, 0, 0), 1.1)
        assert plus.phase_integral() == pytest.approx(minus.phase_integral(),
                                                      rel=1e-12)

    def test_equal_means_kill_dipole_moment(self):
        data = gaussian_dipole((0, 0, 0), 0.7, (0, 0, 0), 1.1)
        for beta in multi_indices(1):
            assert abs(net_spatial_moment(data, beta)) < 1e-10
        # widths differ, so the quadrupole on each axis survives
        assert abs(net_spatial_moment(data, (2, 0, 0))) > 1e-3

    def test_mean_offset_restores_dipole(self):
        data = gaussian_dipole((0.3, 0, 0), 0.7, (0, 0, 0), 0.7)
        v_mass = data[0].v_profile.integral()
        assert net_spatial_moment(data, (1, 0, 0)) == pytest.approx(
            0.3 * v_mass, rel=1e-8)

    def test_identical_parameters_overlap_exactly(self):
        plus, minus = gaussian_dipole((0.1, 0, 0), 0.9, (0.1, 0, 0), 0.9)
        pts = np.array([[0.2, -0.1, 0.4], [1.0, 0.3, -0.6]])
        assert np.array_equal(plus.x_profile(pts), minus.x_profile(pts))

    def test_velocity_profile_must_be_zero_mean(self):
        lump = SeparableProfile3D.product(
            *(PolyBump1D(s=2.0, poly=Polynomial([1.0])) for _ in range(3)))
        with pytest.raises(ValueError, match="zero integral"):
            gaussian_dipole((0, 0, 0), 0.7, (0, 0, 0), 1.1, vel_profile=lump)

    def test_width_validation(self):
        with pytest.raises(ValueError):
            gaussian_dipole((0, 0, 0), 0.0, (0, 0, 0), 1.0)

    def test_default_velocity_profile_is_zero_mean(self):
        prof = default_dipole_velocity_profile()
        assert abs(prof.integral()) < 1e-14


class TestInitialDataSpec:
    def test_preset_validation(self):
        with pytest.raises(ValueError, match="preset"):
            InitialDataSpec(preset="voodoo")

    def test_order_range(self):
        with pytest.raises(ValueError):
            InitialDataSpec(m=9)

    def test_resolution_floor(self):
        with pytest.raises(ValueError, match="at least 8"):
            InitialDataSpec(nx=7)

    def test_exact_overlap_requires_matching_parameters(self):
        spec = InitialDataSpec(preset="exact_overlap", sigma_plus=0.7,
                               sigma_minus=1.1)
        with pytest.raises(ValueError, match="identical"):
            build_initial_data(spec)

    def test_gegenbauer_preset_matches_direct_construction(self):
        spec = InitialDataSpec(preset="gegenbauer", m=2, charge=0.5)
        built = build_initial_data(spec)
        direct = species_profiles(2, None, charge=0.5)
        pts = np.array([[0.1, 0.4, 0.2], [-0.3, 0.6, 0.0]])
        for a, b in zip(built, direct):
            assert a.species == b.species
            assert np.array_equal(a.x_profile(pts), b.x_profile(pts))

    def test_single_species_preset(self):
        data = build_initial_data(InitialDataSpec(preset="single_species"))
        assert len(data) == 1
        assert data[0].phase_integral() > 0.0


class TestSample:
    def test_counts_and_positive_weights(self):
        ens = sample(single_species(), 4, 4)
        assert 0 < ens.n_total <= 4 ** 6
        assert all((w > 0.0).all() for w in ens.weights)

    def test_exact_neutrality_after_rescale(self):
        ens = sample(species_profiles(1, None), 4, 5)
        assert abs(total_charge(ens)) < 1e-14

    def test_sampled_moments_track_analytic_values(self):
        data = species_profiles(1, None)
        ens = sample(data, 8, 6)
        net = 0.0
        for sp, x, w in zip(ens.species, ens.positions, ens.weights):
            net += sp.charge * float(w @ x[:, 0])
        assert net == pytest.approx(1.0, abs=2e-3)

    def test_overlapping_species_share_nodes(self):
        spec = InitialDataSpec(preset="exact_overlap", sigma_plus=0.9,
                               sigma_minus=0.9)
        ens = sample(build_initial_data(spec), 3, 3)
        assert np.array_equal(ens.positions[0], ens.positions[1])
        assert np.allclose(ens.weights[0], ens.weights[1], rtol=1e-12)

    def test_node_floor(self):
        with pytest.raises(ValueError, match="at least 2"):
            sample(single_species(), 1, 4)


def test_neutral_pair_labels():
    plus, minus = neutral_pair(0.5)
    assert (plus.charge, minus.charge) == (0.5, -0.5)
    assert plus.label == "plus" and minus.label == "minus"
