"""Density estimates, transport oracle, moment tables, and limit profiles."""

import warnings

import numpy as np
import pytest

from vpdecay.core import Grid3, Snapshot, total_charge
from vpdecay.diagnostics import (
    BANDWIDTH_FACTOR,
    DensityField,
    charge_consistency,
    density,
    free_stream_density,
    limit_density_profile,
    moment_table,
    net_density_scale,
    oracle_density_field,
    oracle_sup_density,
    rho_ell,
    tested_moment,
    transport_support_box,
)
from vpdecay.initial_data import (
    InitialDataSpec,
    build_initial_data,
    sample,
    single_species,
    species_profiles,
)
from vpdecay.quadrature import gauss_legendre, tensor_rule


def brute_force_transport_density(data, t, x, n=160):
    """Independent oracle: direct 3-d velocity quadrature of f0(x - v t, v)."""
    total = 0.0
    for sp in data:
        vlo, vhi = sp.v_profile.support_box
        rules = [gauss_legendre(n, vlo[i], vhi[i]) for i in range(3)]
        vpts, w = tensor_rule(rules)
        vals = sp.x_profile(x[None, :] - vpts * t) * sp.v_profile(vpts)
        total += sp.species.charge * float(w @ vals)
    return total


class TestDensityField:
    def make(self):
        g = Grid3.from_bounds((-1, -1, -1), (1, 1, 1), (5, 5, 5))
        vals = np.ones(g.shape)
        return DensityField(time=2.0, grid=g, values=vals, bandwidth=0.5)

    def test_rescaled_and_sup(self):
        f = self.make()
        assert np.allclose(f.rescaled(1), 2.0 ** 4 * f.values)
        assert f.sup() == 1.0

    def test_charge_integral_is_riemann_sum(self):
        f = self.make()
        assert f.charge_integral() == pytest.approx(125 * f.grid.cell_volume)

    def test_validation(self):
        g = Grid3.from_bounds((-1, -1, -1), (1, 1, 1), (5, 5, 5))
        with pytest.raises(ValueError):
            DensityField(time=1.0, grid=g, values=np.ones((4, 5, 5)),
                         bandwidth=0.1)
        with pytest.raises(ValueError):
            DensityField(time=1.0, grid=g, values=np.full(g.shape, np.inf),
                         bandwidth=0.1)


class TestKernelDensity:
    def test_charge_integral_matches_ensemble(self):
        ens = sample(single_species(), 5, 4)
        snap = Snapshot.from_g_frame(0.0, ens)
        f = density(snap, resolution=32, inflate=1.4)
        # the compact kernel loses a little mass over the grid boundary
        assert charge_consistency(f, snap) <= 1e-2 * net_density_scale(ens)

    def test_overlapping_neutral_pair_cancels_exactly(self):
        spec = InitialDataSpec(preset="exact_overlap", sigma_plus=0.6,
                               sigma_minus=0.6)
        ens = sample(build_initial_data(spec), 3, 3)
        f = density(Snapshot.from_g_frame(0.0, ens), resolution=16)
        assert np.array_equal(f.values, np.zeros(f.grid.shape))

    def test_bandwidth_floor(self):
        ens = sample(single_species(), 3, 3)
        snap = Snapshot.from_g_frame(0.0, ens)
        g = Grid3.from_bounds((-2, -2, -2), (2, 2, 2), (9, 9, 9))
        with pytest.raises(ValueError, match="below the grid spacing"):
            density(snap, grid=g, h=0.1)

    def test_mass_outside_grid_warns(self):
        ens = sample(single_species(), 3, 3)
        snap = Snapshot.from_g_frame(0.0, ens)
        tiny = Grid3.from_bounds((2, 2, 2), (3, 3, 3), (5, 5, 5))
        with pytest.warns(UserWarning, match="outside the density grid"):
            density(snap, grid=tiny)


class TestFreeStreamOracle:
    def test_requires_positive_time(self):
        with pytest.raises(ValueError):
            free_stream_density(single_species(), 0.0, np.zeros((1, 3)))

    def test_against_brute_force_quadrature(self):
        data = species_profiles(1, None)
        t = 3.0
        pts = np.array([[0.3, 0.8, 1.1], [-1.2, 0.1, 0.4], [2.0, 2.0, 2.0]])
        ours = free_stream_density(data, t, pts, tol=1e-12)
        for k in range(len(pts)):
            ref = brute_force_transport_density(data, t, pts[k])
            assert ours[k] == pytest.approx(ref, abs=5e-7)

    def test_error_bound_is_reported(self):
        data = single_species()
        val, err = free_stream_density(data, 2.0, np.zeros((1, 3)),
                                       tol=1e-10, return_error=True)
        assert err <= 1e-10
        assert np.isfinite(val).all()

    def test_charge_is_conserved_under_transport(self):
        data = single_species()
        expected = (data[0].species.charge * data[0].x_profile.integral()
                    * data[0].v_profile.integral())
        for t in (1.0, 5.0):
            f = oracle_density_field(data, t, resolution=24, tol=1e-10)
            assert f.charge_integral() == pytest.approx(expected, rel=2e-3)

    def test_single_species_sup_decays_like_t_cubed(self):
        data = single_species()
        s1 = oracle_sup_density(data, 8.0, resolution=16)
        s2 = oracle_sup_density(data, 16.0, resolution=16)
        assert s1 / s2 == pytest.approx(8.0, rel=0.05)

    def test_transport_box_scales_linearly(self):
        data = single_species()
        lo, hi = transport_support_box(data, 10.0)
        xlo, xhi = data[0].x_profile.support_box
        vlo, vhi = data[0].v_profile.support_box
        assert np.allclose(lo, xlo + 10.0 * vlo)
        assert np.allclose(hi, xhi + 10.0 * vhi)


class TestTestedMoment:
    def test_order_zero_is_weighted_sum(self):
        ens = sample(single_species(), 3, 3)
        snap = Snapshot.from_g_frame(0.0, ens)

        def phi(v, beta):
            assert beta == (0, 0, 0)
            return v[:, 0] ** 2

        val = tested_moment(snap, 0, phi)
        ref = float(np.sum(ens.weights[0] * ens.velocities[0][:, 0] ** 2))
        assert val[0] == pytest.approx(ref, rel=1e-13)

    def test_order_one_pairs_position_with_gradient(self):
        ens = sample(single_species(), 3, 3)
        snap = Snapshot.from_g_frame(2.0, ens)

        # phi(v) = v1: gradient (1, 0, 0)
        def phi(v, beta):
            if beta == (0, 0, 0):
                return v[:, 0]
            if beta == (1, 0, 0):
                return np.ones(len(v))
            return np.zeros(len(v))

        val = tested_moment(snap, 1, phi)
        X, V, w = ens.positions[0], ens.velocities[0], ens.weights[0]
        ref = float(np.sum(w * X[:, 0]))
        assert val[0] == pytest.approx(ref, rel=1e-13)

    def test_transport_invariance(self):
        ens = sample(species_profiles(1, None), 3, 3)

        def phi(v, beta):
            return np.exp(-(v ** 2).sum(axis=1))

        early = tested_moment(Snapshot.from_g_frame(1.0, ens), 0, phi)
        late = tested_moment(Snapshot.from_g_frame(50.0, ens), 0, phi)
        assert np.array_equal(early, late)

    def test_negative_order_rejected(self):
        ens = sample(single_species(), 3, 3)
        with pytest.raises(ValueError):
            tested_moment(Snapshot.from_g_frame(1.0, ens), -1, lambda v, b: v)


class TestMomentTables:
    def make_tables(self, ell=0):
        ens = sample(species_profiles(1, None), 4, 6)
        snap = Snapshot.from_g_frame(1.0, ens)
        with warnings.catch_warnings():
            # the cheap nv=6 fixture trips the coarse-lattice advisory,
            # which has its own dedicated test below
            warnings.simplefilter("ignore", UserWarning)
            tables = moment_table(snap, ell, resolution=21, inflate=1.3)
        return ens, tables

    def test_order_range(self):
        ens = sample(single_species(), 3, 3)
        snap = Snapshot.from_g_frame(1.0, ens)
        with pytest.raises(ValueError):
            moment_table(snap, 4)

    def test_zeroth_table_integrates_to_species_mass(self):
        ens, tables = self.make_tables(0)
        for tab, w in zip(tables, ens.weights):
            integral = tab.values.sum() * tab.grid.cell_volume
            assert integral == pytest.approx(float(w.sum()), rel=2e-2)

    def test_duality_with_tested_moment(self):
        ens, tables = self.make_tables(1)
        snap = Snapshot.from_g_frame(1.0, ens)

        def phi(v, beta):
            g = np.exp(-(v ** 2).sum(axis=1))
            if beta == (0, 0, 0):
                return g
            i = beta.index(1)
            return -2.0 * v[:, i] * g

        exact = tested_moment(snap, 1, phi)
        for k, tab in enumerate(tables):
            nodes = tab.grid.nodes()
            g = np.exp(-(nodes ** 2).sum(axis=1))
            quad = float((tab.values.reshape(-1) @ g) * tab.grid.cell_volume)
            assert quad == pytest.approx(exact[k], rel=3e-2)

    def test_coarse_velocity_lattice_warns(self):
        ens = sample(species_profiles(1, None), 3, 3)
        snap = Snapshot.from_g_frame(1.0, ens)
        with pytest.warns(UserWarning, match="velocity spacing"):
            moment_table(snap, 1, resolution=33, inflate=1.1)

    def test_rho_ell_combines_species(self):
        _, tables = self.make_tables(0)
        net = rho_ell(tables)
        manual = (tables[0].species.charge * tables[0].values
                  + tables[1].species.charge * tables[1].values)
        assert np.allclose(net.values, manual, rtol=1e-14)

    def test_rho_ell_rejects_mixed_orders(self):
        _, t0 = self.make_tables(0)
        _, t1 = self.make_tables(1)
        with pytest.raises(ValueError, match="orders"):
            rho_ell((t0[0], t1[1]))

    def test_rho_ell_needs_tables(self):
        with pytest.raises(ValueError):
            rho_ell(())

    def test_at_physical_uses_similarity_variable(self):
        _, tables = self.make_tables(0)
        net = rho_ell(tables)
        v_query = np.array([[0.2, 0.1, -0.3]])
        direct = net.at_physical(v_query * net.time)
        from scipy.interpolate import RegularGridInterpolator
        interp = RegularGridInterpolator(net.grid.axes, net.values,
                                         method="cubic")
        assert direct[0] == pytest.approx(float(interp(v_query)[0]), rel=1e-10)


class TestLimitDensityProfile:
    def test_single_species_order_zero(self):
        data = single_species()
        prof = limit_density_profile(data, 0)
        w = np.array([[0.1, -0.2, 0.3], [0.4, 0.0, -0.5]])
        x_mass = data[0].x_profile.integral()
        expect = data[0].species.charge * x_mass * data[0].v_profile(w)
        assert np.allclose(prof(w), expect, rtol=1e-12)

    def test_neutral_construction_kills_order_zero(self):
        data = species_profiles(1, None)
        prof = limit_density_profile(data, 0)
        assert prof.sup_on_lattice(31) <= 1e-12

    def test_order_one_matches_axis_derivative(self):
        data = species_profiles(1, None)
        prof = limit_density_profile(data, 1)
        q = data[0].species.charge
        deriv = data[0].v_profile.derivative((1, 0, 0))
        w = np.array([[0.15, -0.1, 0.2], [0.0, 0.3, -0.25]])
        assert np.allclose(prof(w), -q * deriv(w), rtol=1e-10, atol=1e-13)

    def test_rescaled_transport_density_approaches_limit(self):
        data = single_species()
        prof = limit_density_profile(data, 0)
        w = np.array([[0.2, 0.05, -0.1]])
        target = float(prof(w)[0])
        vals = {}
        for t in (40.0, 80.0):
            rho = free_stream_density(data, t, w * t, tol=1e-11)
            vals[t] = t ** 3 * float(rho[0])
        # first-order Richardson removes the 1/t correction
        extrap = 2.0 * vals[80.0] - vals[40.0]
        assert abs(vals[40.0] - target) > abs(extrap - target)
        assert extrap == pytest.approx(target, rel=2e-3)

    def test_negative_order_rejected(self):
        with pytest.raises(ValueError):
            limit_density_profile(single_species(), -1)


def test_net_density_scale():
    ens = sample(species_profiles(1, None, charge=0.5), 3, 3)
    expect = sum(abs(sp.charge) * w.sum()
                 for sp, w in zip(ens.species, ens.weights))
    assert net_density_scale(ens) == pytest.approx(expect, rel=1e-14)
