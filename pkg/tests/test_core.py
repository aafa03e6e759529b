"""Basic container and multi-index behaviour."""

import numpy as np
import pytest

from vpdecay.core import (Grid3, ParticleEnsemble, Snapshot, Species,
                          index_factorial, index_order, monomial,
                          multi_indices, total_charge, total_momentum)


def make_pair(n=3):
    plus = Species(charge=1.0, mass=1.0, label="plus")
    minus = Species(charge=-1.0, mass=1.0, label="minus")
    rng = np.random.default_rng(7)
    pos = [rng.normal(size=(n, 3)), rng.normal(size=(n, 3))]
    vel = [rng.normal(size=(n, 3)), rng.normal(size=(n, 3))]
    w = [np.full(n, 0.5), np.full(n, 0.5)]
    return ParticleEnsemble(species=(plus, minus), positions=tuple(pos),
                            velocities=tuple(vel), weights=tuple(w))


class TestMultiIndices:
    def test_order_zero(self):
        assert multi_indices(0) == ((0, 0, 0),)

    def test_order_two_count(self):
        idx = multi_indices(2)
        assert len(idx) == 6
        assert all(sum(b) == 2 for b in idx)

    @pytest.mark.parametrize("ell", [0, 1, 2, 3, 4])
    def test_counts_match_stars_and_bars(self, ell):
        assert len(multi_indices(ell)) == (ell + 1) * (ell + 2) // 2

    def test_deterministic_order(self):
        assert multi_indices(1) == ((0, 0, 1), (0, 1, 0), (1, 0, 0))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            multi_indices(-1)


def test_index_helpers():
    assert index_order((2, 0, 1)) == 3
    assert index_factorial((0, 0, 0)) == 1
    assert index_factorial((2, 1, 3)) == 2 * 1 * 6


def test_monomial_values():
    pts = np.array([[2.0, 3.0, -1.0], [1.0, 1.0, 1.0]])
    out = monomial(pts, (2, 0, 1))
    assert out == pytest.approx([-4.0, 1.0])
    assert monomial(pts, (0, 0, 0)) == pytest.approx([1.0, 1.0])


class TestSpecies:
    def test_zero_charge_rejected(self):
        with pytest.raises(ValueError):
            Species(charge=0.0, mass=1.0, label="n")

    def test_nonpositive_mass_rejected(self):
        with pytest.raises(ValueError):
            Species(charge=1.0, mass=0.0, label="x")


class TestEnsemble:
    def test_counts_and_total(self):
        ens = make_pair(4)
        assert ens.counts == (4, 4)
        assert ens.n_total == 8

    def test_total_charge_neutral(self):
        assert total_charge(make_pair()) == pytest.approx(0.0, abs=1e-15)

    def test_total_momentum_shape(self):
        assert total_momentum(make_pair()).shape == (3,)

    def test_mismatched_lengths_rejected(self):
        ens = make_pair()
        with pytest.raises(ValueError):
            ParticleEnsemble(species=ens.species, positions=ens.positions,
                             velocities=ens.velocities,
                             weights=(ens.weights[0][:2], ens.weights[1]))

    def test_arrays_frozen(self):
        ens = make_pair()
        with pytest.raises(ValueError):
            ens.positions[0][0, 0] = 99.0


class TestSnapshot:
    def test_frame_consistency(self):
        ens = make_pair()
        snap = Snapshot.from_g_frame(2.0, ens)
        for X, V, x in zip(ens.positions, ens.velocities,
                           snap.physical_positions):
            assert np.allclose(x, X + 2.0 * V)

    def test_physical_round_trip(self):
        ens = make_pair()
        snap = Snapshot.from_g_frame(3.0, ens)
        back = Snapshot.from_physical(3.0, snap.ensemble.species,
                                      [x.copy() for x in snap.physical_positions],
                                      [v.copy() for v in snap.ensemble.velocities],
                                      [w.copy() for w in snap.ensemble.weights])
        for a, b in zip(back.ensemble.positions, ens.positions):
            assert np.allclose(a, b, atol=1e-14)


class TestGrid3:
    def test_from_bounds_shape_and_spacing(self):
        g = Grid3.from_bounds([0, 0, 0], [1, 2, 3], (5, 5, 7))
        assert g.shape == (5, 5, 7)
        assert g.spacing == pytest.approx([0.25, 0.5, 0.5])
        assert g.cell_volume == pytest.approx(0.0625)

    def test_nodes_cover_box(self):
        g = Grid3.from_bounds([-1, -1, -1], [1, 1, 1], 4)
        nodes = g.nodes()
        assert nodes.shape == (64, 3)
        assert nodes.min() == -1.0 and nodes.max() == 1.0

    def test_contains(self):
        g = Grid3.from_bounds([0, 0, 0], [1, 1, 1], 3)
        inside = g.contains(np.array([[0.5, 0.5, 0.5], [2.0, 0.0, 0.0]]))
        assert inside.tolist() == [True, False]

    def test_nonuniform_axis_rejected(self):
        with pytest.raises(ValueError):
            Grid3(axes=(np.array([0.0, 1.0, 3.0]), np.array([0.0, 1.0]),
                        np.array([0.0, 1.0])))
