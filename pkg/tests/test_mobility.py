import math

import numpy as np
import pytest

from fogplace.errors import DomainError
from fogplace.mobility import (MEAN_TRAJECTORY_EXACT, LocationDensity, MobilityProfile, analytic_cell_masses,
                               euclidean, expected_pair_metric, expected_user_metric, location_density, midpoints,
                               pause_probability, rwp_core_density, rwp_mobility_density, simulate_rwp)

from oracles import position_at, scalar_rwp_walk


def test_pause_probability():
    assert pause_probability(MobilityProfile(0.0, 1.0, 0.0)) == 0.0
    assert pause_probability(MobilityProfile(0.0, 1.0, 1.0)) == pytest.approx(1 / 1.52)
    assert pause_probability(MobilityProfile(0.0, 1.0, 0.52)) == pytest.approx(0.5)


def test_profile_validation():
    with pytest.raises(DomainError):
        MobilityProfile(p_static=1.5)
    with pytest.raises(DomainError):
        MobilityProfile(p_static=0.5, velocity=0.0)
    with pytest.raises(DomainError):
        MobilityProfile(expected_pause=-1)
    with pytest.raises(DomainError):
        MobilityProfile(init=(1.2, 0.0))


def test_core_values():
    assert rwp_core_density(0.5, 0.5) == pytest.approx(2.25, abs=1e-12)
    assert rwp_core_density(0.25, 0.25) == pytest.approx(1.2905, abs=5e-5)
    assert rwp_core_density(0.3, 1e-9) < 1e-6
    with pytest.raises(DomainError):
        rwp_core_density(0.6, 0.1)
    with pytest.raises(DomainError):
        rwp_core_density(0.2, 0.3)


def test_core_values_against_simulation():
    # cells around two probe points from an independent scalar walker
    rng = np.random.default_rng(5)
    pts = []
    for _ in range(1500):
        segs = scalar_rwp_walk(rng, 1.0, 0.0, 60)
        T = segs[-1][1]
        for t in rng.uniform(0.2 * T, T, 200):
            pts.append(position_at(segs, t))
    pts = np.array(pts)
    h = 0.05
    for (x, y), want in (((0.5, 0.5), 2.25), ((0.25, 0.25), 1.2905)):
        frac = np.mean((np.abs(pts[:, 0] - x) < h / 2) & (np.abs(pts[:, 1] - y) < h / 2)) / h**2
        # the box average sits a little under the peak at the centre
        assert frac == pytest.approx(want, rel=0.06)


def test_density_symmetries():
    assert rwp_mobility_density(0.3, 0.7) == pytest.approx(rwp_core_density(0.3, 0.3))
    rng = np.random.default_rng(0)
    a, b = rng.random(200), rng.random(200)
    f = rwp_mobility_density(a, b)
    assert np.array_equal(f, rwp_mobility_density(b, a))
    assert np.array_equal(f, rwp_mobility_density(1 - a, b))
    assert np.array_equal(f, rwp_mobility_density(1 - a, 1 - b))


def test_density_outside_square_is_zero():
    assert rwp_mobility_density(0.0, 0.5) == 0.0
    assert rwp_mobility_density(1.2, 0.5) == 0.0
    assert rwp_mobility_density(0.5, -0.1) == 0.0


@pytest.mark.parametrize("grid", [48, 200])
def test_density_integrates_to_one(grid):
    m = midpoints(grid)
    xx, yy = np.meshgrid(m, m, indexing="ij")
    assert rwp_mobility_density(xx, yy).mean() == pytest.approx(1.0, abs=1e-3)


def test_location_density_mixtures():
    m = midpoints(64)
    xx, yy = np.meshgrid(m, m, indexing="ij")
    fm = rwp_mobility_density(xx, yy)
    assert np.allclose(location_density(MobilityProfile(0.0, 1.0, 0.0), xx, yy), fm)
    assert np.allclose(location_density(MobilityProfile(0.5, 1.0, 0.0), xx, yy), 0.5 + 0.5 * fm)
    d = LocationDensity(MobilityProfile.static(0.2, 0.3))
    assert d.atoms == [(1.0, (0.2, 0.3))]
    assert np.all(d(xx, yy) == 0)


def test_static_profile_samples_stay_put():
    s = simulate_rwp(MobilityProfile.static(0.2, 0.7), 50, seed=1)
    assert np.all(s.positions == np.array([0.2, 0.7]))


def test_simulated_leg_length():
    s = simulate_rwp(MobilityProfile(0.0, 1.0, 0.0), 20000, seed=3)
    assert s.leg_lengths.mean() == pytest.approx(0.5214, abs=0.002)
    assert MEAN_TRAJECTORY_EXACT == pytest.approx(0.52140543, abs=1e-8)


def test_analytic_cells_sum_to_one():
    for prof in (MobilityProfile(0.0, 1.0, 0.0), MobilityProfile(0.5, 1.0, 1.0, init=(0.3, 0.3))):
        assert analytic_cell_masses(prof, 16).sum() == pytest.approx(1.0, abs=2e-3)


def test_expected_pair_metric_points_and_constants():
    a = MobilityProfile.static(0.1, 0.2)
    b = MobilityProfile.static(0.7, 0.6)
    assert expected_pair_metric(a, b, euclidean) == pytest.approx(math.dist((0.1, 0.2), (0.7, 0.6)))
    mob = MobilityProfile(0.3, 1.0, 2.0)
    assert expected_pair_metric(mob, a, lambda x, y: np.full(np.broadcast_shapes(x.shape, y.shape)[:-1], 3.0)) \
        == pytest.approx(3.0)


def test_expected_distance_uniform_pair():
    u = MobilityProfile(p_static=1.0)  # uniform initial placement, never moves
    assert expected_pair_metric(u, u, euclidean, grid=48) == pytest.approx(0.5214, abs=0.005)
    rng = np.random.default_rng(0)
    mc = np.linalg.norm(rng.random((200000, 2)) - rng.random((200000, 2)), axis=1).mean()
    assert mc == pytest.approx(0.5214, abs=0.005)


def test_expected_user_metric():
    a = MobilityProfile.static(0.4, 0.4)
    assert expected_user_metric(a, (0.4, 0.1), euclidean) == pytest.approx(0.3)
    u = MobilityProfile(p_static=1.0)
    exact = (math.sqrt(2) + math.log(1 + math.sqrt(2))) / 3
    assert exact == pytest.approx(0.7652, abs=1e-4)
    assert expected_user_metric(u, (0.0, 0.0), euclidean, grid=64) == pytest.approx(exact, abs=1e-3)
    rng = np.random.default_rng(1)
    assert np.linalg.norm(rng.random((200000, 2)), axis=1).mean() == pytest.approx(0.7652, abs=3e-3)


def test_memo_reuses_component_pairs():
    memo = {}
    a, b = MobilityProfile(0.5, 1.0, 1.0, init=(0.2, 0.2)), MobilityProfile(0.5, 1.0, 1.0, init=(0.9, 0.1))
    v1 = expected_pair_metric(a, b, euclidean, memo=memo, key="d")
    n = len(memo)
    v2 = expected_pair_metric(a, b, euclidean, memo=memo, key="d")
    assert v1 == v2 and len(memo) == n
