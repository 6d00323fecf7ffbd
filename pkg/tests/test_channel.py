import numpy as np
import pytest

from covert_aoi.channel import (
    ScenarioConfig,
    Topology,
    db_to_linear,
    make_rng,
    next_channel_state,
    path_gain,
    sample_fading,
    sample_topology,
)


def test_defaults_are_reference_network():
    cfg = ScenarioConfig()
    assert cfg.aoc == 0.01 and cfg.bandwidth == 1e6 and cfg.packet_size == 1000
    assert cfg.covert_budget == 0.95
    assert cfg.user_noise == pytest.approx(db_to_linear(-160))
    assert cfg.willie_noise_nominal == pytest.approx(db_to_linear(-120))
    assert cfg.noise_uncertainty == pytest.approx(10**0.3)
    assert cfg.area_radius == 100
    assert cfg.measurement_time == pytest.approx(0.01 * cfg.aoc)


@pytest.mark.parametrize(
    "change",
    [
        {"num_users": 0},
        {"bandwidth": 0.0},
        {"packet_size": -1.0},
        {"measurement_time": 0.02},
        {"covert_budget": 1.0},
        {"noise_uncertainty": 1.0},
        {"user_noise": 0.0},
        {"power_budget": 0.0},
        {"area_radius": -5.0},
        {"pathloss_exponent": 0.0},
    ],
)
def test_config_rejects_invalid(change):
    with pytest.raises(ValueError):
        ScenarioConfig(**change)


def test_from_mapping_converts_db_keys():
    cfg = ScenarioConfig.from_mapping(
        {"num_users": "4", "user_noise_db": "-150", "noise_uncertainty_db": "3", "power_budget": "2e-8"}
    )
    assert cfg.num_users == 4
    assert cfg.user_noise == pytest.approx(1e-15)
    assert cfg.noise_uncertainty == pytest.approx(1.99526231497)
    assert cfg.power_budget == 2e-8
    with pytest.raises(KeyError):
        ScenarioConfig.from_mapping({"bogus": 1})
    with pytest.raises(KeyError):
        ScenarioConfig.from_mapping({"user_noise": 1e-16, "user_noise_db": -160})


def test_topology_in_disk_and_deterministic():
    cfg = ScenarioConfig(num_users=6)
    a = sample_topology(cfg, make_rng(5))
    b = sample_topology(cfg, make_rng(5))
    assert a == b
    assert np.all(a.user_distances > 0) and np.all(a.user_distances <= 100)
    assert 0 < a.willie_distance <= 100
    assert a != sample_topology(cfg, make_rng(6))


def test_topology_mean_distance_is_two_thirds_radius():
    # area-uniform radius has density 2r/R^2, mean 2R/3
    cfg = ScenarioConfig(num_users=1)
    rng = make_rng(123)
    draws = [sample_topology(cfg, rng) for _ in range(50_000)]
    r = np.concatenate([[t.user_distances[0], t.willie_distance] for t in draws])
    assert r.size == 100_000
    assert r.mean() == pytest.approx(200 / 3, rel=0.01)


def test_path_gain():
    assert path_gain(1.0, 3.3) == 1.0
    assert path_gain(100.0, 2.5) == pytest.approx(1e-5, rel=1e-12)
    assert path_gain(50.0, 3.0) < path_gain(50.0, 2.5)
    with pytest.raises(ValueError):
        path_gain(0.0, 3.0)
    with pytest.raises(ValueError):
        path_gain(-1.0, 3.0)


def test_fading_unit_mean_positive_reproducible():
    x = sample_fading(make_rng(9), 1_000_000)
    assert np.all(x > 0)
    assert x.mean() == pytest.approx(1.0, rel=0.005)
    assert np.array_equal(sample_fading(make_rng(9), 10), sample_fading(make_rng(9), 10))


def test_channel_state_block_fading():
    cfg = ScenarioConfig()
    topo = Topology(np.array([20.0, 50.0, 90.0]), 40.0)
    rng = make_rng(1)
    s0 = next_channel_state(topo, cfg, 0, rng)
    s1 = next_channel_state(topo, cfg, 1, rng)
    assert s1.slot_index == 1
    assert not np.array_equal(s0.user_gains, s1.user_gains)
    assert s0.willie_gain != s1.willie_gain
    assert np.all(s0.user_gains > 0) and s0.willie_gain > 0
    flat = next_channel_state(topo, cfg, 3, rng, fading=False)
    assert np.array_equal(flat.user_gains, path_gain(topo.user_distances, cfg.pathloss_exponent))
    assert flat.willie_gain == path_gain(40.0, cfg.pathloss_exponent)
    with pytest.raises(ValueError):
        next_channel_state(topo, cfg, -1, rng)


def test_channel_mean_gain_equals_path_gain():
    cfg = ScenarioConfig()
    topo = Topology(np.array([30.0, 75.0]), 60.0)
    rng = make_rng(77)
    gains = np.array([next_channel_state(topo, cfg, s, rng).user_gains for s in range(100_000)])
    expected = path_gain(topo.user_distances, cfg.pathloss_exponent)
    np.testing.assert_allclose(gains.mean(axis=0), expected, rtol=0.01)


def test_sub_streams_are_distinct_and_reproducible():
    a = make_rng(3, 0).random(4)
    assert np.array_equal(a, make_rng(3, 0).random(4))
    assert not np.array_equal(a, make_rng(3, 1).random(4))
