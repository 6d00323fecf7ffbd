import math

import numpy as np
import pytest

from covert_aoi.channel import ScenarioConfig, Topology, make_rng, sample_topology
from covert_aoi.detection import NoiseUncertainty, covert_power_cap
from covert_aoi.simulation import (
    Policy,
    _serve,
    _User,
    average_aoi_of_trace,
    breach_slots,
    covert_violation_count,
    fragment_packet,
    run_slotted,
    user_rates,
)
from covert_aoi.noma import rates

CFG = ScenarioConfig(power_budget=1e-3)
TOPO = Topology(np.array([20.0, 55.0, 90.0]), 60.0)


def test_fragment_packet():
    assert fragment_packet(0.4, 0.01) == 40
    assert fragment_packet(0.005, 0.01) == 1
    assert fragment_packet(0.0101, 0.01) == 2
    assert fragment_packet(0.03, 0.01) == 3
    for bad in [(0.0, 0.01), (0.1, 0.0), (math.inf, 0.01)]:
        with pytest.raises(ValueError):
            fragment_packet(*bad)


def test_user_rates_follow_sic_order():
    gains = np.array([4e-6, 1e-7, 9e-7])
    p = np.array([1e-9, 5e-9, 2e-9])
    order = np.argsort(gains)
    expected = np.empty(3)
    expected[order] = rates(p[order], gains[order], 1e-16)
    np.testing.assert_allclose(user_rates(p, gains, 1e-16), expected)


def test_serve_back_to_back_packets():
    cfg = ScenarioConfig()
    u = _User()
    rate = cfg.bits_per_hz / 0.002  # 2 ms per packet
    n = _serve(u, rate, cfg.measurement_time, cfg.usable_time, cfg)
    assert n == 4  # 4 x 2 ms fit in 9.9 ms
    assert u.gen == pytest.approx(cfg.measurement_time + 0.008)
    assert u.last_gen == pytest.approx(cfg.measurement_time + 0.006)


def test_serve_fragments_one_per_slot():
    cfg = ScenarioConfig()
    u = _User()
    rate = cfg.bits_per_hz / 0.4
    n_frag = fragment_packet(0.4, cfg.usable_time)
    for slot in range(n_frag - 1):
        start = slot * cfg.aoc + cfg.measurement_time
        assert _serve(u, rate, start, cfg.usable_time, cfg) == 0
        assert u.sent == slot + 1 and u.frags == n_frag
    start = (n_frag - 1) * cfg.aoc + cfg.measurement_time
    assert _serve(u, rate, start, cfg.usable_time, cfg) == 1
    assert u.frags == 0 and u.last_gen == 0.0
    assert u.gen == pytest.approx(start + 0.4 / n_frag)


def test_serve_zero_rate():
    cfg = ScenarioConfig()
    u = _User()
    assert _serve(u, 0.0, 0.0, cfg.usable_time, cfg) == 0


def test_policies_share_channel_sequence():
    a = run_slotted(CFG, TOPO, Policy.AOC_AWARE, 20, make_rng(4))
    s = run_slotted(CFG, TOPO, Policy.STATIC_POWER, 20, make_rng(4))
    z = run_slotted(CFG, TOPO, "Silent", 20, make_rng(4))
    for x, y, w in zip(a, s, z):
        np.testing.assert_array_equal(x.channel.user_gains, y.channel.user_gains)
        assert x.channel.willie_gain == y.channel.willie_gain == w.channel.willie_gain


def test_run_is_reproducible():
    a = run_slotted(CFG, TOPO, Policy.AOC_AWARE, 10, make_rng(8))
    b = run_slotted(CFG, TOPO, Policy.AOC_AWARE, 10, make_rng(8))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.powers, y.powers)
        np.testing.assert_array_equal(x.aoi, y.aoi)


def test_aware_policy_always_covert():
    traces = run_slotted(CFG, TOPO, Policy.AOC_AWARE, 60, make_rng(2))
    assert covert_violation_count(traces) == 0
    nu = NoiseUncertainty.from_config(CFG)
    for t in traces:
        assert t.total_power <= covert_power_cap(t.channel.willie_gain, nu, CFG.covert_budget)
        if t.solver_status == "Converged":
            # the AoC deadline guarantees at least one delivery per slot
            assert np.all(t.deliveries >= 1)
            assert np.all(t.aoi <= 2 * CFG.aoc)


def test_static_policy_holds_first_slot_powers():
    traces = run_slotted(CFG, TOPO, Policy.STATIC_POWER, 30, make_rng(2))
    for t in traces[1:]:
        np.testing.assert_array_equal(t.powers, traces[0].powers)
        assert t.solver_status == "-"
    expected = breach_slots([t.channel.willie_gain for t in traces], traces[0].total_power, CFG)
    assert [t.slot_index for t in traces if not t.covert_ok] == expected


def test_silent_policy_ages_linearly():
    traces = run_slotted(CFG, TOPO, Policy.SILENT, 5, make_rng(0))
    for t in traces:
        assert t.total_power == 0 and t.covert_ok and t.xi_star == 1.0
        np.testing.assert_allclose(t.aoi, (t.slot_index + 1) * CFG.aoc)
    assert average_aoi_of_trace(traces) == pytest.approx(3 * CFG.aoc)


def test_breach_slots_matches_scaling_rule():
    nu = NoiseUncertainty.from_config(CFG)
    rng = np.random.default_rng(1)
    h = 10 ** rng.uniform(-7, -5, 200)
    p_a = covert_power_cap(h[0], nu, CFG.covert_budget) * (1 - 1e-9)
    got = breach_slots(h, p_a, CFG)
    assert 0 not in got
    rule = [s for s in range(200) if h[s] > h[0] * covert_power_cap(h[0], nu, CFG.covert_budget) / p_a]
    assert got == rule


def test_run_slotted_validates():
    with pytest.raises(ValueError):
        run_slotted(CFG, TOPO, Policy.SILENT, 0, make_rng(0))
    with pytest.raises(ValueError):
        run_slotted(CFG, TOPO, "Greedy", 3, make_rng(0))
    with pytest.raises(ValueError):
        average_aoi_of_trace([])


def test_topology_from_sampler_runs():
    topo = sample_topology(CFG, make_rng(1, 0))
    traces = run_slotted(CFG, topo, Policy.AOC_AWARE, 3, make_rng(1, 1))
    assert [t.slot_index for t in traces] == [0, 1, 2]
