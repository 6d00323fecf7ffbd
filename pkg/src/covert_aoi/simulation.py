"""Slotted simulation of AoC-aware versus static power control.

Time is cut into AoC slots of length ``tau``. Each slot opens with a channel
measurement of length ``delta``, after which the gains stay fixed for the
rest of the slot. Packets follow a just-in-time policy: a user's next packet
is generated the moment the previous one is delivered, and a packet is never
carried across a slot boundary. A packet that cannot fit in one slot is split
into equal fragments, one fragment per slot.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelState, ScenarioConfig, Topology, next_channel_state
from .detection import NoiseUncertainty, covert_power_cap, optimal_detection
from .noma import rates, sic_order
from .solver import alternating_solve


class Policy(str, enum.Enum):
    AOC_AWARE = "AocAware"
    STATIC_POWER = "StaticPower"
    # transmits nothing; degenerate baseline
    SILENT = "Silent"


@dataclass(frozen=True)
class SlotTrace:
    """What happened in one slot. Per-user arrays use the topology's user order."""

    slot_index: int
    channel: ChannelState
    powers: np.ndarray
    xi_star: float
    covert_ok: bool
    delivered_fractions: np.ndarray
    aoi: np.ndarray
    last_generation: np.ndarray
    deliveries: np.ndarray
    solver_status: str

    @property
    def total_power(self) -> float:
        return float(self.powers.sum())


def fragment_packet(required_d: float, tau: float) -> int:
    """Number of slots a packet needing ``required_d`` seconds is split over."""
    if required_d <= 0 or tau <= 0:
        raise ValueError("required_d and tau must be positive")
    if not math.isfinite(required_d):
        raise ValueError("cannot fragment a packet with zero rate")
    # guard against 40.000000000000004-style quotients
    return max(1, math.ceil(required_d / tau * (1.0 - 1e-12)))


def user_rates(powers: np.ndarray, gains: np.ndarray, noise: float) -> np.ndarray:
    """Rates for powers/gains given in user order, decoded in the slot's SIC order."""
    order = sic_order(gains)
    out = np.empty_like(gains, dtype=float)
    out[order] = rates(powers[order], gains[order], noise)
    return out


class _User:
    __slots__ = ("last_gen", "gen", "frags", "sent")

    def __init__(self):
        # a fresh packet is taken as delivered at t = 0
        self.last_gen = 0.0
        self.gen = 0.0
        self.frags = 0
        self.sent = 0

    def fraction(self) -> float:
        return self.sent / self.frags if self.frags else 0.0


def _serve(user: _User, rate: float, start: float, window: float, cfg: ScenarioConfig) -> int:
    """Advance one user through one slot window; returns packets delivered."""
    if rate <= 0:
        return 0
    bits = cfg.bits_per_hz
    clock, end = start, start + window
    delivered = 0
    while True:
        if user.frags == 0:
            service = bits / rate
            if clock + service <= end:
                clock += service
                user.last_gen, user.gen = user.gen, clock
                delivered += 1
                continue
            if clock > start or service <= window:
                # does not fit in what is left of this slot; wait for the next
                return delivered
            user.frags = fragment_packet(service, window)
            user.sent = 0
        service = bits / user.frags / rate
        if clock + service <= end:
            clock += service
            user.sent += 1
            if user.sent == user.frags:
                user.last_gen, user.gen = user.gen, clock
                user.frags = user.sent = 0
                delivered += 1
        # at most one fragment per slot; a failed fragment retries next slot
        return delivered


def run_slotted(
    cfg: ScenarioConfig,
    topology: Topology,
    policy: Policy,
    num_slots: int,
    rng: np.random.Generator,
) -> list[SlotTrace]:
    """Simulate ``num_slots`` slots and return one :class:`SlotTrace` per slot.

    The random stream is consumed only by channel draws, so two runs seeded
    identically see identical channels whatever the policy.
    """
    if num_slots < 1:
        raise ValueError("num_slots must be at least 1")
    policy = Policy(policy)
    K = cfg.num_users
    nu = NoiseUncertainty.from_config(cfg)
    users = [_User() for _ in range(K)]
    held = None
    traces = []
    for slot in range(num_slots):
        ch = next_channel_state(topology, cfg, slot, rng)
        status = "-"
        if policy is Policy.SILENT:
            powers = np.zeros(K)
        elif policy is Policy.AOC_AWARE or held is None:
            res = alternating_solve(ch.user_gains, ch.willie_gain, cfg)
            powers, status = res.user_powers, res.status.value
            if policy is Policy.STATIC_POWER:
                held = powers
        else:
            powers = held
        r = user_rates(powers, ch.user_gains, cfg.user_noise)
        xi = optimal_detection(float(powers.sum()), ch.willie_gain, nu).min_total_error
        start = slot * cfg.aoc + cfg.measurement_time
        delivered = np.array([_serve(u, rk, start, cfg.usable_time, cfg) for u, rk in zip(users, r)])
        t_end = (slot + 1) * cfg.aoc
        last_gen = np.array([u.last_gen for u in users])
        traces.append(
            SlotTrace(
                slot_index=slot,
                channel=ch,
                powers=powers.copy(),
                xi_star=xi,
                covert_ok=bool(xi >= 1.0 - cfg.covert_budget),
                delivered_fractions=np.array([u.fraction() for u in users]),
                aoi=t_end - last_gen,
                last_generation=last_gen,
                deliveries=delivered,
                solver_status=status,
            )
        )
    return traces


def covert_violation_count(traces) -> int:
    return sum(1 for t in traces if not t.covert_ok)


def average_aoi_of_trace(traces) -> float:
    """Mean over slots of the user-averaged AoI sampled at each slot end."""
    if not traces:
        raise ValueError("empty trace")
    return float(np.mean([np.mean(t.aoi) for t in traces]))


def breach_slots(willie_gains, total_power: float, cfg: ScenarioConfig) -> list[int]:
    """Slots in which a fixed total power exceeds the current covert cap.

    A fixed ``p_a`` breaches covertness in slot ``s`` exactly when
    ``h_aw[s] > h_aw[0] * cap(h_aw[0]) / p_a``, since the cap scales as
    ``1/h_aw``.
    """
    nu = NoiseUncertainty.from_config(cfg)
    return [
        s
        for s, h in enumerate(willie_gains)
        if total_power > covert_power_cap(h, nu, cfg.covert_budget)
    ]

