"""Scenario parameters, node placement and block-fading channel gains.

All gains are linear power gains ``h = chi * d**(-alpha)`` where ``chi`` is a
unit-mean exponential fading factor (squared Rayleigh amplitude). A gain is
held for one AoC slot and redrawn independently in the next.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.random import Generator


def db_to_linear(value_db: float) -> float:
    return float(10.0 ** (value_db / 10.0))


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical and algorithmic parameters of one covert NOMA scenario.

    Defaults follow the reference network: tau = 10 ms, B = 1 MHz,
    S = 1 kbit, eps_w = 0.95, Willie nominal noise -120 dBW, user noise
    -160 dBW, noise uncertainty 3 dB and a 100 m cell. Every field is in
    linear SI units; use :meth:`from_mapping` to accept ``*_db`` keys.
    """

    num_users: int = 3
    bandwidth: float = 1e6
    packet_size: float = 1000.0
    aoc: float = 0.01
    measurement_time: float = 1e-4
    covert_budget: float = 0.95
    user_noise: float = 1e-16
    willie_noise_nominal: float = 1e-12
    noise_uncertainty: float = field(default_factory=lambda: db_to_linear(3.0))
    pathloss_exponent: float = 3.0
    power_budget: float = 1e-8
    area_radius: float = 100.0
    rng_seed: int = 1

    def __post_init__(self):
        checks = {
            "num_users >= 1": self.num_users >= 1,
            "bandwidth > 0": self.bandwidth > 0,
            "packet_size > 0": self.packet_size > 0,
            "0 < measurement_time < aoc": 0 < self.measurement_time < self.aoc,
            "0 < covert_budget < 1": 0 < self.covert_budget < 1,
            "user_noise > 0": self.user_noise > 0,
            "willie_noise_nominal > 0": self.willie_noise_nominal > 0,
            "noise_uncertainty > 1": self.noise_uncertainty > 1,
            "pathloss_exponent > 0": self.pathloss_exponent > 0,
            "power_budget > 0": self.power_budget > 0,
            "area_radius > 0": self.area_radius > 0,
            "0 <= rng_seed < 2**64": 0 <= self.rng_seed < 2**64,
        }
        failed = [name for name, ok in checks.items() if not ok]
        if failed:
            raise ValueError(f"invalid ScenarioConfig: {', '.join(failed)}")

    @property
    def usable_time(self) -> float:
        """Air time left in one slot once the channel has been measured."""
        return self.aoc - self.measurement_time

    @property
    def bits_per_hz(self) -> float:
        return self.packet_size / self.bandwidth

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    @classmethod
    def from_mapping(cls, values: dict) -> "ScenarioConfig":
        """Build a config from loose key/value pairs.

        Keys ending in ``_db`` are converted to linear (dBW for noise
        powers, plain dB for the uncertainty factor). Unknown keys raise
        ``KeyError``.
        """
        known = set(cls.__dataclass_fields__)
        kwargs = {}
        for key, raw in values.items():
            if key.endswith("_db"):
                name, value = key[:-3], db_to_linear(float(raw))
            else:
                name, value = key, raw
            if name not in known:
                raise KeyError(f"unknown scenario key {key!r}")
            if name in kwargs:
                raise KeyError(f"scenario key {name!r} given twice")
            kwargs[name] = value
        for name in ("num_users", "rng_seed"):
            if name in kwargs:
                kwargs[name] = int(kwargs[name])
        for name, value in kwargs.items():
            if name not in ("num_users", "rng_seed"):
                kwargs[name] = float(value)
        return cls(**kwargs)


@dataclass(frozen=True)
class Topology:
    """Distances from Alice (at the origin) to each user and to Willie."""

    user_distances: np.ndarray
    willie_distance: float

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (
            np.array_equal(self.user_distances, other.user_distances)
            and self.willie_distance == other.willie_distance
        )


@dataclass(frozen=True)
class ChannelState:
    """Linear power gains valid for one slot of duration tau."""

    user_gains: np.ndarray
    willie_gain: float
    slot_index: int = 0


def make_rng(seed: int, *stream: int) -> Generator:
    """Independent random stream for ``seed`` and an optional sub-stream path.

    ``make_rng(s, i)`` and ``make_rng(s, j)`` are statistically independent
    for ``i != j``; used to give every Monte Carlo trial or worker its own
    generator so results do not depend on execution order.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(stream)))


def _disk_radius(radius: float, rng: Generator, size=None):
    # 1 - U(0,1) lies in (0, 1], keeping every distance strictly positive
    u = 1.0 - rng.random(size)
    return radius * np.sqrt(u)


def sample_topology(cfg: ScenarioConfig, rng: Generator) -> Topology:
    """Drop ``K`` users and Willie uniformly by area in the cell disk."""
    users = _disk_radius(cfg.area_radius, rng, cfg.num_users)
    willie = float(_disk_radius(cfg.area_radius, rng))
    return Topology(user_distances=users, willie_distance=willie)


def path_gain(distance, alpha: float):
    """Distance-dependent power loss ``distance ** -alpha``."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    if alpha <= 0:
        raise ValueError("path loss exponent must be positive")
    out = d ** (-alpha)
    return float(out) if out.ndim == 0 else out


def sample_fading(rng: Generator, size=None):
    """Unit-mean exponential power fading factor(s)."""
    chi = rng.standard_exponential(size)
    # the exponential sampler can return exactly 0.0 with negligible probability
    return np.maximum(chi, np.finfo(float).tiny)


def next_channel_state(
    topology: Topology,
    cfg: ScenarioConfig,
    slot: int,
    rng: Generator,
    fading: bool = True,
) -> ChannelState:
    """Draw the gains of slot ``slot``; ``fading=False`` pins chi to 1."""
    if slot < 0:
        raise ValueError("slot index must be non-negative")
    alpha = cfg.pathloss_exponent
    users = np.atleast_1d(path_gain(topology.user_distances, alpha))
    willie = path_gain(topology.willie_distance, alpha)
    if fading:
        chi = sample_fading(rng, users.size + 1)
        users = users * chi[:-1]
        willie = willie * float(chi[-1])
    return ChannelState(user_gains=users, willie_gain=float(willie), slot_index=slot)
