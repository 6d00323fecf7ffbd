"""Power-domain NOMA rates under SIC and their first-order lower bound.

Users are indexed in SIC order, i.e. by ascending channel gain: user ``k`` is
interfered by every user ``j > k`` and the strongest user decodes
interference-free. All rates are spectral efficiencies in bits/s/Hz.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LN2 = np.log(2.0)


@dataclass(frozen=True)
class PowerAllocation:
    """Per-user transmit powers (watts), indexed in SIC order."""

    powers: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.powers, dtype=float)
        if p.ndim != 1:
            raise ValueError("powers must be a 1-D array")
        if np.any(p < 0):
            raise ValueError("powers must be non-negative")
        object.__setattr__(self, "powers", p)

    @property
    def total(self) -> float:
        return float(self.powers.sum())

    def __len__(self):
        return self.powers.size

    @classmethod
    def equal_split(cls, total: float, num_users: int) -> "PowerAllocation":
        return cls(np.full(num_users, total / num_users))


def _powers(p) -> np.ndarray:
    return p.powers if isinstance(p, PowerAllocation) else np.asarray(p, dtype=float)


def tail_sums(p: np.ndarray) -> np.ndarray:
    """``out[k] = sum(p[k:])``; trailing axis is the user axis."""
    return np.flip(np.cumsum(np.flip(p, -1), -1), -1)


def interference_sums(p: np.ndarray) -> np.ndarray:
    """``out[k] = sum(p[k+1:])``, zero for the last user."""
    tails = tail_sums(p)
    out = np.zeros_like(tails)
    out[..., :-1] = tails[..., 1:]
    return out


def sic_order(gains) -> np.ndarray:
    """Indices sorting ``gains`` ascending; ties keep their original order."""
    gains = np.asarray(gains, dtype=float)
    if np.any(gains <= 0):
        raise ValueError("gains must be positive")
    return np.argsort(gains, kind="stable")


def rates(p, gains, noise: float) -> np.ndarray:
    """Achievable rate of every user; ``p`` may carry leading batch axes."""
    p = _powers(p)
    h = np.asarray(gains, dtype=float)
    interference = interference_sums(p)
    return np.log1p(h * p / (h * interference + noise)) / LN2


def rate(k: int, p, gains, noise: float) -> float:
    return float(rates(p, gains, noise)[k])


def linearized_rates(p, p_anchor, gains, noise: float) -> np.ndarray:
    """Concave lower bound on :func:`rates`, tight at ``p_anchor``.

    The interference term ``log2(h*I + noise)`` is replaced by its tangent at
    the anchor's interference ``I_a``. Writing ``D = h*I_a + noise`` the bound
    is ``(log1p(h*(p_k + I - I_a)/D) - h*(I - I_a)/D) / ln 2`` which equals
    the exact ``log1p(h*p_k/D) - log1p(h*(I - I_a)/D)`` minus a non-negative
    gap.
    """
    p = _powers(p)
    h = np.asarray(gains, dtype=float)
    shift = interference_sums(p) - interference_sums(_powers(p_anchor))
    denom = h * interference_sums(_powers(p_anchor)) + noise
    return (np.log1p(h * (p + shift) / denom) - h * shift / denom) / LN2


def linearized_rate(k: int, p, p_anchor, gains, noise: float) -> float:
    return float(linearized_rates(p, p_anchor, gains, noise)[k])
