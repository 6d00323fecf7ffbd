"""Willie's radiometer under bounded log-uniform noise uncertainty.

Willie compares the received power against a threshold ``theta``. His noise
power is only known to lie in ``[nominal/mu, nominal*mu]`` with a log-uniform
law, which is what makes a positive-power transmission hard to detect.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseUncertainty:
    nominal: float
    mu: float

    def __post_init__(self):
        if self.nominal <= 0:
            raise ValueError("nominal noise power must be positive")
        if self.mu <= 1:
            raise ValueError("noise uncertainty factor must exceed 1")

    @property
    def low(self) -> float:
        return self.nominal / self.mu

    @property
    def high(self) -> float:
        return self.nominal * self.mu

    @property
    def log_width(self) -> float:
        """``2 ln(mu)``, the normaliser shared by every probability below."""
        return 2.0 * np.log(self.mu)

    @classmethod
    def from_config(cls, cfg) -> "NoiseUncertainty":
        return cls(cfg.willie_noise_nominal, cfg.noise_uncertainty)

    def sample(self, rng, size=None):
        """Draw true noise powers; uniform in dB over the support."""
        return self.nominal * self.mu ** rng.uniform(-1.0, 1.0, size)


@dataclass(frozen=True)
class DetectionResult:
    optimal_threshold: float
    min_total_error: float


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def noise_pdf(x, nu: NoiseUncertainty):
    x = np.asarray(x, dtype=float)
    inside = (x >= nu.low) & (x <= nu.high)
    with np.errstate(divide="ignore"):
        dens = np.where(inside, 1.0 / (nu.log_width * np.where(inside, x, 1.0)), 0.0)
    return _out(dens)


def false_alarm(theta, nu: NoiseUncertainty):
    """P{noise power >= theta} under H0."""
    theta = np.asarray(theta, dtype=float)
    band = np.log(nu.high / np.clip(theta, nu.low, nu.high)) / nu.log_width
    p = np.where(theta < nu.low, 1.0, np.where(theta > nu.high, 0.0, band))
    return _out(p)


def miss_detection(theta, p_a: float, h_aw: float, nu: NoiseUncertainty):
    """P{p_a*h_aw + noise power <= theta} under H1."""
    theta = np.asarray(theta, dtype=float)
    rx = p_a * h_aw
    lo, hi = rx + nu.low, rx + nu.high
    inner = np.clip(theta, lo, hi) - rx
    # clip can land a hair below nu.low after the subtraction
    band = np.log(np.maximum(nu.mu * inner / nu.nominal, 1.0)) / nu.log_width
    p = np.where(theta < lo, 0.0, np.where(theta > hi, 1.0, np.minimum(band, 1.0)))
    return _out(p)


def total_error(theta, p_a: float, h_aw: float, nu: NoiseUncertainty):
    return _out(
        np.asarray(false_alarm(theta, nu)) + np.asarray(miss_detection(theta, p_a, h_aw, nu))
    )


def min_total_error(p_a, h_aw, nu: NoiseUncertainty):
    """Willie's minimum total error rate, vectorised over ``p_a`` / ``h_aw``.

    Closed form ``1 - log1p(mu*p_a*h_aw/nominal) / (2 ln mu)``, clamped at 0
    once the false-alarm and miss-detection bands no longer overlap.
    """
    x = np.asarray(p_a, dtype=float) * np.asarray(h_aw, dtype=float) / nu.nominal
    xi = 1.0 - np.log1p(nu.mu * x) / nu.log_width
    return _out(np.clip(xi, 0.0, 1.0))


def optimal_detection(p_a: float, h_aw: float, nu: NoiseUncertainty) -> DetectionResult:
    if p_a < 0 or h_aw <= 0:
        raise ValueError("need p_a >= 0 and h_aw > 0")
    theta = p_a * h_aw + nu.low
    return DetectionResult(theta, float(min_total_error(p_a, h_aw, nu)))


def covert_power_cap(h_aw: float, nu: NoiseUncertainty, eps_w: float) -> float:
    """Largest total power keeping Willie's minimum error at or above ``1 - eps_w``."""
    if h_aw <= 0:
        raise ValueError("h_aw must be positive")
    if not 0.0 <= eps_w <= 1.0:
        raise ValueError("eps_w must lie in [0, 1]")
    # mu**(2 eps - 1) - 1/mu, written to stay exact at eps = 0
    cap = nu.nominal * np.expm1(eps_w * nu.log_width) / nu.mu / h_aw
    return max(float(cap), 0.0)
