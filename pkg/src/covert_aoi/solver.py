"""Alternating AoI / power optimisation for covert NOMA downlink.

The joint problem is

    minimise    mean(d)
    subject to  d_k <= tau - delta                      (AoC deadline)
                sum(p) <= P_max                         (power budget)
                xi*(sum(p)) >= 1 - eps_w                (covertness)
                d_k * R_k(p) >= S / B                   (delivery)

For fixed powers the AoI step is an LP whose optimum is ``d_k = S/(B R_k)``.
The power step replaces every ``R_k`` by its concave SCA bound around the
current powers, which makes the surrogate problem convex. Two power steps are
provided:

* :func:`power_subproblem` maximises the minimum delivery slack for a fixed
  ``d``. It is used to find an AoC-feasible starting point.
* :func:`aoi_power_step` minimises the surrogate of the average AoI itself,
  keeping ``d`` free. Holding ``d`` fixed only admits moves that raise every
  user's rate at once, and a full-power NOMA split already admits none, so
  the descent phase needs this step.

Both surrogate problems are solved in rate space. For given per-user target
rates the minimum-power allocation is obtained by a backward recursion from
the strongest user (see :func:`_min_power_tails`), so power feasibility of a
rate vector is a single scalar test.
"""
from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .channel import ScenarioConfig
from .detection import NoiseUncertainty, covert_power_cap, min_total_error
from .noma import (
    LN2,
    PowerAllocation,
    interference_sums,
    linearized_rates,
    rates,
    sic_order,
)

log = logging.getLogger(__name__)

OUTER_TOL = 1e-6
SCA_TOL = 1e-8
MAX_OUTER = 50
MAX_SCA = 200
AUDIT_TOL = 1e-6
# keeps xi*(cap) >= 1 - eps_w after floating-point round trips
CAP_MARGIN = 1e-12


class SolverError(RuntimeError):
    pass


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"


@dataclass(frozen=True)
class AoiSolution:
    """Per-user AoI ``d`` (seconds). When infeasible ``d`` holds the AoI the
    powers would require, ``inf`` for users with zero rate."""

    d: np.ndarray
    feasible: bool

    @property
    def average(self) -> float:
        return float(np.mean(self.d))


@dataclass(frozen=True)
class PowerStep:
    power: PowerAllocation
    slack: float
    feasible: bool


@dataclass
class SolveResult:
    power: PowerAllocation
    aoi: np.ndarray
    avg_aoi: float
    outer_iterations: int
    sca_iterations_total: int
    status: Status
    covert_margin: float
    order: np.ndarray
    history: list = field(default_factory=list)

    @property
    def user_powers(self) -> np.ndarray:
        """Powers indexed by the caller's original user order."""
        out = np.empty_like(self.power.powers)
        out[self.order] = self.power.powers
        return out

    @property
    def user_aoi(self) -> np.ndarray:
        out = np.empty_like(self.aoi)
        out[self.order] = self.aoi
        return out


def power_limit(h_aw: float, cfg: ScenarioConfig) -> float:
    """Total power Alice may spend: the budget or the covert cap, whichever is lower."""
    cap = covert_power_cap(h_aw, NoiseUncertainty.from_config(cfg), cfg.covert_budget)
    return min(cfg.power_budget, cap * (1.0 - CAP_MARGIN))


def aoi_from_rates(r, cfg: ScenarioConfig) -> AoiSolution:
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        d = np.where(r > 0, cfg.bits_per_hz / np.where(r > 0, r, 1.0), np.inf)
    feasible = bool(np.all(d <= cfg.usable_time * (1 + 1e-12)))
    return AoiSolution(d, feasible)


def aoi_subproblem(p, gains, cfg: ScenarioConfig) -> AoiSolution:
    """Closed-form optimum of the AoI LP for fixed powers.

    Each ``d_k`` appears in exactly one delivery constraint and the objective
    is increasing in every ``d_k``, so the LP is solved by making every
    delivery constraint tight.
    """
    return aoi_from_rates(rates(p, gains, cfg.user_noise), cfg)


def _min_power_tails(targets, gains, noise, anchor_interference, grad=False):
    """Smallest tail sums ``S_k = sum(p[k:])`` whose SCA rates meet ``targets``.

    Works backwards from the strongest user. The linearised rate of user ``k``
    grows with ``S_k`` and shrinks with ``S_{k+1}``, so every required ``S_k``
    is increasing in ``S_{k+1}``; taking the smallest value at each stage is
    therefore optimal for the total ``S_0``. With ``grad=True`` also returns
    ``dS_0/dtargets`` (valid where no ``S_k = S_{k+1}`` floor is active).
    """
    K = len(targets)
    tails = np.empty(K)
    growth = np.empty(K)
    scale = np.empty(K)
    nxt = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K - 1, -1, -1):
            h, ia = gains[k], anchor_interference[k]
            denom = h * ia + noise
            arg = targets[k] * LN2 + h * (nxt - ia) / denom
            need = ia + denom * np.expm1(arg) / h
            tails[k] = max(need, nxt)
            growth[k] = np.exp(arg)
            scale[k] = denom / h * LN2
            nxt = tails[k]
    if not grad:
        return tails
    carry = np.concatenate(([1.0], np.cumprod(growth[:-1])))
    return tails, carry * growth * scale


def _tails_to_powers(tails: np.ndarray) -> np.ndarray:
    p = tails.copy()
    p[:-1] -= tails[1:]
    return np.maximum(p, 0.0)


def _fill(tails: np.ndarray, limit: float) -> np.ndarray:
    """Powers from tail sums, with unused budget given to the weakest user.

    The weakest user causes no interference to anyone, so the spare power only
    raises its own rate.
    """
    p = _tails_to_powers(tails)
    p[0] = max(p[0] + (limit - p.sum()), 0.0)
    return p


def _feasible_start(anchor: np.ndarray, limit: float) -> np.ndarray:
    total = anchor.sum()
    if total <= 0:
        return np.full(anchor.size, limit / anchor.size)
    return anchor * min(1.0, limit / total)


def power_subproblem(d, gains, h_aw, cfg: ScenarioConfig, p_anchor) -> PowerStep:
    """Max-min delivery slack over the SCA-linearised constraints.

    Finds powers maximising ``s`` subject to ``d_k * Rlin_k(p) >= S/B + s``,
    ``sum(p) <= min(P_max, covert cap)``. Solved by bisection on ``s``; each
    candidate is checked exactly with :func:`_min_power_tails`. ``gains`` must
    already be in SIC order.
    """
    d = np.asarray(d, dtype=float)
    gains = np.asarray(gains, dtype=float)
    anchor = p_anchor.powers if isinstance(p_anchor, PowerAllocation) else np.asarray(p_anchor, float)
    noise, need = cfg.user_noise, cfg.bits_per_hz
    limit = power_limit(h_aw, cfg)
    ia = interference_sums(anchor)

    def slack_of(p):
        return float(np.min(d * linearized_rates(p, anchor, gains, noise)) - need)

    if limit <= 0:
        p = np.zeros_like(anchor)
        return PowerStep(PowerAllocation(p), slack_of(p), False)

    def fits(s):
        return _min_power_tails((need + s) / d, gains, noise, ia)[0] <= limit * (1 + 1e-12)

    lo = slack_of(_feasible_start(anchor, limit))
    hi = float(np.min(d * np.log1p(gains * limit / noise) / LN2) - need)
    if not np.isfinite(lo):
        raise SolverError(f"non-finite slack at the feasible start (d={d}, gains={gains})")
    if fits(hi):
        lo = hi
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
            if fits(mid):
                lo = mid
            else:
                hi = mid
    p = _fill(_min_power_tails((need + lo) / d, gains, noise, ia), limit)
    s = slack_of(p)
    if not np.isfinite(s):
        raise SolverError(f"power subproblem produced non-finite slack: p={p}")
    return PowerStep(PowerAllocation(p), s, s >= 0)


def maximize_delivery_slack(d, gains, h_aw, cfg, p0, tol=SCA_TOL, max_iter=MAX_SCA):
    """SCA loop around :func:`power_subproblem`, re-anchoring at every iterate.

    Returns the final step and the slack after each convex solve. The slack
    sequence is non-decreasing: each new anchor is feasible for the next
    surrogate with its exact (tight) rates.
    """
    anchor = p0
    history = []
    step = None
    for _ in range(max_iter):
        step = power_subproblem(d, gains, h_aw, cfg, anchor)
        history.append(step.slack)
        if len(history) > 1 and history[-1] - history[-2] < tol:
            break
        anchor = step.power
    return step, history


def aoi_power_step(gains, h_aw, cfg: ScenarioConfig, p_anchor) -> PowerAllocation:
    """One SCA step on the average AoI.

    Minimises ``sum_k S/(B Rlin_k(p))`` subject to the power limit and the AoC
    deadline ``Rlin_k >= S/(B (tau - delta))``, with ``Rlin`` linearised at
    ``p_anchor``. The anchor must itself be feasible. Because ``Rlin <= R``,
    the exact AoI of the returned powers is no worse than the anchor's.
    """
    gains = np.asarray(gains, dtype=float)
    anchor = p_anchor.powers if isinstance(p_anchor, PowerAllocation) else np.asarray(p_anchor, float)
    noise = cfg.user_noise
    limit = power_limit(h_aw, cfg)
    ia = interference_sums(anchor)
    floor = cfg.bits_per_hz / cfg.usable_time
    t0 = np.maximum(rates(anchor, gains, noise), floor)

    def total_power(t):
        return _min_power_tails(t, gains, noise, ia)[0]

    def cons(t):
        return 1.0 - total_power(t) / limit

    def cons_jac(t):
        _, g = _min_power_tails(t, gains, noise, ia, grad=True)
        return -g / limit

    with warnings.catch_warnings():
        # SLSQP probes slightly outside the bounds and clips; harmless here
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(
            lambda t: float(np.sum(1.0 / t)),
            t0,
            jac=lambda t: -1.0 / t**2,
            method="SLSQP",
            bounds=[(floor, None)] * t0.size,
            constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
            options={"ftol": 1e-14, "maxiter": 200},
        )
    t = np.maximum(res.x, floor)
    if not np.all(np.isfinite(t)):
        raise SolverError(f"SCA step diverged: {res.message}")
    if total_power(t) > limit:
        # walk back toward the feasible anchor; the power map is convex in t
        lo, hi = 0.0, 1.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if total_power(t0 + mid * (t - t0)) <= limit:
                lo = mid
            else:
                hi = mid
        t = t0 + lo * (t - t0)
    if np.sum(1.0 / t) > np.sum(1.0 / t0):
        t = t0
    return PowerAllocation(_fill(_min_power_tails(t, gains, noise, ia), limit))


def _margin(p_total, h_aw, cfg):
    nu = NoiseUncertainty.from_config(cfg)
    return float(min_total_error(p_total, h_aw, nu)) - (1.0 - cfg.covert_budget)


def alternating_solve(gains, h_aw: float, cfg: ScenarioConfig) -> SolveResult:
    """Minimise the average AoI for one channel realisation.

    ``gains`` are given in any user order; they are sorted once into SIC
    order and the returned :class:`SolveResult` keeps that order (see
    ``SolveResult.order`` / ``user_powers`` to map back).
    """
    raw = np.asarray(gains, dtype=float)
    order = sic_order(raw)
    g = raw[order]
    K = g.size
    limit = power_limit(h_aw, cfg)
    p = PowerAllocation.equal_split(limit, K)
    sca_iters = 0

    def result(power, sol, status, outer, history):
        return SolveResult(
            power=power,
            aoi=sol.d,
            avg_aoi=sol.average,
            outer_iterations=outer,
            sca_iterations_total=sca_iters,
            status=status,
            covert_margin=_margin(power.total, h_aw, cfg),
            order=order,
            history=history,
        )

    sol = aoi_subproblem(p, g, cfg)
    if limit <= 0:
        return result(p, sol, Status.INFEASIBLE, 0, [])
    if not sol.feasible:
        deadline = np.full(K, cfg.usable_time)
        step, slacks = maximize_delivery_slack(deadline, g, h_aw, cfg, p)
        sca_iters += len(slacks)
        p = step.power
        sol = aoi_subproblem(p, g, cfg)
        if not sol.feasible:
            log.debug("AoC deadline unreachable, best slack %.3g", step.slack)
            return result(p, sol, Status.INFEASIBLE, 0, [])

    history = [sol.average]
    status = Status.MAX_ITERATIONS
    outer = 0
    for outer in range(1, MAX_OUTER + 1):
        cand = aoi_power_step(g, h_aw, cfg, p)
        sca_iters += 1
        cand_sol = aoi_subproblem(cand, g, cfg)
        if not cand_sol.feasible or cand_sol.average > history[-1]:
            # numerical noise at the fixed point; keep the incumbent
            status = Status.CONVERGED
            break
        change = (history[-1] - cand_sol.average) / history[-1]
        p, sol = cand, cand_sol
        history.append(sol.average)
        if change < OUTER_TOL:
            status = Status.CONVERGED
            break
    return result(p, sol, status, outer, history)


@dataclass(frozen=True)
class FeasibilityReport:
    """Relative violation of each original constraint (<= 0 means satisfied)."""

    violations: dict
    tol: float = AUDIT_TOL

    @property
    def worst(self) -> float:
        return max(self.violations.values())

    @property
    def passed(self) -> bool:
        return self.worst <= self.tol


def verify_kkt_feasibility(result: SolveResult, gains, h_aw: float, cfg: ScenarioConfig) -> FeasibilityReport:
    """Audit a solution against the exact (non-linearised) constraints.

    ``gains`` are in the caller's original order, as passed to
    :func:`alternating_solve`.
    """
    g = np.asarray(gains, dtype=float)[result.order]
    p = result.power.powers
    d = np.asarray(result.aoi, dtype=float)
    need = cfg.bits_per_hz
    threshold = 1.0 - cfg.covert_budget
    xi = float(min_total_error(p.sum(), h_aw, NoiseUncertainty.from_config(cfg)))
    r = rates(p, g, cfg.user_noise)
    v = {
        "nonnegative_power": float(np.max(-p) / cfg.power_budget),
        "power_budget": (p.sum() - cfg.power_budget) / cfg.power_budget,
        "covertness": (threshold - xi) / threshold,
        "aoc_deadline": float(np.max(d - cfg.usable_time) / cfg.usable_time),
        "delivery": float(np.max(need - d * r) / need),
        "average_aoi": abs(result.avg_aoi - float(np.mean(d))) / max(abs(result.avg_aoi), 1e-300),
    }
    return FeasibilityReport({k: float(x) for k, x in v.items()})
