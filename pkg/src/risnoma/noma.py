"""Two-user downlink NOMA: power split, user ordering and delivered rates.

The weak user is given exactly the rate threshold R_th; all remaining power
goes to the strong user, which removes the weak user's signal by SIC.
Every function in this module is pure. The ``*_batch`` variants work on
numpy arrays of gains and are what the Monte Carlo engine uses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FULL = "full"
QUANTIZED = "quantized"


@dataclass(frozen=True)
class Allocation:
    beta: float
    epsilon: float
    feasible: bool
    treated_strong: int = 1
    basis: str = FULL


@dataclass(frozen=True)
class RateReport:
    r_strong: float
    r_weak: float
    ordering_accurate: bool = True

    @property
    def sum(self) -> float:
        return self.r_strong + self.r_weak


ZERO_RATES = RateReport(0.0, 0.0, True)


def epsilon_from_rate(R_th: float) -> float:
    return 2.0**R_th - 1.0


def split_factor(weak_gain, P: float, eps: float):
    """Vectorised strong-user power fraction and feasibility mask.

    NOMA is feasible only when ``P * weak_gain > eps``; elsewhere the
    returned fraction is 0 and the mask is False.
    """
    g = np.asarray(weak_gain, dtype=float)
    feasible = (g > 0) & (P * g > eps)
    safe = np.where(feasible, g, 1.0)
    beta = np.where(feasible, (P * safe - eps) / ((1.0 + eps) * P * safe), 0.0)
    return beta, feasible


def power_split(weak_gain: float, P: float, R_th: float, treated_strong: int = 1, basis: str = FULL) -> Allocation:
    """Power split that leaves the weak user exactly at ``R_th``.

    At the boundary ``P * weak_gain == eps`` the formula gives ``beta = 0``
    and the allocation is reported infeasible: the strong user would get
    nothing.
    """
    eps = epsilon_from_rate(R_th)
    if weak_gain > 0 and P * weak_gain >= eps:
        beta = (P * weak_gain - eps) / ((1.0 + eps) * P * weak_gain)
    else:
        beta = 0.0
    feasible = bool(weak_gain > 0 and P * weak_gain > eps)
    return Allocation(beta=max(beta, 0.0), epsilon=eps, feasible=feasible, treated_strong=treated_strong, basis=basis)


def weak_user_rate(beta, P: float, gain):
    """Rate of the weak user decoding its own signal, strong signal as noise."""
    beta = np.asarray(beta, dtype=float)
    s = P * np.asarray(gain, dtype=float)
    return np.log2(1.0 + (1.0 - beta) * s / (beta * s + 1.0))[()]


def order_users(qH1: float, qH2Q: float) -> int:
    """User the BS treats as strong: User 2 only if its fed-back gain is larger."""
    return 2 if qH2Q > qH1 else 1


def true_strong(H1: float, H2: float) -> int:
    return 1 if H1 >= H2 else 2


def delivered_rates(realization, selection, alloc_q: Allocation, P: float) -> RateReport:
    """Rates delivered by an allocation built from quantized feedback.

    The treated-weak user is credited ``R_th``; the treated-strong user is
    served over the gain it really sees (``H1`` or the RIS gain under the
    quantized phases, ``H2Q``).
    """
    accurate = alloc_q.treated_strong == true_strong(realization.H1, selection.H2)
    if not alloc_q.feasible:
        return RateReport(0.0, 0.0, accurate)
    g_ach = realization.H1 if alloc_q.treated_strong == 1 else selection.H2Q
    r_strong = float(np.log2(1.0 + alloc_q.beta * P * g_ach))
    return RateReport(r_strong, float(np.log2(1.0 + alloc_q.epsilon)), accurate)


def full_csi_rates(H1: float, H2: float, P: float, R_th: float) -> RateReport:
    weak, strong = min(H1, H2), max(H1, H2)
    alloc = power_split(weak, P, R_th)
    if not alloc.feasible:
        return ZERO_RATES
    return RateReport(float(np.log2(1.0 + alloc.beta * P * strong)), R_th, True)


def oma_rates(H1: float, G2: float, P: float) -> RateReport:
    """Equal time sharing at full power; no rate floor."""
    r1 = 0.5 * float(np.log2(1.0 + P * H1))
    r2 = 0.5 * float(np.log2(1.0 + P * G2))
    strong, weak = (r1, r2) if H1 >= G2 else (r2, r1)
    return RateReport(strong, weak, True)


# ---------------------------------------------------------------------------
# batch forms
# ---------------------------------------------------------------------------


def full_csi_sum_batch(H1, H2, P: float, eps: float):
    """Sum rate with perfect gains and perfect RIS phases.

    Returns ``(sum_rate, feasible)``.
    """
    weak = np.minimum(H1, H2)
    strong = np.maximum(H1, H2)
    beta, feasible = split_factor(weak, P, eps)
    rate = np.where(feasible, np.log2(1.0 + beta * P * strong) + np.log2(1.0 + eps), 0.0)
    return rate, feasible


def limited_feedback_batch(H1, H2Q, qH1, qH2Q, P: float, eps: float):
    """Delivered sum rate under quantized feedback.

    Returns ``(sum_rate, feasible, user2_treated_strong, beta_q, weak_basis)``.
    """
    user2_strong = qH2Q > qH1
    basis = np.where(user2_strong, qH1, qH2Q)
    g_ach = np.where(user2_strong, H2Q, H1)
    beta, feasible = split_factor(basis, P, eps)
    rate = np.where(feasible, np.log2(1.0 + beta * P * g_ach) + np.log2(1.0 + eps), 0.0)
    return rate, feasible, user2_strong, beta, basis


def oma_sum_batch(H1, G2, P: float):
    return 0.5 * np.log2(1.0 + P * np.asarray(H1)) + 0.5 * np.log2(1.0 + P * np.asarray(G2))
