"""Strong-user rate loss caused by quantized feedback, and its upper bounds.

Each realization falls into exactly one region of the (H1, H2, H2Q) space:

* ``I``      one of the fed-back gains is quantized to zero; NOMA is off.
* ``II.*``   User 2's quantized gain sits in an interior partition.
* ``III.*``  User 2's quantized gain is clamped to the top level.

The closed-form bounds below bound ``E[dX * 1{region}]``; summed they give
the two lemma totals and, through ``log2(1 + P E[dX])``, the bound on the
average rate loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import PathLoss, SystemParams, log_C1
from .errors import CalibrationError, ContractError, DomainError
from .noma import limited_feedback_batch, split_factor
from .quantize import EtaMoments, QuantizerSpec, quantize_indices
from .special import exp_integral_e1, log_factorial

REGIONS = ("I", "II.A", "II.B", "II.C", "II.D", "III.A", "III.B", "III.C")
NONTRIVIAL_REGIONS = REGIONS[1:]
REGION_CODE = {name: code for code, name in enumerate(REGIONS)}

_H2Q_RTOL = 1e-12


def classify_regions(H1, H2, H2Q, spec: QuantizerSpec) -> np.ndarray:
    """Region codes (indices into :data:`REGIONS`) for arrays of gains."""
    H1 = np.asarray(H1, dtype=float)
    H2 = np.asarray(H2, dtype=float)
    H2Q = np.asarray(H2Q, dtype=float)
    if np.any(H2Q > H2 * (1.0 + _H2Q_RTOL)):
        raise ContractError("H2Q must not exceed H2")
    i1 = quantize_indices(H1, spec)
    i2 = quantize_indices(H2Q, spec)
    user1_not_weaker = H2 <= H1
    code = np.select(
        [
            (i1 == 0) | (i2 == 0),
            (i2 == spec.top_index) & user1_not_weaker,
            (i2 == spec.top_index) & (H1 >= spec.top),
            i2 == spec.top_index,
            user1_not_weaker,
            H2Q <= H1,
            i1 == i2,
        ],
        [0, 5, 6, 7, 1, 2, 3],
        default=4,
    )
    return code.astype(np.int8)


def classify_region(H1: float, H2: float, H2Q: float, spec: QuantizerSpec) -> str:
    return REGIONS[int(classify_regions(H1, H2, H2Q, spec))]


@dataclass(frozen=True)
class LossSample:
    region: str
    delta_X: float
    delta_R: float
    X_true: float
    X_q: float
    eta: float


@dataclass
class LossBatch:
    region: np.ndarray
    delta_X: np.ndarray
    delta_R: np.ndarray
    X_true: np.ndarray
    X_q: np.ndarray
    active: np.ndarray
    accurate: np.ndarray
    feasible_q: np.ndarray
    qH2Q: np.ndarray


def snr_loss_batch(H1, H2, H2Q, spec: QuantizerSpec, P: float, eps: float) -> LossBatch:
    """Normalised SNR loss and rate loss of the true strong user.

    Samples in region I, or where either the full-CSI or the quantized
    allocation is infeasible, contribute zero loss.
    """
    H1 = np.asarray(H1, dtype=float)
    H2 = np.asarray(H2, dtype=float)
    H2Q = np.asarray(H2Q, dtype=float)
    region = classify_regions(H1, H2, H2Q, spec)
    user1_strong = H1 >= H2
    beta_star, feasible_full = split_factor(np.minimum(H1, H2), P, eps)
    X_true = beta_star * np.where(user1_strong, H1, H2)

    qH1 = quantize_indices(H1, spec) * spec.delta
    qH2Q = quantize_indices(H2Q, spec) * spec.delta
    _, feasible_q, user2_treated, beta_q, _ = limited_feedback_batch(H1, H2Q, qH1, qH2Q, P, eps)
    accurate = user2_treated != user1_strong
    # misordered: the true strong user is served at the weak-user SINR eps
    X_q = np.where(accurate, beta_q * np.where(user1_strong, H1, H2Q), eps / P)

    active = (region != 0) & feasible_full & feasible_q
    dX = np.where(active, X_true - X_q, 0.0)
    dR = np.where(active, np.log2(1.0 + P * X_true) - np.log2(1.0 + P * X_q), 0.0)
    return LossBatch(
        region=region,
        delta_X=dX,
        delta_R=dR,
        X_true=X_true,
        X_q=X_q,
        active=active,
        accurate=accurate,
        feasible_q=feasible_q,
        qH2Q=qH2Q,
    )


def snr_loss_sample(realization, selection, spec: QuantizerSpec, P: float, R_th: float) -> LossSample:
    b = snr_loss_batch(
        [realization.H1], [selection.H2], [selection.H2Q], spec, P, 2.0**R_th - 1.0
    )
    return LossSample(
        region=REGIONS[int(b.region[0])],
        delta_X=float(b.delta_X[0]),
        delta_R=float(b.delta_R[0]),
        X_true=float(b.X_true[0]),
        X_q=float(b.X_q[0]),
        eta=selection.eta,
    )


def pointwise_IIA_bound(H1, H2, eta, delta):
    """Per-sample certificate ``(1 - eta) H1 + delta H1 / H2`` for region II.A."""
    return (1.0 - np.asarray(eta)) * H1 + delta * np.asarray(H1) / np.asarray(H2)


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundConstants:
    N: int
    L1: float
    C2: float
    C1: float
    C5p: float
    C6p: float
    C7p: float
    C9p: float
    C10p: float
    C5: float
    C6: float
    C7: float
    C8: float
    C9: float
    C10: float
    C11: float
    C12: float
    eta_moments: EtaMoments | None = field(default=None, compare=False)

    @property
    def C3(self) -> float:
        return self.C6 + self.C7 + self.C8

    @property
    def C4(self) -> float:
        return self.C9 + self.C10

    def scaled(self, **factors: float) -> "BoundConstants":
        """Copy with selected constants multiplied (negative-control hook)."""
        return replace(self, **{k: getattr(self, k) * v for k, v in factors.items()})


def primed_constants(N: int, L1: float, C2: float) -> dict[str, float]:
    """The eta-free factors, plus C1, C11 and C12, evaluated in log space."""
    if N < 2 or N % 2:
        raise DomainError(f"N must be even and >= 2, got {N}")
    ln2 = math.log(2.0)
    lc1 = log_C1(N)
    lc2 = math.log(C2)
    ll1 = math.log(L1)

    def term(c2_pow: int, l1_pow: int, k2: int) -> float:
        # C1 * C2^c2_pow * L1^l1_pow * (k2/2)! / 2^(k2/2), with k2 = 3N + offset
        half = k2 // 2
        return math.exp(lc1 + c2_pow * lc2 + l1_pow * ll1 - half * ln2 + log_factorial(half))

    c5p = term(1, 0, 3 * N + 2)
    return dict(
        C1=math.exp(lc1),
        C5p=c5p,
        C6p=c5p + term(-1, 1, 3 * N - 2),
        C7p=term(3, -1, 3 * N + 6),
        C9p=term(-1, 0, 3 * N - 2) + term(-3, 1, 3 * N - 6),
        C10p=term(1, -1, 3 * N + 2),
        C11=term(2, 0, 3 * N + 4),
        # (3N/2)! paired with 2^((3N+2)/2)
        C12=math.exp(lc1 + lc2 + ll1 - (3 * N + 2) // 2 * ln2 + log_factorial(3 * N // 2)),
    )


def bound_constants(
    params: SystemParams,
    path_loss: PathLoss | None,
    eta_moments: EtaMoments,
    moment_source: str = "auto",
) -> BoundConstants:
    """All constants feeding the region, lemma and theorem bounds.

    ``moment_source`` picks the eta moments: ``auto`` (beta-analytic when the
    fit allows it, sample means otherwise), ``analytic`` or ``empirical``.
    """
    params.require_even_N()
    pl = path_loss or params.path_loss()
    if eta_moments.N and eta_moments.N != params.N:
        raise CalibrationError(f"eta moments calibrated for N={eta_moments.N}, scenario has N={params.N}")
    if eta_moments.B_prime != params.B_prime:
        raise CalibrationError(
            f"eta moments calibrated for B_prime={eta_moments.B_prime}, scenario has B_prime={params.B_prime}"
        )
    inv_sqrt, om_over_sqrt, om_times_sqrt = eta_moments.bound_moments(moment_source)
    p = primed_constants(params.N, pl.L1, pl.C2)
    return BoundConstants(
        N=params.N,
        L1=pl.L1,
        C2=pl.C2,
        C5=p["C5p"] * inv_sqrt,
        C6=p["C6p"] * om_over_sqrt,
        C7=p["C7p"] * om_over_sqrt,
        C8=p["C7p"] * om_times_sqrt,
        C9=p["C9p"] * inv_sqrt,
        C10=p["C10p"] * inv_sqrt,
        eta_moments=eta_moments,
        **p,
    )


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


def _tail_factor(A: float, power: float) -> float:
    # exp(-A) * (1 + A^power) without overflowing A^power
    return math.exp(-A) + math.exp(power * math.log(A) - A)


def _tail_terms(c: BoundConstants, spec: QuantizerSpec) -> tuple[float, float, float]:
    T = spec.top
    A = 2.0 * math.sqrt(T) / c.C2
    return T, _tail_factor(A, (3 * c.N + 2) / 2), _tail_factor(A, (3 * c.N - 2) / 2)


def region_bound(region: str, c: BoundConstants, spec: QuantizerSpec) -> float:
    """Closed-form bound on ``E[dX * 1{region}]``."""
    if region not in REGION_CODE:
        raise DomainError(f"unknown region {region!r}")
    if region == "I":
        return 0.0
    delta = spec.delta
    root_T = math.sqrt(spec.top)
    if region == "II.A":
        return c.C6 * root_T + c.C9 * delta * root_T
    if region == "II.B":
        return c.C7 * root_T
    if region == "II.C":
        return c.C10 * delta * root_T + c.C5 * math.sqrt(2.0 * delta)
    if region == "II.D":
        return c.C8 * root_T + c.C5 * delta * root_T * exp_integral_e1(delta / c.L1)
    T, g_hi, g_lo = _tail_terms(c, spec)
    if region == "III.A":
        return c.C11 * g_hi + c.C12 * g_lo
    if region == "III.B":
        return c.C11 * g_hi
    return 2.0 * c.C11 / c.L1 * T * g_hi


def lemma1_bound(c: BoundConstants, spec: QuantizerSpec) -> float:
    """Bound on the average normalised SNR loss over Super Region II."""
    delta = spec.delta
    return math.sqrt(spec.top) * (
        c.C3 + delta * (c.C4 + c.C5 * exp_integral_e1(delta / c.L1))
    ) + c.C5 * math.sqrt(2.0 * delta)


def lemma2_bound(c: BoundConstants, spec: QuantizerSpec) -> float:
    """Bound on the average normalised SNR loss over Super Region III."""
    T, g_hi, g_lo = _tail_terms(c, spec)
    return 2.0 * c.C11 * (1.0 + T / c.L1) * g_hi + c.C12 * g_lo


def theorem1_bound(c: BoundConstants, spec: QuantizerSpec, P: float) -> tuple[float, float]:
    """``(E[dX] bound, E[dR] bound)`` for linear transmit power ``P``."""
    edx = lemma1_bound(c, spec) + lemma2_bound(c, spec)
    return edx, math.log2(1.0 + P * edx)
