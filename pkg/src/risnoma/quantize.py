"""Feedback quantizers and statistics of the RVQ gain ratio eta.

Channel gains are quantized to the *left* edge of a uniform partition so the
fed-back value never exceeds the true gain. The cascaded RIS channel is
quantized with a random vector quantizer (RVQ) whose codewords are drawn
uniformly on the complex unit sphere.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, DegenerateChannelError, DomainError
from .special import log_beta

# relative slack under which two RVQ scores count as a tie
TIE_RTOL = 1e-12
# complex entries per RVQ chunk; bounds memory of the batched selector
_RVQ_CHUNK_ENTRIES = 1 << 19


def delta_from_bits(zeta1: float, zeta2: float, B: int) -> float:
    """Partition width ``zeta1 * 2^(-zeta2 B)``."""
    if not (0 < zeta1 < 1 and 0 < zeta2 < 1):
        raise DomainError("zeta1 and zeta2 must lie in (0, 1)")
    if B < 1:
        raise DomainError("B must be >= 1")
    return zeta1 * 2.0 ** (-zeta2 * B)


@dataclass(frozen=True)
class QuantizerSpec:
    delta: float
    B: int

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError("delta must be > 0")
        if int(self.B) != self.B or self.B < 1:
            raise DomainError("B must be an integer >= 1")

    @property
    def levels(self) -> int:
        return 2 ** int(self.B)

    @property
    def top_index(self) -> int:
        return self.levels - 1

    @property
    def top(self) -> float:
        """Upper marginal level ``(2^B - 1) delta``."""
        return self.top_index * self.delta

    @classmethod
    def from_bits(cls, zeta1: float, zeta2: float, B: int) -> "QuantizerSpec":
        return cls(delta=delta_from_bits(zeta1, zeta2, B), B=int(B))

    @classmethod
    def from_params(cls, params) -> "QuantizerSpec":
        return cls.from_bits(params.zeta1, params.zeta2, params.B)


def quantize_indices(x, spec: QuantizerSpec) -> np.ndarray:
    """Partition indices of non-negative gains (vectorised)."""
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise DomainError("gains must be finite and >= 0")
    idx = np.minimum(np.floor(x / spec.delta), spec.top_index)
    # x/delta can round across an integer; nudge so idx*delta <= x < (idx+1)*delta
    idx = np.where(idx * spec.delta > x, idx - 1, idx)
    idx = np.where((idx < spec.top_index) & ((idx + 1) * spec.delta <= x), idx + 1, idx)
    return idx.astype(np.int64)


def quantize_gains(x, spec: QuantizerSpec) -> np.ndarray:
    return quantize_indices(x, spec) * spec.delta


def uniform_quantize(x: float, spec: QuantizerSpec) -> tuple[float, int]:
    """Left-boundary uniform quantizer, clamped to the top level.

    Returns the reconstruction value and its partition index.
    """
    idx = int(quantize_indices(x, spec))
    return idx * spec.delta, idx


@dataclass(frozen=True)
class Codebook:
    words: np.ndarray  # (M, N) complex, unit-norm rows

    @property
    def M(self) -> int:
        return self.words.shape[0]

    @property
    def N(self) -> int:
        return self.words.shape[1]


def _draw_gaussian_words(rng: np.random.Generator, shape: tuple) -> np.ndarray:
    raw = np.ascontiguousarray(rng.standard_normal(shape + (2,)))
    return raw.view(np.complex128)[..., 0]


def generate_codebook(N: int, B_prime: int, rng: np.random.Generator) -> Codebook:
    """RVQ codebook of ``2^B_prime`` isotropic unit vectors in C^N."""
    if N < 1 or B_prime < 0:
        raise DomainError("need N >= 1 and B_prime >= 0")
    words = _draw_gaussian_words(rng, (2**B_prime, N))
    words = words / np.linalg.norm(words, axis=1, keepdims=True)
    return Codebook(words=words)


@dataclass(frozen=True)
class RisSelection:
    index: int
    phi_Q: np.ndarray
    theta_Q: np.ndarray
    H2Q: float
    H2: float

    @property
    def eta(self) -> float:
        return self.H2Q / self.H2


def _pick(scores: np.ndarray) -> np.ndarray:
    # lowest index among (near-)maximal scores
    best = scores.max(axis=-1, keepdims=True)
    return np.argmax(scores >= best * (1.0 - TIE_RTOL), axis=-1)


def select_codeword(v: np.ndarray, codebook: Codebook) -> RisSelection:
    """Choose the codeword maximising ``|w^H v|^2`` and derive RIS phases.

    The applied phases are ``phi_Q = -angle(w)`` so that ``theta_Q^T v``
    realises the alignment the selection metric rewarded.
    """
    v = np.asarray(v, dtype=complex)
    if not np.any(v != 0):
        raise DegenerateChannelError("cascaded channel is identically zero")
    if codebook.M == 0:
        raise DomainError("empty codebook")
    scores = np.abs(codebook.words.conj() @ v) ** 2
    index = int(_pick(scores))
    phi = -np.angle(codebook.words[index])
    theta = np.exp(1j * phi)
    H2 = float(np.sum(np.abs(v))) ** 2
    H2Q = min(float(abs(np.sum(theta * v)) ** 2), H2)
    return RisSelection(index=index, phi_Q=phi, theta_Q=theta, H2Q=H2Q, H2=H2)


def rvq_gains(cascade: np.ndarray, B_prime: int, rng: np.random.Generator) -> np.ndarray:
    """Achieved RIS gains ``H2Q`` for a batch, one fresh codebook per row.

    Draws from ``rng`` in the same order as calling :func:`generate_codebook`
    once per row, so the result matches the scalar path trial by trial.
    """
    cascade = np.asarray(cascade, dtype=complex)
    n, N = cascade.shape
    M = 2**B_prime
    H2 = np.sum(np.abs(cascade), axis=1) ** 2
    out = np.empty(n)
    step = max(1, _RVQ_CHUNK_ENTRIES // (M * N))
    for start in range(0, n, step):
        stop = min(n, start + step)
        v = cascade[start:stop]
        W = _draw_gaussian_words(rng, (stop - start, M, N))
        proj = np.matmul(W.conj(), v[:, :, None])[..., 0]
        norms = np.einsum("cmn,cmn->cm", W.real, W.real) + np.einsum("cmn,cmn->cm", W.imag, W.imag)
        scores = (proj.real**2 + proj.imag**2) / norms
        chosen = W[np.arange(stop - start), _pick(scores)]
        aligned = np.sum(np.exp(-1j * np.angle(chosen)) * v, axis=1)
        out[start:stop] = aligned.real**2 + aligned.imag**2
    return np.minimum(out, H2)


# ---------------------------------------------------------------------------
# eta statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EtaMoments:
    """Moments of eta plus the beta fit used by the bound constants.

    The ``m_*`` fields are sample means; the ``beta_*`` fields are the same
    moments under the fitted beta law and are ``None`` when that law makes
    them diverge (``r1 <= 1/2``) or when eta has no spread at all.
    """

    N: int
    B_prime: int
    trials: int
    mean_eta: float
    var_eta: float
    r1: float | None
    r2: float | None
    m_inv_sqrt: float
    m_one_minus_over_sqrt: float
    m_one_minus_times_sqrt: float
    beta_inv_sqrt: float | None = None
    beta_one_minus_over_sqrt: float | None = None
    beta_one_minus_times_sqrt: float | None = None

    @property
    def degenerate(self) -> bool:
        return self.r1 is None

    @property
    def analytic_available(self) -> bool:
        return self.beta_inv_sqrt is not None

    def bound_moments(self, source: str = "auto") -> tuple[float, float, float]:
        """``(E[1/sqrt(eta)], E[(1-eta)/sqrt(eta)], E[(1-eta) sqrt(eta)])``.

        ``auto`` prefers the beta-analytic values and falls back to the
        sample means when the fit cannot provide them.
        """
        empirical = (self.m_inv_sqrt, self.m_one_minus_over_sqrt, self.m_one_minus_times_sqrt)
        if source == "empirical":
            return empirical
        if self.analytic_available:
            return (
                self.beta_inv_sqrt,
                self.beta_one_minus_over_sqrt,
                self.beta_one_minus_times_sqrt,
            )
        if source == "analytic":
            raise CalibrationError(
                f"beta-analytic moments diverge for N={self.N}, B_prime={self.B_prime} (r1={self.r1})"
            )
        return empirical


def beta_shapes(mean: float, var: float) -> tuple[float, float]:
    """Beta shape parameters whose mean and variance equal the inputs."""
    if not 0 < mean < 1 or not var > 0:
        raise DomainError("need 0 < mean < 1 and var > 0")
    # a beta law has var = m(1-m)/(r1+r2+1)
    k = mean * (1.0 - mean) / var - 1.0
    if not k > 0:
        raise DomainError("variance too large for a beta law with this mean")
    return k * mean, k * (1.0 - mean)


def beta_aux_moments(r1: float, r2: float) -> tuple[float | None, float | None, float]:
    """The three auxiliary moments of a Beta(r1, r2) variable.

    The first two need ``r1 > 1/2``; ``None`` is returned otherwise.
    """
    lb = log_beta(r1, r2)
    third = math.exp(log_beta(r1 + 0.5, r2 + 1.0) - lb)
    if r1 <= 0.5:
        return None, None, third
    return (
        math.exp(log_beta(r1 - 0.5, r2) - lb),
        math.exp(log_beta(r1 - 0.5, r2 + 1.0) - lb),
        third,
    )


class EtaAccumulator:
    """Streaming, mergeable accumulator for eta statistics.

    Means and the centred second moment are combined with the pairwise
    (Chan) update, so merging per-block accumulators in a fixed order is
    reproducible to the last bit.
    """

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.s_inv_sqrt = 0.0
        self.s_om_over_sqrt = 0.0
        self.s_om_times_sqrt = 0.0
        self.minimum = math.inf
        self.maximum = -math.inf

    def add(self, eta) -> "EtaAccumulator":
        eta = np.asarray(eta, dtype=float).ravel()
        if eta.size == 0:
            return self
        part = EtaAccumulator()
        part.n = eta.size
        part.mean = float(eta.mean())
        part.m2 = float(np.sum((eta - part.mean) ** 2))
        root = np.sqrt(eta)
        with np.errstate(divide="ignore"):
            part.s_inv_sqrt = float(np.sum(1.0 / root))
            part.s_om_over_sqrt = float(np.sum((1.0 - eta) / root))
        part.s_om_times_sqrt = float(np.sum((1.0 - eta) * root))
        part.minimum = float(eta.min())
        part.maximum = float(eta.max())
        return self.merge(part)

    def merge(self, other: "EtaAccumulator") -> "EtaAccumulator":
        if other.n == 0:
            return self
        if self.n == 0:
            self.__dict__.update(other.__dict__)
            return self
        n = self.n + other.n
        d = other.mean - self.mean
        self.mean += d * other.n / n
        self.m2 += other.m2 + d * d * self.n * other.n / n
        self.n = n
        self.s_inv_sqrt += other.s_inv_sqrt
        self.s_om_over_sqrt += other.s_om_over_sqrt
        self.s_om_times_sqrt += other.s_om_times_sqrt
        self.minimum = min(self.minimum, other.minimum)
        self.maximum = max(self.maximum, other.maximum)
        return self

    @property
    def var(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0

    def moments(self, N: int, B_prime: int) -> EtaMoments:
        if self.n == 0:
            raise CalibrationError("no eta samples accumulated")
        var = self.var
        emp = dict(
            m_inv_sqrt=self.s_inv_sqrt / self.n,
            m_one_minus_over_sqrt=self.s_om_over_sqrt / self.n,
            m_one_minus_times_sqrt=self.s_om_times_sqrt / self.n,
        )
        base = dict(N=N, B_prime=B_prime, trials=self.n, mean_eta=self.mean, var_eta=var)
        # relative spread below float resolution means eta is a constant
        if not var > 1e-24 or not 0 < self.mean < 1:
            return EtaMoments(r1=None, r2=None, **base, **emp)
        r1, r2 = beta_shapes(self.mean, var)
        a, b, c = beta_aux_moments(r1, r2)
        return EtaMoments(
            r1=r1,
            r2=r2,
            beta_inv_sqrt=a,
            beta_one_minus_over_sqrt=b,
            beta_one_minus_times_sqrt=c,
            **base,
            **emp,
        )


def fit_eta_beta(samples, N: int = 0, B_prime: int = 0) -> EtaMoments:
    """Moment-match a beta law to eta samples and report its moments.

    Requires at least 1000 samples in [0, 1] with nonzero variance.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 1000:
        raise DomainError(f"need >= 1000 samples, got {samples.size}")
    if np.any(samples < 0) or np.any(samples > 1) or np.any(np.isnan(samples)):
        raise DomainError("eta samples must lie in [0, 1]")
    result = EtaAccumulator().add(samples).moments(N, B_prime)
    if result.degenerate:
        raise DomainError("eta samples have zero variance")
    return result


# ---------------------------------------------------------------------------
# calibration CSV
# ---------------------------------------------------------------------------

CALIBRATION_HEADER = (
    "N",
    "B_prime",
    "trials",
    "mean_eta",
    "var_eta",
    "r1",
    "r2",
    "m_inv_sqrt",
    "m_om_over_sqrt",
    "m_om_times_sqrt",
)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def calibration_row(m: EtaMoments) -> list[str]:
    return [
        _fmt(v)
        for v in (
            m.N,
            m.B_prime,
            m.trials,
            m.mean_eta,
            m.var_eta,
            m.r1,
            m.r2,
            m.m_inv_sqrt,
            m.m_one_minus_over_sqrt,
            m.m_one_minus_times_sqrt,
        )
    ]


def read_calibration(source) -> dict[tuple[int, int], EtaMoments]:
    """Parse a calibration CSV (path or text stream) keyed by ``(N, B_prime)``."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, newline="") as fh:
            return read_calibration(io.StringIO(fh.read()))
    lines = (line for line in source if line.strip() and not line.startswith("#"))
    table: dict[tuple[int, int], EtaMoments] = {}
    for rec in csv.DictReader(lines):
        r1 = float(rec["r1"]) if rec["r1"] else None
        r2 = float(rec["r2"]) if rec["r2"] else None
        analytic = (None, None, None)
        if r1 is not None:
            analytic = beta_aux_moments(r1, r2)
        m = EtaMoments(
            N=int(rec["N"]),
            B_prime=int(rec["B_prime"]),
            trials=int(rec["trials"]),
            mean_eta=float(rec["mean_eta"]),
            var_eta=float(rec["var_eta"]),
            r1=r1,
            r2=r2,
            m_inv_sqrt=float(rec["m_inv_sqrt"]),
            m_one_minus_over_sqrt=float(rec["m_om_over_sqrt"]),
            m_one_minus_times_sqrt=float(rec["m_om_times_sqrt"]),
            beta_inv_sqrt=analytic[0],
            beta_one_minus_over_sqrt=analytic[1],
            beta_one_minus_times_sqrt=analytic[2],
        )
        table[(m.N, m.B_prime)] = m
    return table

