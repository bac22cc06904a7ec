"""Scenario parameters, double-Rayleigh channel sampling and pdf bounds.

User 1 has a direct Rayleigh link ``h1``; User 2 is served only through an
N-element RIS, with BS->RIS channel ``h2`` and RIS->user channel ``g``.
Co-phasing every reflected path gives the largest RIS gain
``H2 = (sum_i |h2_i| |g_i|)^2``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError
from .special import log_factorial, log_gamma


@dataclass(frozen=True)
class SystemParams:
    """Full description of one simulation scenario.

    Default geometry:
    d1 = dg = 10 m, d2 = 40 m, exponents 3.5 / 2.5 / 2.5, N = 10.
    """

    N: int = 10
    d1: float = 10.0
    d2: float = 40.0
    dg: float = 10.0
    alpha1: float = 3.5
    alpha2: float = 2.5
    alphag: float = 2.5
    P_dBm: float = 40.0
    R_th: float = 1.0
    B: int = 4
    B_prime: int = 4
    zeta1: float = 1e-5
    zeta2: float = 0.95
    seed: int = 1

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")
        for name in ("d1", "d2", "dg", "alpha1", "alpha2", "alphag", "R_th"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0")
        if not (0 < self.zeta1 < 1 and 0 < self.zeta2 < 1):
            raise DomainError("zeta1 and zeta2 must lie in (0, 1)")
        if int(self.B) != self.B or self.B < 1:
            raise DomainError("B must be an integer >= 1")
        if int(self.B_prime) != self.B_prime or self.B_prime < 0:
            raise DomainError("B_prime must be an integer >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must fit in 64 bits")

    @property
    def P_linear(self) -> float:
        """Transmit power relative to a 0 dBm noise floor."""
        return dbm_to_linear(self.P_dBm)

    @property
    def epsilon(self) -> float:
        return 2.0**self.R_th - 1.0

    def path_loss(self) -> "PathLoss":
        return PathLoss.from_params(self)

    def require_even_N(self) -> None:
        if self.N < 2 or self.N % 2:
            raise DomainError(f"the analytic bounds need an even N >= 2, got {self.N}")

    def as_dict(self) -> dict:
        return asdict(self)


def dbm_to_linear(p_dbm):
    """dBm to linear power, with the receiver noise fixed at 0 dBm."""
    return np.power(10.0, np.asarray(p_dbm, dtype=float) / 10.0)[()]


def path_loss(d: float, alpha: float) -> float:
    """Large-scale attenuation ``d ** -alpha``."""
    if not d > 0:
        raise DomainError(f"distance must be > 0, got {d}")
    if not alpha > 0:
        raise DomainError(f"path-loss exponent must be > 0, got {alpha}")
    return float(d) ** (-float(alpha))


@dataclass(frozen=True)
class PathLoss:
    L1: float
    L2: float
    Lg: float

    @property
    def C2(self) -> float:
        return math.sqrt(self.L2 * self.Lg)

    @classmethod
    def from_params(cls, params: SystemParams) -> "PathLoss":
        return cls(
            L1=path_loss(params.d1, params.alpha1),
            L2=path_loss(params.d2, params.alpha2),
            Lg=path_loss(params.dg, params.alphag),
        )


@dataclass(frozen=True)
class ChannelRealization:
    h1: complex
    h2: np.ndarray
    g: np.ndarray

    @property
    def H1(self) -> float:
        return float(abs(self.h1) ** 2)

    @property
    def cascade(self) -> np.ndarray:
        """Per-element cascaded channel ``diag(g) h2``."""
        return self.g * self.h2

    @property
    def z(self) -> float:
        return float(np.sum(np.abs(self.h2) * np.abs(self.g)))

    @property
    def H2(self) -> float:
        return self.z**2

    def gain_with_phases(self, theta: np.ndarray) -> float:
        """``|theta^T diag(g) h2|^2`` for the given RIS coefficients."""
        return float(abs(np.sum(theta * self.cascade)) ** 2)

    def optimal_phases(self) -> np.ndarray:
        return np.exp(-1j * np.angle(self.cascade))


def _complex_normal(raw: np.ndarray) -> np.ndarray:
    # raw[..., 0] real part, raw[..., 1] imaginary part; CN(0, 1) per entry
    return raw.view(np.complex128)[..., 0] * math.sqrt(0.5)


def sample_realization(params: SystemParams, rng: np.random.Generator) -> ChannelRealization:
    """Draw one (h1, h2, g) triple including path loss.

    Consumes ``2 * (2N + 1)`` standard normals, laid out exactly as one row
    of :func:`sample_channels`.
    """
    batch = sample_channels(params, rng, 1)
    return ChannelRealization(h1=complex(batch.h1[0]), h2=batch.h2[0].copy(), g=batch.g[0].copy())


@dataclass
class ChannelBatch:
    """Vectorised counterpart of :class:`ChannelRealization`."""

    h1: np.ndarray
    h2: np.ndarray
    g: np.ndarray

    def __len__(self) -> int:
        return self.h1.shape[0]

    @property
    def cascade(self) -> np.ndarray:
        return self.g * self.h2

    @property
    def H1(self) -> np.ndarray:
        return self.h1.real**2 + self.h1.imag**2

    @property
    def z(self) -> np.ndarray:
        return np.sum(np.abs(self.h2) * np.abs(self.g), axis=1)

    @property
    def H2(self) -> np.ndarray:
        return self.z**2


def sample_channels(params: SystemParams, rng: np.random.Generator, n: int) -> ChannelBatch:
    pl = PathLoss.from_params(params)
    N = params.N
    raw = np.ascontiguousarray(rng.standard_normal((n, 2 * N + 1, 2)))
    cn = _complex_normal(raw)
    return ChannelBatch(
        h1=math.sqrt(pl.L1) * cn[:, 0],
        h2=math.sqrt(pl.L2) * cn[:, 1 : N + 1],
        g=math.sqrt(pl.Lg) * cn[:, N + 1 :],
    )


def _check_even(N: int) -> int:
    if int(N) != N or N < 2 or N % 2:
        raise DomainError(f"N must be an even integer >= 2, got {N}")
    return int(N)


def log_C1(N: int) -> float:
    """``ln C1`` with ``C1 = 2^N pi^(N/2) Gamma(3/2)^N / ((3N-2)/2)!``."""
    N = _check_even(N)
    return (
        N * math.log(2.0)
        + 0.5 * N * math.log(math.pi)
        + N * log_gamma(1.5)
        - log_factorial((3 * N - 2) // 2)
    )


def pdf_z_bound(z, N: int, C2: float):
    """Gamma-shaped upper bound on the density of ``z = sum |h2_i||g_i|``.

    Accepts scalars or arrays; evaluated in the log domain.
    """
    N = _check_even(N)
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0) or np.any(np.isnan(z_arr)):
        raise DomainError("z must be >= 0")
    shape = (3 * N - 2) / 2
    with np.errstate(divide="ignore"):
        logv = log_C1(N) - math.log(C2) + shape * np.log(z_arr / C2) - 2.0 * z_arr / C2
    out = np.where(z_arr > 0, np.exp(logv), 0.0)
    return float(out) if np.ndim(z) == 0 else out


def pdf_H2_bound(H2, N: int, C2: float):
    """Bound on the density of ``H2 = z^2`` by change of variables."""
    h = np.asarray(H2, dtype=float)
    if np.any(~(h > 0)):
        raise DomainError("H2 must be > 0")
    root = np.sqrt(h)
    out = pdf_z_bound(root, N, C2) / (2.0 * root)
    return float(out) if np.ndim(H2) == 0 else out


def pdf_z_bound_mass(N: int) -> float:
    """Total mass of :func:`pdf_z_bound`, ``C1 ((3N-2)/2)! / 2^(3N/2)``.

    Independent of C2; equals ``(pi / 2^1.5)^N`` and exceeds one.
    """
    N = _check_even(N)
    return math.exp(log_C1(N) + log_factorial((3 * N - 2) // 2) - 1.5 * N * math.log(2.0))
