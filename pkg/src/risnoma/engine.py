"""Monte Carlo experiment engine.

Trials are grouped into fixed-size blocks.  Block ``b`` draws its channels
from a substream keyed by ``(seed, N, b)`` and its RVQ codebooks from one
keyed by ``(seed, N, B_prime, b)``, so a trial's randomness depends only on
its index and never on how blocks are spread over worker processes.  Every
scheme, power and quantizer resolution sees the same channels (common
random numbers), which keeps cross-cell comparisons paired.  Per-block
partial statistics are merged in block order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from . import __version__
from .channel import SystemParams, dbm_to_linear, pdf_z_bound, sample_channels
from .errors import CalibrationError, DomainError
from .noma import full_csi_sum_batch, limited_feedback_batch, oma_sum_batch
from .quantize import (
    CALIBRATION_HEADER,
    EtaAccumulator,
    EtaMoments,
    QuantizerSpec,
    calibration_row,
    quantize_gains,
    rvq_gains,
)
from .rateloss import (
    NONTRIVIAL_REGIONS,
    REGIONS,
    bound_constants,
    lemma1_bound,
    lemma2_bound,
    pointwise_IIA_bound,
    region_bound,
    snr_loss_batch,
    theorem1_bound,
)
from .stats import RunningMoments

SCHEMES = ("noma-full", "noma-lf", "oma-full", "oma-lf")
BLOCK_SIZE = 4096
CERT_SIGMAS = 4.0
PDF_SIGMAS = 5.0
PDF_MIN_COUNT = 1000
PDF_BINS = 100
MIN_CALIBRATION_TRIALS = 100_000

_CHANNEL, _CODEBOOK = 0, 1


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


def power_sweep(pmin: float, pmax: float, step: float) -> tuple[float, ...]:
    if step <= 0 or pmax < pmin:
        raise DomainError("power sweep needs step > 0 and pmax >= pmin")
    count = int(math.floor((pmax - pmin) / step + 1e-9)) + 1
    return tuple(round(pmin + i * step, 10) for i in range(count))


@dataclass(frozen=True)
class ExperimentConfig:
    params: SystemParams = field(default_factory=SystemParams)
    powers_dBm: tuple[float, ...] = (40.0,)
    bit_pairs: tuple[tuple[int, int], ...] = ((4, 4),)
    schemes: tuple[str, ...] = SCHEMES
    trials: int = 100_000
    workers: int = 1
    calibration: Mapping | None = field(default=None, compare=False)
    moment_source: str = "auto"
    corrupt: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise DomainError("trials must be a positive integer")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")
        if not self.powers_dBm:
            raise DomainError("power sweep is empty")
        if not self.bit_pairs:
            raise DomainError("bit sweep is empty")
        if not self.schemes or set(self.schemes) - set(SCHEMES):
            raise DomainError(f"schemes must be a nonempty subset of {SCHEMES}")
        for B, Bp in self.bit_pairs:
            if B < 1 or Bp < 0:
                raise DomainError("need B >= 1 and B_prime >= 0")

    @property
    def b_primes(self) -> tuple[int, ...]:
        return tuple(sorted({bp for _, bp in self.bit_pairs}))

    def spec(self, B: int) -> QuantizerSpec:
        return QuantizerSpec.from_bits(self.params.zeta1, self.params.zeta2, B)

    def echo(self) -> list[str]:
        """Comment lines describing everything that determines the output."""
        p = self.params
        fields = " ".join(f"{k}={v}" for k, v in p.as_dict().items())
        return [
            f"risnoma {__version__}",
            f"params: {fields}",
            f"trials={self.trials} powers_dBm={','.join(_fmt(x) for x in self.powers_dBm)} "
            f"bit_pairs={','.join(f'{b}:{bp}' for b, bp in self.bit_pairs)} "
            f"schemes={','.join(self.schemes)}",
        ]


@dataclass
class Report:
    header: tuple[str, ...]
    rows: list[list[str]]
    comments: list[str]
    passed: bool = True
    records: list = field(default_factory=list)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


# ---------------------------------------------------------------------------
# block machinery
# ---------------------------------------------------------------------------


class Tally:
    __slots__ = ("count",)

    def __init__(self, count: int = 0):
        self.count = int(count)

    def merge(self, other: "Tally") -> "Tally":
        self.count += other.count
        return self


class Histogram:
    __slots__ = ("counts",)

    def __init__(self, counts):
        self.counts = np.asarray(counts, dtype=np.int64)

    def merge(self, other: "Histogram") -> "Histogram":
        self.counts = self.counts + other.counts
        return self


def _blocks(trials: int) -> list[tuple[int, int]]:
    n_blocks = -(-trials // BLOCK_SIZE)
    return [(b, min(BLOCK_SIZE, trials - b * BLOCK_SIZE)) for b in range(n_blocks)]


def _run_blocks(fn: Callable, config: ExperimentConfig, trials: int | None = None) -> dict:
    trials = config.trials if trials is None else trials
    tasks = [(config, b, n) for b, n in _blocks(trials)]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(fn, tasks))
    else:
        parts = [fn(t) for t in tasks]
    total: dict = {}
    for part in parts:
        for key, value in part.items():
            if key in total:
                total[key].merge(value)
            else:
                total[key] = value
    return total


def draw_block(params: SystemParams, block: int, n: int, b_primes=()):
    """Channels for one block plus the achieved RVQ gain for each ``B_prime``."""
    channels = sample_channels(params, substream(params.seed, _CHANNEL, params.N, block), n)
    cascade = channels.cascade
    h2q = {
        bp: rvq_gains(cascade, bp, substream(params.seed, _CODEBOOK, params.N, bp, block))
        for bp in sorted(set(b_primes))
    }
    return channels, h2q


# ---------------------------------------------------------------------------
# sum rate
# ---------------------------------------------------------------------------

SUMRATE_HEADER = (
    "scheme",
    "P_dBm",
    "B",
    "B_prime",
    "zeta1",
    "zeta2",
    "trials",
    "metric",
    "mean",
    "ci95_halfwidth",
    "infeasible_fraction",
    "inaccurate_order_fraction",
)


@dataclass(frozen=True)
class SummaryRow:
    scheme: str
    P_dBm: float
    B: int | None
    B_prime: int | None
    zeta1: float | None
    zeta2: float | None
    trials: int
    metric: str
    mean: float
    ci95_halfwidth: float
    infeasible_fraction: float
    inaccurate_order_fraction: float

    def cells(self) -> list[str]:
        return [_fmt(getattr(self, name)) for name in SUMRATE_HEADER]


class _RateCell:
    __slots__ = ("rate", "infeasible", "inaccurate")

    def __init__(self, rate, infeasible=None, inaccurate=None):
        self.rate = RunningMoments.of(rate)
        self.infeasible = Tally(0 if infeasible is None else np.count_nonzero(infeasible))
        self.inaccurate = Tally(0 if inaccurate is None else np.count_nonzero(inaccurate))

    def merge(self, other: "_RateCell") -> "_RateCell":
        self.rate.merge(other.rate)
        self.infeasible.merge(other.infeasible)
        self.inaccurate.merge(other.inaccurate)
        return self


def _sumrate_block(task) -> dict:
    config, block, n = task
    p = config.params
    lf = {"noma-lf", "oma-lf"} & set(config.schemes)
    channels, h2q = draw_block(p, block, n, config.b_primes if lf else ())
    H1, H2 = channels.H1, channels.H2
    user1_strong = H1 >= H2
    eps = p.epsilon
    quantized = {}
    if "noma-lf" in config.schemes:
        for B, Bp in config.bit_pairs:
            spec = config.spec(B)
            quantized[(B, Bp)] = (quantize_gains(H1, spec), quantize_gains(h2q[Bp], spec))
    out = {}
    for P_dBm in config.powers_dBm:
        P = dbm_to_linear(P_dBm)
        if "noma-full" in config.schemes:
            rate, feasible = full_csi_sum_batch(H1, H2, P, eps)
            out[("noma-full", P_dBm, None, None)] = _RateCell(rate, ~feasible)
        if "noma-lf" in config.schemes:
            for B, Bp in config.bit_pairs:
                q1, q2 = quantized[(B, Bp)]
                rate, feasible, user2, _, _ = limited_feedback_batch(H1, h2q[Bp], q1, q2, P, eps)
                out[("noma-lf", P_dBm, B, Bp)] = _RateCell(rate, ~feasible, user2 == user1_strong)
        if "oma-full" in config.schemes:
            out[("oma-full", P_dBm, None, None)] = _RateCell(oma_sum_batch(H1, H2, P))
        if "oma-lf" in config.schemes:
            for Bp in config.b_primes:
                out[("oma-lf", P_dBm, None, Bp)] = _RateCell(oma_sum_batch(H1, h2q[Bp], P))
    return out


def run_sumrate(config: ExperimentConfig) -> Report:
    """Mean sum rate per (scheme, power, feedback bits)."""
    total = _run_blocks(_sumrate_block, config)
    p = config.params
    records = []
    for scheme in config.schemes:
        for P_dBm in config.powers_dBm:
            if scheme == "noma-lf":
                keys = [(scheme, P_dBm, B, Bp) for B, Bp in config.bit_pairs]
            elif scheme == "oma-lf":
                keys = [(scheme, P_dBm, None, Bp) for Bp in config.b_primes]
            else:
                keys = [(scheme, P_dBm, None, None)]
            for key in keys:
                cell = total[key]
                quantizes_gains = scheme == "noma-lf"
                records.append(
                    SummaryRow(
                        scheme=scheme,
                        P_dBm=P_dBm,
                        B=key[2],
                        B_prime=key[3],
                        zeta1=p.zeta1 if quantizes_gains else None,
                        zeta2=p.zeta2 if quantizes_gains else None,
                        trials=cell.rate.n,
                        metric="sum_rate",
                        mean=cell.rate.mean,
                        ci95_halfwidth=cell.rate.ci95,
                        infeasible_fraction=cell.infeasible.count / cell.rate.n,
                        inaccurate_order_fraction=cell.inaccurate.count / cell.rate.n,
                    )
                )
    return Report(
        header=SUMRATE_HEADER,
        rows=[r.cells() for r in records],
        comments=config.echo(),
        records=records,
    )


# ---------------------------------------------------------------------------
# eta moments for the bounds
# ---------------------------------------------------------------------------


def _eta_table(config: ExperimentConfig, inline: dict) -> dict[int, EtaMoments]:
    N = config.params.N
    table = {}
    for Bp in config.b_primes:
        if config.calibration is not None:
            try:
                table[Bp] = config.calibration[(N, Bp)]
            except KeyError:
                raise CalibrationError(
                    f"no calibration for N={N}, B_prime={Bp}; run `risnoma calibrate` for it first"
                ) from None
        else:
            table[Bp] = inline[("eta", Bp)].moments(N, Bp)
    return table


def _constants(config: ExperimentConfig, B: int, Bp: int, moments: EtaMoments):
    params = replace(config.params, B=B, B_prime=Bp)
    c = bound_constants(params, None, moments, config.moment_source)
    if config.corrupt:
        c = c.scaled(**dict(config.corrupt))
    return c


# ---------------------------------------------------------------------------
# rate loss
# ---------------------------------------------------------------------------

RATELOSS_HEADER = (
    "P_dBm",
    "B",
    "B_prime",
    "delta",
    "zeta1",
    "zeta2",
    "trials",
    "mean_dR",
    "mc_stderr",
    "bound_EdR",
    "mean_dX",
    "bound_EdX",
    "infeasible_fraction",
    "inaccurate_order_fraction",
)


@dataclass(frozen=True)
class RateLossRow:
    P_dBm: float
    B: int
    B_prime: int
    delta: float
    zeta1: float
    zeta2: float
    trials: int
    mean_dR: float
    mc_stderr: float
    bound_EdR: float
    mean_dX: float
    bound_EdX: float
    infeasible_fraction: float
    inaccurate_order_fraction: float

    def cells(self) -> list[str]:
        return [_fmt(getattr(self, name)) for name in RATELOSS_HEADER]


class _LossCell:
    __slots__ = ("dR", "dX", "infeasible", "inaccurate")

    def __init__(self, loss):
        self.dR = RunningMoments.of(loss.delta_R)
        self.dX = RunningMoments.of(loss.delta_X)
        self.infeasible = Tally(np.count_nonzero(~loss.feasible_q))
        self.inaccurate = Tally(np.count_nonzero(~loss.accurate))

    def merge(self, other: "_LossCell") -> "_LossCell":
        self.dR.merge(other.dR)
        self.dX.merge(other.dX)
        self.infeasible.merge(other.infeasible)
        self.inaccurate.merge(other.inaccurate)
        return self


def _rateloss_block(task) -> dict:
    config, block, n = task
    p = config.params
    channels, h2q = draw_block(p, block, n, config.b_primes)
    H1, H2 = channels.H1, channels.H2
    out: dict = {}
    for Bp in config.b_primes:
        out[("eta", Bp)] = EtaAccumulator().add(h2q[Bp] / H2)
    for B, Bp in config.bit_pairs:
        spec = config.spec(B)
        for P_dBm in config.powers_dBm:
            loss = snr_loss_batch(H1, H2, h2q[Bp], spec, dbm_to_linear(P_dBm), p.epsilon)
            out[(P_dBm, B, Bp)] = _LossCell(loss)
    return out


def run_rateloss(config: ExperimentConfig) -> Report:
    """Empirical average rate loss next to the closed-form bound per cell."""
    config.params.require_even_N()
    total = _run_blocks(_rateloss_block, config)
    moments = _eta_table(config, total)
    p = config.params
    records = []
    for P_dBm in config.powers_dBm:
        for B, Bp in config.bit_pairs:
            cell = total[(P_dBm, B, Bp)]
            spec = config.spec(B)
            edx, edr = theorem1_bound(_constants(config, B, Bp, moments[Bp]), spec, dbm_to_linear(P_dBm))
            n = cell.dR.n
            records.append(
                RateLossRow(
                    P_dBm=P_dBm,
                    B=B,
                    B_prime=Bp,
                    delta=spec.delta,
                    zeta1=p.zeta1,
                    zeta2=p.zeta2,
                    trials=n,
                    mean_dR=cell.dR.mean,
                    mc_stderr=cell.dR.stderr,
                    bound_EdR=edr,
                    mean_dX=cell.dX.mean,
                    bound_EdX=edx,
                    infeasible_fraction=cell.infeasible.count / n,
                    inaccurate_order_fraction=cell.inaccurate.count / n,
                )
            )
    return Report(
        header=RATELOSS_HEADER,
        rows=[r.cells() for r in records],
        comments=config.echo() + [f"eta moments: {_moment_note(moments)}"],
        records=records,
    )


def _moment_note(moments: dict[int, EtaMoments]) -> str:
    return "; ".join(
        f"B_prime={bp} mean={_fmt(m.mean_eta)} r1={_fmt(m.r1)} r2={_fmt(m.r2)} "
        f"source={'analytic' if m.analytic_available else 'empirical'}"
        for bp, m in sorted(moments.items())
    )


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------


def _calibrate_block(task) -> dict:
    config, block, n = task
    channels, h2q = draw_block(config.params, block, n, config.b_primes)
    H2 = channels.H2
    return {("eta", Bp): EtaAccumulator().add(h2q[Bp] / H2) for Bp in config.b_primes}


def calibrate(config: ExperimentConfig) -> dict[tuple[int, int], EtaMoments]:
    total = _run_blocks(_calibrate_block, config)
    N = config.params.N
    return {(N, Bp): total[("eta", Bp)].moments(N, Bp) for Bp in config.b_primes}


def run_calibrate(config: ExperimentConfig, n_values=None) -> Report:
    """Eta moments and beta fit for each ``(N, B_prime)`` in the sweep."""
    if config.trials < MIN_CALIBRATION_TRIALS:
        raise DomainError(f"calibration needs at least {MIN_CALIBRATION_TRIALS} trials")
    table: dict[tuple[int, int], EtaMoments] = {}
    for N in sorted(set(n_values or (config.params.N,))):
        table.update(calibrate(replace(config, params=replace(config.params, N=N))))
    comments = config.echo()
    if n_values:
        comments.append(f"N values: {','.join(str(n) for n in sorted(set(n_values)))}")
    for (N, Bp), m in sorted(table.items()):
        if m.degenerate:
            comments.append(f"degenerate: N={N} B_prime={Bp} eta has zero variance; r1,r2 omitted")
        elif not m.analytic_available:
            comments.append(f"divergent: N={N} B_prime={Bp} r1<=1/2; bounds use sample moments")
    return Report(
        header=CALIBRATION_HEADER,
        rows=[calibration_row(m) for _, m in sorted(table.items())],
        comments=comments,
        records=[m for _, m in sorted(table.items())],
    )


# ---------------------------------------------------------------------------
# bound validation
# ---------------------------------------------------------------------------

BOUNDS_HEADER = ("B", "B_prime", "delta", "region", "empirical_EdX", "mc_stderr", "analytic_bound", "pass")


@dataclass(frozen=True)
class BoundCheck:
    P_dBm: float
    B: int
    B_prime: int
    delta: float
    region: str
    empirical: float
    stderr: float
    bound: float
    fraction: float

    @property
    def passed(self) -> bool:
        return self.empirical <= self.bound + CERT_SIGMAS * self.stderr

    @property
    def margin(self) -> float:
        return self.bound - self.empirical

    def cells(self) -> list[str]:
        return [
            _fmt(v)
            for v in (self.B, self.B_prime, self.delta, self.region, self.empirical, self.stderr, self.bound, self.passed)
        ]


class _BoundCell:
    __slots__ = ("regions", "counts", "super2", "super3", "dR", "violations")

    def __init__(self, loss, H1, H2, eta, delta):
        self.regions = [RunningMoments.of(np.where(loss.region == code, loss.delta_X, 0.0)) for code in range(len(REGIONS))]
        self.counts = Histogram(np.bincount(loss.region, minlength=len(REGIONS)))
        self.super2 = RunningMoments.of(np.where((loss.region >= 1) & (loss.region <= 4), loss.delta_X, 0.0))
        self.super3 = RunningMoments.of(np.where(loss.region >= 5, loss.delta_X, 0.0))
        self.dR = RunningMoments.of(np.where(loss.region >= 1, loss.delta_R, 0.0))
        iia = (loss.region == 1) & loss.active
        cert = pointwise_IIA_bound(H1[iia], H2[iia], eta[iia], delta)
        self.violations = Tally(np.count_nonzero(loss.delta_X[iia] > cert))

    def merge(self, other: "_BoundCell") -> "_BoundCell":
        for mine, theirs in zip(self.regions, other.regions):
            mine.merge(theirs)
        self.counts.merge(other.counts)
        self.super2.merge(other.super2)
        self.super3.merge(other.super3)
        self.dR.merge(other.dR)
        self.violations.merge(other.violations)
        return self


def _bounds_block(task) -> dict:
    config, block, n = task
    p = config.params
    channels, h2q = draw_block(p, block, n, config.b_primes)
    H1, H2 = channels.H1, channels.H2
    out: dict = {}
    for Bp in config.b_primes:
        out[("eta", Bp)] = EtaAccumulator().add(h2q[Bp] / H2)
    for B, Bp in config.bit_pairs:
        spec = config.spec(B)
        eta = h2q[Bp] / H2
        for P_dBm in config.powers_dBm:
            loss = snr_loss_batch(H1, H2, h2q[Bp], spec, dbm_to_linear(P_dBm), p.epsilon)
            out[(P_dBm, B, Bp)] = _BoundCell(loss, H1, H2, eta, spec.delta)
    return out


@dataclass
class BoundValidation:
    checks: list[BoundCheck]
    region_fractions: dict[tuple[float, int, int], dict[str, float]]
    pointwise_violations: dict[tuple[float, int, int], int]
    eta_moments: dict[int, EtaMoments]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks) and not any(self.pointwise_violations.values())


def validate_bounds(config: ExperimentConfig) -> BoundValidation:
    """Monte Carlo certificates for every region, lemma and the theorem."""
    config.params.require_even_N()
    total = _run_blocks(_bounds_block, config)
    moments = _eta_table(config, total)
    checks: list[BoundCheck] = []
    fractions = {}
    violations = {}
    for P_dBm in config.powers_dBm:
        for B, Bp in config.bit_pairs:
            cell = total[(P_dBm, B, Bp)]
            spec = config.spec(B)
            c = _constants(config, B, Bp, moments[Bp])
            n = cell.super2.n
            frac = {name: int(cnt) / n for name, cnt in zip(REGIONS, cell.counts.counts)}
            fractions[(P_dBm, B, Bp)] = frac
            violations[(P_dBm, B, Bp)] = cell.violations.count

            def check(region, stats, bound, fraction):
                checks.append(
                    BoundCheck(P_dBm, B, Bp, spec.delta, region, stats.mean, stats.stderr, bound, fraction)
                )

            for code, name in enumerate(REGIONS):
                check(name, cell.regions[code], region_bound(name, c, spec), frac[name])
            check("II", cell.super2, lemma1_bound(c, spec), sum(frac[r] for r in NONTRIVIAL_REGIONS[:4]))
            check("III", cell.super3, lemma2_bound(c, spec), sum(frac[r] for r in NONTRIVIAL_REGIONS[4:]))
            _, edr = theorem1_bound(c, spec, dbm_to_linear(P_dBm))
            check("theorem", cell.dR, edr, 1.0 - frac["I"])
    return BoundValidation(checks, fractions, violations, moments)


def run_validate_bounds(config: ExperimentConfig) -> Report:
    """CSV-ready certificate report for a single transmit power."""
    if len(config.powers_dBm) != 1:
        raise DomainError("validate-bounds reports one transmit power per run")
    result = validate_bounds(config)
    comments = config.echo()
    comments.append(f"eta moments: {_moment_note(result.eta_moments)}")
    comments.append(
        "rows II/III compare the super-region sums with the lemma totals; "
        "the theorem row holds the empirical mean rate loss and its bound"
    )
    for (P_dBm, B, Bp), frac in result.region_fractions.items():
        comments.append(
            f"region_fractions P_dBm={_fmt(P_dBm)} B={B} B_prime={Bp}: "
            + " ".join(f"{k}={_fmt(v)}" for k, v in frac.items())
        )
        comments.append(
            f"pointwise_IIA_violations P_dBm={_fmt(P_dBm)} B={B} B_prime={Bp}: {result.pointwise_violations[(P_dBm, B, Bp)]}"
        )
    return Report(
        header=BOUNDS_HEADER,
        rows=[c.cells() for c in result.checks],
        comments=comments,
        passed=result.passed,
        records=result.checks,
    )


# ---------------------------------------------------------------------------
# pdf bound check
# ---------------------------------------------------------------------------

PDFCHECK_HEADER = ("N", "bin_lo", "bin_hi", "count", "empirical_density", "analytic_bound", "rel_mc_err", "pass")


def pdf_bin_edges(N: int, C2: float) -> np.ndarray:
    # the bound is a Gamma(3N/2, C2/2) shape; cover its mean + 10 sd
    shape = 1.5 * N
    hi = C2 * (shape + 10.0 * math.sqrt(shape)) / 2.0
    return np.linspace(0.0, hi, PDF_BINS + 1)


def _pdf_block(task) -> dict:
    config, block, n = task
    p = config.params
    channels, _ = draw_block(p, block, n)
    edges = pdf_bin_edges(p.N, p.path_loss().C2)
    counts, _ = np.histogram(channels.z, bins=edges)
    return {"hist": Histogram(counts)}


@dataclass(frozen=True)
class PdfBin:
    N: int
    lo: float
    hi: float
    count: int
    density: float
    bound: float
    rel_err: float

    @property
    def populated(self) -> bool:
        return self.count >= PDF_MIN_COUNT

    @property
    def passed(self) -> bool | None:
        if not self.populated:
            return None
        return self.density <= self.bound * (1.0 + PDF_SIGMAS * self.rel_err)

    def cells(self) -> list[str]:
        return [_fmt(v) for v in (self.N, self.lo, self.hi, self.count, self.density, self.bound, self.rel_err, self.passed)]


def run_pdfcheck(config: ExperimentConfig) -> Report:
    """Histogram of z against the closed-form density bound."""
    p = config.params
    p.require_even_N()
    total = _run_blocks(_pdf_block, config)
    edges = pdf_bin_edges(p.N, p.path_loss().C2)
    counts = total["hist"].counts
    width = edges[1] - edges[0]
    centres = 0.5 * (edges[1:] + edges[:-1])
    bounds = pdf_z_bound(centres, p.N, p.path_loss().C2)
    bins = [
        PdfBin(
            N=p.N,
            lo=float(edges[i]),
            hi=float(edges[i + 1]),
            count=int(counts[i]),
            density=counts[i] / (config.trials * width),
            bound=float(bounds[i]),
            rel_err=1.0 / math.sqrt(counts[i]) if counts[i] else math.inf,
        )
        for i in range(len(counts))
    ]
    outside = config.trials - int(counts.sum())
    comments = config.echo() + [f"samples beyond last bin: {outside}"]
    return Report(
        header=PDFCHECK_HEADER,
        rows=[b.cells() for b in bins],
        comments=comments,
        passed=all(b.passed is not False for b in bins),
        records=bins,
    )
