"""Acceptance suite: one PASS/FAIL verdict per criterion.

Each test records its verdict (printed in the terminal summary) and then
asserts it, so a failing criterion also fails the pytest run.
"""

import math
import os
from dataclasses import replace

import mpmath
import numpy as np
import pytest
from scipy import integrate

from risnoma import cli
from risnoma.channel import SystemParams, dbm_to_linear, sample_channels
from risnoma.engine import (
    BLOCK_SIZE,
    CERT_SIGMAS,
    ExperimentConfig,
    draw_block,
    power_sweep,
    run_pdfcheck,
    run_rateloss,
    run_sumrate,
    run_validate_bounds,
    validate_bounds,
)
from risnoma.noma import limited_feedback_batch, weak_user_rate
from risnoma.quantize import QuantizerSpec, fit_eta_beta, quantize_gains, quantize_indices, rvq_gains
from risnoma.rateloss import NONTRIVIAL_REGIONS, bound_constants, lemma1_bound, lemma2_bound, region_bound, theorem1_bound
from risnoma.special import beta_function, exp_integral_e1, lower_incomplete_gamma

WORKERS = os.cpu_count() or 1
MILLION = 1_000_000
GRID = tuple((B, Bp) for Bp in (2, 4) for B in (2, 4, 6))


def _fmt(x):
    return f"{x:.4g}"


# --- 1. quantizer soundness ------------------------------------------------


def test_c1_quantizer_soundness(verdicts):
    rng = np.random.default_rng(101)
    bad = 0
    cells = 0
    for zeta1 in (1e-5, 0.5e-5):
        for zeta2 in (0.5, 0.95):
            for B in range(1, 13):
                spec = QuantizerSpec.from_bits(zeta1, zeta2, B)
                T, d = spec.top, spec.delta
                x = rng.uniform(0.0, 1.25 * T, 100_000)
                k = rng.integers(0, spec.levels, 2000)
                # exact partition edges and their left neighbours
                x[:2000] = k * d
                x[2000:4000] = np.nextafter(k * d, 0.0)
                q = quantize_gains(x, spec)
                idx = quantize_indices(x, spec)
                order = np.argsort(x, kind="stable")
                bad += np.count_nonzero(q > x)
                bad += np.count_nonzero((idx < 0) | (idx > spec.top_index))
                bad += np.count_nonzero(np.diff(q[order]) < 0)
                bad += np.count_nonzero((x >= T) & (idx != spec.top_index))
                bad += np.count_nonzero((x < T) & (x - q >= d))
                bad += np.count_nonzero((x < d) & (q != 0))
                cells += 1
    ok = verdicts.record("1 quantizer soundness", bad == 0, f"{cells} cells x 1e5 draws, {bad} violations")
    assert ok


# --- 2. RVQ suite ------------------------------------------------------------


@pytest.fixture(scope="module")
def eta_ladder():
    p = SystemParams(N=10)
    ch = sample_channels(p, np.random.default_rng(202), MILLION)
    return {Bp: rvq_gains(ch.cascade, Bp, np.random.default_rng(300 + Bp)) / ch.H2 for Bp in (0, 2, 4, 6)}


def test_c2_rvq_ladder(verdicts, eta_ladder):
    out_of_range = sum(np.count_nonzero((e < 0) | (e > 1) | ~np.isfinite(e)) for e in eta_ladder.values())
    stats = [(e.mean(), e.std(ddof=1) / math.sqrt(e.size)) for e in eta_ladder.values()]
    steps = [(m2 - m1) / math.hypot(s1, s2) for (m1, s1), (m2, s2) in zip(stats, stats[1:])]
    ok = out_of_range == 0 and all(z > 3 for z in steps)
    detail = "means " + "<".join(_fmt(m) for m, _ in stats) + f"; min step {min(steps):.1f} sigma; {out_of_range} out of [0,1]"
    assert verdicts.record("2 RVQ range and increasing mean eta", ok, detail)


def test_c2_beta_fit_moments(verdicts, eta_ladder):
    worst = 0.0
    for Bp in (2, 4, 6):
        m = fit_eta_beta(eta_ladder[Bp], 10, Bp)
        pairs = [
            (m.m_inv_sqrt, m.beta_inv_sqrt),
            (m.m_one_minus_over_sqrt, m.beta_one_minus_over_sqrt),
            (m.m_one_minus_times_sqrt, m.beta_one_minus_times_sqrt),
        ]
        for emp, ana in pairs:
            worst = max(worst, abs(ana - emp) / emp)
    ok = worst <= 0.05
    assert verdicts.record("2 beta-fit eta moments within 5%", ok, f"worst relative gap {worst:.3%}")


# --- 3. no outage ------------------------------------------------------------


def test_c3_no_weak_user_outage(verdicts):
    p = SystemParams()
    P = dbm_to_linear(60.0)
    spec = QuantizerSpec.from_bits(p.zeta1, p.zeta2, p.B)
    feasible_total = gain_bad = rate_bad = 0
    block = 0
    while feasible_total < MILLION:
        ch, h2q = draw_block(p, block, BLOCK_SIZE * 16, (p.B_prime,))
        H2Q = h2q[p.B_prime]
        q1, q2 = quantize_gains(ch.H1, spec), quantize_gains(H2Q, spec)
        _, feas, user2, beta, basis = limited_feedback_batch(ch.H1, H2Q, q1, q2, P, p.epsilon)
        weak_actual = np.where(user2, ch.H1, H2Q)[feas]
        gain_bad += np.count_nonzero(weak_actual < basis[feas])
        rate_bad += np.count_nonzero(weak_user_rate(beta[feas], P, weak_actual) < p.R_th * (1 - 1e-12))
        feasible_total += int(np.count_nonzero(feas))
        block += 1
    ok = gain_bad == 0 and rate_bad == 0
    detail = f"{feasible_total} feasible trials at 60 dBm, B=4, B'=4; {rate_bad} below R_th, {gain_bad} gains below feedback"
    assert verdicts.record("3 no weak-user outage", ok, detail)


# --- 4-6. bound certificates -------------------------------------------------


@pytest.fixture(scope="module")
def certificates():
    cfg = ExperimentConfig(trials=MILLION, powers_dBm=(40.0, 60.0), bit_pairs=GRID, workers=WORKERS)
    return cfg, validate_bounds(cfg)


def test_c4_pointwise_iia(verdicts, certificates):
    _, result = certificates
    total = sum(result.pointwise_violations.values())
    assert verdicts.record("4 pointwise II.A certificate", total == 0, f"{total} violations over {len(result.pointwise_violations)} cells x 1e6")


def test_c5_region_certificates(verdicts, certificates):
    _, result = certificates
    rows = [c for c in result.checks if c.region in NONTRIVIAL_REGIONS]
    failed = [c for c in rows if not c.passed]
    worst = max(rows, key=lambda c: (c.empirical - c.bound) / max(c.stderr, 1e-300))
    detail = f"{len(rows)} region rows, {len(failed)} fail; tightest {worst.region} at B={worst.B} B'={worst.B_prime} P={worst.P_dBm:g}"
    assert verdicts.record("5 region-bound certificates", not failed, detail)


def test_c5_region_sum_identity(verdicts, certificates):
    cfg, result = certificates
    worst = 0.0
    for B, Bp in GRID:
        spec = cfg.spec(B)
        c = bound_constants(replace(cfg.params, B=B, B_prime=Bp), None, result.eta_moments[Bp])
        regions = sum(region_bound(r, c, spec) for r in NONTRIVIAL_REGIONS)
        lemmas = lemma1_bound(c, spec) + lemma2_bound(c, spec)
        worst = max(worst, abs(regions - lemmas) / lemmas)
    assert verdicts.record("5 region bounds sum to lemma totals", worst <= 1e-9, f"max relative gap {worst:.2e}")


def test_c6_theorem_certificate(verdicts, certificates):
    _, result = certificates
    rows = [c for c in result.checks if c.region == "theorem"]
    failed = [c for c in rows if not c.passed]
    margin = min(c.bound - c.empirical - CERT_SIGMAS * c.stderr for c in rows)
    detail = f"{len(rows)} cells, {len(failed)} fail; smallest margin {_fmt(margin)} bits"
    assert verdicts.record("6 theorem rate-loss certificate", not failed, detail)


def test_c6_bound_decreasing_in_B(verdicts, certificates):
    cfg, result = certificates
    broken = []
    for P_dBm in cfg.powers_dBm:
        for Bp in (2, 4):
            seq = [c.bound for c in result.checks if c.region == "theorem" and c.P_dBm == P_dBm and c.B_prime == Bp]
            if not all(b < a for a, b in zip(seq, seq[1:])):
                broken.append(f"P={P_dBm:g} B'={Bp}: " + ",".join(_fmt(b) for b in seq))
    detail = "; ".join(broken) if broken else "strictly decreasing over B=2,4,6"
    assert verdicts.record("6 theorem bound strictly decreasing in B", not broken, detail)


def test_c6_bound_vanishes_at_large_B(verdicts, certificates):
    cfg, result = certificates
    values = []
    for Bp in (2, 4):
        params = replace(cfg.params, B=40, B_prime=Bp)
        c = bound_constants(params, None, result.eta_moments[Bp])
        edx, _ = theorem1_bound(c, cfg.spec(40), dbm_to_linear(60.0))
        values.append(edx)
    ok = all(v < 1e-6 for v in values)
    assert verdicts.record("6 E[dX] bound below 1e-6 at B=40", ok, "bounds " + ", ".join(_fmt(v) for v in values))


def test_validate_bounds_negative_control(verdicts):
    cfg = ExperimentConfig(
        trials=MILLION, powers_dBm=(60.0,), bit_pairs=((4, 4),), workers=WORKERS, corrupt=(("C11", 1e-6),)
    )
    report = run_validate_bounds(cfg)
    iiia = next(c for c in report.records if c.region == "III.A")
    detail = f"III.A bound {_fmt(iiia.bound)} vs empirical {_fmt(iiia.empirical)}"
    assert verdicts.record("validate-bounds detects C11 x 1e-6", not report.passed, detail)


# --- 7. sum-rate trends ------------------------------------------------------

SWEEP = power_sweep(0, 80, 5)
LF_PAIRS = ((2, 2), (4, 2), (2, 4), (4, 4), (6, 4))


@pytest.fixture(scope="module")
def sumrate_default():
    cfg = ExperimentConfig(
        trials=100_000, powers_dBm=SWEEP, bit_pairs=LF_PAIRS, schemes=("noma-full", "noma-lf"), workers=WORKERS
    )
    return {(r.scheme, r.P_dBm, r.B, r.B_prime): r for r in run_sumrate(cfg).records}


def test_c7a_full_beats_limited(verdicts, sumrate_default):
    bad = []
    for P in SWEEP:
        full = sumrate_default[("noma-full", P, None, None)]
        for B, Bp in LF_PAIRS:
            lf = sumrate_default[("noma-lf", P, B, Bp)]
            if full.mean < lf.mean - (full.ci95_halfwidth + lf.ci95_halfwidth):
                bad.append(f"P={P:g} ({B},{Bp})")
    detail = f"{len(SWEEP)} powers x {len(LF_PAIRS)} pairs" + (f"; violations {', '.join(bad)}" if bad else "")
    assert verdicts.record("7a full-CSI NOMA >= limited-feedback NOMA", not bad, detail)


def test_c7b_close_to_full_at_40dbm(verdicts, sumrate_default):
    full = sumrate_default[("noma-full", 40.0, None, None)].mean
    lf = sumrate_default[("noma-lf", 40.0, 6, 4)].mean
    gap = abs(full - lf) / full if full > 0 else math.inf
    detail = f"full {_fmt(full)}, limited {_fmt(lf)}, relative gap {_fmt(gap)}"
    assert verdicts.record("7b B=6 B'=4 within 5% of full CSI at 40 dBm", gap <= 0.05, detail)


def test_c7c_zero_plateau(verdicts, sumrate_default):
    low = [P for P in SWEEP if P <= 30]
    rates = [sumrate_default[("noma-lf", P, B, Bp)].mean for P in low for B, Bp in LF_PAIRS]
    top = max(sumrate_default[("noma-lf", SWEEP[-1], B, Bp)].mean for B, Bp in LF_PAIRS)
    ok = all(r == 0.0 for r in rates) and top > 0
    detail = f"max limited-feedback rate at P<=30 dBm {_fmt(max(rates))}; at {SWEEP[-1]:g} dBm {_fmt(top)}"
    assert verdicts.record("7c zero sum-rate plateau at low power", ok, detail)


def test_c7d_noma_beats_oma_at_matched_bits(verdicts):
    pairs = ((2, 2), (4, 2), (2, 4))
    matched = {pair: 2 * pair[0] + pair[1] for pair in pairs}
    powers = power_sweep(60, 80, 5)
    # oma-lf rows come from the B' values in the pair list
    cfg = ExperimentConfig(
        params=SystemParams(zeta1=0.5e-5),
        trials=100_000,
        powers_dBm=powers,
        bit_pairs=pairs + tuple((1, bp) for bp in matched.values()),
        schemes=("noma-lf", "oma-lf"),
        workers=WORKERS,
    )
    rec = {(r.scheme, r.P_dBm, r.B, r.B_prime): r for r in run_sumrate(cfg).records}
    bad = []
    for P in powers:
        for (B, Bp), total in matched.items():
            noma = rec[("noma-lf", P, B, Bp)]
            oma = rec[("oma-lf", P, None, total)]
            if noma.mean < oma.mean - (noma.ci95_halfwidth + oma.ci95_halfwidth):
                bad.append(f"P={P:g} ({B},{Bp}) {_fmt(noma.mean)} < {_fmt(oma.mean)}")
    detail = "60-80 dBm, pairs (2,2)/(4,2)/(2,4) vs OMA B'=6/10/8" + (f"; {'; '.join(bad)}" if bad else "")
    assert verdicts.record("7d NOMA >= OMA at matched feedback bits", not bad, detail)


# --- 8. rate-loss trends -----------------------------------------------------


@pytest.fixture(scope="module")
def rateloss_grid():
    # rate-loss trend scenario: zeta1 = 0.5e-5, zeta2 = 0.95
    cfg = ExperimentConfig(
        params=SystemParams(zeta1=0.5e-5), trials=MILLION, powers_dBm=(40.0, 60.0), bit_pairs=GRID, workers=WORKERS
    )
    return {(r.P_dBm, r.B, r.B_prime): r for r in run_rateloss(cfg).records}


def _relative_drop(rows):
    # (first - last) / first with a delta-method stderr
    a, b = rows[0], rows[-1]
    if a.mean_dR <= 0:
        return math.nan, math.inf
    r = (a.mean_dR - b.mean_dR) / a.mean_dR
    se = math.hypot(b.mc_stderr / a.mean_dR, b.mean_dR * a.mc_stderr / a.mean_dR**2)
    return r, se


def test_c8_rate_loss_decreasing_in_B(verdicts, rateloss_grid):
    broken = []
    for P in (40.0, 60.0):
        for Bp in (2, 4):
            rows = [rateloss_grid[(P, B, Bp)] for B in (2, 4, 6)]
            for lo, hi in zip(rows, rows[1:]):
                if lo.mean_dR - hi.mean_dR <= 3 * math.hypot(lo.mc_stderr, hi.mc_stderr):
                    broken.append(f"P={P:g} B'={Bp} B={lo.B}->{hi.B}: {_fmt(lo.mean_dR)}->{_fmt(hi.mean_dR)}")
    assert verdicts.record("8 rate loss decreasing in B", not broken, "; ".join(broken) or "all steps significant")


def test_c8_faster_decrease_at_60dbm(verdicts, rateloss_grid):
    broken = []
    for Bp in (2, 4):
        r40, s40 = _relative_drop([rateloss_grid[(40.0, B, Bp)] for B in (2, 4, 6)])
        r60, s60 = _relative_drop([rateloss_grid[(60.0, B, Bp)] for B in (2, 4, 6)])
        if not r60 - r40 > 3 * math.hypot(s40, s60):
            broken.append(f"B'={Bp}: relative drop 40 dBm {_fmt(r40)}, 60 dBm {_fmt(r60)}")
    assert verdicts.record("8 faster relative decrease at 60 dBm", not broken, "; ".join(broken) or "ok")


# --- 9. pdf bound ------------------------------------------------------------


@pytest.mark.parametrize("N", [2, 10])
def test_c9_pdf_bound(verdicts, N):
    report = run_pdfcheck(ExperimentConfig(trials=MILLION, params=SystemParams(N=N), workers=WORKERS))
    populated = [b for b in report.records if b.populated]
    failed = [b for b in populated if not b.passed]
    ratio = max(b.density / b.bound for b in populated)
    detail = f"{len(populated)} populated bins, {len(failed)} above bound, max density/bound {ratio:.3f}"
    assert verdicts.record(f"9 pdf bound holds for N={N}", bool(populated) and not failed, detail)


# --- 10. special functions ---------------------------------------------------


def test_c10_special_function_oracles(verdicts):
    mpmath.mp.dps = 40
    worst_e1 = max(
        abs(exp_integral_e1(x) - float(mpmath.e1(x))) / float(mpmath.e1(x)) for x in np.geomspace(1e-8, 600, 120)
    )
    quad_e1 = max(
        abs(exp_integral_e1(x) - integrate.quad(lambda t: math.exp(-t) / t, x, math.inf, epsabs=0, epsrel=1e-13)[0])
        / exp_integral_e1(x)
        for x in (0.01, 0.5, 1.0, 3.0, 10.0, 40.0)
    )
    worst_gamma = 0.0
    for n in range(1, 41):
        for x in np.concatenate(([0.0], np.geomspace(1e-6, 200, 40))):
            ref = float(mpmath.gammainc(n, 0, x))
            got = lower_incomplete_gamma(n, float(x))
            worst_gamma = max(worst_gamma, abs(got - ref) / ref if ref else abs(got))
    worst_beta = 0.0
    for a in np.geomspace(0.05, 80, 15):
        for b in np.geomspace(0.05, 80, 15):
            ref = float(mpmath.beta(a, b))
            worst_beta = max(worst_beta, abs(beta_function(a, b) - ref) / ref)
    ok = worst_e1 <= 1e-10 and quad_e1 <= 1e-10 and worst_gamma <= 1e-10 and worst_beta <= 1e-12
    detail = f"E1 {worst_e1:.1e} (quad {quad_e1:.1e}), gamma {worst_gamma:.1e}, beta {worst_beta:.1e}"
    assert verdicts.record("10 special-function oracles", ok, detail)


# --- 11. determinism ---------------------------------------------------------

DETERMINISM = {
    "sumrate": ["--trials", str(2 * BLOCK_SIZE + 77), "--pmin-dbm", "40", "--pmax-dbm", "70", "--pair", "2:2", "--pair", "4:2"],
    "rateloss": ["--trials", str(2 * BLOCK_SIZE + 77), "--pair", "2:2", "--pair", "4:4"],
    "calibrate": ["--trials", "100000", "--pair", "4:2"],
    "validate-bounds": ["--trials", str(2 * BLOCK_SIZE + 77), "--pair", "2:2", "--pair", "4:2"],
    "pdfcheck": ["--trials", str(2 * BLOCK_SIZE + 77), "--n", "4"],
}


def test_c11_determinism_across_workers(verdicts, tmp_path):
    differing = []
    for command, args in DETERMINISM.items():
        outputs = []
        for workers in (1, 3):
            out = tmp_path / f"{command}-{workers}.csv"
            code = cli.main([command, *args, "--workers", str(workers), "--out", str(out)])
            assert code in (0, 1)
            outputs.append(out.read_bytes())
        if outputs[0] != outputs[1]:
            differing.append(command)
    detail = f"{len(DETERMINISM)} commands, workers 1 vs 3" + (f"; differ: {', '.join(differing)}" if differing else "")
    assert verdicts.record("11 byte-identical output across workers", not differing, detail)
