"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the per-criterion lines are
written straight to the terminal (bypassing capture) so they appear in any
mode. Expected values are produced by the independent oracles coded here
(adaptive quadrature, closed forms evaluated through the package's own
special functions, exact discrete variances), never by the code path under
test.
"""

import functools
import math
import sys
import time

import numpy as np
import pytest
from scipy import integrate

import conftest

from spde_lab.conditions import (
    SpectralMeasure,
    check_dalang_riesz,
    check_fractional,
    dalang_gronwall_certificate,
    dalang_integral_numeric,
    predicted_holder,
)
from spde_lab.grids import SpaceTimeGrid, TimeGrid
from spde_lab.kernels import OperatorSpec
from spde_lab.moments import (
    estimate_moments,
    fit_log_slope,
    fk_second_moment,
    intermittency_check,
    jackknife_stderr,
    linear_heat_holder_study,
    lyapunov_closed_form,
)
from spde_lab.noise import (
    NoiseSpec,
    cholesky_with_jitter,
    fbm_covariance_matrix,
    sample_bm_paths,
    sample_fbm_paths,
    sample_white_noise_sheet,
)
from spde_lab.rng import RngStream, map_replica_blocks
from spde_lab.solvers import (
    LipschitzFn,
    WickPamSampler,
    chaos_geometric,
    geometric_bm,
    geometric_fbm,
    ito_sum,
    linear_heat_point_samples,
    linear_heat_point_variance,
    pam_chaos_term_variance,
    pam_second_moment,
    solve_nonlinear_heat_picard,
)
from spde_lab.special import HermiteTable, log_gamma, std_normal_cdf


def criterion(num, description, budget_s=None):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.time()
            try:
                fn(*args, **kwargs)
            except BaseException:
                _report(num, description, "FAIL", time.time() - start)
                raise
            elapsed = time.time() - start
            _report(num, description, "PASS", elapsed)
            if budget_s is not None:
                assert elapsed < budget_s, f"runtime {elapsed:.1f}s over budget {budget_s}s"

        return wrapper

    return decorate


def _report(num, description, status, elapsed):
    line = f"ACCEPTANCE {num:>2}: {status} ({elapsed:6.1f}s) {description}"
    conftest.results.append(line)
    print(line, file=sys.__stdout__, flush=True)


@criterion(1, "multiplicative-heat second moment: chaos sum equals closed form", 5)
def test_criterion_1_pam_second_moment():
    closed = 2.0 * math.exp(0.25) * std_normal_cdf(math.sqrt(0.5))
    partial, reported_closed = pam_second_moment(1.0, 60)
    assert reported_closed == pytest.approx(closed, rel=1e-14)
    assert abs(partial - closed) < 1e-10
    assert closed == pytest.approx(1.9524, abs=5e-5)
    best = min(
        _timed(lambda: pam_second_moment(1.0, 60)) for _ in range(3)
    )
    assert best < 1e-3, f"pam_second_moment took {best * 1e3:.3f} ms"


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


@criterion(2, "chaos term variances match adaptive simplex quadrature", 10)
def test_criterion_2_chaos_term_vs_quadrature():
    # independent oracle: nested adaptive quadrature of
    # (4 pi)^(-n/2) * int over the ordered simplex of prod gaps^(-1/2),
    # with the algebraic endpoint singularities handled by QUADPACK weights
    def inner1(t2):
        val, _ = integrate.quad(
            lambda t1: 1.0, 0.0, t2, weight="alg", wvar=(0.0, -0.5), epsabs=1e-12
        )
        return val

    oracle2, _ = integrate.quad(
        inner1, 0.0, 1.0, weight="alg", wvar=(0.0, -0.5), epsabs=1e-10
    )
    oracle2 /= 4.0 * math.pi

    term2 = pam_chaos_term_variance(2, 1.0)
    # the simplex integral fixes the constant: (t/4)^(n/2)/Gamma(n/2+1),
    # i.e. 0.25 at (n, t) = (2, 1); a (t/2)^(n/2) variant would give 0.5,
    # which this oracle rules out
    assert term2 == pytest.approx(0.25, rel=1e-12)
    assert abs(term2 - oracle2) < 1e-6

    def inner2(t3):
        val, _ = integrate.quad(
            inner1, 0.0, t3, weight="alg", wvar=(0.0, -0.5), epsabs=1e-9
        )
        return val

    oracle3, _ = integrate.quad(
        inner2, 0.0, 1.0, weight="alg", wvar=(0.0, -0.5), epsabs=1e-8
    )
    oracle3 /= (4.0 * math.pi) ** 1.5
    assert abs(pam_chaos_term_variance(3, 1.0) - oracle3) < 1e-4


@criterion(3, "geometric BM and geometric fBm second moments hit e", 60)
def test_criterion_3_geometric_moments():
    # X(1)^2 is lognormal with log-sd 2, so the empirical stderr itself is
    # noisy; the pinned seed keeps the draw a comfortable <2 sigma from e
    grid = TimeGrid(1.0, 1)
    paths = sample_bm_paths(grid, RngStream(101), 100_000)
    x = geometric_bm(grid.nodes(), paths)[:, -1]
    row = estimate_moments(x, [2.0], model="gbm", t=1.0)[0]
    assert abs(row.estimate - math.e) <= 3.0 * row.stderr

    paths = sample_fbm_paths(0.75, grid, RngStream(102), 100_000)
    x = geometric_fbm(grid.nodes(), paths, 0.75)[:, -1]
    row = estimate_moments(x, [2.0], model="gfbm", t=1.0)[0]
    assert abs(row.estimate - math.e) <= 3.0 * row.stderr


@criterion(4, "geometric chaos series match exp closed forms to 1e-8", 1.5)
def test_criterion_4_chaos_series_closed_forms():
    ts = (0.25, 0.5, 1.0, 1.5, 2.0)
    bs = (-2.0, -1.0, 0.0, 1.0, 2.0)
    for t in ts:
        for b in bs:
            assert abs(chaos_geometric(t, b, 60, "bm") - math.exp(b - t / 2)) < 1e-8
            for h in (0.6, 0.75, 0.9):
                target = math.exp(b - t ** (2 * h) / 2)
                assert abs(chaos_geometric(t, b, 60, "fbm", h) - target) < 1e-8


@criterion(5, "Lyapunov table recovered from exact moment curves", 10)
def test_criterion_5_lyapunov_table():
    from spde_lab.solvers import pam_log_second_moment

    ts = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    for p in (2.0, 3.0, 4.0):
        lam, kappa = lyapunov_closed_form("gbm", p)
        assert kappa == 1.0
        fit = fit_log_slope(ts, np.exp(p * (p - 1) / 2 * ts), kappa)
        assert abs(fit - lam) < 1e-8

    big = np.array([100.0, 125.0, 150.0, 175.0, 200.0])
    vals = np.exp([pam_log_second_moment(t) for t in big])
    lam, kappa = lyapunov_closed_form("pam_white", 2.0)
    assert lam == pytest.approx(0.25)
    assert abs(fit_log_slope(big, vals, kappa) - 0.25) < 1e-8

    h = 0.75
    ts2 = np.array([0.5, 1.0, 1.5, 2.0, 2.5])
    for p in (2.0, 3.0, 4.0):
        lam, kappa = lyapunov_closed_form("gfbm", p, hurst=h)
        assert kappa == pytest.approx(2 * h)
        fit = fit_log_slope(ts2, np.exp(p * (p - 1) / 2 * ts2 ** (2 * h)), kappa)
        assert abs(fit - lam) < 1e-8

    ps = [2.0, 3.0, 4.0]
    lams = [lyapunov_closed_form("pam_white", p)[0] for p in ps]
    assert intermittency_check(ps, lams)


@criterion(6, "closed-form and quadrature condition verdicts agree on the sweep", 5)
def test_criterion_6_condition_coherence():
    alphas = np.arange(0.25, 1.751, 0.25)
    hursts = np.arange(0.55, 0.951, 0.10)
    cases = 0
    for d in (1, 2, 3):
        for alpha in alphas:
            if not alpha < d:
                continue
            mu = SpectralMeasure.riesz_dual(float(alpha), d)
            dal_closed = check_dalang_riesz(float(alpha), d)
            dal_numeric = dalang_integral_numeric(mu, 1.0, d)
            assert dal_closed.satisfied == dal_numeric.satisfied
            for h in hursts:
                h = float(h)
                heat_c = check_fractional("heat", float(alpha), h, d)
                heat_n = dalang_integral_numeric(mu, 2 * h, d)
                assert heat_c.satisfied == heat_n.satisfied
                wave_c = check_fractional("wave", float(alpha), h, d)
                wave_n = dalang_integral_numeric(mu, h + 0.5, d)
                assert wave_c.satisfied == wave_n.satisfied
                cases += 3
    assert cases >= 45


@criterion(7, "linear heat variance hits g-integral within band; bias shrinks", 120)
def test_criterion_7_linear_heat_variance():
    target = 1.0 / math.sqrt(math.pi)
    grid = SpaceTimeGrid(TimeGrid(1.0, 1024), 8.0, 256)  # dt = 2^-10, L = 8
    samples = linear_heat_point_samples(
        grid, 1024, 128, 10_000, RngStream(4242), block_size=500, threads=4
    )
    var = samples.var(ddof=1)
    stderr = var * math.sqrt(2.0 / samples.size)
    assert abs(var - target) <= 3.0 * stderr + 0.05 * target
    # deterministic discretization bias shrinks under dt, dx -> dt/2, dx/2
    bias = abs(linear_heat_point_variance(grid, 1024, 128) - target)
    refined = SpaceTimeGrid(TimeGrid(1.0, 2048), 8.0, 512)
    bias_refined = abs(linear_heat_point_variance(refined, 2048, 256) - target)
    assert bias_refined < bias


@criterion(8, "Picard contraction and extension-of-Gronwall certificate", 120)
def test_criterion_8_picard_and_certificate():
    grid = SpaceTimeGrid(TimeGrid(0.5, 64), 6.0, 128)
    trace = solve_nonlinear_heat_picard(
        LipschitzFn.identity(), grid, RngStream(88), 8, 1000, initial=1.0
    )
    diffs = trace.sup_sq_diffs
    assert diffs[7] < 1e-3 * diffs[0]

    cert = dalang_gronwall_certificate(
        OperatorSpec("heat", 1), 0.5, M=1.0, n_max=20, mc_replicas=100_000,
        rng=RngStream(99),
    )
    # partial sums of sqrt(a_n) are Cauchy: the last five increments sum below 1e-3
    assert cert.tail(2, last=5) < 1e-3
    assert np.all(np.diff(cert.partial_sums_p2) >= 0)


@criterion(9, "two-path exponential functional vs Wick-chaos marching", 300)
def test_criterion_9_cross_estimator_second_moment():
    hurst, alpha, t = 0.7, 0.5, 0.25
    spec = NoiseSpec.fractional_riesz(hurst, alpha)
    fk = fk_second_moment(t, spec, 1, 10_000, 128, RngStream(777), threads=2)

    grid = SpaceTimeGrid(TimeGrid(t, 32), 2.0, 64)
    wick = WickPamSampler(grid, spec)
    sm = np.concatenate(
        [wick.second_moment_samples(RngStream(31, b), 500) for b in range(6)]
    )
    wick_est = sm.mean()
    wick_se = jackknife_stderr(sm)

    band = 3.0 * (fk.stderr + wick_se) + 0.10 * fk.estimate
    assert abs(fk.estimate - wick_est) <= band
    assert fk.estimate >= 1.0 and wick_est >= 1.0


@criterion(10, "empirical regularity exponents 1/4 (time) and 1/2 (space)", 180)
def test_criterion_10_holder_exponents():
    assert predicted_holder("heat", eta=0.5) == (0.25, 0.5)
    grid = SpaceTimeGrid(TimeGrid(0.25, 1024), 4.0, 512)
    # smallest lags sit at the midpoint-smoothing scale of the scheme, so the
    # time fit starts at lag 4 (lag 1 is always excluded, see moments)
    study = linear_heat_holder_study(
        grid,
        replicas=192,
        rng=RngStream(1010),
        time_lags=(4, 8, 16, 32, 64),
        space_lags=(2, 4, 8, 16),
        base_node=768,
        threads=2,
    )
    t_exp = study["time_fit"].exponent
    s_exp = study["space_fit"].exponent
    assert abs(t_exp - 0.25) <= 0.05, f"time exponent {t_exp:.4f}"
    assert abs(s_exp - 0.50) <= 0.05, f"space exponent {s_exp:.4f}"


@criterion(11, "property suites: special functions, PSD, residuals, determinism", 120)
def test_criterion_11_property_suites():
    # Hermite recurrence and generating function
    table = HermiteTable(200)
    for x in (-5.0, 0.3, 5.0):
        mant, exp2 = table.values_scaled(200, x)
        for n in range(1, 200):
            rhs = x * mant[n] * 2.0 ** float(exp2[n] - exp2[n + 1]) - n * mant[
                n - 1
            ] * 2.0 ** float(exp2[n - 1] - exp2[n + 1])
            assert mant[n + 1] == pytest.approx(rhs, rel=1e-12, abs=1e-300)
    for t_par, x in [(0.5, 2.0), (-1.0, -3.0), (1.0, 1.5)]:
        h = table.values(30, x)
        series = 1.0 + sum(
            t_par**n / math.factorial(n) * h[n] for n in range(1, 31)
        )
        assert abs(math.exp(t_par * x - t_par**2 / 2) - series) < 1e-10

    # Phi symmetry and Gamma functional equation
    for x in np.linspace(0.0, 8.0, 33):
        assert abs(std_normal_cdf(x) + std_normal_cdf(-x) - 1.0) <= 1e-14
    for x in np.arange(0.5, 21.0, 1.0):
        assert math.exp(log_gamma(x + 1)) == pytest.approx(
            x * math.exp(log_gamma(x)), rel=1e-11
        )

    # fBm covariance PSD with tiny jitter up to 512 nodes
    for h in (0.55, 0.75, 0.95):
        cov = fbm_covariance_matrix(h, TimeGrid(1.0, 512).nodes()[1:])
        _, jitter = cholesky_with_jitter(cov)
        assert jitter <= 1e-10 * np.trace(cov)

    # Ito-formula residual decays at rate ~ sqrt(dt)
    rms = []
    for k, n in enumerate((128, 256, 512)):
        paths = sample_bm_paths(TimeGrid(1.0, n), RngStream(21, k), 4000)
        resid = (
            paths[:, -1] ** 2
            - 2.0 * ito_sum(paths[:, :-1], np.diff(paths, axis=1))
            - 1.0
        )
        rms.append(float(np.sqrt(np.mean(resid**2))))
    assert rms[0] / rms[1] >= 1.3 and rms[1] / rms[2] >= 1.3

    # Walsh isometry for a deterministic step integrand
    grid = SpaceTimeGrid(TimeGrid(0.5, 4), 1.0, 4)
    phi = np.arange(16.0).reshape(4, 4) - 5.0
    vals = np.array(
        [
            np.sum(phi * sample_white_noise_sheet(grid, RngStream(33, r)).values)
            for r in range(4000)
        ]
    )
    target = np.sum(phi**2) * grid.cell_volume
    assert abs(vals.var(ddof=1) - target) <= 3.0 * math.sqrt(2.0 / vals.size) * target

    # determinism under thread counts (ordered-reduction contract)
    def block(gen, count):
        return gen.standard_normal((count, 7)).cumsum(axis=1)

    base = map_replica_blocks(2000, block, RngStream(5150), block_size=128, threads=1)
    for threads in (2, 4):
        again = map_replica_blocks(
            2000, block, RngStream(5150), block_size=128, threads=threads
        )
        assert np.array_equal(base, again)
    g7 = SpaceTimeGrid(TimeGrid(0.25, 64), 4.0, 64)
    a = linear_heat_point_samples(g7, 64, 32, 600, RngStream(606), threads=1)
    b = linear_heat_point_samples(g7, 64, 32, 600, RngStream(606), threads=4)
    assert np.array_equal(a, b)
