"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one `ACCEPTANCE <id> ...: PASS/FAIL` line (run with -s to
see them) and then asserts.  Session fixtures share the expensive scans
between criteria that are defined over the same parameter grids.
"""

import time

import numpy as np
import pytest

from pfclt.cumulants import (
    clt_diagnostic,
    cumulant_counts,
    cumulant_linear_stat,
    expectation_variance,
    trace_decomposition_check,
)
from pfclt.discretize import (
    StepFunction,
    block_operator,
    block_partial_trace,
    grid_for_density,
    kernel_operators,
    op_product,
)
from pfclt.ensembles import EnsembleConfig, fluctuation_scan
from pfclt.frcp import verify_frcp
from pfclt.kernels import (
    correlation_at,
    is_minus_half_norm_sq,
    kernel_by_name,
    sine1_kernel,
    sine4_kernel,
)
from pfclt.skewlin import determinant, pfaffian, pfaffian_bruteforce

from oracles import fit_log_slope

SCAN_LS = [25.0, 50.0, 100.0, 200.0]
SCAN_DENSITY = 8.0
MC_SEED = 20260809


def report(cid, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {cid}: {status}  {detail}")
    return ok


@pytest.fixture(scope="session")
def count_reports():
    out = {}
    for name in ("sine4", "sine1"):
        kern = kernel_by_name(name)
        out[name] = [
            cumulant_counts(kern, L, 4, nodes_per_unit=SCAN_DENSITY) for L in SCAN_LS
        ]
    return out


@pytest.fixture(scope="session")
def mc_scans():
    out = {}
    for beta in (4, 1):
        cfg = EnsembleConfig(
            beta=beta, matrix_size=2000, samples=10000, seed=MC_SEED, window=32.0
        )
        out[beta] = fluctuation_scan(cfg, [8.0, 16.0, 32.0])
    return out


def test_c01_pfaffian_correctness():
    t0 = time.time()
    rng = np.random.default_rng(101)
    dims = rng.choice([2, 4, 6, 8, 10, 12], size=200)
    ok = True
    worst_det, worst_bf = 0.0, 0.0
    for dim in dims:
        x = rng.standard_normal((dim, dim))
        m = (x - x.T) / 2.0
        pf = pfaffian(m)
        det = determinant(m)
        bf = pfaffian_bruteforce(m)
        err_det = abs(pf * pf - det) / max(abs(det), 1e-300)
        err_bf = abs(pf - bf) / max(abs(bf), 1e-300)
        worst_det = max(worst_det, err_det)
        worst_bf = max(worst_bf, err_bf)
        ok = ok and err_det <= 1e-9 and err_bf <= 1e-10
    elapsed = time.time() - t0
    assert report(
        "1 pfaffian-vs-det-and-bruteforce",
        ok,
        f"max rel: pf^2-det {worst_det:.2e}, pf-bruteforce {worst_bf:.2e} "
        f"({elapsed:.1f}s, 200 matrices)",
    )


def test_c02_intensities():
    rng = np.random.default_rng(202)
    pts = rng.uniform(-50, 50, size=10)
    worst = 0.0
    for x in pts:
        worst = max(worst, abs(correlation_at(sine4_kernel(), [x])[0] - 0.5))
        worst = max(worst, abs(correlation_at(sine1_kernel(), [x])[0] - 1.0))
    assert report("2 intensities", worst <= 1e-12, f"max abs dev {worst:.2e}")


def _variance_slope_criterion(cid, name, target, count_reports):
    variances = [rep.variance for rep in count_reports[name]]
    slope = fit_log_slope(SCAN_LS, variances)
    rel = abs(slope - target) / target
    assert report(
        cid, rel <= 0.10, f"slope {slope:.6f} vs {target:.6f} (rel {rel:.2%})"
    )


def test_c03_variance_slope_sine4(count_reports):
    _variance_slope_criterion(
        "3 variance-slope-sine4-counts", "sine4", 1.0 / (2 * np.pi**2), count_reports
    )


def test_c04_variance_slope_sine1(count_reports):
    _variance_slope_criterion(
        "4 variance-slope-sine1-counts", "sine1", 2.0 / np.pi**2, count_reports
    )


def test_c05_step_variance_constants():
    t0 = time.time()
    kern = sine4_kernel()
    cases = [
        ("touching", StepFunction(((1.0, 0.0, 1.0), (-1.0, 1.0, 2.0))),
         3.0 / (2 * np.pi**2)),
        ("separated", StepFunction(((1.0, 0.0, 1.0), (1.0, 2.0, 3.0))),
         1.0 / np.pi**2),
    ]
    ok = True
    details = []
    for label, phi, target in cases:
        variances = [
            expectation_variance(kern, phi, L, nodes_per_unit=SCAN_DENSITY)[1]
            for L in SCAN_LS
        ]
        slope = fit_log_slope(SCAN_LS, variances)
        rel = abs(slope - target) / target
        ok = ok and rel <= 0.15
        details.append(f"{label}: slope {slope:.5f} vs {target:.5f} (rel {rel:.2%})")
    assert report(
        "5 step-variance-constants", ok, "; ".join(details) + f" ({time.time()-t0:.0f}s)"
    )


def test_c06_frcp_rank_and_closed_form():
    t0 = time.time()
    ok = True
    worst_ratio, worst_res = 0.0, 0.0
    for name in ("sine4", "sine1"):
        kern = kernel_by_name(name)
        for L in (10.0, 25.0, 50.0):
            chk = verify_frcp(kern, L, n_nodes=1024)
            ratio = max(chk.first.ratio, chk.second.ratio)
            res = max(chk.first.residual, chk.second.residual)
            worst_ratio = max(worst_ratio, ratio)
            worst_res = max(worst_res, res)
            ok = ok and ratio <= 1e-6 and res <= 1e-5
    assert report(
        "6 frcp-rank-and-closed-form",
        ok,
        f"worst sigma ratio {worst_ratio:.2e}, worst residual {worst_res:.2e} "
        f"({time.time()-t0:.0f}s)",
    )


def test_c07_trace_decomposition():
    worst = 0.0
    for name in ("sine4", "sine1"):
        kern = kernel_by_name(name)
        for k in (2, 3):
            worst = max(worst, trace_decomposition_check(kern, 25.0, k).residual)
    assert report("7 trace-decomposition", worst <= 1e-4, f"worst residual {worst:.2e}")


def test_c08_cycle_integral_identity():
    worst = 0.0
    for name in ("sine4", "sine1"):
        kern = kernel_by_name(name)
        grid = grid_for_density((-10.0, 10.0), 16)
        a, d, b, a_dag = kernel_operators(kern, grid)
        kk = block_operator(a, d, b, a_dag, kern.lam)
        power = kk
        for k in range(2, 5):
            power = op_product(power, kk)
            w = block_partial_trace(power)
            scale = np.max(np.abs(w))
            dev = max(abs(w[0, 1]), abs(w[1, 0]), abs(w[0, 0] - w[1, 1]))
            worst = max(worst, dev / scale)
    assert report(
        "8 cycle-integrals-multiple-of-identity", worst <= 1e-6,
        f"worst relative deviation {worst:.2e}",
    )


def test_c09_cumulant_consistency():
    ok = True
    details = []
    for name in ("sine4", "sine1"):
        kern = kernel_by_name(name)
        rep = cumulant_counts(kern, 25.0, 2, nodes_per_unit=16)
        rel_var = abs(rep.c_n[1] - rep.variance) / rep.variance
        ok = ok and rel_var <= 1e-6
        box = StepFunction(((1.0, -1.0, 1.0),))
        lin = cumulant_linear_stat(kern, box, 5.0, 5, nodes_per_unit=16)
        cnt = cumulant_counts(kern, 5.0, 5, nodes_per_unit=16)
        rel_c = max(
            abs(a - b) / abs(b) for a, b in zip(lin.c_n, cnt.c_n)
        )
        ok = ok and rel_c <= 1e-8
        details.append(f"{name}: c2-vs-VarFor {rel_var:.2e}, paths {rel_c:.2e}")
    assert report("9 cumulant-consistency", ok, "; ".join(details))


@pytest.mark.parametrize("name", ["sine4", "sine1"])
@pytest.mark.parametrize("n", [3, 4])
def test_c10_clt_diagnostic(name, n, count_reports):
    reports = count_reports[name]
    series = [abs(clt_diagnostic(rep)[n - 3]) for rep in reports]
    decreasing = all(b < a for a, b in zip(series, series[1:]))
    assert report(
        f"10 clt-diagnostic-{name}-c{n}",
        decreasing,
        f"|c{n}|/Var^({n}/2): " + " ".join(f"{v:.3e}" for v in series),
    )


def test_c11_antiderivative_tail_norm():
    ts = [1.0, 10.0, 100.0, 1000.0, 10000.0]
    vals = [is_minus_half_norm_sq(t) for t in ts]
    ok = all(v <= 1.0 for v in vals) and all(b > a for a, b in zip(vals, vals[1:]))
    assert report(
        "11 tail-norm-bound", ok, "norms " + " ".join(f"{v:.4f}" for v in vals)
    )


MC_LS = [8.0, 16.0, 32.0]


@pytest.mark.parametrize("beta", [4, 1])
def test_c12_mean_counts(beta, mc_scans):
    intensity = 1.0 if beta == 4 else 2.0
    ok = True
    details = []
    for L, rep in zip(MC_LS, mc_scans[beta]):
        se = np.sqrt(rep.variance / len(rep.values))
        dev = abs(rep.mean - intensity * L)
        ok = ok and dev <= 3 * se
        details.append(f"L={L:g} dev {dev:.4f} (3SE {3*se:.4f})")
    assert report(f"12 mc-mean-counts-beta{beta}", ok, "; ".join(details))


@pytest.mark.parametrize("beta", [4, 1])
def test_c12_variance_slope(beta, mc_scans):
    target = 1.0 / (2 * np.pi**2) if beta == 4 else 2.0 / np.pi**2
    slope = fit_log_slope(MC_LS, [rep.variance for rep in mc_scans[beta]])
    rel = abs(slope - target) / target
    assert report(
        f"12 mc-variance-slope-beta{beta}",
        rel <= 0.25,
        f"slope {slope:.5f} vs {target:.5f} (rel {rel:.1%})",
    )


@pytest.mark.parametrize("beta", [4, 1])
def test_c12_ks_normality(beta, mc_scans):
    ks = mc_scans[beta][-1].ks_distance
    assert report(
        f"12 mc-ks-normality-beta{beta}", ks <= 0.02,
        f"KS at L=32: {ks:.4f} (threshold 0.02)",
    )


@pytest.mark.parametrize("beta", [4, 1])
def test_mc_k_statistics_within_4se(beta, mc_scans):
    # skewness / excess-kurtosis k-statistics of the L=32 counts vanish
    # within 4 standard errors at the full sample size
    rep = mc_scans[beta][-1]
    n = len(rep.values)
    se3 = np.sqrt(6.0 / n) * rep.variance**1.5
    se4 = np.sqrt(24.0 / n) * rep.variance**2
    ok = abs(rep.k3) <= 4 * se3 and abs(rep.k4) <= 4 * se4
    assert report(
        f"invariant mc-k-statistics-beta{beta}", ok,
        f"k3 {rep.k3:.4f} (4SE {4*se3:.4f}), k4 {rep.k4:.4f} (4SE {4*se4:.4f})",
    )
