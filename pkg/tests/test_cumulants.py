from fractions import Fraction
from math import factorial

import numpy as np
import pytest

from pfclt.cumulants import (
    CumulantReport,
    clt_diagnostic,
    counting_cumulants_from_traces,
    cumulant_counts,
    cumulant_linear_stat,
    expectation_variance,
    stirling_v,
    trace_decomposition_check,
    v_k_traces,
)
from pfclt.discretize import StepFunction, discretize_kernel, grid_for_density
from pfclt.errors import SizeError, ValidationError
from pfclt.frcp import FrcpData
from pfclt.kernels import MatrixKernel, sinc_s, sine1_kernel, sine4_kernel


def compositions(n, k):
    if k == 1:
        yield (n,)
        return
    for first in range(1, n - k + 2):
        for rest in compositions(n - first, k - 1):
            yield (first,) + rest


def stirling_oracle(n, k):
    # defining sum over compositions with exact rational arithmetic
    total = Fraction(0)
    for parts in compositions(n, k):
        denom = 1
        for l in parts:
            denom *= factorial(l)
        total += Fraction(factorial(n), denom)
    total /= factorial(k)
    assert total.denominator == 1
    return int(total)


def test_stirling_examples():
    for n in range(1, 9):
        assert stirling_v(n, 1) == 1
    assert stirling_v(3, 2) == 3
    assert stirling_v(4, 2) == 7
    assert stirling_v(0, 0) == 0
    assert stirling_v(5, 0) == 0


def test_stirling_matches_composition_sum():
    for n in range(1, 9):
        for k in range(1, n + 1):
            assert stirling_v(n, k) == stirling_oracle(n, k)


def test_stirling_range_guard():
    with pytest.raises(ValidationError):
        stirling_v(31, 2)
    with pytest.raises(ValidationError):
        stirling_v(4, 5)
    with pytest.raises(ValidationError):
        stirling_v(3, -1)


def test_first_trace_is_expected_count():
    assert v_k_traces(sine4_kernel(), 5.0, 1)[0] == pytest.approx(5.0, rel=1e-10)
    assert v_k_traces(sine1_kernel(), 5.0, 1)[0] == pytest.approx(10.0, rel=1e-10)


def test_traces_reduce_to_scalar_powers_without_offdiagonal():
    zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    synth = MatrixKernel(name="diag-test", lam=0.5, a=sinc_s, d=zero, b_smooth=zero)
    L = 4.0
    v = v_k_traces(synth, L, 4, nodes_per_unit=16)
    g = grid_for_density((-L, L), 16)
    a = discretize_kernel(lambda x, y: sinc_s(x - y), g).matrix
    power = np.eye(g.size)
    for k in range(1, 5):
        power = power @ a
        assert v[k - 1] == pytest.approx(0.5**k * np.trace(power), rel=1e-12)


def test_kmax_and_nmax_guards():
    with pytest.raises(SizeError):
        v_k_traces(sine4_kernel(), 2.0, 9)
    with pytest.raises(SizeError):
        cumulant_counts(sine4_kernel(), 2.0, 9)
    box = StepFunction(((1.0, -1.0, 1.0),))
    with pytest.raises(SizeError):
        cumulant_linear_stat(sine4_kernel(), box, 2.0, 7)


@pytest.mark.parametrize("kernel", [sine4_kernel(), sine1_kernel()])
def test_counting_report_consistency(kernel):
    # construction itself enforces c_1 = E and c_2 = Var-For; n_max = 8
    # additionally exercises the two-form agreement at every n
    rep = cumulant_counts(kernel, 10.0, 8, nodes_per_unit=16)
    assert rep.c_n[0] == pytest.approx(rep.expectation, rel=1e-10)
    assert rep.c_n[1] == pytest.approx(rep.variance, rel=1e-6)
    assert len(rep.c_n) == 8 and len(rep.normalized) == 8


@pytest.mark.parametrize("kernel", [sine4_kernel(), sine1_kernel()])
def test_composition_path_reproduces_counting_path(kernel):
    # L chosen so the smallest cumulant stays well above the floating-point
    # cancellation floor of the alternating trace sums
    box = StepFunction(((1.0, -1.0, 1.0),))
    lin = cumulant_linear_stat(kernel, box, 5.0, 5, nodes_per_unit=16)
    cnt = cumulant_counts(kernel, 5.0, 5, nodes_per_unit=16)
    for a, b in zip(lin.c_n, cnt.c_n):
        assert a == pytest.approx(b, rel=1e-8)


def test_cumulant_homogeneity_under_scaling():
    kern = sine4_kernel()
    phi = StepFunction(((1.0, 0.0, 1.0), (-1.0, 1.0, 2.0)))
    c = 2.5
    base = cumulant_linear_stat(kern, phi, 8.0, 4, nodes_per_unit=8)
    scaled = cumulant_linear_stat(kern, c * phi, 8.0, 4, nodes_per_unit=8)
    for n, (x, y) in enumerate(zip(base.c_n, scaled.c_n), start=1):
        assert y == pytest.approx(c**n * x, rel=1e-12)


def test_step_variance_against_composition_path():
    # c_2 from the composition traces vs the direct double quadrature
    kern = sine4_kernel()
    phi = StepFunction(((1.0, 0.0, 1.0), (-1.0, 1.0, 2.0)))
    rep = cumulant_linear_stat(kern, phi, 10.0, 2, nodes_per_unit=16)
    _, var = expectation_variance(kern, phi, 10.0, nodes_per_unit=16)
    assert rep.c_n[1] == pytest.approx(var, rel=1e-6)


def test_step_expectation_closed_form():
    # E = (1/2) sum lam_i (b_i - a_i) L for the symplectic kernel
    phi = StepFunction(((2.0, 0.0, 1.0), (-1.0, 1.5, 2.0)))
    L = 10.0
    e, _ = expectation_variance(sine4_kernel(), phi, L)
    assert e == pytest.approx(0.5 * (2.0 * 1.0 - 1.0 * 0.5) * L, rel=1e-10)
    e1, _ = expectation_variance(sine1_kernel(), phi, L)
    assert e1 == pytest.approx((2.0 * 1.0 - 1.0 * 0.5) * L, rel=1e-10)


def test_touching_intervals_equal_single_interval():
    kern = sine4_kernel()
    split = StepFunction(((1.0, 0.0, 1.0), (1.0, 1.0, 2.0)))
    merged = StepFunction(((1.0, 0.0, 2.0),))
    L = 10.0
    e1, v1 = expectation_variance(kern, split, L)
    e2, v2 = expectation_variance(kern, merged, L)
    assert e1 == pytest.approx(e2, rel=1e-8)
    assert v1 == pytest.approx(v2, rel=1e-8)


def test_trace_decomposition_residuals():
    assert trace_decomposition_check(sine4_kernel(), 25.0, 2).residual <= 1e-5
    assert trace_decomposition_check(sine1_kernel(), 25.0, 3).residual <= 1e-4


def test_trace_decomposition_degenerate_kernel():
    zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    synth = MatrixKernel(name="diag-test", lam=1.0, a=sinc_s, d=zero, b_smooth=zero)
    data = FrcpData(rank_bound=0, alpha=0.0, beta=0.0, lam=1.0, f=(), g=(), h=(), e=())
    for k in (2, 3):
        rep = trace_decomposition_check(synth, 10.0, k, frcp_data=data)
        assert rep.residual <= 1e-12


def test_trace_decomposition_k_guard():
    with pytest.raises(ValidationError):
        trace_decomposition_check(sine4_kernel(), 10.0, 5)


def test_clt_diagnostic_gaussian_zeros():
    rep = CumulantReport(
        L=1.0,
        expectation=3.0,
        variance=2.0,
        v_k=(3.0, 1.0),
        c_n=(3.0, 2.0, 0.0, 0.0),
        normalized=(3.0 / 2.0**0.5, 1.0, 0.0, 0.0),
    )
    assert clt_diagnostic(rep) == [0.0, 0.0]
