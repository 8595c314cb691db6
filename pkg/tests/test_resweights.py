import math

import numpy as np
import pytest

from orderfit.params import DistributionKind, PlottingScheme
from orderfit.resweights import (
    MomentMethod,
    RankError,
    adaptive_gauss_legendre,
    asymptotic_residual_cov,
    asymptotic_residual_var,
    loglogistic_residual_mean,
    loglogistic_residual_var,
    mc_covariance,
    moment_table,
    plotting_position,
    read_table_csv,
    weibull_residual_mean,
    weibull_residual_second_moment,
    weibull_residual_var,
    write_table_csv,
)

from oracles import beta_order_moment, logit, loglog

PI2_6 = math.pi**2 / 6
EULER = 0.5772156649015329
LL = DistributionKind.LOGLOGISTIC
WB = DistributionKind.WEIBULL
LG = DistributionKind.LOGISTIC


# log-logistic moments

@pytest.mark.parametrize("r, n, expected", [
    (1, 2, -1.0),
    (2, 2, 1.0),
    (8, 15, 0.0),
    (1, 15, -3.2515623265623266),  # -H_14
])
def test_loglogistic_mean(r, n, expected):
    assert loglogistic_residual_mean(r, n) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("r, n, expected", [
    (1, 15, 1.7138722946959102),   # pi^2/6 + psi'(15)
    (8, 15, 0.26627402938806285),  # 2 psi'(8), from the partial sum of 1/k^2
    (1, 1, math.pi**2 / 3),
])
def test_loglogistic_var(r, n, expected):
    assert loglogistic_residual_var(r, n) == pytest.approx(expected, abs=1e-12)


def test_loglogistic_moments_match_quadrature():
    for n in (2, 5, 9):
        for r in range(1, n + 1):
            m1 = beta_order_moment(r, n, 1, logit)
            m2 = beta_order_moment(r, n, 2, logit)
            assert loglogistic_residual_mean(r, n) == pytest.approx(m1, abs=1e-9)
            assert loglogistic_residual_var(r, n) == pytest.approx(m2 - m1 * m1, abs=1e-8)


def test_loglogistic_symmetry():
    for n in range(1, 201):
        for r in range(1, n + 1):
            s = n + 1 - r
            assert abs(loglogistic_residual_var(r, n) - loglogistic_residual_var(s, n)) <= 1e-12
            assert abs(loglogistic_residual_mean(r, n) + loglogistic_residual_mean(s, n)) <= 1e-12


def test_sum_of_variances_identity():
    from orderfit.specfun import trigamma

    for n in (2, 7, 15, 50, 120):
        total = math.fsum(loglogistic_residual_var(r, n) for r in range(1, n + 1))
        assert total == pytest.approx(2 * math.fsum(trigamma(r) for r in range(1, n + 1)), abs=1e-10)


@pytest.mark.parametrize("fn", [loglogistic_residual_mean, loglogistic_residual_var,
                                weibull_residual_mean, weibull_residual_var,
                                weibull_residual_second_moment])
@pytest.mark.parametrize("r, n", [(0, 5), (6, 5), (-1, 3)])
def test_rank_out_of_range(fn, r, n):
    with pytest.raises(RankError):
        fn(r, n)


# Weibull moments

def test_weibull_first_rank_closed_form():
    assert weibull_residual_mean(1, 10) == pytest.approx(-2.8798007578955785, abs=1e-12)
    assert weibull_residual_mean(1, 1) == pytest.approx(-EULER, abs=1e-12)
    assert weibull_residual_second_moment(1, 10) == pytest.approx(9.938186472024175, abs=1e-11)
    assert weibull_residual_second_moment(1, 1) == pytest.approx(1.9781119906559451, abs=1e-12)
    for n in (10, 25):
        assert weibull_residual_var(1, n) == pytest.approx(PI2_6, abs=1e-10)


@pytest.mark.parametrize("method", ["binomial", "quadrature"])
def test_weibull_frozen_quadrature_values(method):
    # values from 40-digit quadrature of the beta-weighted integrand
    assert weibull_residual_mean(5, 10, method) == pytest.approx(-0.54361217937935738, abs=1e-10)
    assert weibull_residual_second_moment(3, 7, method) == pytest.approx(1.1264118610978961, abs=1e-10)
    assert weibull_residual_var(8, 15, method) == pytest.approx(0.13794934068237555, abs=1e-10)


def test_weibull_first_rank_quadrature_route():
    from orderfit.resweights import _weibull_quadrature

    for n in (1, 10, 80):
        m1, m2, v = _weibull_quadrature(1, n)
        assert m1 == pytest.approx(-(EULER + math.log(n)), abs=1e-10)
        assert v == pytest.approx(PI2_6, abs=1e-9)


def test_weibull_binomial_and_quadrature_routes_agree_beyond_switch():
    for n in (45, 60):
        for r in (2, n // 3, n // 2, n - 1, n):
            a = weibull_residual_mean(r, n, "binomial")
            b = weibull_residual_mean(r, n, "quadrature")
            assert a == pytest.approx(b, abs=1e-9)
            a2 = weibull_residual_second_moment(r, n, "binomial")
            b2 = weibull_residual_second_moment(r, n, "quadrature")
            assert a2 == pytest.approx(b2, abs=1e-9)


def test_weibull_large_n_uses_quadrature_and_stays_sane():
    tab = moment_table(WB, 150)
    assert tab.variances[0] == pytest.approx(PI2_6, abs=1e-12)
    assert np.all(np.diff(tab.means) > 0)
    assert np.all(tab.variances > 0)
    m1 = beta_order_moment(75, 150, 1, loglog)
    assert tab.means[74] == pytest.approx(m1, abs=1e-8)


def test_weibull_variance_largest_at_first_rank():
    # the smallest order statistic carries the full Gumbel variance; all others are tighter
    for n in (5, 15, 40):
        tab = moment_table(WB, n)
        assert np.argmax(tab.variances) == 0
        assert np.all(tab.variances[1:] < PI2_6)


def test_adaptive_gauss_legendre():
    assert adaptive_gauss_legendre(np.exp, 0.0, 1.0) == pytest.approx(math.e - 1, abs=1e-14)
    f = lambda x: 1.0 / (1.0 + 1e4 * (x - 0.3) ** 2)  # noqa: E731
    exact = (math.atan(100 * 0.7) + math.atan(100 * 0.3)) / 100
    assert adaptive_gauss_legendre(f, 0.0, 1.0) == pytest.approx(exact, abs=1e-13)


# plotting positions and asymptotics

@pytest.mark.parametrize("r, n, scheme, expected", [
    (8, 15, "standard", 0.5),
    (1, 15, "bernard", 0.7 / 15.4),
    (15, 15, "standard", 0.9375),
])
def test_plotting_position(r, n, scheme, expected):
    assert plotting_position(r, n, scheme) == pytest.approx(expected, abs=1e-15)


def test_plotting_positions_inside_unit_interval():
    for n in (1, 2, 50):
        for r in range(1, n + 1):
            for s in PlottingScheme:
                assert 0.0 < plotting_position(r, n, s) < 1.0


def test_asymptotic_var_values():
    assert asymptotic_residual_var(8, 15) == pytest.approx(1 / (15 * 0.25), abs=1e-12)
    assert asymptotic_residual_var(1, 15) == pytest.approx(1 / (15 * (1 / 16) * (15 / 16)), abs=1e-12)
    assert abs(asymptotic_residual_var(8, 15) - loglogistic_residual_var(8, 15)) < 0.01
    assert abs(asymptotic_residual_var(8, 15) - loglogistic_residual_var(8, 15)) < 0.001


def test_asymptotic_cov_values():
    assert asymptotic_residual_cov(1, 2, 3) == pytest.approx(1 / (3 * 0.5 * 0.75), abs=1e-12)
    assert asymptotic_residual_cov(3, 12, 15) == pytest.approx(1 / (15 * 0.75 * 0.8125), abs=1e-12)
    for dist in (LL, WB):
        for scheme in PlottingScheme:
            for r in range(1, 16):
                assert asymptotic_residual_cov(r, r, 15, scheme, dist) == pytest.approx(
                    asymptotic_residual_var(r, 15, scheme, dist), rel=1e-14)
    with pytest.raises(RankError):
        asymptotic_residual_cov(5, 4, 10)


def test_weibull_asymptotic_var_matches_delta_method():
    # derivative of log(-log(1-p)) by central differences
    n, r = 20, 6
    p = r / (n + 1)
    g = lambda q: math.log(-math.log1p(-q))  # noqa: E731
    h = 1e-6
    slope = (g(p + h) - g(p - h)) / (2 * h)
    assert asymptotic_residual_var(r, n, "standard", WB) == pytest.approx(
        p * (1 - p) * slope**2 / n, rel=1e-8)


def test_asymptotic_approaches_exact_in_middle_ranks():
    n = 400
    r = 200
    assert asymptotic_residual_var(r, n) == pytest.approx(loglogistic_residual_var(r, n), rel=5e-3)


# Monte-Carlo covariance

def test_mc_covariance_structure_and_determinism():
    a = mc_covariance(LL, 8, 2000, seed=11)
    b = mc_covariance(LL, 8, 2000, seed=11)
    c = mc_covariance(LL, 8, 2000, seed=12)
    assert np.array_equal(a.matrix, b.matrix)
    assert not np.array_equal(a.matrix, c.matrix)
    assert np.allclose(a.matrix, a.matrix.T, atol=1e-12)
    assert np.all(np.diag(a.matrix) >= 0)
    ev = a.eigenvalues()
    assert ev[0] >= -1e-8 * ev[-1]
    assert (a.n, a.m, a.seed) == (8, 2000, 11)


def test_mc_covariance_chunking_matches_one_pass():
    from orderfit.resweights import _transform
    from orderfit.sampling import make_rng, open_uniform

    est = mc_covariance(WB, 6, 1000, seed=5, chunk=300)
    # same draws in one block (chunks consume the stream in order)
    rng = make_rng(5)
    blocks = [open_uniform(rng, (k, 6)) for k in (300, 300, 300, 100)]
    z = _transform(np.sort(np.vstack(blocks), axis=1), WB)
    assert np.allclose(est.matrix, np.cov(z, rowvar=False), atol=1e-12)


def test_mc_covariance_rejects_bad_sizes():
    with pytest.raises(ValueError):
        mc_covariance(LL, 1, 1000, 0)
    with pytest.raises(ValueError):
        mc_covariance(LL, 5, 99, 0)


def test_mc_covariance_offdiagonal_close_to_quadrature():
    # Cov(logit Z_1, logit Z_2) for n = 2 via the exact variance identity of the sum:
    # Var(z1 + z2) = 2 Var(logistic) since {z1, z2} is the unordered pair.
    est = mc_covariance(LL, 2, 200000, seed=3)
    var_sum = est.matrix.sum()
    assert var_sum == pytest.approx(2 * math.pi**2 / 3, rel=0.02)


def test_log_det_consistent_with_numpy():
    est = mc_covariance(WB, 5, 3000, seed=2)
    sign, ld = np.linalg.slogdet(est.matrix)
    assert sign > 0
    assert est.log_det() == pytest.approx(ld, rel=1e-10)
    assert est.det() == pytest.approx(math.exp(ld), rel=1e-9)


# tables

def test_table_exact_loglogistic():
    tab = moment_table(LL, 15, "exact")
    assert tab.weights[7] == pytest.approx(1 / 0.26627402938806285, rel=1e-12)
    assert tab.weights[7] == pytest.approx(3.7555, abs=1e-3)
    assert np.allclose(tab.weights * tab.variances, 1.0, atol=1e-12)
    assert np.array_equal(tab.variances, tab.variances[::-1])


def test_table_exact_weibull_first_rank():
    tab = moment_table(WB, 10, "exact")
    assert tab.variances[0] == pytest.approx(PI2_6, abs=1e-12)


def test_table_asymptotic():
    tab = moment_table(LL, 15, "asymptotic", "standard")
    assert tab.weights[7] == pytest.approx(3.75, abs=1e-12)
    assert tab.means[7] == pytest.approx(0.0, abs=1e-15)
    assert tab.means[0] == pytest.approx(math.log(1 / 15), abs=1e-12)
    wb = moment_table(WB, 15, "asymptotic", "bernard")
    p = plotting_position(1, 15, "bernard")
    assert wb.means[0] == pytest.approx(math.log(-math.log1p(-p)), abs=1e-12)


def test_table_logistic_negates_means_and_shares_variances():
    a = moment_table(LL, 12)
    b = moment_table(LG, 12)
    assert np.array_equal(b.means, -a.means)
    assert np.array_equal(b.variances, a.variances)


def test_table_montecarlo_requires_m_and_seed():
    with pytest.raises(ValueError):
        moment_table(LL, 10, "montecarlo")
    with pytest.raises(ValueError):
        moment_table(LL, 10, "montecarlo", mc_m=500)
    with pytest.raises(ValueError):
        moment_table(LL, 10, "exact", mc_m=500)
    tab = moment_table(LL, 10, MomentMethod.MONTECARLO, mc_m=500, seed=4)
    assert np.array_equal(tab.means, moment_table(LL, 10).means)
    assert np.allclose(tab.weights * tab.variances, 1.0, atol=1e-12)


def test_table_needs_n_at_least_two():
    with pytest.raises(ValueError):
        moment_table(LL, 1)


def test_tables_do_not_depend_on_parameters():
    # the table API never sees alpha/beta; two independent computations agree bitwise
    from orderfit.resweights import _cached_table

    a = moment_table(WB, 20)
    _cached_table.cache_clear()
    b = moment_table(WB, 20)
    assert a is not b
    assert a.same_as(b)


def test_weights_csv_round_trip_is_byte_identical():
    for dist in (LL, WB):
        tab = moment_table(dist, 17)
        text = write_table_csv(tab)
        assert text.splitlines()[0] == "rank,mean,variance,weight"
        again = write_table_csv(read_table_csv(text, dist))
        assert again == text
        back = read_table_csv(text, dist)
        assert back.same_as(tab)


def test_weights_csv_rejects_garbage():
    with pytest.raises(ValueError):
        read_table_csv("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_table_csv("rank,mean,variance,weight\n1,x,1,1\n")
    with pytest.raises(ValueError):
        read_table_csv("rank,mean,variance,weight\n2,0,1,1\n")
