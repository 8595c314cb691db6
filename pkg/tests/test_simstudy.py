import math

import numpy as np
import pytest

from orderfit.fitcore import FitMethod, fit
from orderfit.params import DistributionKind
from orderfit.simstudy import (
    StudyConfig,
    figure_csv,
    figure_data,
    replication_sample,
    report_csv,
    run_study,
)

LL = DistributionKind.LOGLOGISTIC
WB = DistributionKind.WEIBULL
PI2_6 = math.pi**2 / 6


def test_single_replication_identity():
    cfg = StudyConfig(dist=WB, beta_grid=(1.5,), n_grid=(12,), reps=1, seed=4)
    rep = run_study(cfg)
    x = replication_sample(cfg, 12, 1.5, 0)
    for m in cfg.methods:
        res = fit(WB, x, m)
        cell = rep.cell(12, 1.5, m, "beta")
        assert cell.bias == res.beta - 1.5
        assert cell.mse == cell.bias**2
        a = rep.cell(12, 1.5, m, "alpha")
        assert a.bias == res.alpha - 1.0


def test_report_is_reproducible_and_complete():
    cfg = StudyConfig(dist=LL, beta_grid=(1.0, 2.0), n_grid=(10, 20), reps=30, seed=77)
    a = run_study(cfg)
    b = run_study(cfg)
    assert report_csv(a) == report_csv(b)
    assert len(a.cells) == 2 * 2 * 2 * 2
    for c in a.cells.values():
        assert c.mse >= c.bias**2 - 1e-12
        assert c.count + c.failures == 30


def test_worker_count_does_not_change_report():
    cfg = StudyConfig(dist=WB, beta_grid=(0.5, 2.0), n_grid=(8,), reps=20, seed=5)
    assert report_csv(run_study(cfg, workers=1)) == report_csv(run_study(cfg, workers=2))


def test_common_random_numbers_across_methods():
    cfg = StudyConfig(dist=LL, beta_grid=(1.0,), n_grid=(10,), reps=3, seed=1)
    assert np.array_equal(replication_sample(cfg, 10, 1.0, 2), replication_sample(cfg, 10, 1.0, 2))
    assert not np.array_equal(replication_sample(cfg, 10, 1.0, 1), replication_sample(cfg, 10, 1.0, 2))


def test_config_defaults_and_validation():
    cfg = StudyConfig(dist="weibull")
    assert cfg.beta_grid == (0.25, 1.0, 1.5)
    assert cfg.n_grid == (15, 25, 50, 100)
    assert cfg.reps == 1000 and cfg.alpha == 1.0
    assert StudyConfig(dist="loglogistic").beta_grid == (1.0, 1.5, 2.0, 2.5)
    with pytest.raises(ValueError):
        StudyConfig(dist=LL, reps=0)
    with pytest.raises(ValueError):
        StudyConfig(dist=LL, beta_grid=(-1.0,))
    with pytest.raises(ValueError):
        StudyConfig(dist=LL, alpha=0.0)


def test_report_csv_format():
    cfg = StudyConfig(dist=LL, beta_grid=(1.0,), n_grid=(10,), reps=5, seed=2)
    lines = report_csv(run_study(cfg)).splitlines()
    assert lines[0] == "dist,n,beta_true,method,parameter,bias,mse,failures"
    assert len(lines) == 1 + 4
    fields = lines[1].split(",")
    assert fields[0] == "loglogistic" and fields[1] == "10"
    assert len(fields[5].lstrip("-").replace(".", "").split("e")[0].lstrip("0")) <= 7


def test_failures_are_counted_not_averaged(monkeypatch):
    from orderfit import simstudy
    from orderfit.fitcore import ConvergenceError

    real = simstudy.fit

    def flaky(dist, x, method, **kw):
        if FitMethod.parse(method) is FitMethod.ML and x[0] > np.median(x):
            raise ConvergenceError("forced")
        return real(dist, x, method, **kw)

    monkeypatch.setattr(simstudy, "fit", flaky)
    cfg = StudyConfig(dist=WB, beta_grid=(1.0,), n_grid=(10,), reps=40, seed=3)
    rep = run_study(cfg)
    ml = rep.cell(10, 1.0, "ml", "beta")
    wls = rep.cell(10, 1.0, "wls-exact", "beta")
    assert ml.failures > 0 and ml.count == 40 - ml.failures
    assert wls.failures == 0 and wls.count == 40


def test_figure_data_rows():
    fd = figure_data(WB, 15, 2000, seed=6)
    assert [r.rank for r in fd.rows] == list(range(1, 16))
    assert fd.rows[0].exact_var == pytest.approx(PI2_6, abs=1e-12)
    for col in ("exact_var", "mc_var", "asymptotic_var"):
        assert np.all(fd.column(col) > 0)
    ll = figure_data(LL, 15, 2000, seed=6)
    r8 = ll.rows[7]
    assert abs(r8.exact_var - r8.asymptotic_var) < 0.001
    text = figure_csv(ll)
    assert text.splitlines()[0] == "rank,exact,mc,asymptotic"
    assert len(text.splitlines()) == 16


def test_figure_data_converges_with_large_m():
    fd = figure_data(WB, 15, 400_000, seed=8)
    assert np.max(np.abs(fd.column("exact_var") - fd.column("mc_var"))) <= 0.01


@pytest.mark.slow
@pytest.mark.parametrize("dist", [LL, WB])
def test_directional_claims_on_default_grid(dist):
    rep = run_study(StudyConfig(dist=dist, seed=20130917))
    for n in rep_ns(rep):
        for b in rep_betas(rep):
            wb = rep.cell(n, b, "wls-exact", "beta").bias
            mb = rep.cell(n, b, "ml", "beta").bias
            assert wb < 0 < mb
            if n in (15, 25):
                assert abs(wb) < abs(mb)
            if dist is WB:
                assert rep.cell(n, b, "ml", "alpha").mse <= rep.cell(n, b, "wls-exact", "alpha").mse


@pytest.mark.slow
@pytest.mark.parametrize("dist", [LL, WB])
def test_ml_at_least_as_good_in_large_samples(dist):
    rep = run_study(StudyConfig(dist=dist, beta_grid=(2.0,), n_grid=(500,), reps=500, seed=20130917))
    ml = rep.cell(500, 2.0, "ml", "beta")
    wls = rep.cell(500, 2.0, "wls-exact", "beta")
    assert ml.mse <= wls.mse


def rep_ns(rep):
    return sorted({k[0] for k in rep.cells})


def rep_betas(rep):
    return sorted({k[1] for k in rep.cells})
