import numpy as np
import pytest

from panelfe import DomainError, EstimatorSpec, JackknifeError, LsConfig, PanelData, PanelFitter, fit_report, parse_estimator
from panelfe.estimators import DEFAULT_ESTIMATORS


@pytest.mark.parametrize("text,label", [
    ("ols", "OLS"), ("ls5", "LS5"), ("LS20-jk", "LS20_JK"), ("gfe", "GFE"),
    ("gfe_jk", "GFE_JK"), ("gfe-split", "GFE_SPLIT"),
])
def test_parse(text, label):
    assert parse_estimator(text).label == label


def test_parse_rejects():
    with pytest.raises(DomainError):
        parse_estimator("cce")


def test_default_rows():
    assert len(DEFAULT_ESTIMATORS) == 9


def test_fitter_memoizes(rng):
    p = PanelData(y=rng.standard_normal((10, 10)), x=(rng.standard_normal((10, 10)),))
    f = PanelFitter(p, LsConfig(n_starts=2))
    assert f.ls("full", 2) is f.ls("full", 2)


def test_report_jackknife(rng):
    p = PanelData(y=rng.standard_normal((10, 10)), x=(rng.standard_normal((10, 10)),))
    rep = fit_report(EstimatorSpec("ls", 1, True), p)
    full = fit_report(EstimatorSpec("ls", 1), p)
    assert rep.estimator_tag == "LS_JK"
    assert rep.se[0] == full.se[0]
    h = rep.metadata["jackknife_halves"]
    expected = 3 * full.beta_hat[0] - 0.5 * (h["units-1"][0] + h["units-2"][0]) - 0.5 * (
        h["periods-1"][0] + h["periods-2"][0])
    assert rep.beta_hat[0] == pytest.approx(expected)


def test_report_jackknife_failure(rng):
    p = PanelData(y=rng.standard_normal((10, 10)), x=(rng.standard_normal((10, 10)),))
    with pytest.raises(JackknifeError):
        fit_report(EstimatorSpec("ls", 6, True), p)


def test_gfe_report_metadata(rng):
    p = PanelData(y=rng.standard_normal((12, 12)), x=(rng.standard_normal((12, 12)),))
    rep = fit_report(EstimatorSpec("gfe", r_initial=3, r_star=2), p)
    assert rep.estimator_tag == "GFE"
    assert {"G", "C", "R", "R_star"} <= set(rep.metadata)
    assert np.all(rep.se > 0)
