"""Two-way grouped fixed-effects estimator.

Units and periods are clustered into small groups; within every (unit group,
time group) pair the model is an additive two-way fixed-effects model, so the
coefficients follow from pooled OLS after the two-sided within projection
``M_N m M_T``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .clustering import Grouping, cluster_points
from .errors import DomainError, SingularDesignError
from .factor_ls import FactorEstimate, LsConfig, _check_gram, estimate_ls
from .panel import EstimateReport, PanelData

R_INITIAL = 20
R_STAR = 2


def build_dummies(g: Grouping) -> np.ndarray:
    """(M, G) indicator matrix with a single one per row."""
    d = np.zeros((len(g), g.n_groups))
    d[np.arange(len(g)), g.labels] = 1.0
    return d


def _group_mean(m: np.ndarray, labels: np.ndarray, n_groups: int, axis: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=n_groups).astype(np.float64)
    if axis == 0:
        sums = np.zeros((n_groups, m.shape[1]))
        np.add.at(sums, labels, m)
        return (sums / counts[:, None])[labels]
    sums = np.zeros((m.shape[0], n_groups))
    np.add.at(sums.T, labels, m.T)
    return (sums / counts[None, :])[:, labels]


def within(m, unit_labels, time_labels) -> np.ndarray:
    """Two-sided within transformation from label vectors.

    Subtracts unit-group and time-group means and adds back the group-pair
    mean, which equals ``M_N m M_T``.
    """
    m = np.asarray(m, dtype=np.float64)
    ul = np.asarray(unit_labels, dtype=np.intp)
    tl = np.asarray(time_labels, dtype=np.intp)
    rows = m - _group_mean(m, ul, int(ul.max()) + 1, 0)
    return rows - _group_mean(rows, tl, int(tl.max()) + 1, 1)


def _labels_from_dummies(d) -> np.ndarray:
    d = np.asarray(d)
    if d.ndim != 2 or not np.all(np.sum(d != 0, axis=1) == 1):
        raise DomainError("dummy matrix must have exactly one non-zero per row")
    if not np.all(d.sum(axis=0) > 0):
        raise DomainError("dummy matrix has an empty group")
    return np.argmax(d != 0, axis=1)


def project_within(m, d_nu, d_delta) -> np.ndarray:
    """``M_N m M_T`` for unit dummies ``d_nu`` (N x G) and time dummies ``d_delta`` (T x C)."""
    return within(m, _labels_from_dummies(d_nu), _labels_from_dummies(d_delta))


def _pooled_ols(x_tilde: np.ndarray, y_tilde: np.ndarray, x_raw=None) -> np.ndarray:
    k = x_tilde.shape[0]
    xm = x_tilde.reshape(k, -1)
    gram = xm @ xm.T
    msg = ("projected design is rank-deficient: regressors are (nearly) constant "
           "within the group structure")
    if x_raw is not None:
        # a regressor lying in the dummy span projects to round-off only
        raw = np.sum(np.asarray(x_raw).reshape(k, -1) ** 2, axis=1)
        if np.any(np.diag(gram) <= 1e-20 * raw):
            raise SingularDesignError(msg)
    try:
        _check_gram(gram, "projected design")
    except SingularDesignError:
        raise SingularDesignError(msg) from None
    return np.linalg.solve(gram, xm @ y_tilde.ravel())


@dataclass(frozen=True)
class GroupedFEEstimate:
    """Two-way grouped fixed-effects fit.

    ``x_tilde`` has shape (K, N, T); ``residuals = y_tilde - x_tilde' beta_hat``.
    """

    beta_hat: np.ndarray
    unit_grouping: Grouping
    time_grouping: Grouping
    x_tilde: np.ndarray
    y_tilde: np.ndarray
    residuals: np.ndarray
    proxy_estimate: FactorEstimate | None = None
    r_star: int | None = None

    def project(self, m) -> np.ndarray:
        return within(m, self.unit_grouping.labels, self.time_grouping.labels)

    def combination_clusters(self) -> np.ndarray:
        """Cluster id of each cell, flattened with ``n = i + t N`` (0-based)."""
        g, c = self.unit_grouping, self.time_grouping
        cell = g.labels[:, None] * c.n_groups + c.labels[None, :]
        return cell.ravel(order="F")

    def n_nuisance(self) -> int:
        n, t = self.y_tilde.shape
        g, c = self.unit_grouping.n_groups, self.time_grouping.n_groups
        return n * c + t * g - g * c

    def metadata(self) -> dict:
        meta = {"G": self.unit_grouping.n_groups, "C": self.time_grouping.n_groups}
        if self.proxy_estimate is not None:
            meta.update(R=self.proxy_estimate.r, R_star=self.r_star,
                        objective=self.proxy_estimate.objective,
                        iterations=self.proxy_estimate.iterations)
        return meta

    def report(self, se=None) -> EstimateReport:
        return EstimateReport(self.beta_hat, "GFE", se=se, metadata=self.metadata(), fit=self)


def estimate_gfe_given_groups(panel: PanelData, g: Grouping, c: Grouping) -> GroupedFEEstimate:
    """Pooled OLS on within-projected data for fixed unit and time groupings."""
    if len(g) != panel.n_units or len(c) != panel.n_periods:
        raise DomainError("groupings do not match the panel dimensions")
    x_tilde = np.stack([within(xk, g.labels, c.labels) for xk in panel.x])
    y_tilde = within(panel.y, g.labels, c.labels)
    beta = _pooled_ols(x_tilde, y_tilde, panel.x_stack())
    resid = y_tilde - np.tensordot(beta, x_tilde, axes=1)
    return GroupedFEEstimate(beta, g, c, x_tilde, y_tilde, resid)


def leading_proxies(est: FactorEstimate, r_star: int) -> tuple[np.ndarray, np.ndarray]:
    """The ``r_star`` loading/factor columns with the largest loading variance."""
    if r_star < 1 or r_star > est.r:
        raise DomainError(f"r_star={r_star} must lie in [1, R={est.r}]")
    diag = np.sum(est.lambda_hat ** 2, axis=0)
    order = np.argsort(-diag, kind="stable")[:r_star]
    return est.lambda_hat[:, order], est.f_hat[:, order]


def estimate_gfe(panel: PanelData, r_initial: int = R_INITIAL, r_star: int = R_STAR,
                 ls_cfg: LsConfig | None = None,
                 first_stage: FactorEstimate | None = None) -> GroupedFEEstimate:
    """Grouped fixed-effects estimator with groups learned from factor proxies.

    Runs :func:`~panelfe.factor_ls.estimate_ls` with ``r_initial`` factors,
    clusters the rows of the ``r_star`` leading loadings (units) and factors
    (periods) into pairs and triples, then calls
    :func:`estimate_gfe_given_groups`. A precomputed ``first_stage`` fit with
    ``r_initial`` factors skips the LS step.
    """
    if not 1 <= r_star <= r_initial:
        raise DomainError(f"need 1 <= r_star <= r_initial, got {r_star}, {r_initial}")
    if first_stage is None:
        first_stage = estimate_ls(panel, replace(ls_cfg or LsConfig(), r=r_initial))
    elif first_stage.r != r_initial:
        raise DomainError("first_stage was fitted with a different number of factors")
    first = first_stage
    lam, f = leading_proxies(first, r_star)
    g = cluster_points(lam)
    c = cluster_points(f)
    fit = estimate_gfe_given_groups(panel, g, c)
    return replace(fit, proxy_estimate=first, r_star=r_star)
