"""Standard errors and half-panel jackknife bias correction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .clustering import Grouping
from .errors import BootstrapError, DomainError, JackknifeError, PanelError
from .factor_ls import FactorEstimate, factor_annihilate
from .panel import EstimateReport, PanelData

CRIT_95 = 1.96


@dataclass(frozen=True)
class SandwichParts:
    """Bread ``omega = sum X~'X~``, meat ``sigma_hat`` and the scalar ``dfc``."""

    omega: np.ndarray
    sigma_hat: np.ndarray
    dfc: float

    def covariance(self) -> np.ndarray:
        inv = np.linalg.inv(self.omega)
        v = inv @ self.sigma_hat @ inv
        return self.dfc ** 2 * 0.5 * (v + v.T)

    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance()), 0.0, None))


@dataclass(frozen=True)
class ClusterIndex:
    """Combination cluster of every cell, indexed by ``n(i,t) = i + t N`` (0-based)."""

    assignment: np.ndarray
    m_total: int


def cluster_index(g: Grouping, c: Grouping) -> ClusterIndex:
    """Crossed unit-group x time-group clusters; cluster ``m = g_i C + c_t``."""
    cell = g.labels[:, None] * c.n_groups + c.labels[None, :]
    return ClusterIndex(cell.ravel(order="F"), g.n_groups * c.n_groups)


def _flat(x_tilde: np.ndarray, resid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # rows follow n(i,t) = i + t N
    k = x_tilde.shape[0]
    xm = np.stack([x_tilde[j].ravel(order="F") for j in range(k)], axis=1)
    return xm, resid.ravel(order="F")


def hc_meat(x_tilde, resid) -> np.ndarray:
    xm, u = _flat(np.asarray(x_tilde), np.asarray(resid))
    xu = xm * u[:, None]
    return xu.T @ xu


def cluster_meat(x_tilde, resid, assignment, mode: str = "full") -> np.ndarray:
    """Cluster meat matrix.

    ``mode="full"`` sums outer products of within-cluster scores;
    ``mode="diagonal"`` keeps only the own-cell terms ``u^2 X~'X~``.
    """
    if mode == "diagonal":
        return hc_meat(x_tilde, resid)
    if mode != "full":
        raise DomainError(f"unknown sigma mode {mode!r}")
    xm, u = _flat(np.asarray(x_tilde), np.asarray(resid))
    assignment = np.asarray(assignment)
    scores = np.zeros((int(assignment.max()) + 1, xm.shape[1]))
    np.add.at(scores, assignment, xm * u[:, None])
    return scores.T @ scores


def _omega(x_tilde) -> np.ndarray:
    k = x_tilde.shape[0]
    xm = x_tilde.reshape(k, -1)
    return xm @ xm.T


def hc_parts(estimate: FactorEstimate, panel: PanelData) -> SandwichParts:
    """Sandwich pieces for the LS estimator on factor-projected data."""
    n, t = panel.shape
    r = estimate.r
    if n <= r or t <= r:
        raise DomainError(f"HC standard errors need N, T > R={r}")
    lam, f = estimate.lambda_hat, estimate.f_hat
    x_tilde = np.stack([factor_annihilate(xk, lam, f) for xk in panel.x])
    y_tilde = factor_annihilate(panel.y, lam, f)
    resid = y_tilde - np.tensordot(estimate.beta_hat, x_tilde, axes=1)
    dfc = np.sqrt(n * t / ((n - r) * (t - r)))
    return SandwichParts(_omega(x_tilde), hc_meat(x_tilde, resid), float(dfc))


def hc_se(estimate: FactorEstimate, panel: PanelData) -> np.ndarray:
    """White standard errors with the ``sqrt(NT/((N-R)(T-R)))`` correction."""
    return hc_parts(estimate, panel).se()


def cluster_parts(estimate, panel: PanelData, sigma_mode: str = "full") -> SandwichParts:
    """Sandwich pieces for a grouped or split-sample grouped FE fit.

    ``dfc = sqrt(NT / (NT - p))`` where ``p`` counts the group nuisance
    parameters; for the unsplit estimator this is ``sqrt(NT/((N-G)(T-C)))``.
    """
    n, t = panel.shape
    if hasattr(estimate, "unit_grouping"):
        g, c = estimate.unit_grouping.n_groups, estimate.time_grouping.n_groups
        if n <= g or t <= c:
            raise DomainError(f"cluster standard errors need N > G and T > C (G={g}, C={c})")
    p = estimate.n_nuisance()
    if n * t <= p:
        raise DomainError("no residual degrees of freedom for cluster standard errors")
    dfc = np.sqrt(n * t / (n * t - p))
    meat = cluster_meat(estimate.x_tilde, estimate.residuals,
                        estimate.combination_clusters(), sigma_mode)
    return SandwichParts(_omega(estimate.x_tilde), meat, float(dfc))


def cluster_se(estimate, panel: PanelData, sigma_mode: str = "full") -> np.ndarray:
    """Standard errors clustered on unit-group x time-group combinations."""
    return cluster_parts(estimate, panel, sigma_mode).se()


def _beta_of(result) -> np.ndarray:
    beta = getattr(result, "beta_hat", result)
    return np.atleast_1d(np.asarray(beta, dtype=np.float64))


def resample_units(panel: PanelData, cluster_on: Grouping, rng) -> PanelData:
    """Panel built by stacking unit clusters drawn with replacement."""
    members = cluster_on.members()
    draw = rng.integers(0, len(members), size=len(members))
    rows = np.concatenate([members[d] for d in draw])
    return panel.subpanel(rows, None)


def bootstrap_cluster_se(estimator: Callable, panel: PanelData, cluster_on: Grouping,
                         n_boot: int = 200, seed: int = 0,
                         max_fail_share: float = 0.1) -> np.ndarray:
    """Cluster bootstrap standard deviation of ``estimator(panel)``.

    Resample ``b`` uses the stream ``SeedSequence([seed, b])``. Resamples on
    which the estimator raises a :class:`PanelError` or ``LinAlgError`` are
    skipped; more than ``max_fail_share`` failures raise
    :class:`BootstrapError`.
    """
    if n_boot < 2:
        raise DomainError("n_boot must be at least 2")
    if len(cluster_on) != panel.n_units:
        raise DomainError("cluster_on must group the panel's units")
    betas, failures = [], 0
    for b in range(n_boot):
        rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
        try:
            betas.append(_beta_of(estimator(resample_units(panel, cluster_on, rng))))
        except (PanelError, np.linalg.LinAlgError):
            failures += 1
    if failures > max_fail_share * n_boot or len(betas) < 2:
        raise BootstrapError(f"{failures} of {n_boot} bootstrap resamples failed")
    return np.std(np.stack(betas), axis=0, ddof=1)


HALVES = ("units-1", "units-2", "periods-1", "periods-2")


def half_panels(panel: PanelData) -> dict:
    n, t = panel.shape
    hn, ht = n // 2, t // 2
    return {
        "units-1": panel.subpanel(np.arange(hn), None),
        "units-2": panel.subpanel(np.arange(hn, n), None),
        "periods-1": panel.subpanel(None, np.arange(ht)),
        "periods-2": panel.subpanel(None, np.arange(ht, t)),
    }


def jackknife_combine(full, u1, u2, p1, p2) -> np.ndarray:
    """``3 b - (b_u1 + b_u2)/2 - (b_p1 + b_p2)/2``."""
    full, u1, u2, p1, p2 = (np.asarray(v, dtype=np.float64) for v in (full, u1, u2, p1, p2))
    return 3.0 * full - 0.5 * (u1 + u2) - 0.5 * (p1 + p2)


def jackknife_correct(estimator: Callable, panel: PanelData,
                      full: EstimateReport | None = None, tag: str = "LS") -> EstimateReport:
    """Half-panel jackknife bias correction.

    ``estimator`` maps a panel to an :class:`EstimateReport` (or a bare
    coefficient vector). It is called on the full panel (unless ``full`` is
    supplied), then on the unit halves ``{0..N/2-1}``, ``{N/2..N-1}`` and the
    period halves, in that order. Standard errors are copied from the full
    sample estimate. ``tag`` is used only when the estimator returns bare
    vectors.
    """
    n, t = panel.shape
    if n < 2 or t < 2:
        raise DomainError("jackknife needs N >= 2 and T >= 2")
    if full is None:
        full = estimator(panel)
    halves = {}
    for name, sub in half_panels(panel).items():
        try:
            halves[name] = estimator(sub)
        except (PanelError, np.linalg.LinAlgError) as exc:
            raise JackknifeError(name, exc) from exc
    return jackknife_report(full, halves, tag)


def jackknife_report(full, halves: dict, tag: str = "LS") -> EstimateReport:
    """Combine a full-sample estimate with the four half-panel estimates.

    ``halves`` maps each name in ``HALVES`` to a coefficient vector or report.
    """
    betas = {h: _beta_of(halves[h]) for h in HALVES}
    beta_full = _beta_of(full)
    beta = jackknife_combine(beta_full, *(betas[h] for h in HALVES))
    if isinstance(full, EstimateReport):
        tag, se, meta = full.estimator_tag, full.se, dict(full.metadata)
    else:
        se, meta = None, {}
    meta["jackknife_halves"] = {h: [float(v) for v in betas[h]] for h in HALVES}
    meta["beta_full"] = [float(v) for v in beta_full]
    return EstimateReport(beta, tag + "_JK", se=se, metadata=meta)
