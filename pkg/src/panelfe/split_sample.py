"""Split-sample grouped fixed effects.

The grid is cut into four estimation blocks. Group memberships inside each
block come from factor proxies estimated on a half-panel that does not
overlap the block, so the grouping never sees that block's outcomes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .clustering import cluster_points
from .errors import DomainError
from .factor_ls import FactorEstimate, LsConfig, estimate_ls
from .grouped_fe import R_INITIAL, R_STAR, _pooled_ols, leading_proxies, within
from .panel import EstimateReport, PanelData

UNIT_PROXY_MAP = {1: 2, 2: 1, 3: 2, 4: 1}
TIME_PROXY_MAP = {1: 4, 2: 4, 3: 3, 4: 3}


class Block(NamedTuple):
    """Rectangle ``units x periods`` of 0-based indices."""

    units: np.ndarray
    periods: np.ndarray

    def cells(self) -> set[tuple[int, int]]:
        return {(int(i), int(t)) for i in self.units for t in self.periods}

    def mask(self, n: int, t: int) -> np.ndarray:
        out = np.zeros((n, t), dtype=bool)
        out[np.ix_(self.units, self.periods)] = True
        return out


@dataclass(frozen=True)
class BlockScheme:
    """Estimation blocks, proxy blocks and the block -> proxy-block maps.

    Blocks are keyed 1..4.
    """

    n: int
    t: int
    estimation_blocks: dict
    proxy_blocks: dict
    unit_proxy_map: dict
    time_proxy_map: dict


def make_blocks(n: int, t: int) -> BlockScheme:
    """Four quadrants split at ``floor(N/2)`` and ``floor(T/2)``.

    Proxy blocks 1, 2 are the early/late period halves over all units;
    3, 4 the first/second unit halves over all periods.
    """
    if n < 4 or t < 4:
        raise DomainError(f"split-sample blocks need N >= 4 and T >= 4, got N={n}, T={t}")
    hn, ht = n // 2, t // 2
    u1, u2 = np.arange(hn), np.arange(hn, n)
    t1, t2 = np.arange(ht), np.arange(ht, t)
    all_u, all_t = np.arange(n), np.arange(t)
    est = {1: Block(u1, t1), 2: Block(u1, t2), 3: Block(u2, t1), 4: Block(u2, t2)}
    prox = {1: Block(all_u, t1), 2: Block(all_u, t2), 3: Block(u1, all_t), 4: Block(u2, all_t)}
    return BlockScheme(n, t, est, prox, dict(UNIT_PROXY_MAP), dict(TIME_PROXY_MAP))


@dataclass(frozen=True)
class ProxyEstimate:
    """Factor proxies from the subpanel of proxy block ``block``.

    Rows of ``lambda_hat`` correspond to ``units``; rows of ``f_hat`` to
    ``periods``. Proxies from different blocks are not comparable.
    """

    block: int
    units: np.ndarray
    periods: np.ndarray
    lambda_hat: np.ndarray
    f_hat: np.ndarray
    estimate: FactorEstimate


def proxy_factors_for_block(panel: PanelData, scheme: BlockScheme, s_tilde: int,
                            ls_cfg: LsConfig) -> ProxyEstimate:
    """Run the LS factor estimator on proxy block ``s_tilde`` only."""
    if s_tilde not in scheme.proxy_blocks:
        raise DomainError(f"unknown proxy block {s_tilde}")
    blk = scheme.proxy_blocks[s_tilde]
    est = estimate_ls(panel.subpanel(blk.units, blk.periods), ls_cfg)
    return ProxyEstimate(s_tilde, blk.units, blk.periods, est.lambda_hat, est.f_hat, est)


@dataclass(frozen=True)
class SplitGroupings:
    """Per-block unit groupings ``unit[s]`` and time groupings ``time[s]``."""

    unit: dict
    time: dict


def split_groupings(panel: PanelData, scheme: BlockScheme, r_initial: int = R_INITIAL,
                    r_star: int = R_STAR, ls_cfg: LsConfig | None = None,
                    proxies: dict | None = None) -> tuple[SplitGroupings, dict]:
    """Group memberships for every estimation block.

    Returns the groupings and the dict of :class:`ProxyEstimate` by block.
    """
    if not 1 <= r_star <= r_initial:
        raise DomainError(f"need 1 <= r_star <= r_initial, got {r_star}, {r_initial}")
    cfg = replace(ls_cfg or LsConfig(), r=r_initial)
    proxies = dict(proxies or {})
    for s in (1, 2, 3, 4):
        proxies.setdefault(s, None)
        if proxies[s] is None:
            proxies[s] = proxy_factors_for_block(panel, scheme, s, cfg)
    unit, time = {}, {}
    for s, blk in scheme.estimation_blocks.items():
        pu = proxies[scheme.unit_proxy_map[s]]
        pt = proxies[scheme.time_proxy_map[s]]
        lam, _ = leading_proxies(pu.estimate, r_star)
        _, f = leading_proxies(pt.estimate, r_star)
        lam_rows = lam[np.searchsorted(pu.units, blk.units)]
        f_rows = f[np.searchsorted(pt.periods, blk.periods)]
        unit[s] = cluster_points(lam_rows)
        time[s] = cluster_points(f_rows)
    return SplitGroupings(unit, time), proxies


@dataclass(frozen=True)
class SplitGFEEstimate:
    """Split-sample grouped fixed-effects fit.

    ``x_tilde``/``y_tilde`` hold, on each block's cells, that block's within
    projection; since the blocks partition the grid these are full (K, N, T)
    and (N, T) arrays.
    """

    beta_hat: np.ndarray
    scheme: BlockScheme
    groupings: SplitGroupings
    x_tilde: np.ndarray
    y_tilde: np.ndarray
    residuals: np.ndarray
    proxies: dict | None = None

    def project(self, m) -> np.ndarray:
        return project_blocks(m, self.scheme, self.groupings)

    def combination_clusters(self) -> np.ndarray:
        n, t = self.scheme.n, self.scheme.t
        cell = np.empty((n, t), dtype=np.intp)
        offset = 0
        for s, blk in self.scheme.estimation_blocks.items():
            g, c = self.groupings.unit[s], self.groupings.time[s]
            ids = g.labels[:, None] * c.n_groups + c.labels[None, :]
            cell[np.ix_(blk.units, blk.periods)] = ids + offset
            offset += g.n_groups * c.n_groups
        return cell.ravel(order="F")

    def n_nuisance(self) -> int:
        total = 0
        for s, blk in self.scheme.estimation_blocks.items():
            g, c = self.groupings.unit[s].n_groups, self.groupings.time[s].n_groups
            total += len(blk.units) * c + len(blk.periods) * g - g * c
        return total

    def metadata(self) -> dict:
        return {
            "G": int(sum(g.n_groups for g in self.groupings.unit.values())),
            "C": int(sum(c.n_groups for c in self.groupings.time.values())),
            "G_blocks": [self.groupings.unit[s].n_groups for s in (1, 2, 3, 4)],
            "C_blocks": [self.groupings.time[s].n_groups for s in (1, 2, 3, 4)],
        }


def project_blocks(m, scheme: BlockScheme, groupings: SplitGroupings) -> np.ndarray:
    """Within-group projection carried out separately inside each block."""
    m = np.asarray(m, dtype=np.float64)
    out = np.empty_like(m)
    for s, blk in scheme.estimation_blocks.items():
        sel = np.ix_(blk.units, blk.periods)
        out[sel] = within(m[sel], groupings.unit[s].labels, groupings.time[s].labels)
    return out


def estimate_gfe_split_given_groups(panel: PanelData, scheme: BlockScheme,
                                    groupings: SplitGroupings) -> SplitGFEEstimate:
    x_tilde = np.stack([project_blocks(xk, scheme, groupings) for xk in panel.x])
    y_tilde = project_blocks(panel.y, scheme, groupings)
    beta = _pooled_ols(x_tilde, y_tilde, panel.x_stack())
    resid = y_tilde - np.tensordot(beta, x_tilde, axes=1)
    return SplitGFEEstimate(beta, scheme, groupings, x_tilde, y_tilde, resid)


def fit_gfe_split(panel: PanelData, r_initial: int = R_INITIAL, r_star: int = R_STAR,
                  ls_cfg: LsConfig | None = None) -> SplitGFEEstimate:
    """Split-sample grouped fixed-effects fit; see :func:`estimate_gfe_split`."""
    n, t = panel.shape
    if n < 8 or t < 8:
        raise DomainError(f"split-sample estimator needs N, T >= 8, got N={n}, T={t}")
    scheme = make_blocks(n, t)
    groupings, proxies = split_groupings(panel, scheme, r_initial, r_star, ls_cfg)
    fit = estimate_gfe_split_given_groups(panel, scheme, groupings)
    return replace(fit, proxies=proxies)


def estimate_gfe_split(panel: PanelData, r_initial: int = R_INITIAL, r_star: int = R_STAR,
                       ls_cfg: LsConfig | None = None) -> EstimateReport:
    """Split-sample grouped fixed-effects estimate tagged ``GFE_SPLIT``.

    The fitted :class:`SplitGFEEstimate` is available as ``report.fit``.
    """
    fit = fit_gfe_split(panel, r_initial, r_star, ls_cfg)
    meta = fit.metadata()
    meta.update(R=r_initial, R_star=r_star)
    return EstimateReport(fit.beta_hat, "GFE_SPLIT", metadata=meta, fit=fit)
