"""Named estimator configurations shared by the Monte Carlo engine and the CLI."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, JackknifeError, PanelError
from .factor_ls import FactorEstimate, LsConfig, estimate_ls
from .grouped_fe import R_INITIAL, R_STAR, estimate_gfe
from .inference import HALVES, cluster_se, half_panels, hc_se, jackknife_report
from .panel import EstimateReport, PanelData
from .split_sample import fit_gfe_split

KINDS = ("ols", "ls", "gfe", "gfe_split")
_TAGS = {"ols": "OLS", "ls": "LS", "gfe": "GFE", "gfe_split": "GFE_SPLIT"}


@dataclass(frozen=True)
class EstimatorSpec:
    """One estimator row: ``kind`` in ``KINDS``, factor count ``r`` for LS."""

    kind: str
    r: int = 0
    jackknife: bool = False
    r_initial: int = R_INITIAL
    r_star: int = R_STAR

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown estimator kind {self.kind!r}")

    @property
    def tag(self) -> str:
        return _TAGS[self.kind] + ("_JK" if self.jackknife else "")

    @property
    def label(self) -> str:
        base = f"LS{self.r}" if self.kind == "ls" else _TAGS[self.kind]
        return base + ("_JK" if self.jackknife else "")

    def base(self) -> "EstimatorSpec":
        return replace(self, jackknife=False)


_SPEC_RE = re.compile(r"^(ols|ls(\d+)|gfe|gfe[-_]split)([-_]jk)?$")


def parse_estimator(text: str, r_initial: int = R_INITIAL, r_star: int = R_STAR) -> EstimatorSpec:
    """Parse names like ``ols``, ``ls20``, ``ls5-jk``, ``gfe``, ``gfe-jk``, ``gfe-split``."""
    m = _SPEC_RE.match(text.strip().lower())
    if not m:
        raise DomainError(f"cannot parse estimator {text!r}")
    head, r, jk = m.group(1), m.group(2), m.group(3) is not None
    if head == "ols":
        return EstimatorSpec("ols", 0, jk, r_initial, r_star)
    if r is not None:
        return EstimatorSpec("ls", int(r), jk, r_initial, r_star)
    kind = "gfe" if head == "gfe" else "gfe_split"
    return EstimatorSpec(kind, 0, jk, r_initial, r_star)


DEFAULT_ESTIMATORS = ("ls5", "ls20", "ls50", "ls5-jk", "ls20-jk", "ls50-jk", "gfe", "gfe-jk", "gfe-split")


class PanelFitter:
    """Fits estimator specs on one panel and its four half panels.

    LS fits are memoized per (sample, R) so that an LS row, its jackknife and
    the first stage of the grouped estimator share work.
    """

    def __init__(self, panel: PanelData, ls_cfg: LsConfig | None = None):
        self.panel = panel
        self.ls_cfg = ls_cfg or LsConfig()
        self.samples = {"full": panel}
        self._ls: dict = {}

    def sample(self, name: str) -> PanelData:
        if name not in self.samples:
            self.samples.update(half_panels(self.panel))
        return self.samples[name]

    def ls(self, name: str, r: int) -> FactorEstimate:
        key = (name, r)
        if key not in self._ls:
            self._ls[key] = estimate_ls(self.sample(name), replace(self.ls_cfg, r=r))
        return self._ls[key]

    def fit(self, spec: EstimatorSpec, name: str = "full", with_se: bool = True):
        """Return ``(beta, se or None, fit object)`` for a non-jackknife spec."""
        panel = self.sample(name)
        if spec.kind in ("ols", "ls"):
            est = self.ls(name, spec.r)
            se = hc_se(est, panel) if with_se else None
            return est.beta_hat, se, est
        if spec.kind == "gfe":
            first = self.ls(name, spec.r_initial)
            est = estimate_gfe(panel, spec.r_initial, spec.r_star, self.ls_cfg, first_stage=first)
        else:
            est = fit_gfe_split(panel, spec.r_initial, spec.r_star, self.ls_cfg)
        se = cluster_se(est, panel) if with_se else None
        return est.beta_hat, se, est

    def report(self, spec: EstimatorSpec, with_se: bool = True) -> EstimateReport:
        base = spec.base()
        beta, se, est = self.fit(base, "full", with_se)
        meta = _metadata(base, est)
        if se is not None and not np.all(se > 0):
            meta["se_degenerate"] = True
            se = None
        full = EstimateReport(beta, base.tag, se=se, metadata=meta, fit=est)
        if not spec.jackknife:
            return full
        halves = {}
        for name in HALVES:
            try:
                halves[name] = self.fit(base, name, with_se=False)[0]
            except (PanelError, np.linalg.LinAlgError) as exc:
                raise JackknifeError(name, exc) from exc
        return jackknife_report(full, halves)


def _metadata(spec: EstimatorSpec, est) -> dict:
    if spec.kind in ("ols", "ls"):
        return {"R": est.r, "objective": est.objective, "iterations": est.iterations,
                "converged": est.converged}
    meta = est.metadata()
    meta.update(R=spec.r_initial, R_star=spec.r_star)
    return meta


def fit_report(spec: EstimatorSpec, panel: PanelData, ls_cfg: LsConfig | None = None,
               with_se: bool = True) -> EstimateReport:
    """Estimate ``spec`` on ``panel`` and wrap the result in an :class:`EstimateReport`."""
    return PanelFitter(panel, ls_cfg).report(spec, with_se)
