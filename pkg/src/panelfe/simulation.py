"""Monte Carlo design with kernel heterogeneity, replication engine and reports.

The data generating process is

    Y_it = X_it beta0 + h(alpha_i, gamma_t) + eps_it
    X_it = h(alpha_i, gamma_t) + mu_it

with alpha, gamma, eps, mu i.i.d. standard normal and a Gaussian kernel ``h``
whose width ``theta`` controls how slowly the singular values of the
heterogeneity matrix decay.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import DomainError, PanelError
from .estimators import DEFAULT_ESTIMATORS, EstimatorSpec, PanelFitter, parse_estimator
from .factor_ls import LsConfig
from .inference import CRIT_95, HALVES, jackknife_combine
from .panel import PanelData

log = logging.getLogger(__name__)

KERNEL_SIGNS = ("negative", "positive")


def kernel_h(a, b, theta: float = 0.125, sign: str = "negative"):
    """``exp(s (a-b)^2 / theta^2) / (sqrt(2 pi) theta)`` with ``s = -1`` by default.

    ``sign="positive"`` uses ``s = +1``; it overflows for moderate
    ``|a-b|`` and exists for literal comparisons only.
    """
    if not theta > 0:
        raise DomainError("theta must be positive")
    if sign not in KERNEL_SIGNS:
        raise DomainError(f"sign must be one of {KERNEL_SIGNS}")
    s = -1.0 if sign == "negative" else 1.0
    d = np.subtract(a, b, dtype=np.float64)
    with np.errstate(over="ignore"):
        out = np.exp(s * d * d / (theta * theta)) / (math.sqrt(2.0 * math.pi) * theta)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo design.

    ``eps_scale``, ``mu_scale`` and ``gamma_scale`` multiply the outcome
    noise, the regressor noise and the heterogeneity term entering ``Y``;
    they exist to build degenerate test designs and default to one.
    """

    n: int = 100
    t: int = 100
    beta0: float = 1.0
    theta: float = 0.125
    kernel_sign: str = "negative"
    reps: int = 200
    seed: int = 0
    estimators: tuple = DEFAULT_ESTIMATORS
    r_initial: int = 20
    r_star: int = 2
    ls: LsConfig = field(default_factory=LsConfig)
    eps_scale: float = 1.0
    mu_scale: float = 1.0
    gamma_scale: float = 1.0

    def __post_init__(self):
        if not self.theta > 0:
            raise DomainError("theta must be positive")
        if self.reps < 1:
            raise DomainError("reps must be at least 1")
        if self.n < 1 or self.t < 1:
            raise DomainError("n and t must be positive")
        if self.kernel_sign not in KERNEL_SIGNS:
            raise DomainError(f"kernel_sign must be one of {KERNEL_SIGNS}")
        specs = tuple(
            e if isinstance(e, EstimatorSpec) else parse_estimator(e, self.r_initial, self.r_star)
            for e in self.estimators
        )
        object.__setattr__(self, "estimators", specs)

    def resolved(self) -> dict:
        d = asdict(self)
        d["estimators"] = [e.label for e in self.estimators]
        d["ls"].pop("r")
        return d


def rep_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent stream for replication ``rep``."""
    return np.random.default_rng(np.random.SeedSequence([seed, rep]))


def generate_panel(cfg: SimConfig, rep: int = 0) -> PanelData:
    """Draw replication ``rep`` of the design (deterministic in ``(cfg.seed, rep)``)."""
    rng = rep_rng(cfg.seed, rep)
    alpha = rng.standard_normal(cfg.n)
    gamma = rng.standard_normal(cfg.t)
    eps = rng.standard_normal((cfg.n, cfg.t))
    mu = rng.standard_normal((cfg.n, cfg.t))
    h = kernel_h(alpha[:, None], gamma[None, :], cfg.theta, cfg.kernel_sign)
    if not np.all(np.isfinite(h)):
        raise DomainError("kernel overflowed; use kernel_sign='negative' or a larger theta")
    x = h + cfg.mu_scale * mu
    het = cfg.gamma_scale * h
    y = cfg.beta0 * x + het + cfg.eps_scale * eps
    return PanelData(y=y, x=(x,), gamma_true=het, beta_true=[cfg.beta0],
                     metadata={"rep": rep, "seed": cfg.seed})


def decompose_error(estimate, panel: PanelData) -> tuple[np.ndarray, np.ndarray]:
    """Split ``beta_hat - beta0`` into a noise part and an approximation part.

    Returns ``(phi, kappa)`` with ``phi = (sum X~'X~)^-1 sum X~' eps`` and
    ``kappa = (sum X~'X~)^-1 sum X~' Gamma~``; ``estimate`` is a grouped
    (or split-sample grouped) fixed-effects fit of ``panel``.
    """
    if panel.gamma_true is None:
        raise DomainError("decompose_error needs a panel with gamma_true")
    xt = estimate.x_tilde
    k = xt.shape[0]
    xm = xt.reshape(k, -1)
    gram = xm @ xm.T
    eps = panel.y - np.tensordot(panel.beta_true, panel.x_stack(), axes=1) - panel.gamma_true
    gamma_tilde = estimate.project(panel.gamma_true)
    phi = np.linalg.solve(gram, xm @ eps.ravel())
    kappa = np.linalg.solve(gram, xm @ gamma_tilde.ravel())
    return phi, kappa


@dataclass(frozen=True)
class MCRow:
    estimator: str
    mean_bias: float
    std_dev: float
    mean_se: float
    coverage: float
    n_ok: int
    n_fail: int


@dataclass
class MCReport:
    """Per-estimator bias, spread, mean standard error and 95% coverage."""

    rows: list
    config: dict
    draws: dict = field(default_factory=dict, repr=False)
    failures: dict = field(default_factory=dict, repr=False)

    def row(self, label: str) -> MCRow:
        for r in self.rows:
            if r.estimator == label:
                return r
        raise KeyError(label)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["schema", "estimator", "mean_bias", "std_dev", "mean_se", "coverage", "n_ok", "n_fail"])
        for r in self.rows:
            w.writerow([1, r.estimator, repr(r.mean_bias), repr(r.std_dev), repr(r.mean_se),
                        repr(r.coverage), r.n_ok, r.n_fail])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)
        return text

    def to_table(self) -> str:
        head = f"{'estimator':<14}{'mean bias':>11}{'std dev':>10}{'mean se':>10}{'coverage':>10}{'fail':>6}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(f"{r.estimator:<14}{r.mean_bias:>11.4f}{r.std_dev:>10.4f}"
                         f"{r.mean_se:>10.4f}{r.coverage:>10.2f}{r.n_fail:>6d}")
        return "\n".join(lines)


def _run_rep(cfg: SimConfig, rep: int) -> dict:
    """``{label: (beta0 estimate, se) or exception text}`` for one replication."""
    panel = generate_panel(cfg, rep)
    fitter = PanelFitter(panel, cfg.ls)
    out: dict = {}
    base_cache: dict = {}
    for spec in cfg.estimators:
        base = spec.base()
        try:
            if base not in base_cache:
                try:
                    beta, se, _ = fitter.fit(base, "full", with_se=True)
                    base_cache[base] = (beta, se)
                except (PanelError, np.linalg.LinAlgError) as exc:
                    base_cache[base] = exc
            cached = base_cache[base]
            if isinstance(cached, Exception):
                raise cached
            beta, se = cached
            if spec.jackknife:
                halves = [fitter.fit(base, h, with_se=False)[0] for h in HALVES]
                beta = jackknife_combine(beta, *halves)
            out[spec.label] = (float(beta[0]), float(se[0]))
        except (PanelError, np.linalg.LinAlgError) as exc:
            out[spec.label] = f"{type(exc).__name__}: {exc}"
    return out


def _aggregate(label: str, results: list, beta0: float) -> tuple[MCRow, np.ndarray, list]:
    ok = [(rep, r[label]) for rep, r in enumerate(results) if isinstance(r[label], tuple)]
    fails = [(rep, r[label]) for rep, r in enumerate(results) if not isinstance(r[label], tuple)]
    if not ok:
        nan = float("nan")
        return MCRow(label, nan, nan, nan, nan, 0, len(fails)), np.empty(0), fails
    est = np.array([v[0] for _, v in ok])
    se = np.array([v[1] for _, v in ok])
    bias = est - beta0
    sd = float(np.std(est, ddof=1)) if est.size > 1 else 0.0
    covered = np.abs(bias) <= CRIT_95 * se
    row = MCRow(label, float(np.mean(bias)), sd, float(np.mean(se)),
                float(np.mean(covered)), len(ok), len(fails))
    return row, est, fails


def default_workers() -> int:
    env = os.environ.get("PANELFE_THREADS")
    return max(1, int(env)) if env else 1


def run_monte_carlo(cfg: SimConfig, workers: int | None = None) -> MCReport:
    """Run every configured estimator on ``cfg.reps`` simulated panels.

    Replication ``r`` depends only on ``(cfg.seed, r)``, so the report does not
    depend on ``workers``. Estimator failures are counted per estimator and
    excluded from its statistics.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    reps = range(cfg.reps)
    if workers == 1 or cfg.reps == 1:
        results = [_run_rep(cfg, r) for r in reps]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_rep, [cfg] * cfg.reps, reps, chunksize=1))
    rows, draws, failures = [], {}, {}
    for spec in cfg.estimators:
        row, est, fails = _aggregate(spec.label, results, cfg.beta0)
        rows.append(row)
        draws[spec.label] = est
        if fails:
            failures[spec.label] = fails
            log.info("%s failed on %d replications", spec.label, len(fails))
    return MCReport(rows=rows, config=cfg.resolved(), draws=draws, failures=failures)


def with_estimators(cfg: SimConfig, names) -> SimConfig:
    return replace(cfg, estimators=tuple(names))
