"""Least-squares interactive fixed-effects estimator.

Alternates between principal components of ``Y - X.beta`` and pooled OLS of
``Y - lambda f'`` on ``X``, restarting from several initial coefficients and
keeping the run with the smallest sum of squared residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SingularDesignError
from .panel import PanelData

# Stop once the profiled SSR is this small relative to ||Y||_F^2 (exact fit).
_EXACT_FIT = 1e-24


@dataclass(frozen=True)
class LsConfig:
    """Settings for :func:`estimate_ls`.

    Attributes
    ----------
    r : int
        Number of factors.
    n_starts : int
        Number of starting values. The first start is pooled OLS, the others
        perturb it uniformly by ``0.5 * max|beta_ols| + 0.5`` per coordinate.
    tol : float
        Relative change in the objective below which a start stops.
    max_iter : int
        Iteration cap per start.
    seed : int
        Seed for the perturbations of starts 2, 3, ...
    """

    r: int = 1
    n_starts: int = 5
    tol: float = 1e-9
    max_iter: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.r < 0:
            raise DomainError("r must be non-negative")
        if self.n_starts < 1:
            raise DomainError("n_starts must be positive")
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be positive")

    def check(self, n: int, t: int) -> None:
        if self.r > min(n, t) - 1:
            raise DomainError(f"r={self.r} factors requires min(N,T) > r, got N={n}, T={t}")


@dataclass(frozen=True)
class FactorEstimate:
    """Result of :func:`estimate_ls`.

    ``f_hat`` satisfies ``f'f / T = I`` and ``lambda_hat' lambda_hat`` is
    diagonal with non-increasing entries. ``trace`` lists the objective after
    every iteration of the winning start; ``traces`` holds one such tuple per
    start that was run.
    """

    beta_hat: np.ndarray
    lambda_hat: np.ndarray
    f_hat: np.ndarray
    objective: float
    iterations: int
    converged: bool
    r: int
    start_index: int = 0
    trace: tuple = field(default=(), repr=False, compare=False)
    traces: tuple = field(default=(), repr=False, compare=False)

    def common_component(self) -> np.ndarray:
        return self.lambda_hat @ self.f_hat.T


def pca_step(residual, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Best rank-``r`` approximation ``lambda f'`` of ``residual``.

    Returns ``(lambda, f)`` with shapes (N, r) and (T, r), normalized so that
    ``f'f/T = I`` and ``lambda'lambda`` is diagonal, largest entry first.
    """
    e = np.asarray(residual, dtype=np.float64)
    n, t = e.shape
    if r < 0 or r > min(n, t):
        raise DomainError(f"r={r} outside [0, {min(n, t)}]")
    if r == 0:
        return np.zeros((n, 0)), np.zeros((t, 0))
    u, s, vt = np.linalg.svd(e, full_matrices=False)
    root_t = np.sqrt(t)
    f = root_t * vt[:r].T
    lam = u[:, :r] * (s[:r] / root_t)
    return lam, f


def _design(x_stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k = x_stack.shape[0]
    xm = x_stack.reshape(k, -1)
    gram = xm @ xm.T
    return xm, gram


def _check_gram(gram: np.ndarray, what: str = "design") -> None:
    w = np.linalg.eigvalsh(gram)
    if w[-1] <= 0 or w[0] <= w[-1] * 1e-12:
        raise SingularDesignError(f"{what} matrix sum X'X is singular (eigenvalues {w})")


def ols_step(panel: PanelData, lam, f) -> np.ndarray:
    """Coefficients minimizing ``sum (Y - X'beta - (lambda f')_it)^2``."""
    xm, gram = _design(panel.x_stack())
    _check_gram(gram)
    lam = np.asarray(lam, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    target = panel.y - lam @ f.T if lam.size else panel.y
    return np.linalg.solve(gram, xm @ target.ravel())


def _profiled(y, xb, r):
    """(lambda, f, ssr) for the residual ``y - xb``."""
    e = y - xb
    lam, f = pca_step(e, r)
    fit = lam @ f.T if r else 0.0
    return lam, f, float(np.sum((e - fit) ** 2))


def _run_start(y, x_stack, xm, gram, beta0, r, tol, max_iter, floor):
    beta = beta0
    lam, f, obj = _profiled(y, np.tensordot(beta, x_stack, axes=1), r)
    trace = [obj]
    converged = False
    it = 0
    if r == 0 or obj <= floor:
        return beta, lam, f, obj, 0, True, trace
    while it < max_iter:
        it += 1
        beta = np.linalg.solve(gram, xm @ (y - lam @ f.T).ravel())
        lam, f, new = _profiled(y, np.tensordot(beta, x_stack, axes=1), r)
        trace.append(new)
        change = obj - new
        obj = new
        if obj <= floor or abs(change) <= tol * max(obj + change, floor):
            converged = True
            break
    return beta, lam, f, obj, it, converged, trace


def estimate_ls(panel: PanelData, cfg: LsConfig | None = None) -> FactorEstimate:
    """Interactive fixed-effects least squares with ``cfg.r`` factors.

    Each start alternates :func:`pca_step` and :func:`ols_step` until the
    relative change of the sum of squared residuals falls below ``cfg.tol``.
    The start with the lowest final objective wins (lowest index on ties).
    ``r = 0`` gives pooled OLS.
    """
    cfg = cfg or LsConfig()
    n, t = panel.shape
    cfg.check(n, t)
    y = panel.y
    x_stack = panel.x_stack()
    xm, gram = _design(x_stack)
    _check_gram(gram)
    beta_ols = np.linalg.solve(gram, xm @ y.ravel())
    floor = _EXACT_FIT * float(np.sum(y * y))
    scale = 0.5 * float(np.max(np.abs(beta_ols))) + 0.5
    n_starts = 1 if cfg.r == 0 else cfg.n_starts

    best = None
    traces = []
    for s in range(n_starts):
        if s == 0:
            beta0 = beta_ols
        else:
            rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, s]))
            beta0 = beta_ols + rng.uniform(-scale, scale, size=beta_ols.shape)
        res = _run_start(y, x_stack, xm, gram, beta0, cfg.r, cfg.tol, cfg.max_iter, floor)
        traces.append(tuple(res[6]))
        if best is None or res[3] < best[0][3]:
            best = (res, s)
        if res[3] <= floor:
            break
    (beta, lam, f, obj, it, conv, trace), s = best
    return FactorEstimate(
        beta_hat=beta, lambda_hat=lam, f_hat=f, objective=obj, iterations=it,
        converged=conv, r=cfg.r, start_index=s, trace=tuple(trace), traces=tuple(traces),
    )


def factor_annihilate(m, lam, f) -> np.ndarray:
    """``M_lambda m M_f``: remove the column span of ``lam`` and of ``f``."""
    m = np.asarray(m, dtype=np.float64)

    def _basis(a):
        if a.size == 0:
            return a
        u, s, _ = np.linalg.svd(a, full_matrices=False)
        keep = s > s.max(initial=0.0) * 1e-10 if s.size else s
        return u[:, keep]

    ql, qf = _basis(np.asarray(lam)), _basis(np.asarray(f))
    out = m
    if ql.size:
        out = out - ql @ (ql.T @ out)
    if qf.size:
        out = out - (out @ qf) @ qf.T
    return out
