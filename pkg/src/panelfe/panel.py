"""Balanced panel container, long-format CSV ingestion and spectral diagnostics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import BalanceError, DomainError, ParseError

ESTIMATOR_TAGS = ("LS", "GFE", "GFE_SPLIT", "OLS")


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PanelData:
    """Balanced N x T panel with K regressors.

    Parameters
    ----------
    y : array_like, shape (N, T)
        Outcome matrix.
    x : sequence of array_like, each (N, T)
        Regressor matrices, one per coefficient.
    gamma_true : array_like, shape (N, T), optional
        Known heterogeneity matrix. Only available for simulated panels.
    beta_true : array_like, shape (K,), optional
        True coefficient vector. Supplied together with ``gamma_true``.
    metadata : dict
        Free-form annotations, e.g. the unit/time label maps produced by
        :func:`load_panel_csv`.
    """

    y: np.ndarray
    x: tuple
    gamma_true: np.ndarray | None = None
    beta_true: np.ndarray | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        y = _frozen(self.y)
        if y.ndim != 2 or min(y.shape) < 1:
            raise DomainError(f"y must be a non-empty 2-d matrix, got shape {y.shape}")
        xs = tuple(_frozen(xk) for xk in self.x)
        if len(xs) < 1:
            raise DomainError("at least one regressor is required")
        for k, xk in enumerate(xs):
            if xk.shape != y.shape:
                raise DomainError(f"x[{k}] has shape {xk.shape}, expected {y.shape}")
        if (self.gamma_true is None) != (self.beta_true is None):
            raise DomainError("gamma_true and beta_true must be given together")
        gamma = beta = None
        if self.gamma_true is not None:
            gamma = _frozen(self.gamma_true)
            beta = _frozen(np.atleast_1d(self.beta_true))
            if gamma.shape != y.shape:
                raise DomainError(f"gamma_true has shape {gamma.shape}, expected {y.shape}")
            if beta.shape != (len(xs),):
                raise DomainError(f"beta_true must have length {len(xs)}")
        for name, arr in [("y", y), ("gamma_true", gamma), ("beta_true", beta), *((f"x[{k}]", a) for k, a in enumerate(xs))]:
            if arr is not None and not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} contains non-finite entries")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", xs)
        object.__setattr__(self, "gamma_true", gamma)
        object.__setattr__(self, "beta_true", beta)

    @property
    def n_units(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def k(self) -> int:
        return len(self.x)

    @property
    def shape(self) -> tuple[int, int]:
        return self.y.shape

    def x_stack(self) -> np.ndarray:
        """Regressors as a (K, N, T) array."""
        return np.stack(self.x)

    def subpanel(self, units=None, periods=None) -> "PanelData":
        """Rows ``units`` and columns ``periods`` (index arrays or slices) as a new panel."""
        iu = np.arange(self.n_units)[units if units is not None else slice(None)]
        it = np.arange(self.n_periods)[periods if periods is not None else slice(None)]
        sel = np.ix_(iu, it)
        return PanelData(
            y=self.y[sel],
            x=tuple(xk[sel] for xk in self.x),
            gamma_true=None if self.gamma_true is None else self.gamma_true[sel],
            beta_true=self.beta_true,
        )

    def with_y(self, y) -> "PanelData":
        return PanelData(y=y, x=self.x, gamma_true=self.gamma_true, beta_true=self.beta_true,
                         metadata=dict(self.metadata))


@dataclass
class EstimateReport:
    """Point estimate plus optional standard errors, as printed by the CLI.

    ``fit`` keeps the estimator-specific result object (never serialized).
    """

    beta_hat: np.ndarray
    estimator_tag: str
    se: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)
    fit: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.beta_hat = np.atleast_1d(np.asarray(self.beta_hat, dtype=np.float64))
        base = self.estimator_tag[:-3] if self.estimator_tag.endswith("_JK") else self.estimator_tag
        if base not in ESTIMATOR_TAGS:
            raise DomainError(f"unknown estimator tag {self.estimator_tag!r}")
        if self.se is not None:
            self.se = np.atleast_1d(np.asarray(self.se, dtype=np.float64))
            if self.se.shape != self.beta_hat.shape:
                raise DomainError("se must have the same length as beta_hat")
            if not np.all(self.se > 0):
                raise DomainError("standard errors must be strictly positive")

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "estimator_tag": self.estimator_tag,
            "beta_hat": [float(b) for b in self.beta_hat],
            "se": None if self.se is None else [float(s) for s in self.se],
            "metadata": self.metadata,
        }


def _time_sort_key(labels: Sequence[str]):
    try:
        nums = [float(s) for s in labels]
    except ValueError:
        return sorted(labels)
    return [s for _, s in sorted(zip(nums, labels))]


def load_panel_csv(path, k: int) -> PanelData:
    """Read a balanced long-format panel.

    The file needs a header ``unit_id,time_id,y,x1,...,xK``. Units keep their
    order of first appearance; time labels are sorted (numerically when every
    label parses as a number).

    Raises
    ------
    ParseError
        Missing columns, non-numeric values or duplicated (unit, time) rows.
    BalanceError
        Some (unit, time) cell of the rectangular grid has no row.
    """
    if k < 1:
        raise DomainError("k must be at least 1")
    path = Path(path)
    xcols = [f"x{j}" for j in range(1, k + 1)]
    cells: dict[tuple[str, str], tuple[float, ...]] = {}
    units: dict[str, int] = {}
    times: set[str] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing_cols = [c for c in ["unit_id", "time_id", "y", *xcols] if c not in header]
        if missing_cols:
            raise ParseError(f"missing columns {missing_cols}", row=1)
        for rowno, row in enumerate(reader, start=2):
            u, t = row["unit_id"], row["time_id"]
            if u is None or t is None or u == "" or t == "":
                raise ParseError("empty unit_id or time_id", row=rowno)
            try:
                vals = tuple(float(row[c]) for c in ["y", *xcols])
            except (TypeError, ValueError):
                raise ParseError("non-numeric value in y/x columns", row=rowno) from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError("non-finite value", row=rowno)
            if (u, t) in cells:
                raise ParseError(f"duplicated cell ({u},{t})", row=rowno)
            cells[(u, t)] = vals
            units.setdefault(u, len(units))
            times.add(t)
    if not cells:
        raise ParseError("file contains no data rows")
    time_order = _time_sort_key(list(times))
    tindex = {t: j for j, t in enumerate(time_order)}
    absent = [(u, t) for u in units for t in time_order if (u, t) not in cells]
    if absent:
        raise BalanceError(absent)
    data = np.empty((1 + k, len(units), len(time_order)))
    for (u, t), vals in cells.items():
        data[:, units[u], tindex[t]] = vals
    return PanelData(
        y=data[0], x=tuple(data[1:]),
        metadata={"unit_index": dict(units), "time_index": tindex, "source": str(path)},
    )


def write_panel_csv(panel: PanelData, path, unit_labels=None, time_labels=None) -> None:
    """Write ``panel`` in the long format read by :func:`load_panel_csv`.

    Floats are written with ``repr`` so a round trip is exact.
    """
    n, t = panel.shape
    ul = unit_labels or [str(i + 1) for i in range(n)]
    tl = time_labels or [str(j + 1) for j in range(t)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit_id", "time_id", "y", *(f"x{j}" for j in range(1, panel.k + 1))])
        for i in range(n):
            for j in range(t):
                w.writerow([ul[i], tl[j], repr(float(panel.y[i, j])),
                            *(repr(float(xk[i, j])) for xk in panel.x)])


def singular_tail_share(m, r: int) -> float:
    """Mean squared mass beyond the ``r`` leading singular values.

    Returns ``(||m||_F^2 - sum_{l<=r} s_l^2) / (N T)``, clipped at zero.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DomainError("m must be a matrix")
    n, t = m.shape
    if r < 0 or r > min(n, t):
        raise DomainError(f"r={r} outside [0, min(N,T)={min(n, t)}]")
    total = float(np.sum(m * m))
    if r == 0:
        return total / (n * t)
    if r == min(n, t):
        return 0.0
    s = np.linalg.svd(m, compute_uv=False)
    return max(total - float(np.sum(s[:r] ** 2)), 0.0) / (n * t)
