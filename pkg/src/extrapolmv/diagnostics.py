"""Design-matrix diagnostics: leverage, hull membership, influence.

Quadratic forms in (X'X)^-1 are computed through triangular solves
against a Cholesky factor, never by forming the l x l hat matrix or an
explicit inverse. All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

# Leverages this far above 1 are treated as roundoff and clamped; anything
# beyond is a genuine numerical failure.
_LEVERAGE_SLACK = 1e-10


@dataclass
class HighLeverageRule:
    """Rule for flagging high-leverage rows from the leverage vector alone.

    "multiple_of_mean" flags h_ii > factor * mean(h) (the classic 3q/l
    rule at factor 3); "top_fraction" flags the largest ceil(fraction * l)
    leverages.
    """

    kind: str = "multiple_of_mean"
    factor: float = 3.0
    fraction: float = 0.05

    def __post_init__(self):
        if self.kind not in ("multiple_of_mean", "top_fraction"):
            raise ValueError(f"unknown high-leverage rule {self.kind!r}")
        if self.factor < 0:
            raise ValueError("factor cannot be negative")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")


@dataclass
class LeverageReport:
    h: np.ndarray
    h_max: float
    trace_h: float
    high_leverage: np.ndarray


def _gram_cholesky(X: np.ndarray):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a matrix")
    try:
        return cho_factor(X.T @ X, lower=True)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("X'X is singular") from None


def hat_diagonal(X: np.ndarray) -> np.ndarray:
    """Leverages h_ii = x_i'(X'X)^-1 x_i for each row of X."""
    X = np.asarray(X, dtype=float)
    c = _gram_cholesky(X)
    W = cho_solve(c, X.T)
    h = np.einsum("ij,ji->i", X, W)
    over = h > 1.0
    if np.any(h > 1.0 + _LEVERAGE_SLACK):
        raise np.linalg.LinAlgError("leverage exceeds 1 beyond roundoff tolerance")
    h[over] = 1.0
    return h


def leverage_report(X: np.ndarray, rule: HighLeverageRule | None = None) -> LeverageReport:
    """Leverages plus summary quantities and the flagged high-leverage set."""
    h = hat_diagonal(X)
    rule = rule or HighLeverageRule()
    return LeverageReport(
        h=h,
        h_max=float(h.max()),
        trace_h=float(h.sum()),
        high_leverage=high_leverage_set(h, rule),
    )


def write_leverage_csv(report: LeverageReport, ids, path) -> None:
    """Write a leverage report as id, h, flagged rows."""
    flagged = set(int(i) for i in report.high_leverage)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "h", "flagged"])
        for i, rid in enumerate(ids):
            writer.writerow([rid, repr(float(report.h[i])),
                             int(i in flagged)])


def _clamp_near_one(v):
    # mirror hat_diagonal's roundoff clamp so a design row's quadratic
    # form can never land a hair above its own (clamped) leverage
    return np.where((v > 1.0) & (v <= 1.0 + _LEVERAGE_SLACK), 1.0, v)


def ivh_value(X: np.ndarray, x0: np.ndarray) -> float:
    """Quadratic form x0'(X'X)^-1 x0 for a candidate covariate row."""
    X = np.asarray(X, dtype=float)
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape[0] != X.shape[1]:
        raise ValueError(f"x0 has {x0.shape[0]} entries, expected {X.shape[1]}")
    c = _gram_cholesky(X)
    return float(_clamp_near_one(np.einsum("i,i->", x0, cho_solve(c, x0))))


def ivh_values(X: np.ndarray, X0: np.ndarray) -> np.ndarray:
    """Row-wise ivh_value for a matrix of candidate rows."""
    X = np.asarray(X, dtype=float)
    X0 = np.asarray(X0, dtype=float)
    if X0.shape[1] != X.shape[1]:
        raise ValueError("candidate rows do not match design width")
    c = _gram_cholesky(X)
    return _clamp_near_one(np.einsum("ij,ji->i", X0, cho_solve(c, X0.T)))


def ivh_contains(X: np.ndarray, x0: np.ndarray) -> bool:
    """True when x0 lies inside the hull: ivh_value(X, x0) <= max leverage."""
    return ivh_value(X, x0) <= float(hat_diagonal(X).max())


def mahalanobis_sq(x: np.ndarray, xbar: np.ndarray, S: np.ndarray) -> float:
    """Squared Mahalanobis distance (x - xbar)' S^-1 (x - xbar)."""
    x = np.asarray(x, dtype=float).ravel()
    xbar = np.asarray(xbar, dtype=float).ravel()
    S = np.asarray(S, dtype=float)
    if x.shape != xbar.shape or S.shape != (x.size, x.size):
        raise ValueError("dimension mismatch between x, xbar and S")
    try:
        c = cho_factor(S, lower=True)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("covariance matrix is singular") from None
    d = x - xbar
    return float(d @ cho_solve(c, d))


def leverage_from_mahalanobis(md2: float, l: int) -> float:
    """Recover leverage from squared Mahalanobis distance: 1/l + md2/(l-1)."""
    if l < 2:
        raise ValueError("need at least 2 rows")
    if md2 < 0:
        raise ValueError("squared distance cannot be negative")
    return 1.0 / l + md2 / (l - 1)


def cooks_distance(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cook's distance D_i = (t_i^2 / q) * h_ii / (1 - h_ii) per row.

    t_i is the (internally) studentized residual. Rows with leverage 1
    have a zero residual by construction and are reported as infinite.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    l, q = X.shape
    if y.shape[0] != l:
        raise ValueError("response length != row count")
    if l <= q:
        raise ValueError("need more rows than covariates for residual variance")
    c = _gram_cholesky(X)
    beta = cho_solve(c, X.T @ y)
    r = y - X @ beta
    rss = float(r @ r)
    # residuals at roundoff level mean an exact fit: studentizing them
    # would divide noise by noise
    if rss <= 1e-28 * max(float(y @ y), 1.0):
        return np.zeros(l)
    s2 = rss / (l - q)
    h = hat_diagonal(X)
    at_one = np.isclose(h, 1.0, rtol=0.0, atol=_LEVERAGE_SLACK)
    D = np.full(l, np.inf)
    ok = ~at_one
    t2 = r[ok] ** 2 / (s2 * (1.0 - h[ok]))
    D[ok] = t2 / q * h[ok] / (1.0 - h[ok])
    return D


def high_leverage_set(h: np.ndarray, rule: HighLeverageRule | None = None) -> np.ndarray:
    """Indices flagged as high leverage under the rule; deterministic."""
    h = np.asarray(h, dtype=float).ravel()
    if h.size == 0:
        raise ValueError("empty leverage vector")
    rule = rule or HighLeverageRule()
    if rule.kind == "multiple_of_mean":
        return np.flatnonzero(h > rule.factor * h.mean())
    k = int(np.ceil(rule.fraction * h.size))
    if k <= 0:
        return np.array([], dtype=int)
    # stable: sort by descending leverage, index breaks ties
    order = np.lexsort((np.arange(h.size), -h))
    return np.sort(order[:k])
