"""Predictive-variance extrapolation measures, cutoffs and indices.

Per location the sampler's draws yield a predictive covariance matrix of
the mean response vector. Its trace (MVPV-tr) and determinant (MVPV-D)
scalarize that matrix; CMVPV is the predictive variance of one response
conditioned on the responses observed alongside it. Cutoffs derived from
the observed locations turn each measure into a binary extrapolation
index and a relative (value / cutoff) score.

Determinants are computed and compared in log space throughout; exact
ties at -inf are broken by the trace. All operations are pure given the
posterior draws, and per-location scoring is chunked so it can be
parallelized or streamed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from extrapolmv.dataset import Dataset, row_status
from extrapolmv.diagnostics import HighLeverageRule, high_leverage_set, ivh_values

if TYPE_CHECKING:  # pragma: no cover
    from extrapolmv.sampler import PosteriorDraws

DEFAULT_CUTOFFS = ("max", "lev", "q99", "q95")
DEFAULT_MEASURES = ("det", "trace")

# Eigenvalues below -tol * trace mean the matrix is not a covariance.
_PSD_TOL = 1e-10


# ---------------------------------------------------------------------------
# Predictive variance of the mean and its scalarizations
# ---------------------------------------------------------------------------


@dataclass
class PredictiveVariance:
    """Per-location covariance of the predictive mean plus scalar summaries.

    ``det`` may underflow to 0 for strongly concentrated posteriors;
    ``logdet`` is the authoritative determinant representation (-inf for
    semidefinite V).
    """

    V: np.ndarray
    trace: float
    logdet: float
    det: float
    location_id: str | None = None


def _check_symmetric(V: np.ndarray) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise ValueError("V must be square")
    scale = max(1.0, float(np.abs(V).max()))
    if float(np.abs(V - V.T).max()) > 1e-8 * scale:
        raise ValueError("V is asymmetric beyond tolerance")
    return 0.5 * (V + V.T)


def _logdet_psd(V: np.ndarray) -> float:
    """Log-determinant of a PSD matrix; -inf when semidefinite."""
    lam = np.linalg.eigvalsh(V)
    floor = -_PSD_TOL * max(float(np.trace(V)), 1.0)
    if lam.min() < floor:
        raise ValueError("matrix is not positive semidefinite within tolerance")
    lam = np.maximum(lam, 0.0)
    if np.any(lam == 0.0):
        return float("-inf")
    return float(np.log(lam).sum())


def predictive_variance(draws: np.ndarray, ddof: int = 0,
                        location_id: str | None = None) -> PredictiveVariance:
    """Sample covariance of predictive-mean draws.

    ``draws`` is (A, n), one mean vector per retained draw. The divisor
    is A - ddof; the default ddof=0 gives the plain A divisor used by the
    rest of the pipeline (ddof=1 is available for cross-checks).
    """
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    A = draws.shape[0]
    if A < 2:
        raise ValueError("need at least 2 draws")
    if A - ddof <= 0:
        raise ValueError("divisor must be positive")
    dev = draws - draws.mean(axis=0)
    V = dev.T @ dev / (A - ddof)
    V = 0.5 * (V + V.T)
    logdet = _logdet_psd(V)
    return PredictiveVariance(V=V, trace=float(np.trace(V)), logdet=logdet,
                              det=float(np.exp(logdet)), location_id=location_id)


def _as_matrix(V) -> np.ndarray:
    if isinstance(V, PredictiveVariance):
        return V.V
    return np.asarray(V, dtype=float)


def mvpv_trace(V) -> float:
    """Trace scalarization of a predictive covariance matrix."""
    M = _check_symmetric(_as_matrix(V))
    return float(np.trace(M))


def mvpv_logdet(V) -> float:
    """Log-determinant scalarization; -inf for semidefinite matrices."""
    M = _check_symmetric(_as_matrix(V))
    return _logdet_psd(M)


# ---------------------------------------------------------------------------
# Conditional multivariate normal
# ---------------------------------------------------------------------------


def _conditional_gain(sigma: np.ndarray, target: np.ndarray,
                      given: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gain matrix Sigma_tg Sigma_gg^-1 and the conditional covariance.

    Shared by conditional_mvn and the sampler's imputation step: both the
    gain and the Schur complement depend on Sigma alone, not on the
    conditioning values.
    """
    S_gg = sigma[np.ix_(given, given)]
    S_tg = sigma[np.ix_(target, given)]
    try:
        c = cho_factor(S_gg, lower=True)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("conditioning block of Sigma is singular") from None
    G = cho_solve(c, S_tg.T).T
    S_bar = sigma[np.ix_(target, target)] - G @ S_tg.T
    return G, 0.5 * (S_bar + S_bar.T)


def conditional_mvn(mu: np.ndarray, sigma: np.ndarray, target, given,
                    a) -> tuple[np.ndarray, np.ndarray]:
    """Conditional mean and covariance of target components given others.

    Returns (mu_bar, Sigma_bar) for the distribution of the ``target``
    components of a N(mu, sigma) vector given that the ``given``
    components equal ``a``:

        mu_bar    = mu_t + Sigma_tg Sigma_gg^-1 (a - mu_g)
        Sigma_bar = Sigma_tt - Sigma_tg Sigma_gg^-1 Sigma_gt

    An empty ``given`` set returns the marginal block unchanged.
    """
    mu = np.asarray(mu, dtype=float).ravel()
    sigma = np.asarray(sigma, dtype=float)
    t = np.asarray(target, dtype=int).ravel()
    g = np.asarray(given, dtype=int).ravel()
    if sigma.shape != (mu.size, mu.size):
        raise ValueError("sigma shape does not match mu")
    if np.intersect1d(t, g).size:
        raise ValueError("target and given sets must be disjoint")
    if g.size == 0:
        return mu[t].copy(), sigma[np.ix_(t, t)].copy()
    a = np.asarray(a, dtype=float).ravel()
    if a.size != g.size:
        raise ValueError("conditioning values do not match given set")
    G, S_bar = _conditional_gain(sigma, t, g)
    mu_bar = mu[t] + G @ (a - mu[g])
    return mu_bar, S_bar


def cmvpv(p: "PosteriorDraws", x: np.ndarray, target: int,
          given_values: np.ndarray, given_mask: np.ndarray | None = None,
          method: str = "total") -> float:
    """Conditional predictive variance of one response at one location.

    For each retained draw the target response is conditioned on the
    available sibling responses; the returned measure is the across-draw
    variance of those conditional means plus the mean within-draw
    conditional variance ("total", the default; both branches are then
    on the same scale). With ``method="mean_only"`` the conditioned
    branch keeps only the across-draw variance. When no siblings are
    available the marginal counterpart is used, adding the mean residual
    variance of the target so the values stay comparable.

    ``given_values`` has one slot per response; ``given_mask`` marks
    which slots are actually available (defaults to the finite ones,
    target excluded).
    """
    if method not in ("total", "mean_only"):
        raise ValueError(f"unknown cmvpv method {method!r}")
    B = p.B_draws
    S = p.Sigma_draws
    x = np.asarray(x, dtype=float).ravel()
    A, n, q = B.shape
    if x.size != q:
        raise ValueError(f"x has {x.size} entries, expected {q}")
    if not 0 <= target < n:
        raise ValueError("target response index out of range")
    given_values = np.asarray(given_values, dtype=float).ravel()
    if given_values.size != n:
        raise ValueError("given_values must have one slot per response")
    if given_mask is None:
        given_mask = np.isfinite(given_values)
        given_mask[target] = False
    else:
        given_mask = np.asarray(given_mask, dtype=bool).ravel()
        if given_mask.size != n:
            raise ValueError("given_mask must have one slot per response")
        if given_mask[target]:
            raise ValueError("target response cannot be conditioned on itself")
    g = np.flatnonzero(given_mask)
    if g.size and not np.all(np.isfinite(given_values[g])):
        raise ValueError("conditioning values must be finite where available")

    mu_t = B[:, target, :] @ x
    if g.size == 0:
        dev = mu_t - mu_t.mean()
        return float((dev ** 2).mean() + S[:, target, target].mean())

    S_gg = S[:, g[:, None], g[None, :]]
    S_tg = S[:, target, :][:, g]
    G = np.linalg.solve(S_gg, S_tg[..., None])[..., 0]
    sbar = S[:, target, target] - np.einsum("ag,ag->a", S_tg, G)
    mu_g = np.einsum("agq,q->ag", B[:, g, :], x)
    mubar = mu_t + np.einsum("ag,ag->a", G, given_values[g][None, :] - mu_g)
    dev = mubar - mubar.mean()
    out = float((dev ** 2).mean())
    if method == "total":
        out += float(sbar.mean())
    return out


# ---------------------------------------------------------------------------
# Cutoffs and indices
# ---------------------------------------------------------------------------


@dataclass
class CutoffSpec:
    """One cutoff rule: maximum, leverage-screened maximum, or quantile.

    Quantiles use linear interpolation between the closest order
    statistics (position p of the k-th of N values is (k-1)/(N-1)).
    """

    kind: str
    level: float | None = None
    rule: HighLeverageRule | None = None

    def __post_init__(self):
        if self.kind not in ("max", "leverage_informed_max", "quantile"):
            raise ValueError(f"unknown cutoff kind {self.kind!r}")
        if self.kind == "quantile":
            if self.level is None or not 0.0 < self.level <= 1.0:
                raise ValueError("quantile level must lie in (0, 1]")

    @classmethod
    def parse(cls, token: str) -> "CutoffSpec":
        """Parse a cutoff token: "max", "lev", "q99", "q95" or "q:<r>"."""
        token = token.strip()
        if token == "max":
            return cls(kind="max")
        if token == "lev":
            return cls(kind="leverage_informed_max")
        if token == "q99":
            return cls(kind="quantile", level=0.99)
        if token == "q95":
            return cls(kind="quantile", level=0.95)
        if token.startswith("q:"):
            return cls(kind="quantile", level=float(token[2:]))
        raise ValueError(f"unknown cutoff token {token!r}")

    @property
    def name(self) -> str:
        if self.kind == "max":
            return "max"
        if self.kind == "leverage_informed_max":
            return "lev"
        label = f"{self.level * 100:g}".replace(".", "_")
        return f"q{label}"


def compute_cutoff(v_obs: np.ndarray, spec: CutoffSpec,
                   leverage: np.ndarray | None = None) -> float:
    """Cutoff value k derived from the observed-location measure values."""
    v = np.asarray(v_obs, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("no observed values to derive a cutoff from")
    if spec.kind == "max":
        return float(v.max())
    if spec.kind == "leverage_informed_max":
        if leverage is None:
            raise ValueError("leverage-informed cutoff needs a leverage vector")
        leverage = np.asarray(leverage, dtype=float).ravel()
        if leverage.size != v.size:
            raise ValueError("leverage vector must align with observed values")
        flagged = high_leverage_set(leverage, spec.rule or HighLeverageRule())
        keep = np.setdiff1d(np.arange(v.size), flagged)
        if keep.size == 0:
            raise ValueError("leverage rule removed every observed row")
        return float(v[keep].max())
    return float(np.quantile(v, spec.level))


def extrapolation_index(v: float, k: float) -> int:
    """1 when the measure strictly exceeds the cutoff, else 0."""
    return 1 if v > k else 0


def rmvpv(v: float, k: float) -> float:
    """Relative measure v / k; values above 1 are extrapolations."""
    if k <= 0:
        raise ValueError("cutoff must be positive for a relative measure")
    return v / k


# ---------------------------------------------------------------------------
# Whole-dataset scoring
# ---------------------------------------------------------------------------


@dataclass
class CutoffResult:
    name: str
    k: float
    e: np.ndarray
    r: np.ndarray
    k_tie: float | None = None


@dataclass
class MeasureReport:
    """Scores for one measure: per-location values plus per-cutoff flags."""

    measure: str
    values: np.ndarray
    cutoffs: list[CutoffResult]
    first_flagging: list[str]


@dataclass
class ExtrapolationReport:
    ids: list[str]
    coords: np.ndarray | None
    status: list[str]
    measures: list[MeasureReport]
    cutoff_names: list[str]

    @property
    def primary(self) -> MeasureReport:
        return self.measures[0]


def measure_column(measure: str) -> str:
    """CSV column name for a measure key."""
    if measure == "trace":
        return "mvpv_tr"
    if measure == "det":
        return "mvpv_logdet"
    if measure.startswith("cmvpv:"):
        return "cmvpv_" + measure.split(":", 1)[1]
    raise ValueError(f"unknown measure {measure!r}")


def _parse_measures(measures, response_names) -> list[str]:
    out = []
    for m in measures:
        if m in ("trace", "det"):
            out.append(m)
        elif m.startswith("cmvpv:"):
            resp = m.split(":", 1)[1]
            if resp not in response_names:
                raise ValueError(f"measure {m!r} references unknown response {resp!r}")
            out.append(m)
        else:
            raise ValueError(f"unknown measure {m!r}")
    if not out:
        raise ValueError("at least one measure is required")
    return out


def _parse_cutoffs(cutoffs) -> list[CutoffSpec]:
    specs = []
    for c in cutoffs:
        specs.append(c if isinstance(c, CutoffSpec) else CutoffSpec.parse(c))
    if not specs:
        raise ValueError("at least one cutoff is required")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError("duplicate cutoff names")
    return specs


def _mvpv_arrays(B_draws: np.ndarray, X_rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row (trace, logdet) of the across-draw covariance of B_a x."""
    A, n, _ = B_draws.shape
    Bc = B_draws - B_draws.mean(axis=0)
    L = X_rows.shape[0]
    traces = np.empty(L)
    logdets = np.empty(L)
    chunk = max(1, int(8_000_000 // max(A * n, 1)))
    for s in range(0, L, chunk):
        Xc = X_rows[s:s + chunk]
        dev = np.einsum("anq,lq->lan", Bc, Xc)
        V = np.einsum("lan,lam->lnm", dev, dev) / A
        traces[s:s + chunk] = np.trace(V, axis1=1, axis2=2)
        lam = np.linalg.eigvalsh(0.5 * (V + V.transpose(0, 2, 1)))
        lam = np.maximum(lam, 0.0)
        with np.errstate(divide="ignore"):
            ld = np.where(np.any(lam == 0.0, axis=1), -np.inf,
                          np.sum(np.log(np.maximum(lam, 1e-300)), axis=1))
        logdets[s:s + chunk] = ld
    return traces, logdets


def _cmvpv_array(p: "PosteriorDraws", d: Dataset, target: int,
                 method: str = "total") -> np.ndarray:
    """CMVPV for every location, conditioning on its observed siblings."""
    B = p.B_draws
    S = p.Sigma_draws
    A, n, _ = B.shape
    vals = np.empty(d.n_rows)
    others = [j for j in range(n) if j != target]
    groups: dict[tuple, list[int]] = {}
    for i in range(d.n_rows):
        key = tuple(j for j in others if d.mask[i, j])
        groups.setdefault(key, []).append(i)

    Bt = B[:, target, :]
    s_tt_mean = float(S[:, target, target].mean())
    for g_key in sorted(groups):
        rows = np.asarray(groups[g_key])
        g = np.asarray(g_key, dtype=int)
        if g.size == 0:
            chunk = max(1, int(8_000_000 // A))
            for s0 in range(0, rows.size, chunk):
                rr = rows[s0:s0 + chunk]
                mu_t = d.X[rr] @ Bt.T
                dev = mu_t - mu_t.mean(axis=1, keepdims=True)
                vals[rr] = (dev ** 2).mean(axis=1) + s_tt_mean
            continue
        S_gg = S[:, g[:, None], g[None, :]]
        S_tg = S[:, target, :][:, g]
        G = np.linalg.solve(S_gg, S_tg[..., None])[..., 0]
        sbar_mean = float((S[:, target, target]
                           - np.einsum("ag,ag->a", S_tg, G)).mean())
        Bg = B[:, g, :]
        chunk = max(1, int(8_000_000 // (A * (g.size + 1))))
        for s0 in range(0, rows.size, chunk):
            rr = rows[s0:s0 + chunk]
            Xg = d.X[rr]
            mu_t = Xg @ Bt.T
            mu_g = np.einsum("agq,lq->lag", Bg, Xg)
            resid = d.Y[rr][:, g][:, None, :] - mu_g
            mubar = mu_t + np.einsum("lag,ag->la", resid, G)
            dev = mubar - mubar.mean(axis=1, keepdims=True)
            vals[rr] = (dev ** 2).mean(axis=1)
            if method == "total":
                vals[rr] += sbar_mean
    return vals


def _cutoff_with_tie(v_obs: np.ndarray, tie_obs: np.ndarray | None,
                     spec: CutoffSpec, leverage: np.ndarray | None):
    """Cutoff plus tie-break value; ties only matter for log-det measures."""
    if tie_obs is None:
        return compute_cutoff(v_obs, spec, leverage), None
    if spec.kind == "quantile":
        if not np.all(np.isfinite(v_obs)):
            raise ValueError(
                "quantile cutoff undefined: some observed predictive "
                "covariances are singular (log-determinant -inf)")
        return float(np.quantile(v_obs, spec.level)), None
    if spec.kind == "leverage_informed_max":
        if leverage is None or leverage.size != v_obs.size:
            raise ValueError("leverage vector must align with observed values")
        flagged = high_leverage_set(leverage, spec.rule or HighLeverageRule())
        keep = np.setdiff1d(np.arange(v_obs.size), flagged)
        if keep.size == 0:
            raise ValueError("leverage rule removed every observed row")
    else:
        keep = np.arange(v_obs.size)
    sel = keep[np.lexsort((tie_obs[keep], v_obs[keep]))[-1]]
    return float(v_obs[sel]), float(tie_obs[sel])


def _flags_and_ratio(v: np.ndarray, tie: np.ndarray | None, k: float,
                     k_tie: float | None, log_space: bool):
    if tie is None or k_tie is None:
        e = (v > k).astype(int)
    else:
        e = ((v > k) | ((v == k) & (tie > k_tie))).astype(int)
    if log_space:
        with np.errstate(over="ignore", invalid="ignore"):
            r = np.exp(v - k)
        both_inf = np.isneginf(v) & np.isneginf(k)
        if np.any(both_inf):
            if tie is not None and k_tie is not None and k_tie > 0:
                r = np.where(both_inf, tie / k_tie, r)
            else:
                r = np.where(both_inf, 1.0, r)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where((v == 0) & (k == 0), 1.0, v / k)
    return e, r


def _assemble_report(d: Dataset, measure_data: list[tuple], cutoff_specs,
                     hvals: np.ndarray) -> ExtrapolationReport:
    """measure_data items: (measure_key, values, tie_values_or_None, obs_idx)."""
    reports = []
    for key, values, tie, obs in measure_data:
        if obs.size == 0:
            raise ValueError(f"measure {key!r} has no observed locations")
        log_space = key == "det"
        results = []
        for spec in cutoff_specs:
            k, k_tie = _cutoff_with_tie(values[obs], None if tie is None else tie[obs],
                                        spec, hvals[obs])
            e, r = _flags_and_ratio(values, tie, k, k_tie, log_space)
            results.append(CutoffResult(name=spec.name, k=k, e=e, r=r, k_tie=k_tie))
        # most conservative first: order by descending cutoff value
        order = sorted(range(len(results)),
                       key=lambda i: (-results[i].k,
                                      -(results[i].k_tie or 0.0), i))
        first = []
        for i in range(d.n_rows):
            hit = ""
            for j in order:
                if results[j].e[i]:
                    hit = results[j].name
                    break
            first.append(hit)
        reports.append(MeasureReport(measure=key, values=values,
                                     cutoffs=results, first_flagging=first))
    return ExtrapolationReport(
        ids=list(d.ids),
        coords=None if d.coords is None else d.coords.copy(),
        status=row_status(d),
        measures=reports,
        cutoff_names=[s.name for s in cutoff_specs],
    )


def score_locations(p: "PosteriorDraws", d: Dataset,
                    measures=DEFAULT_MEASURES, cutoffs=DEFAULT_CUTOFFS,
                    cmvpv_method: str = "total") -> ExtrapolationReport:
    """Score every location of ``d`` against cutoffs from the observed ones.

    The first measure listed is the primary one: its flags populate the
    per-cutoff columns of the exported scores file. MVPV cutoffs are
    derived from all rows used in the fit; CMVPV cutoffs from the rows
    where the target response itself is observed.
    """
    measures = _parse_measures(measures, d.response_names)
    cutoff_specs = _parse_cutoffs(cutoffs)

    fit_rows = np.asarray(p.fit_rows, dtype=int)
    expected = np.flatnonzero(d.mask.any(axis=1))
    if not np.array_equal(fit_rows, expected):
        raise ValueError("draws were not fitted on this dataset's observed rows")
    if p.B_draws.shape[2] != d.n_covariates or p.B_draws.shape[1] != d.n_responses:
        raise ValueError("draw dimensions do not match the dataset")

    hvals = ivh_values(d.X[fit_rows], d.X)

    need_mvpv = any(m in ("trace", "det") for m in measures)
    traces = logdets = None
    if need_mvpv:
        traces, logdets = _mvpv_arrays(p.B_draws, d.X)

    measure_data = []
    for m in measures:
        if m == "trace":
            measure_data.append((m, traces, None, fit_rows))
        elif m == "det":
            measure_data.append((m, logdets, traces, fit_rows))
        else:
            resp = m.split(":", 1)[1]
            t = d.response_names.index(resp)
            vals = _cmvpv_array(p, d, t, method=cmvpv_method)
            obs = np.flatnonzero(d.mask[:, t])
            measure_data.append((m, vals, None, obs))
    return _assemble_report(d, measure_data, cutoff_specs, hvals)


def score_locations_analytic(d: Dataset, measures=DEFAULT_MEASURES,
                             cutoffs=DEFAULT_CUTOFFS,
                             sigma: np.ndarray | None = None) -> ExtrapolationReport:
    """Closed-form scoring with a known (or OLS-estimated) error covariance.

    Here V_i = x_i'(X'X)^-1 x_i * Sigma where X covers the observed rows,
    so both scalarizations are exact, strictly increasing functions of
    the leverage-style quadratic form. Supports the trace and det
    measures only; mainly a verification path for the sampled pipeline.
    """
    measures = _parse_measures(measures, d.response_names)
    if any(m.startswith("cmvpv:") for m in measures):
        raise ValueError("analytic mode supports 'trace' and 'det' measures only")
    cutoff_specs = _parse_cutoffs(cutoffs)

    fit_rows = np.flatnonzero(d.mask.any(axis=1))
    if fit_rows.size == 0:
        raise ValueError("no observed rows to derive cutoffs from")

    if sigma is None:
        complete = np.flatnonzero(d.mask.all(axis=1))
        if complete.size < d.n_covariates + 2:
            raise ValueError("too few complete rows to estimate Sigma")
        Xc, Yc = d.X[complete], d.Y[complete]
        c = cho_factor(Xc.T @ Xc, lower=True)
        E = Yc - Xc @ cho_solve(c, Xc.T @ Yc)
        sigma = E.T @ E / complete.size
    else:
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape != (d.n_responses, d.n_responses):
            raise ValueError("sigma must be n x n")

    hvals = ivh_values(d.X[fit_rows], d.X)
    tr_sigma = float(np.trace(sigma))
    logdet_sigma = _logdet_psd(_check_symmetric(sigma))
    n = d.n_responses

    traces = hvals * tr_sigma
    with np.errstate(divide="ignore"):
        logdets = n * np.log(hvals) + logdet_sigma

    measure_data = []
    for m in measures:
        if m == "trace":
            measure_data.append((m, traces, None, fit_rows))
        else:
            measure_data.append((m, logdets, traces, fit_rows))
    return _assemble_report(d, measure_data, cutoff_specs, hvals)


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def _canonical_measure_order(measures: list[MeasureReport]) -> list[MeasureReport]:
    rank = {"trace": 0, "det": 1}
    return sorted(measures, key=lambda m: (rank.get(m.measure, 2),
                                           measures.index(m)))


def write_scores_csv(report: ExtrapolationReport, path) -> None:
    """Write per-location scores; cutoff columns come from the primary measure.

    Value columns appear in the canonical order mvpv_tr, mvpv_logdet,
    cmvpv_* independent of which measure is primary, so headers are
    stable across runs.
    """
    primary = report.primary
    ordered = _canonical_measure_order(report.measures)
    header = ["id", "lon", "lat", "status"]
    header += [measure_column(m.measure) for m in ordered]
    for c in primary.cutoffs:
        header += [f"k_{c.name}", f"e_{c.name}", f"r_{c.name}"]
    header.append("first_flagging_cutoff")

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, rid in enumerate(report.ids):
            row = [rid]
            if report.coords is None:
                row += ["", ""]
            else:
                row += [_fmt(report.coords[i, 0]), _fmt(report.coords[i, 1])]
            row.append(report.status[i])
            row += [_fmt(m.values[i]) for m in ordered]
            for c in primary.cutoffs:
                row += [_fmt(c.k), str(int(c.e[i])), _fmt(c.r[i])]
            row.append(primary.first_flagging[i])
            writer.writerow(row)


def write_plotdata_csv(report: ExtrapolationReport, path) -> None:
    """Write the minimal map-plotting file: id, lon, lat, first cutoff hit."""
    primary = report.primary
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "lon", "lat", "first_flagging_cutoff"])
        for i, rid in enumerate(report.ids):
            if report.coords is None:
                lon = lat = ""
            else:
                lon, lat = _fmt(report.coords[i, 0]), _fmt(report.coords[i, 1])
            writer.writerow([rid, lon, lat, primary.first_flagging[i]])
