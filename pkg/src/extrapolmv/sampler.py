"""Gibbs sampler for the Bayesian multivariate linear model.

Model: y_i = B x_i + e_i with e_i ~ N(0, Sigma) iid across rows, fitted
on every row with at least one observed response. Priors are independent
N(0, coef_prior_var) entries on B and an inverse-Wishart on Sigma. All
three full conditionals are conjugate, so one sweep is: impute the
missing response entries from their conditional normal, draw the whole
coefficient matrix from its Gaussian full conditional, then draw Sigma
from its inverse-Wishart full conditional.

Inverse-Wishart convention used throughout: IW(scale, df) has density
proportional to |S|^-(df+n+1)/2 * exp(-tr(scale S^-1)/2), giving the
full conditional IW(prior_scale + E'E, prior_df + l_fit) and prior mean
scale/(df-n-1).

Reproducibility: each chain gets its own generator spawned from
numpy's SeedSequence(seed), so chains are bit-identical whether run
serially or in parallel. Within an iteration the draw order is fixed:
imputation groups in sorted pattern order, then B, then Sigma.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import multigammaln

from extrapolmv.dataset import Dataset
from extrapolmv.extrapolation import _conditional_gain

DRAWS_FILE = "draws.csv"
CACHE_FILE = "draws.npz"
META_FILE = "meta.json"


@dataclass
class ModelSpec:
    """Prior and run-length configuration for gibbs_fit.

    ``iw_scale`` defaults to the identity and ``iw_df`` to q + 1 (resolved
    against the dataset at fit time). ``z_thin`` further thins the stored
    imputation snapshots relative to the retained draws.
    """

    coef_prior_var: float = 100.0
    iw_scale: np.ndarray | None = None
    iw_df: float | None = None
    iterations: int = 20000
    burn_in: int = 10000
    thin: int = 1
    chains: int = 2
    seed: int = 0
    store_z: bool = True
    z_thin: int = 50

    def __post_init__(self):
        if self.coef_prior_var <= 0:
            raise ValueError("coefficient prior variance must be positive")
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn-in must be non-negative and below iterations")
        if self.thin < 1 or self.z_thin < 1:
            raise ValueError("thinning factors must be at least 1")
        if self.chains < 1:
            raise ValueError("need at least one chain")
        if self.iw_scale is not None:
            self.iw_scale = np.asarray(self.iw_scale, dtype=float)

    def to_jsonable(self) -> dict:
        return {
            "coef_prior_var": float(self.coef_prior_var),
            "iw_scale": None if self.iw_scale is None else self.iw_scale.tolist(),
            "iw_df": None if self.iw_df is None else float(self.iw_df),
            "iterations": int(self.iterations),
            "burn_in": int(self.burn_in),
            "thin": int(self.thin),
            "chains": int(self.chains),
            "seed": int(self.seed),
            "store_z": bool(self.store_z),
            "z_thin": int(self.z_thin),
        }

    @classmethod
    def from_jsonable(cls, raw: dict) -> "ModelSpec":
        raw = dict(raw)
        if raw.get("iw_scale") is not None:
            raw["iw_scale"] = np.asarray(raw["iw_scale"], dtype=float)
        return cls(**raw)


@dataclass
class PosteriorDraws:
    """Retained Gibbs draws plus enough metadata to reuse them.

    B_draws is (A, n, q) in the response-by-covariate orientation,
    Sigma_draws (A, n, n). Z_draws holds thinned snapshots of the imputed
    missing cells listed in ``missing_cells`` (global row, response).
    """

    B_draws: np.ndarray
    Sigma_draws: np.ndarray
    chain: np.ndarray
    draw: np.ndarray
    fit_rows: np.ndarray
    missing_cells: np.ndarray
    Z_draws: np.ndarray
    Z_chain: np.ndarray
    Z_draw: np.ndarray
    spec: ModelSpec
    response_names: list[str] = field(default_factory=list)
    covariate_names: list[str] = field(default_factory=list)

    @property
    def n_draws(self) -> int:
        return self.B_draws.shape[0]


# ---------------------------------------------------------------------------
# Inverse-Wishart primitives
# ---------------------------------------------------------------------------


def invwishart_rvs(df: float, scale: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw from IW(scale, df) via the Bartlett decomposition."""
    scale = np.asarray(scale, dtype=float)
    p = scale.shape[0]
    if df <= p - 1:
        raise ValueError("inverse-Wishart df must exceed dimension - 1")
    C = np.linalg.cholesky(scale)
    A = np.zeros((p, p))
    A[np.diag_indices(p)] = np.sqrt(rng.chisquare(df - np.arange(p)))
    lower = np.tril_indices(p, -1)
    A[lower] = rng.standard_normal(lower[0].size)
    U = solve_triangular(A, C.T, lower=True)
    return U.T @ U


def invwishart_logpdf(X: np.ndarray, df: float, scale: np.ndarray) -> float:
    """Log density of IW(scale, df) at X, normalization included."""
    X = np.asarray(X, dtype=float)
    scale = np.asarray(scale, dtype=float)
    p = X.shape[0]
    sign_s, logdet_scale = np.linalg.slogdet(scale)
    sign_x, logdet_x = np.linalg.slogdet(X)
    if sign_s <= 0 or sign_x <= 0:
        raise ValueError("X and scale must be positive definite")
    tr = float(np.trace(np.linalg.solve(X, scale)))
    return (0.5 * df * logdet_scale
            - 0.5 * df * p * np.log(2.0)
            - multigammaln(0.5 * df, p)
            - 0.5 * (df + p + 1) * logdet_x
            - 0.5 * tr)


# ---------------------------------------------------------------------------
# Full-conditional updates
# ---------------------------------------------------------------------------


def draw_coefficients(XtX: np.ndarray, XtY: np.ndarray, sigma: np.ndarray,
                      prior_var: float, rng: np.random.Generator) -> np.ndarray:
    """Draw the q x n coefficient block from its Gaussian full conditional.

    With the row-wise model Y = X Theta + E (Theta = B'), the vectorized
    coefficients have precision Sigma^-1 kron X'X + I/prior_var and mean
    solving P mu = vec(X'Y Sigma^-1).
    """
    n = sigma.shape[0]
    q = XtX.shape[0]
    sig_inv = cho_solve(cho_factor(sigma, lower=True), np.eye(n))
    P = np.kron(sig_inv, XtX)
    P[np.diag_indices(n * q)] += 1.0 / prior_var
    L = np.linalg.cholesky(P)
    b = (XtY @ sig_inv).ravel(order="F")
    mean = solve_triangular(L.T, solve_triangular(L, b, lower=True), lower=False)
    z = rng.standard_normal(n * q)
    theta = mean + solve_triangular(L.T, z, lower=False)
    return theta.reshape((q, n), order="F")


def _missing_groups(mask: np.ndarray):
    """Group row indices by missingness pattern, sorted for a fixed order."""
    groups: dict[tuple, list[int]] = {}
    for i in range(mask.shape[0]):
        row = mask[i]
        if row.all():
            continue
        groups.setdefault(tuple(row.tolist()), []).append(i)
    out = []
    for key in sorted(groups):
        pattern = np.asarray(key, dtype=bool)
        out.append((np.flatnonzero(~pattern), np.flatnonzero(pattern),
                    np.asarray(groups[key], dtype=int)))
    return out


def _run_chain(seedseq, X, Y_init, groups, Theta0, Sigma0, spec: ModelSpec,
               iw_scale, iw_df, impute_missing: bool):
    rng = np.random.default_rng(seedseq)
    l, q = X.shape
    n = Y_init.shape[1]
    XtX = X.T @ X
    Yc = Y_init.copy()
    Theta = Theta0.copy()
    Sigma = Sigma0.copy()

    n_keep = (spec.iterations - spec.burn_in + spec.thin - 1) // spec.thin
    B_out = np.empty((n_keep, n, q))
    S_out = np.empty((n_keep, n, n))
    miss_pos = [(g_rows, m_idx) for m_idx, _o, g_rows in groups]
    z_keep = []
    z_idx = []

    r = 0
    for t in range(spec.iterations):
        if groups and impute_missing:
            mu = X @ Theta
            for m_idx, o_idx, rows in groups:
                G, S_bar = _conditional_gain(Sigma, m_idx, o_idx)
                L_bar = np.linalg.cholesky(S_bar)
                resid = Yc[np.ix_(rows, o_idx)] - mu[np.ix_(rows, o_idx)]
                z = rng.standard_normal((rows.size, m_idx.size))
                Yc[np.ix_(rows, m_idx)] = (mu[np.ix_(rows, m_idx)]
                                           + resid @ G.T + z @ L_bar.T)

        Theta = draw_coefficients(XtX, X.T @ Yc, Sigma, spec.coef_prior_var, rng)
        E = Yc - X @ Theta
        Sigma = invwishart_rvs(iw_df + l, iw_scale + E.T @ E, rng)

        if t >= spec.burn_in and (t - spec.burn_in) % spec.thin == 0:
            B_out[r] = Theta.T
            S_out[r] = Sigma
            if spec.store_z and groups and r % spec.z_thin == 0:
                snap = np.concatenate(
                    [Yc[np.ix_(rows, m_idx)].ravel() for rows, m_idx in miss_pos]) \
                    if miss_pos else np.empty(0)
                z_keep.append(snap)
                z_idx.append(r)
            r += 1

    Z = np.asarray(z_keep) if z_keep else np.empty((0, 0))
    return B_out, S_out, Z, np.asarray(z_idx, dtype=int)


def gibbs_fit(d: Dataset, spec: ModelSpec, threads: int = 1,
              impute_missing: bool = True) -> PosteriorDraws:
    """Fit the joint linear model on the rows with any observed response.

    Deterministic for a fixed spec (chains get independent spawned
    generators, so serial and parallel execution agree bit for bit).
    ``impute_missing=False`` freezes missing cells at their initialization
    values; it exists for verifying that the imputation step is a no-op
    on fully observed data.
    """
    fit_rows = np.flatnonzero(d.mask.any(axis=1))
    if fit_rows.size == 0:
        raise ValueError("no rows with observed responses to fit on")
    X = d.X[fit_rows]
    Yobs = d.Y[fit_rows]
    M = d.mask[fit_rows]
    l, q = X.shape
    n = d.n_responses

    iw_scale = np.eye(n) if spec.iw_scale is None else np.asarray(spec.iw_scale, float)
    if iw_scale.shape != (n, n):
        raise ValueError("IW scale must be n x n")
    np.linalg.cholesky(iw_scale)  # must be PD
    iw_df = float(q + 1) if spec.iw_df is None else float(spec.iw_df)
    if iw_df <= n - 1:
        raise ValueError("IW degrees of freedom must exceed n - 1 for a proper prior")

    XtX = X.T @ X
    try:
        cho_factor(XtX, lower=True)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("X'X is singular on the fitted rows") from None

    # Deterministic, scale-safe initialization: column-mean completion,
    # ridge coefficients, residual covariance plus an identity floor.
    col_means = np.array([Yobs[M[:, j], j].mean() if M[:, j].any() else 0.0
                          for j in range(n)])
    Y0 = np.where(M, Yobs, col_means[None, :])
    A0 = XtX + np.eye(q) / spec.coef_prior_var
    Theta0 = np.linalg.solve(A0, X.T @ Y0)
    E0 = Y0 - X @ Theta0
    Sigma0 = E0.T @ E0 / l + np.eye(n)

    groups = _missing_groups(M)
    missing_cells = np.array([(int(fit_rows[i]), j)
                              for i in range(l) for j in range(n) if not M[i, j]],
                             dtype=int).reshape(-1, 2)

    children = np.random.SeedSequence(spec.seed).spawn(spec.chains)
    args = [(children[c], X, Y0, groups, Theta0, Sigma0, spec, iw_scale, iw_df,
             impute_missing) for c in range(spec.chains)]
    if threads > 1 and spec.chains > 1:
        with ThreadPoolExecutor(max_workers=min(threads, spec.chains)) as ex:
            results = list(ex.map(lambda a: _run_chain(*a), args))
    else:
        results = [_run_chain(*a) for a in args]

    per_chain = results[0][0].shape[0]
    B_all = np.concatenate([r[0] for r in results])
    S_all = np.concatenate([r[1] for r in results])
    chain_ids = np.repeat(np.arange(spec.chains), per_chain)
    draw_ids = np.tile(np.arange(per_chain), spec.chains)

    z_blocks = [r[2] for r in results if r[2].size]
    if z_blocks:
        Z_all = np.concatenate(z_blocks)
        Z_chain = np.concatenate([np.full(r[3].size, c, dtype=int)
                                  for c, r in enumerate(results)])
        Z_draw = np.concatenate([r[3] for r in results])
    else:
        Z_all = np.empty((0, missing_cells.shape[0]))
        Z_chain = np.empty(0, dtype=int)
        Z_draw = np.empty(0, dtype=int)

    # stored snapshot order follows the grouped layout; remap to the
    # row-major missing_cells order
    if Z_all.size:
        order = [(int(fit_rows[i]), int(j))
                 for m_idx, _o, rows in groups for i in rows for j in m_idx]
        lookup = {cell: pos for pos, cell in enumerate(order)}
        perm = np.array([lookup[(int(rr), int(jj))] for rr, jj in missing_cells])
        Z_all = Z_all[:, perm]

    return PosteriorDraws(
        B_draws=B_all, Sigma_draws=S_all, chain=chain_ids, draw=draw_ids,
        fit_rows=fit_rows, missing_cells=missing_cells,
        Z_draws=Z_all, Z_chain=Z_chain, Z_draw=Z_draw, spec=spec,
        response_names=list(d.response_names),
        covariate_names=list(d.covariate_names),
    )


# ---------------------------------------------------------------------------
# Posterior predictive helpers
# ---------------------------------------------------------------------------


def predictive_mean_draws(p: PosteriorDraws, x: np.ndarray) -> np.ndarray:
    """Mean vectors B_a x for every retained draw; shape (A, n)."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != p.B_draws.shape[2]:
        raise ValueError(f"x has {x.size} entries, expected {p.B_draws.shape[2]}")
    return p.B_draws @ x


def posterior_predictive_draw(p: PosteriorDraws, x: np.ndarray, a: int,
                              rng: np.random.Generator,
                              size: int | None = None) -> np.ndarray:
    """Draw from N(B_a x, Sigma_a); ``size`` batches draws at the same a."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != p.B_draws.shape[2]:
        raise ValueError(f"x has {x.size} entries, expected {p.B_draws.shape[2]}")
    if not 0 <= a < p.n_draws:
        raise IndexError("draw index out of range")
    mu = p.B_draws[a] @ x
    L = np.linalg.cholesky(p.Sigma_draws[a])
    if size is None:
        return mu + L @ rng.standard_normal(mu.size)
    return mu + rng.standard_normal((size, mu.size)) @ L.T


# ---------------------------------------------------------------------------
# Convergence diagnostics
# ---------------------------------------------------------------------------


def _split_chains(x: np.ndarray) -> np.ndarray:
    m, n = x.shape
    half = n // 2
    return np.concatenate([x[:, :half], x[:, half:2 * half]], axis=0)


def rhat(chains: np.ndarray) -> float:
    """Split-R-hat of one scalar parameter; chains is (n_chains, n_draws).

    Constant chains report exactly 1 by convention, and estimates that
    fall below 1 through sampling noise are floored at 1 (values under 1
    carry no diagnostic meaning).
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] < 4:
        raise ValueError("need at least 4 draws per chain")
    if np.all(x == x.flat[0]):
        return 1.0
    s = _split_chains(x)
    m, n = s.shape
    W = s.var(axis=1, ddof=1).mean()
    B = n * s.mean(axis=1).var(ddof=1)
    if W == 0:
        return 1.0
    var_plus = (n - 1) / n * W + B / n
    return float(max(1.0, np.sqrt(var_plus / W)))


def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.size
    xc = x - x.mean()
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, nfft)
    return np.fft.irfft(f * np.conj(f), nfft)[:n].real / n


def ess(chains: np.ndarray) -> float:
    """Effective sample size via paired autocorrelations (Geyer truncation).

    Capped at the total draw count; constant chains report the total
    draw count by convention.
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    total = x.size
    if x.shape[1] < 4:
        raise ValueError("need at least 4 draws per chain")
    if np.all(x == x.flat[0]):
        return float(total)
    s = _split_chains(x)
    m, n = s.shape
    W = s.var(axis=1, ddof=1).mean()
    B = n * s.mean(axis=1).var(ddof=1)
    var_plus = (n - 1) / n * W + B / n
    if var_plus == 0 or W == 0:
        return float(total)
    acov = np.mean([_autocov(s[c]) for c in range(m)], axis=0)
    rho = 1.0 - (W - acov) / var_plus
    rho[0] = 1.0
    # Geyer: sum consecutive pairs while they stay positive and decreasing
    tau = 0.0
    prev_pair = np.inf
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        pair = min(pair, prev_pair)
        tau += pair
        prev_pair = pair
        t += 2
    denom = 1.0 + 2.0 * tau
    return float(min(total, total / denom))


@dataclass
class ParamDiag:
    name: str
    rhat: float
    ess: float
    mean: float
    sd: float


@dataclass
class ConvergenceSummary:
    params: list[ParamDiag]

    @property
    def max_rhat(self) -> float:
        return max(p.rhat for p in self.params)

    @property
    def min_ess(self) -> float:
        return min(p.ess for p in self.params)

    def to_jsonable(self) -> dict:
        return {
            "max_rhat": self.max_rhat,
            "min_ess": self.min_ess,
            "params": [{"name": p.name, "rhat": p.rhat, "ess": p.ess,
                        "mean": p.mean, "sd": p.sd} for p in self.params],
        }


def convergence_summary(p: PosteriorDraws) -> ConvergenceSummary:
    """Split-R-hat, ESS, mean and sd for every B and Sigma entry."""
    chains = np.unique(p.chain)
    if chains.size < 2 and p.n_draws < 100:
        raise ValueError("need at least 2 chains or 100 draws for diagnostics")
    per = p.n_draws // chains.size
    A, n, q = p.B_draws.shape

    def series(values: np.ndarray) -> np.ndarray:
        out = np.empty((chains.size, per))
        for ci, c in enumerate(chains):
            out[ci] = values[p.chain == c]
        return out

    params = []
    for r in range(n):
        for c in range(q):
            s = series(p.B_draws[:, r, c])
            params.append(ParamDiag(f"B[{r},{c}]", rhat(s), ess(s),
                                    float(s.mean()), float(s.std(ddof=1))))
    for r in range(n):
        for c in range(r, n):
            s = series(p.Sigma_draws[:, r, c])
            params.append(ParamDiag(f"Sigma[{r},{c}]", rhat(s), ess(s),
                                    float(s.mean()), float(s.std(ddof=1))))
    return ConvergenceSummary(params=params)


# ---------------------------------------------------------------------------
# Persistence: draws.csv + meta.json
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def save_fit(p: PosteriorDraws, outdir, extra_meta: dict | None = None,
             binary_cache: bool = False) -> None:
    """Write draws.csv (draw,chain,param,value) and meta.json into outdir.

    The CSV is the interchange contract; ``binary_cache`` additionally
    writes a compact draws.npz that load_fit prefers when present.
    """
    os.makedirs(outdir, exist_ok=True)
    draws_path = os.path.join(outdir, DRAWS_FILE)
    A, n, q = p.B_draws.shape
    with open(draws_path + ".tmp", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["draw", "chain", "param", "value"])
        for a in range(A):
            dr, ch = int(p.draw[a]), int(p.chain[a])
            for r in range(n):
                for c in range(q):
                    writer.writerow([dr, ch, f"B[{r},{c}]", _fmt(p.B_draws[a, r, c])])
            for r in range(n):
                for c in range(n):
                    writer.writerow([dr, ch, f"Sigma[{r},{c}]",
                                     _fmt(p.Sigma_draws[a, r, c])])
        for zi in range(p.Z_draws.shape[0]):
            dr, ch = int(p.Z_draw[zi]), int(p.Z_chain[zi])
            for mi, (row, resp) in enumerate(p.missing_cells):
                writer.writerow([dr, ch, f"Z[{int(row)},{int(resp)}]",
                                 _fmt(p.Z_draws[zi, mi])])
    os.replace(draws_path + ".tmp", draws_path)

    if binary_cache:
        cache_path = os.path.join(outdir, CACHE_FILE)
        with open(cache_path + ".tmp", "wb") as fh:
            np.savez_compressed(fh, B_draws=p.B_draws, Sigma_draws=p.Sigma_draws,
                                chain=p.chain, draw=p.draw, Z_draws=p.Z_draws,
                                Z_chain=p.Z_chain, Z_draw=p.Z_draw)
        os.replace(cache_path + ".tmp", cache_path)

    meta = {
        "spec": p.spec.to_jsonable(),
        "seed": int(p.spec.seed),
        "response_names": list(p.response_names),
        "covariate_names": list(p.covariate_names),
        "fit_rows": [int(i) for i in p.fit_rows],
        "missing_cells": [[int(r), int(c)] for r, c in p.missing_cells],
        "n_draws": int(A),
    }
    if extra_meta:
        meta.update(extra_meta)
    meta_path = os.path.join(outdir, META_FILE)
    with open(meta_path + ".tmp", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(meta_path + ".tmp", meta_path)


def load_fit(fitdir) -> tuple[PosteriorDraws, dict]:
    """Read a save_fit directory back into a PosteriorDraws plus raw meta.

    Prefers the binary cache when one exists, falling back to the CSV.
    """
    with open(os.path.join(fitdir, META_FILE), encoding="utf-8") as fh:
        meta = json.load(fh)
    spec = ModelSpec.from_jsonable(meta["spec"])
    resp = meta["response_names"]
    cov = meta["covariate_names"]
    n, q = len(resp), len(cov)
    missing_cells = np.asarray(meta["missing_cells"], dtype=int).reshape(-1, 2)

    cache_path = os.path.join(fitdir, CACHE_FILE)
    if os.path.exists(cache_path):
        with np.load(cache_path) as cache:
            p = PosteriorDraws(
                B_draws=cache["B_draws"], Sigma_draws=cache["Sigma_draws"],
                chain=cache["chain"], draw=cache["draw"],
                fit_rows=np.asarray(meta["fit_rows"], dtype=int),
                missing_cells=missing_cells, Z_draws=cache["Z_draws"],
                Z_chain=cache["Z_chain"], Z_draw=cache["Z_draw"],
                spec=spec, response_names=resp, covariate_names=cov,
            )
        return p, meta

    cell_pos = {(int(r), int(c)): i for i, (r, c) in enumerate(missing_cells)}

    b_vals: dict[tuple, np.ndarray] = {}
    s_vals: dict[tuple, np.ndarray] = {}
    z_vals: dict[tuple, np.ndarray] = {}
    with open(os.path.join(fitdir, DRAWS_FILE), encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["draw", "chain", "param", "value"]:
            raise ValueError("unexpected draws file header")
        for dr, ch, param, value in reader:
            key = (int(ch), int(dr))
            v = float(value)
            kind = param[0]
            r, c = param[param.index("[") + 1:-1].split(",")
            r, c = int(r), int(c)
            if kind == "B":
                b_vals.setdefault(key, np.empty((n, q)))[r, c] = v
            elif kind == "S":
                s_vals.setdefault(key, np.empty((n, n)))[r, c] = v
            else:
                z_vals.setdefault(key, np.empty(missing_cells.shape[0]))[
                    cell_pos[(r, c)]] = v

    keys = sorted(b_vals)
    B = np.stack([b_vals[k] for k in keys])
    S = np.stack([s_vals[k] for k in keys])
    chain = np.array([k[0] for k in keys], dtype=int)
    draw = np.array([k[1] for k in keys], dtype=int)
    zkeys = sorted(z_vals)
    if zkeys:
        Z = np.stack([z_vals[k] for k in zkeys])
        Z_chain = np.array([k[0] for k in zkeys], dtype=int)
        Z_draw = np.array([k[1] for k in zkeys], dtype=int)
    else:
        Z = np.empty((0, missing_cells.shape[0]))
        Z_chain = np.empty(0, dtype=int)
        Z_draw = np.empty(0, dtype=int)

    p = PosteriorDraws(
        B_draws=B, Sigma_draws=S, chain=chain, draw=draw,
        fit_rows=np.asarray(meta["fit_rows"], dtype=int),
        missing_cells=missing_cells, Z_draws=Z, Z_chain=Z_chain, Z_draw=Z_draw,
        spec=spec, response_names=resp, covariate_names=cov,
    )
    return p, meta
