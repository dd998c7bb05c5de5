"""Tabular multivariate-response data: ingestion, transforms, synthesis.

A Dataset couples a full-rank design matrix (intercept first) with a
response matrix that may be only partially observed. Covariates are never
missing; responses carry an observation mask. All structures are plain
numpy arrays and are treated as immutable after construction.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

MISSING_TOKEN = "NA"
INTERCEPT_NAME = "intercept"


class RankDeficientError(ValueError):
    """Design matrix has linearly dependent columns."""


@dataclass
class Dataset:
    """Covariates, multivariate responses and their observation mask.

    X is l x q with a leading all-ones intercept column; Y is l x n with
    NaN wherever mask is False. Rows must outnumber covariates by at
    least two and X must have full column rank.
    """

    ids: list[str]
    X: np.ndarray
    Y: np.ndarray
    mask: np.ndarray
    response_names: list[str]
    covariate_names: list[str]
    coords: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        l, q = self.X.shape
        if len(self.ids) != l:
            raise ValueError(f"ids length {len(self.ids)} != {l} rows")
        if len(set(self.ids)) != l:
            raise ValueError("duplicate ids")
        if self.Y.shape[0] != l:
            raise ValueError("X and Y row counts differ")
        if self.mask.shape != self.Y.shape:
            raise ValueError(f"mask shape {self.mask.shape} != Y shape {self.Y.shape}")
        if len(self.covariate_names) != q:
            raise ValueError("covariate_names length != q")
        if len(self.response_names) != self.Y.shape[1]:
            raise ValueError("response_names length != n")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("covariates must be fully observed and finite")
        if not np.allclose(self.X[:, 0], 1.0):
            raise ValueError("first design column must be the all-ones intercept")
        if l < q + 2:
            raise ValueError(f"need at least q + 2 = {q + 2} rows, got {l}")
        if np.linalg.matrix_rank(self.X) < q:
            raise RankDeficientError("design matrix is rank deficient")
        if not np.all(np.isfinite(self.Y[self.mask])):
            raise ValueError("observed response cells must be finite")
        # Normalize: unobserved cells are always NaN.
        self.Y = self.Y.copy()
        self.Y[~self.mask] = np.nan
        if self.coords is not None:
            self.coords = np.asarray(self.coords, dtype=float)
            if self.coords.shape != (l, 2):
                raise ValueError("coords must be (l, 2) lon/lat pairs")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.X.shape[1]

    @property
    def n_responses(self) -> int:
        return self.Y.shape[1]


@dataclass
class StatusPartition:
    """Disjoint exhaustive split of rows by response availability."""

    fully_observed: np.ndarray
    partially_observed: np.ndarray
    unobserved: np.ndarray


def partition_by_status(d: Dataset) -> StatusPartition:
    """Split row indices into fully / partially / un-observed sets."""
    n_obs = d.mask.sum(axis=1)
    idx = np.arange(d.n_rows)
    return StatusPartition(
        fully_observed=idx[n_obs == d.n_responses],
        partially_observed=idx[(n_obs > 0) & (n_obs < d.n_responses)],
        unobserved=idx[n_obs == 0],
    )


def row_status(d: Dataset) -> list[str]:
    """Per-row status label: "full", "partial" or "missing"."""
    n_obs = d.mask.sum(axis=1)
    out = []
    for k in n_obs:
        if k == d.n_responses:
            out.append("full")
        elif k > 0:
            out.append("partial")
        else:
            out.append("missing")
    return out


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

_RESPONSE_TAGS = ("none", "log", "log1p")


@dataclass
class TransformSpec:
    """Per-column response transforms plus covariate standardization.

    ``response`` holds one tag per response column ("none", "log" or
    "log1p"); ``standardize`` one flag per non-intercept covariate.
    Centering/scaling constants are recorded here when the transform
    is applied so the mapping can be inverted exactly.
    """

    response: list[str]
    standardize: list[bool]
    centers: np.ndarray | None = field(default=None, compare=False)
    scales: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        for tag in self.response:
            if tag not in _RESPONSE_TAGS:
                raise ValueError(f"unknown response transform {tag!r}")

    @classmethod
    def from_config(cls, cfg: dict, response_names: list[str],
                    covariate_names: list[str]) -> "TransformSpec":
        """Build a spec from the ingestion-config "transforms" entry.

        ``cfg["responses"]`` is either a single tag applied to every
        response or a name -> tag mapping (unlisted names get "none");
        ``cfg["standardize"]`` is a bool for all covariates or a
        name -> bool mapping (unlisted default True).
        """
        resp_cfg = cfg.get("responses", "none")
        if isinstance(resp_cfg, str):
            response = [resp_cfg] * len(response_names)
        else:
            response = [resp_cfg.get(name, "none") for name in response_names]
        std_cfg = cfg.get("standardize", True)
        non_intercept = [c for c in covariate_names if c != INTERCEPT_NAME]
        if isinstance(std_cfg, bool):
            standardize = [std_cfg] * len(non_intercept)
        else:
            standardize = [bool(std_cfg.get(name, True)) for name in non_intercept]
        return cls(response=response, standardize=standardize)


def apply_transforms(d: Dataset, t: TransformSpec) -> Dataset:
    """Return a transformed copy of ``d``; fitted constants stored on ``t``.

    Log transforms require strictly positive observed values and report
    the first offending cell. Standardization centers each flagged
    covariate and scales it to unit sample variance (intercept excluded).
    """
    if len(t.response) != d.n_responses:
        raise ValueError("transform spec does not match response count")
    if len(t.standardize) != d.n_covariates - 1:
        raise ValueError("transform spec does not match covariate count")

    Y = d.Y.copy()
    for j, tag in enumerate(t.response):
        if tag == "none":
            continue
        col = Y[:, j]
        obs = d.mask[:, j]
        if tag == "log":
            bad = obs & (col <= 0)
            if np.any(bad):
                i = int(np.argmax(bad))
                raise ValueError(
                    f"log transform needs positive values; row {d.ids[i]!r} "
                    f"column {d.response_names[j]!r} has {col[i]!r}")
            col[obs] = np.log(col[obs])
        elif tag == "log1p":
            bad = obs & (col <= -1)
            if np.any(bad):
                i = int(np.argmax(bad))
                raise ValueError(
                    f"log1p transform needs values > -1; row {d.ids[i]!r} "
                    f"column {d.response_names[j]!r} has {col[i]!r}")
            col[obs] = np.log1p(col[obs])

    X = d.X.copy()
    centers = np.zeros(d.n_covariates - 1)
    scales = np.ones(d.n_covariates - 1)
    for j, do_std in enumerate(t.standardize):
        if not do_std:
            continue
        col = X[:, j + 1]
        centers[j] = col.mean()
        sd = col.std(ddof=1)
        if sd == 0:
            raise ValueError(
                f"cannot standardize constant covariate {d.covariate_names[j + 1]!r}")
        scales[j] = sd
        X[:, j + 1] = (col - centers[j]) / scales[j]
    t.centers = centers
    t.scales = scales

    return Dataset(ids=list(d.ids), X=X, Y=Y, mask=d.mask.copy(),
                   response_names=list(d.response_names),
                   covariate_names=list(d.covariate_names),
                   coords=None if d.coords is None else d.coords.copy())


def invert_transforms(d: Dataset, t: TransformSpec) -> Dataset:
    """Undo ``apply_transforms`` using the constants recorded on ``t``."""
    if t.centers is None or t.scales is None:
        raise ValueError("transform spec has no fitted constants to invert")
    Y = d.Y.copy()
    for j, tag in enumerate(t.response):
        obs = d.mask[:, j]
        if tag == "log":
            Y[obs, j] = np.exp(Y[obs, j])
        elif tag == "log1p":
            Y[obs, j] = np.expm1(Y[obs, j])
    X = d.X.copy()
    for j, do_std in enumerate(t.standardize):
        if do_std:
            X[:, j + 1] = X[:, j + 1] * t.scales[j] + t.centers[j]
    return Dataset(ids=list(d.ids), X=X, Y=Y, mask=d.mask.copy(),
                   response_names=list(d.response_names),
                   covariate_names=list(d.covariate_names),
                   coords=None if d.coords is None else d.coords.copy())


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


@dataclass
class IngestConfig:
    """Names the columns of an input CSV and the missing-value token."""

    id_col: str
    covariates: list[str]
    responses: list[str]
    lon_col: str | None = None
    lat_col: str | None = None
    missing_token: str = MISSING_TOKEN
    transforms: dict | None = None

    @classmethod
    def from_json(cls, path) -> "IngestConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {"id_col", "covariates", "responses", "lon_col", "lat_col",
                 "missing_token", "transforms"}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown ingestion config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_jsonable(self) -> dict:
        return {
            "id_col": self.id_col,
            "covariates": list(self.covariates),
            "responses": list(self.responses),
            "lon_col": self.lon_col,
            "lat_col": self.lat_col,
            "missing_token": self.missing_token,
            "transforms": self.transforms,
        }


def _is_missing(cell: str, token: str) -> bool:
    return cell == token or cell.strip() == ""


def load_csv(path, config: IngestConfig) -> Dataset:
    """Load a dataset from a headered CSV file.

    Response cells equal to the missing token (or empty) become
    unobserved; missing covariate cells are rejected. An intercept column
    is prepended to the covariates.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            raise ValueError(f"{path}: duplicate column names in header")
        col = {name: i for i, name in enumerate(header)}
        needed = [config.id_col] + list(config.covariates) + list(config.responses)
        if config.lon_col:
            needed.append(config.lon_col)
        if config.lat_col:
            needed.append(config.lat_col)
        for name in needed:
            if name not in col:
                raise ValueError(f"{path}: column {name!r} not in header")

        ids: list[str] = []
        seen: set[str] = set()
        cov_rows, resp_rows, mask_rows, coord_rows = [], [], [], []
        want_coords = bool(config.lon_col and config.lat_col)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rid = row[col[config.id_col]]
            if rid in seen:
                raise ValueError(f"{path}:{lineno}: duplicate id {rid!r}")
            seen.add(rid)
            ids.append(rid)

            cov = []
            for name in config.covariates:
                cell = row[col[name]]
                if _is_missing(cell, config.missing_token):
                    raise ValueError(
                        f"{path}:{lineno}: missing covariate {name!r} (id {rid!r})")
                try:
                    cov.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}:{lineno}: non-numeric covariate {name!r}: {cell!r}"
                    ) from None
            cov_rows.append(cov)

            resp, obs = [], []
            for name in config.responses:
                cell = row[col[name]]
                if _is_missing(cell, config.missing_token):
                    resp.append(np.nan)
                    obs.append(False)
                else:
                    try:
                        resp.append(float(cell))
                    except ValueError:
                        raise ValueError(
                            f"{path}:{lineno}: non-numeric response {name!r}: {cell!r}"
                        ) from None
                    obs.append(True)
            resp_rows.append(resp)
            mask_rows.append(obs)

            if want_coords:
                try:
                    coord_rows.append([float(row[col[config.lon_col]]),
                                       float(row[col[config.lat_col]])])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: non-numeric coordinates") from None

    C = np.asarray(cov_rows, dtype=float)
    X = np.column_stack([np.ones(len(ids)), C])
    return Dataset(
        ids=ids,
        X=X,
        Y=np.asarray(resp_rows, dtype=float),
        mask=np.asarray(mask_rows, dtype=bool),
        response_names=list(config.responses),
        covariate_names=[INTERCEPT_NAME] + list(config.covariates),
        coords=np.asarray(coord_rows) if want_coords else None,
    )


def _fmt(x: float) -> str:
    # repr of a python float is the shortest exact round-trip form
    return repr(float(x))


def write_csv(d: Dataset, path, config: IngestConfig | None = None) -> None:
    """Write a dataset back to CSV, mirroring the ingestion schema."""
    token = config.missing_token if config else MISSING_TOKEN
    id_col = config.id_col if config else "id"
    lon_col = (config.lon_col if config else "lon") or "lon"
    lat_col = (config.lat_col if config else "lat") or "lat"
    header = [id_col]
    if d.coords is not None:
        header += [lon_col, lat_col]
    header += d.covariate_names[1:] + d.response_names
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, rid in enumerate(d.ids):
            row = [rid]
            if d.coords is not None:
                row += [_fmt(d.coords[i, 0]), _fmt(d.coords[i, 1])]
            row += [_fmt(v) for v in d.X[i, 1:]]
            row += [_fmt(d.Y[i, j]) if d.mask[i, j] else token
                    for j in range(d.n_responses)]
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------


@dataclass
class SynthSpec:
    """Generator configuration for synthetic datasets.

    B defaults to standard-normal coefficients and Sigma to the identity.
    ``missing_prob`` is one probability for all responses or one per
    response. ``planted_high_leverage`` rows get their non-intercept
    covariates multiplied by ``leverage_scale``.
    """

    l: int
    n: int
    q: int
    B: np.ndarray | None = None
    Sigma: np.ndarray | None = None
    missing_prob: float | list[float] = 0.0
    planted_high_leverage: int = 0
    leverage_scale: float = 8.0
    with_coords: bool = True

    @classmethod
    def from_json(cls, path) -> "SynthSpec":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if "B" in raw and raw["B"] is not None:
            raw["B"] = np.asarray(raw["B"], dtype=float)
        if "Sigma" in raw and raw["Sigma"] is not None:
            raw["Sigma"] = np.asarray(raw["Sigma"], dtype=float)
        return cls(**raw)


def synthesize(gen: SynthSpec, seed: int) -> tuple[Dataset, dict]:
    """Generate a dataset from the joint linear model, plus its truth record.

    Deterministic for a fixed seed. The truth record carries the
    generating parameters (B, Sigma, seed and the generator fields) for oracle
    comparisons.
    """
    if gen.l < gen.q + 2:
        raise ValueError("l must be at least q + 2")
    rng = np.random.default_rng(seed)

    B = gen.B
    if B is None:
        B = rng.standard_normal((gen.n, gen.q))
    else:
        B = np.asarray(B, dtype=float)
        if B.shape != (gen.n, gen.q):
            raise ValueError(f"B must be (n, q) = ({gen.n}, {gen.q})")

    Sigma = np.eye(gen.n) if gen.Sigma is None else np.asarray(gen.Sigma, dtype=float)
    if Sigma.shape != (gen.n, gen.n):
        raise ValueError(f"Sigma must be (n, n) = ({gen.n}, {gen.n})")
    try:
        L = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError:
        raise ValueError("Sigma must be positive definite") from None

    probs = np.broadcast_to(np.asarray(gen.missing_prob, dtype=float), (gen.n,)).copy()
    if np.any((probs < 0) | (probs > 1)):
        raise ValueError("missingness probabilities must lie in [0, 1]")

    C = rng.standard_normal((gen.l, gen.q - 1))
    if gen.planted_high_leverage > 0:
        k = min(gen.planted_high_leverage, gen.l)
        C[-k:, :] *= gen.leverage_scale
    X = np.column_stack([np.ones(gen.l), C])
    E = rng.standard_normal((gen.l, gen.n)) @ L.T
    Y = X @ B.T + E
    mask = rng.random((gen.l, gen.n)) >= probs
    coords = rng.uniform([-95.0, 36.0], [-70.0, 48.0], size=(gen.l, 2)) \
        if gen.with_coords else None

    ids = [f"loc{i:05d}" for i in range(gen.l)]
    d = Dataset(ids=ids, X=X, Y=Y, mask=mask,
                response_names=[f"y{j + 1}" for j in range(gen.n)],
                covariate_names=[INTERCEPT_NAME] + [f"x{j + 1}" for j in range(gen.q - 1)],
                coords=coords)
    truth = {
        "seed": int(seed),
        "B": B.tolist(),
        "Sigma": Sigma.tolist(),
        "missing_prob": probs.tolist(),
        "l": gen.l, "n": gen.n, "q": gen.q,
        "planted_high_leverage": int(gen.planted_high_leverage),
        "leverage_scale": float(gen.leverage_scale),
    }
    return d, truth
