"""Semi-synthetic dose-response data generation with an exact oracle.

The generator follows a three-step recipe over a fixed covariate table:

1. map the 7 covariate class labels onto 3 clusters with a uniformly random
   surjection (the confounder: cluster membership drives dose exposure);
2. give each cluster a modal dose, a seeded permutation of
   {(1-beta)/2, 1/2, (1+beta)/2}, and draw each unit's dose from a Beta
   distribution peaked at its cluster's modal dose (alpha = 0 means uniform
   doses, larger alpha means stronger confounding);
3. produce the outcome from a fixed nonlinear response surface with additive
   Gaussian noise, keeping the noiseless surface around as the counterfactual
   oracle.

Doses live in [0, 1]; covariates are min-max normalized to [0, 1] per column
before generation.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    GenerationError,
    IngestionError,
    InvalidArgumentError,
    NormalizationError,
    OracleSingularityError,
)
from .utils import derive_seed, fmt_float

logger = logging.getLogger(__name__)

N_FEATURES = 16
N_LABELS = 7
N_CLUSTERS = 3

DOSE_FORMULAS = ("as-printed", "mode-corrected")

# Uneven class proportions for the synthetic covariate table, mimicking a
# real-world imbalanced class structure.
_SYNTH_LABEL_WEIGHTS = np.array([0.26, 0.19, 0.15, 0.14, 0.12, 0.10, 0.04])
_SYNTH_STRUCT_SEED = 160717


@dataclass(frozen=True)
class DGPConfig:
    """Knobs of the generator.

    alpha: dose-concentration (confounding strength); 0 means uniform doses.
    beta: modal-dose separation in [0, 1].
    dose_formula: 'as-printed' uses the second Beta parameter
        b = alpha/m + (1 - alpha); 'mode-corrected' uses
        b = (alpha - 1)/m + 2 - alpha, which places the Beta mode exactly at
        the modal dose m.
    weight_resample_guard: lower bound enforced on the response denominator
        w3.x over all rows (w3 is resampled until it holds).
    """

    alpha: float
    beta: float
    noise_std: float = 1.0
    seed: int = 0
    dose_formula: str = "as-printed"
    weight_resample_guard: float = 0.05

    def __post_init__(self):
        if not (self.alpha >= 0 and np.isfinite(self.alpha)):
            raise InvalidArgumentError(f"alpha must be >= 0, got {self.alpha}")
        if not (0.0 <= self.beta <= 1.0):
            raise InvalidArgumentError(f"beta must be in [0, 1], got {self.beta}")
        if not (self.noise_std >= 0 and np.isfinite(self.noise_std)):
            raise InvalidArgumentError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.dose_formula not in DOSE_FORMULAS:
            raise InvalidArgumentError(
                f"dose_formula must be one of {DOSE_FORMULAS}, got {self.dose_formula!r}"
            )
        if not (self.weight_resample_guard > 0):
            raise InvalidArgumentError(
                f"weight_resample_guard must be positive, got {self.weight_resample_guard}"
            )

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "noise_std": self.noise_std,
            "seed": self.seed,
            "dose_formula": self.dose_formula,
            "weight_resample_guard": self.weight_resample_guard,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DGPConfig":
        from .errors import ConfigError

        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown DGPConfig keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class CovariateTable:
    """A covariate matrix with per-row class labels in {1..L}."""

    features: np.ndarray
    bean_type: np.ndarray
    columns: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.bean_type = np.asarray(self.bean_type, dtype=np.int64)
        if self.features.ndim != 2:
            raise InvalidArgumentError("features must be a 2-D matrix")
        if self.features.shape[0] != self.bean_type.shape[0]:
            raise InvalidArgumentError("features and labels disagree on row count")
        if not self.columns:
            self.columns = [f"x{j}" for j in range(self.features.shape[1])]

    @property
    def n(self) -> int:
        return self.features.shape[0]


@dataclass
class Oracle:
    """Noiseless response surface mu(s, x); the counterfactual ground truth."""

    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    guard: float = 0.05

    def response(self, s, x) -> np.ndarray:
        """mu(s, x) = 10 * (w1.x + 12 s (s - 0.75 * w2.x / w3.x)^2).

        `x` is (n, 16); `s` is a scalar or an (n,) vector. Raises if any
        response denominator w3.x falls below the guard in magnitude.
        """
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        s = np.asarray(s, dtype=np.float64)
        denom = x @ self.w3
        bad = np.abs(denom) < self.guard
        if np.any(bad):
            raise OracleSingularityError(
                f"|w3.x| = {np.abs(denom[bad]).min():.3g} below guard "
                f"{self.guard} for {int(bad.sum())} row(s); the generator's "
                "weight resampling prevents this for generated tables"
            )
        ratio = (x @ self.w2) / denom
        return 10.0 * (x @ self.w1 + 12.0 * s * (s - 0.75 * ratio) ** 2)

    def to_dict(self) -> dict:
        return {
            "w1": self.w1.tolist(),
            "w2": self.w2.tolist(),
            "w3": self.w3.tolist(),
            "guard": self.guard,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Oracle":
        return cls(
            w1=np.asarray(d["w1"], dtype=np.float64),
            w2=np.asarray(d["w2"], dtype=np.float64),
            w3=np.asarray(d["w3"], dtype=np.float64),
            guard=float(d["guard"]),
        )


@dataclass
class GeneratedDataset:
    """One benchmark instance plus everything needed to reproduce it."""

    covariates: np.ndarray
    dose: np.ndarray
    outcome: np.ndarray
    cluster: np.ndarray
    modal_doses: np.ndarray
    oracle: Oracle
    config: DGPConfig
    label_map: dict[int, int] = field(default_factory=dict)
    bean_type: np.ndarray | None = None
    seeds: dict[str, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]


@dataclass(frozen=True)
class SplitIndices:
    """Disjoint 70/10/20 train/validation/test row indices."""

    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray


def load_dry_bean(path) -> CovariateTable:
    """Ingest a covariate CSV: 16 numeric feature columns plus one class column.

    The class column is detected as the single column whose values are mostly
    non-numeric; if every column parses as numeric, the last one is taken as
    the class. Rows with unparseable feature values are dropped and reported
    by row number. Raw class labels map to {1..L} in sorted order.
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"covariate file not found: {path}")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        sample = fh.read(4096)
        fh.seek(0)
        delim = ";" if sample.count(";") > sample.count(",") else ","
        reader = csv.reader(fh, delimiter=delim)
        rows = [r for r in reader if r]
    if len(rows) < 2:
        raise IngestionError(f"{path}: no data rows")
    header, data = rows[0], rows[1:]
    ncols = len(header)
    if ncols != N_FEATURES + 1:
        raise IngestionError(
            f"{path}: expected {N_FEATURES} feature columns plus one class "
            f"column ({N_FEATURES + 1} total), got {ncols}"
        )

    def _is_float(v: str) -> bool:
        try:
            float(v)
            return True
        except ValueError:
            return False

    bad_frac = []
    for j in range(ncols):
        vals = [r[j] for r in data if len(r) == ncols]
        bad = sum(not _is_float(v) for v in vals)
        bad_frac.append(bad / max(len(vals), 1))
    non_numeric = [j for j, f in enumerate(bad_frac) if f > 0.5]
    if len(non_numeric) > 1:
        names = [header[j] for j in non_numeric]
        raise IngestionError(f"{path}: multiple non-numeric columns: {names}")
    class_col = non_numeric[0] if non_numeric else ncols - 1
    feat_cols = [j for j in range(ncols) if j != class_col]

    feats, labels_raw, rejected = [], [], []
    for i, r in enumerate(data, start=2):  # 1-based file lines, row 1 = header
        if len(r) != ncols:
            rejected.append(i)
            continue
        try:
            feats.append([float(r[j]) for j in feat_cols])
        except ValueError:
            rejected.append(i)
            continue
        labels_raw.append(r[class_col])
    if rejected:
        shown = ", ".join(map(str, rejected[:20]))
        more = "" if len(rejected) <= 20 else f" (+{len(rejected) - 20} more)"
        logger.warning("%s: rejected %d unparseable row(s) at line(s) %s%s",
                       path, len(rejected), shown, more)
    if not feats:
        raise IngestionError(f"{path}: every data row was unparseable")
    distinct = sorted(set(labels_raw))
    label_of = {lab: i + 1 for i, lab in enumerate(distinct)}
    table = CovariateTable(
        features=np.array(feats, dtype=np.float64),
        bean_type=np.array([label_of[v] for v in labels_raw], dtype=np.int64),
        columns=[header[j] for j in feat_cols],
    )
    logger.info("%s: loaded %d rows, %d classes", path, table.n, len(distinct))
    return table


# Structure constants of the stand-in table, mirroring the morphology of the
# real measurements: one dominant size axis that orders the classes, a few
# weak shape factors, small measurement noise, and per-column magnitudes
# spanning several decades.
_SYNTH_SIZE_SPAN = (0.45, 0.85)     # class size means, evenly spread
_SYNTH_WITHIN_SD = 0.08             # within-class size spread
_SYNTH_BASE = (0.35, 0.55)          # column baselines a_j ~ U
_SYNTH_SHAPE_FACTORS = 3
_SYNTH_FACTOR_CLIP = 2.5            # latent draws truncated at +/- 2.5 sd
_SYNTH_NOISE_SD = 0.04              # per-column measurement noise; its
                                    # independent tails own the column
                                    # extremes, so min-max normalization
                                    # never maps one row low everywhere
# Rare large measurement spikes (a handful of extreme readings per column,
# like real morphology outliers). They own each column's min-max span, so
# normalization compresses the bulk into a narrow band with a large shared
# offset; linear functionals w.x of the normalized table then vary little
# between units, matching the near-homogeneous instance effects the response
# formula produces on the real measurements.
_SYNTH_SPIKE_PROB = 0.004
_SYNTH_SPIKE_SD = 0.3
# Column families: a few columns track the class axis almost deterministically
# (how morphology columns separate bean varieties), the rest vary mostly
# within class through shared shape factors. Shape loadings mix signs (shape
# measurements anti-correlate, e.g. roundness vs eccentricity) and each
# column's total factor swing is capped below its baseline, so no row ever
# sits near zero in many columns at once; positive-weight projections stay
# bounded away from zero. Response-column slopes on the size axis also mix
# signs (shape ratios fall as size grows), so different random weight draws
# produce projections with genuinely different size trends and the instance
# effect varies along the class axis rather than collapsing to a constant.
_SYNTH_IDENTITY_COLS = 6
_SYNTH_IDENTITY_SLOPE = (0.45, 0.62)
_SYNTH_IDENTITY_SHAPE_SD = 0.02
_SYNTH_RESPONSE_SLOPE = (0.25, 0.55)
_SYNTH_RESPONSE_FACTOR_MAG = (0.025, 0.05)  # per-column total factor swing


def synth_covariates(n: int, seed: int) -> CovariateTable:
    """Synthetic stand-in covariate table: 16 correlated columns driven by a
    latent size axis whose mean separates the 7 class labels, plus shared
    shape factors. A fixed subset of columns tracks the class axis tightly
    (class-identifying, like dominant morphology measurements); the rest
    vary mostly within class.

    All 7 class labels are guaranteed present (n >= 7 required). Use where
    the real covariate CSV is unavailable; the generator only needs a
    normalized table with labels.
    """
    if n < N_LABELS:
        raise InvalidArgumentError(f"need n >= {N_LABELS}, got {n}")
    struct = np.random.default_rng(_SYNTH_STRUCT_SEED)
    lo, hi = _SYNTH_SIZE_SPAN
    class_size = lo + (hi - lo) * struct.permutation(N_LABELS) / (N_LABELS - 1)
    base = struct.uniform(*_SYNTH_BASE, size=N_FEATURES)
    identity = struct.permutation(N_FEATURES)[:_SYNTH_IDENTITY_COLS]
    is_identity = np.zeros(N_FEATURES, dtype=bool)
    is_identity[identity] = True
    slope = np.where(
        is_identity,
        struct.uniform(*_SYNTH_IDENTITY_SLOPE, size=N_FEATURES),
        struct.uniform(*_SYNTH_RESPONSE_SLOPE, size=N_FEATURES),
    )
    slope_sign = np.where(
        is_identity, 1.0, struct.choice(np.array([-1.0, 1.0]), size=N_FEATURES)
    )
    slope = slope_sign * slope
    direction = struct.standard_normal((N_FEATURES, _SYNTH_SHAPE_FACTORS))
    direction /= np.abs(direction).sum(axis=1, keepdims=True)
    magnitude = struct.uniform(*_SYNTH_RESPONSE_FACTOR_MAG, size=N_FEATURES)
    shape_load = np.where(
        is_identity[:, None],
        _SYNTH_IDENTITY_SHAPE_SD
        * struct.standard_normal((N_FEATURES, _SYNTH_SHAPE_FACTORS)),
        magnitude[:, None] * direction,
    )
    scales = 10.0 ** struct.uniform(0.0, 4.0, size=N_FEATURES)

    rng = np.random.default_rng(seed)
    labels = np.empty(n, dtype=np.int64)
    labels[:N_LABELS] = np.arange(1, N_LABELS + 1)
    labels[N_LABELS:] = rng.choice(
        np.arange(1, N_LABELS + 1), size=n - N_LABELS, p=_SYNTH_LABEL_WEIGHTS
    )
    clip = _SYNTH_FACTOR_CLIP
    t = class_size[labels - 1] + _SYNTH_WITHIN_SD * np.clip(
        rng.standard_normal(n), -clip, clip)
    z = np.clip(rng.standard_normal((n, _SYNTH_SHAPE_FACTORS)), -clip, clip)
    noise = _SYNTH_NOISE_SD * rng.standard_normal((n, N_FEATURES))
    spikes = np.where(rng.random((n, N_FEATURES)) < _SYNTH_SPIKE_PROB,
                      _SYNTH_SPIKE_SD * rng.standard_normal((n, N_FEATURES)),
                      0.0)
    raw = (base[None, :] + t[:, None] * slope[None, :]
           + z @ shape_load.T + noise + spikes)
    raw = np.clip(raw, 0.0, 1.2)
    return CovariateTable(features=raw * scales, bean_type=labels)


def normalize_features(table: CovariateTable) -> CovariateTable:
    """Min-max normalize each column to [0, 1] using the whole table."""
    lo = table.features.min(axis=0)
    hi = table.features.max(axis=0)
    span = hi - lo
    flat = np.nonzero(span == 0)[0]
    if flat.size:
        raise NormalizationError(
            f"column '{table.columns[flat[0]]}' is constant; min-max normalization undefined"
        )
    feats = (table.features - lo) / span
    return CovariateTable(features=feats, bean_type=table.bean_type.copy(),
                          columns=list(table.columns))


def form_clusters(labels, seed: int) -> dict[int, int]:
    """Uniformly random surjection of the distinct labels onto {1, 2, 3}.

    Rejection-samples iid label->cluster maps until every cluster is hit,
    which is exactly uniform over all surjections.
    """
    distinct = sorted(set(int(v) for v in np.asarray(labels).ravel()))
    if len(distinct) < N_CLUSTERS:
        raise InvalidArgumentError(
            f"need at least {N_CLUSTERS} distinct labels, got {len(distinct)}"
        )
    rng = np.random.default_rng(seed)
    while True:
        assign = rng.integers(1, N_CLUSTERS + 1, size=len(distinct))
        if len(np.unique(assign)) == N_CLUSTERS:
            return {lab: int(c) for lab, c in zip(distinct, assign)}


def assign_modal_doses(beta: float, seed: int) -> np.ndarray:
    """Seeded permutation of {(1-beta)/2, 1/2, (1+beta)/2}; entry j is the
    modal dose of cluster j+1."""
    if not (0.0 <= beta <= 1.0):
        raise InvalidArgumentError(f"beta must be in [0, 1], got {beta}")
    base = np.array([(1.0 - beta) / 2.0, 0.5, (1.0 + beta) / 2.0])
    rng = np.random.default_rng(seed)
    return base[rng.permutation(N_CLUSTERS)]


def beta_second_param(alpha: float, m: float, formula: str) -> float:
    """Second Beta parameter for modal dose m under either formula, with the
    documented clamp at 1e-6 for non-positive values."""
    if formula not in DOSE_FORMULAS:
        raise InvalidArgumentError(f"unknown dose formula {formula!r}")
    if not (0.0 < m <= 1.0):
        raise InvalidArgumentError(f"modal dose must be in (0, 1], got {m}")
    if formula == "as-printed":
        b = alpha / m + (1.0 - alpha)
    else:
        b = (alpha - 1.0) / m + 2.0 - alpha
    if b <= 0.0:
        logger.warning(
            "beta_second_param: clamping non-positive b=%.6g (alpha=%.4g, m=%.4g, %s)",
            b, alpha, m, formula,
        )
        b = 1e-6
    return b


def sample_doses(alpha: float, m: float, formula: str,
                 rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw `size` doses for one cluster with modal dose m.

    alpha = 0 means uniform doses regardless of m. m = 0 is the degenerate
    limit of the Beta family (second parameter diverging) and yields doses
    exactly 0.
    """
    if alpha < 0:
        raise InvalidArgumentError(f"alpha must be >= 0, got {alpha}")
    if alpha == 0:
        return rng.uniform(0.0, 1.0, size=size)
    if m == 0.0:
        logger.info("sample_doses: modal dose 0 -> degenerate doses at 0")
        return np.zeros(size)
    b = beta_second_param(alpha, m, formula)
    return rng.beta(alpha, b, size=size)


def _draw_weight(rng: np.random.Generator) -> np.ndarray:
    """One weight vector: 8 of 16 coordinates uniform on (0, 1), rest zero."""
    idx = rng.choice(N_FEATURES, size=8, replace=False)
    vals = rng.uniform(0.0, 1.0, size=8)
    while np.any(vals == 0.0):  # keep the support strictly inside (0, 1)
        redo = vals == 0.0
        vals[redo] = rng.uniform(0.0, 1.0, size=int(redo.sum()))
    w = np.zeros(N_FEATURES)
    w[idx] = vals
    return w


def sample_weights(seed: int, features: np.ndarray, guard: float = 0.05,
                   max_resamples: int = 100) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw the response weights w1, w2, w3; w3 is resampled (same stream,
    deterministic) until min over rows of w3.x >= guard."""
    if features.shape[1] != N_FEATURES:
        raise InvalidArgumentError(
            f"features must have {N_FEATURES} columns, got {features.shape[1]}"
        )
    rng = np.random.default_rng(seed)
    w1 = _draw_weight(rng)
    w2 = _draw_weight(rng)
    w3 = _draw_weight(rng)
    resamples = 0
    min_denom = float((features @ w3).min())
    while min_denom < guard:
        resamples += 1
        if resamples > max_resamples:
            raise GenerationError(
                f"w3 guard unsatisfied after {max_resamples} resamples; "
                f"last min w3.x = {min_denom:.6g} < {guard}"
            )
        w3 = _draw_weight(rng)
        min_denom = float((features @ w3).min())
    if resamples:
        logger.info("sample_weights: resampled w3 %d time(s)", resamples)
    return w1, w2, w3


def generate(config: DGPConfig, table: CovariateTable) -> GeneratedDataset:
    """Run the full three-step recipe on a normalized covariate table."""
    feats = table.features
    if feats.shape[1] != N_FEATURES:
        raise InvalidArgumentError(
            f"table must have {N_FEATURES} feature columns, got {feats.shape[1]}"
        )
    if feats.min() < -1e-12 or feats.max() > 1.0 + 1e-12:
        raise InvalidArgumentError(
            "table must be min-max normalized to [0, 1] before generation "
            "(call normalize_features first)"
        )
    seeds = {
        name: derive_seed(config.seed, name)
        for name in ("clusters", "modal", "weights", "dose", "noise")
    }
    label_map = form_clusters(table.bean_type, seeds["clusters"])
    modal = assign_modal_doses(config.beta, seeds["modal"])
    w1, w2, w3 = sample_weights(seeds["weights"], feats, config.weight_resample_guard)
    oracle = Oracle(w1=w1, w2=w2, w3=w3, guard=config.weight_resample_guard)

    cluster = np.array([label_map[int(t)] for t in table.bean_type], dtype=np.int64)
    dose = np.empty(table.n, dtype=np.float64)
    rng_dose = np.random.default_rng(seeds["dose"])
    for c in range(1, N_CLUSTERS + 1):
        idx = np.nonzero(cluster == c)[0]
        dose[idx] = sample_doses(config.alpha, float(modal[c - 1]),
                                 config.dose_formula, rng_dose, idx.size)
    mu = oracle.response(dose, feats)
    rng_noise = np.random.default_rng(seeds["noise"])
    outcome = mu + rng_noise.normal(0.0, config.noise_std, size=table.n)
    return GeneratedDataset(
        covariates=feats.copy(),
        dose=dose,
        outcome=outcome,
        cluster=cluster,
        modal_doses=modal,
        oracle=oracle,
        config=config,
        label_map=label_map,
        bean_type=table.bean_type.copy(),
        seeds=seeds,
    )


def split(dataset: GeneratedDataset, seed: int) -> SplitIndices:
    """Disjoint, exhaustive 70/10/20 split by a seeded permutation."""
    n = dataset.n
    if n < 10:
        raise InvalidArgumentError(f"need at least 10 rows to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    i1 = round(0.7 * n)
    i2 = round(0.8 * n)
    return SplitIndices(train=perm[:i1], validation=perm[i1:i2], test=perm[i2:])


def canonical_split_seed(config: DGPConfig) -> int:
    """The split seed a bundle implies; derived from the dataset seed so a
    written bundle fully determines its train/validation/test partition."""
    return derive_seed(config.seed, "split")


# ---------------------------------------------------------------------------
# dataset bundle serialization


def write_bundle(dataset: GeneratedDataset, out_dir) -> None:
    """Write covariates.csv, assignments.csv, and oracle.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "covariates.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(dataset.covariates.shape[1])])
        for row in dataset.covariates:
            writer.writerow([fmt_float(v) for v in row])
    with open(out / "assignments.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row_id", "cluster", "dose", "outcome"])
        for i in range(dataset.n):
            writer.writerow([
                i,
                int(dataset.cluster[i]),
                fmt_float(dataset.dose[i]),
                fmt_float(dataset.outcome[i]),
            ])
    doc = {
        "config": dataset.config.to_dict(),
        "seeds": dataset.seeds,
        "oracle": dataset.oracle.to_dict(),
        "modal_doses": dataset.modal_doses.tolist(),
        "label_map": {str(k): v for k, v in dataset.label_map.items()},
        "n": dataset.n,
    }
    with open(out / "oracle.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_bundle(in_dir) -> GeneratedDataset:
    """Reconstruct a dataset from a bundle directory (bean types are not part
    of the bundle and come back as None)."""
    src = Path(in_dir)
    for name in ("covariates.csv", "assignments.csv", "oracle.json"):
        if not (src / name).exists():
            raise IngestionError(f"bundle is missing {name}: {src}")
    with open(src / "covariates.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    covariates = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    with open(src / "assignments.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    order = np.argsort([int(r[0]) for r in body])
    cluster = np.array([int(body[i][1]) for i in order], dtype=np.int64)
    dose = np.array([float(body[i][2]) for i in order], dtype=np.float64)
    outcome = np.array([float(body[i][3]) for i in order], dtype=np.float64)
    with open(src / "oracle.json") as fh:
        doc = json.load(fh)
    config = DGPConfig.from_dict(doc["config"])
    return GeneratedDataset(
        covariates=covariates,
        dose=dose,
        outcome=outcome,
        cluster=cluster,
        modal_doses=np.asarray(doc["modal_doses"], dtype=np.float64),
        oracle=Oracle.from_dict(doc["oracle"]),
        config=config,
        label_map={int(k): int(v) for k, v in doc["label_map"].items()},
        bean_type=None,
        seeds={k: int(v) for k, v in doc["seeds"].items()},
    )
