"""CADR estimators.

Four estimators with a uniform predict-CADR interface:

- CBRNet: a representation network Phi over covariates, a frozen joint
  k-means Delta grouping units by (covariates, dose), and an inference
  network I over [Phi(x); s], trained on mini-batch MSE plus
  lambda * cluster-balance IPM over Phi's batch representations.
- MLP: the same network body with the balancing term disabled (lambda=0).
  The loss-trace-equality contract between the two forces graph identity,
  so the MLP is implemented as the exact lambda=0 reduction.
- DRNet: a shared trunk plus 10 per-stratum heads, each owning a dose
  sub-interval of [0, 1].
- LinearModel: closed-form least squares (optionally ridge) on [x; s; 1].

Training standardizes the outcome internally (networks regress the z-scored
target; predictions are mapped back), because Adam at the searched learning
rates cannot traverse the raw outcome offset within the step budget.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .clustering import KMeansModel, assign
from .errors import (DimensionError, InvalidArgumentError, RankError,
                     TrainingDivergenceError)
from .ipm import IPMKind, cluster_balance_node, cluster_balance_value
from .utils import derive_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture and optimization knobs shared by the neural estimators."""

    repr_layers: int = 2
    repr_hidden: int = 32
    repr_dim: int = 32
    inference_layers: int = 2
    inference_hidden: int = 32
    learning_rate: float = 1e-3
    batch_size: int = 128
    training_steps: int = 5000
    l2_penalty: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("repr_layers", "repr_hidden", "repr_dim",
                     "inference_layers", "inference_hidden",
                     "batch_size", "training_steps"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise InvalidArgumentError(f"{name} must be a count >= 1, got {v!r}")
        if not self.learning_rate > 0:
            raise InvalidArgumentError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.l2_penalty < 0:
            raise InvalidArgumentError(f"l2_penalty must be >= 0, got {self.l2_penalty}")

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidArgumentError(
                f"unknown NetworkSpec fields: {', '.join(sorted(unknown))}"
            )
        return cls(**d)


@dataclass(frozen=True)
class YScaler:
    """Outcome z-scoring fit on the training split."""

    mean: float
    std: float

    @classmethod
    def fit(cls, y: np.ndarray) -> "YScaler":
        y = np.asarray(y, dtype=np.float64)
        std = float(y.std())
        return cls(mean=float(y.mean()), std=max(std, 1e-8))

    def transform(self, y: np.ndarray) -> np.ndarray:
        return (y - self.mean) / self.std

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return z * self.std + self.mean


def _check_xy(x: np.ndarray, s: np.ndarray, y: np.ndarray):
    if x.ndim != 2:
        raise DimensionError(f"covariates must be 2-D, got shape {x.shape}")
    if x.shape[0] != s.shape[0] or x.shape[0] != y.shape[0]:
        raise DimensionError(
            f"row mismatch: x has {x.shape[0]}, s has {s.shape[0]}, y has {y.shape[0]}"
        )
    if x.shape[0] == 0:
        raise InvalidArgumentError("training data is empty")


def _check_dose(s: np.ndarray):
    s = np.asarray(s, dtype=np.float64)
    if s.size and (s.min() < 0.0 or s.max() > 1.0):
        raise InvalidArgumentError(
            f"dose outside [0, 1]: range [{s.min()}, {s.max()}]"
        )
    return s


# ---------------------------------------------------------------------------
# parameter stacks


def _init_stack(rng: np.random.Generator, sizes: list[int]) -> list[tuple[ad.Node, ad.Node]]:
    """Affine layers (W, b) for consecutive size pairs; Glorot-uniform
    weights, zero biases."""
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = ad.parameter(ad.glorot_uniform(rng, fan_in, fan_out))
        b = ad.parameter(np.zeros((1, fan_out)))
        layers.append((w, b))
    return layers


def _stack_forward(layers, h: ad.Node, final_linear: bool) -> ad.Node:
    """ELU after every affine layer except (optionally) the last."""
    last = len(layers) - 1
    for i, (w, b) in enumerate(layers):
        h = ad.affine(h, w, b)
        if not (final_linear and i == last):
            h = ad.elu(h)
    return h


def _stack_params(layers) -> list[ad.Node]:
    return [p for pair in layers for p in pair]


def _stack_values(layers) -> list[np.ndarray]:
    return [p.value for pair in layers for p in pair]


def _phi_sizes(d_in: int, spec: NetworkSpec) -> list[int]:
    hidden = [spec.repr_hidden] * (spec.repr_layers - 1)
    return [d_in, *hidden, spec.repr_dim]


def _inference_sizes(spec: NetworkSpec) -> list[int]:
    hidden = [spec.inference_hidden] * spec.inference_layers
    return [spec.repr_dim + 1, *hidden, 1]


def _forward_pure(layers_values: list[np.ndarray], h: np.ndarray, final_linear: bool) -> np.ndarray:
    """Prediction-time forward pass over raw arrays (no tape)."""
    from . import _kernels

    n_layers = len(layers_values) // 2
    for i in range(n_layers):
        w, b = layers_values[2 * i], layers_values[2 * i + 1]
        h = h @ w + b
        if not (final_linear and i == n_layers - 1):
            h = _kernels.elu_forward(h)
    return h


# ---------------------------------------------------------------------------
# CBRNet / MLP


@dataclass
class CBRNetModel:
    """Trained representation-balancing estimator.

    `history` carries per-step (mse, ipm, total) on the standardized outcome
    scale; `final_epoch_ipm` averages the batch IPM over the last epoch's
    worth of steps.
    """

    spec: NetworkSpec
    phi_values: list[np.ndarray]
    inference_values: list[np.ndarray]
    delta: KMeansModel | None
    lambda_: float
    ipm: IPMKind | None
    base_cluster: int | None
    y_scaler: YScaler
    history: dict[str, list[float]] = field(default_factory=dict)
    steps_per_epoch: int = 0

    def representation(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return _forward_pure(self.phi_values, x, final_linear=False)

    def predict(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        s = _check_dose(np.asarray(s, dtype=np.float64).reshape(-1))
        if x.shape[0] != s.shape[0]:
            raise DimensionError("x rows and dose entries differ")
        reps = self.representation(x)
        z = _forward_pure(self.inference_values,
                          np.hstack([reps, s[:, None]]), final_linear=True)
        return self.y_scaler.inverse(z[:, 0])

    @property
    def final_epoch_ipm(self) -> float:
        """Mean recorded batch IPM over the final epoch's steps."""
        vals = self.history.get("ipm", [])
        if not vals:
            return 0.0
        window = min(self.steps_per_epoch or len(vals), len(vals))
        return float(np.mean(vals[-window:]))


MLPModel = CBRNetModel  # the MLP baseline is the lambda=0 reduction


def train_cbrnet(x: np.ndarray, s: np.ndarray, y: np.ndarray, spec: NetworkSpec,
                 lambda_: float = 0.0, ipm: IPMKind | None = None,
                 delta: KMeansModel | None = None) -> CBRNetModel:
    """Mini-batch Adam on L = L_I + lambda * L_Phi for spec.training_steps
    steps. The Delta clustering must be fitted beforehand and is never
    altered here; batches route their rows to Delta clusters once, up front.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    s = _check_dose(np.asarray(s, dtype=np.float64).reshape(-1))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    _check_xy(x, s, y)
    if lambda_ < 0:
        raise InvalidArgumentError(f"lambda must be >= 0, got {lambda_}")
    if lambda_ > 0 and (ipm is None or delta is None):
        raise InvalidArgumentError("lambda > 0 requires both an IPM kind and a fitted delta")

    n = x.shape[0]
    scaler = YScaler.fit(y)
    y_std = scaler.transform(y)[:, None]

    rng = np.random.default_rng(derive_seed(spec.seed, "train"))
    phi_layers = _init_stack(rng, _phi_sizes(x.shape[1], spec))
    inf_layers = _init_stack(rng, _inference_sizes(spec))
    params = _stack_params(phi_layers) + _stack_params(inf_layers)
    values = [p.value for p in params]
    opt = ad.adam_init(values, lr=spec.learning_rate)

    # Delta assignments are frozen, so compute them once for the whole split.
    cluster_ids = None
    base = None
    if delta is not None:
        cluster_ids = assign(delta, x, s)
        counts = np.bincount(cluster_ids, minlength=delta.k + 1)[1:]
        base = int(np.argmax(counts)) + 1  # largest training cluster; ties -> lowest id

    batch = min(spec.batch_size, n)
    steps_per_epoch = max(n // batch, 1)
    history = {"mse": [], "ipm": [], "total": []}

    order = np.arange(n)
    pos = steps_per_epoch  # force a reshuffle on the first step
    for step in range(spec.training_steps):
        if pos >= steps_per_epoch:
            rng.shuffle(order)
            pos = 0
        idx = order[pos * batch:(pos + 1) * batch]  # full batches only
        pos += 1

        xb = ad.constant(x[idx])
        sb = ad.constant(s[idx][:, None])
        yb = y_std[idx]

        reps = _stack_forward(phi_layers, xb, final_linear=False)
        pred = _stack_forward(inf_layers, ad.concat_cols(reps, sb), final_linear=True)
        mse_node = ad.mse(pred, yb)

        ipm_val = 0.0
        total_node = mse_node
        if lambda_ > 0:
            ipm_node = cluster_balance_node(ipm, reps, cluster_ids[idx], delta.k, base)
            if ipm_node is not None:
                ipm_val = ipm_node.item()
                total_node = ad.add(mse_node, ad.scale(ipm_node, lambda_))
        elif ipm is not None and delta is not None:
            # lambda=0 with a declared IPM: record the batch value without
            # letting it touch the graph, so the MLP reduction stays exact.
            ipm_val = cluster_balance_value(ipm, reps.value, cluster_ids[idx],
                                            delta.k, base)
        if spec.l2_penalty > 0:
            acc = ad.sum_all(ad.square(params[0]))
            for p in params[1:]:
                acc = ad.add(acc, ad.sum_all(ad.square(p)))
            total_node = ad.add(total_node, ad.scale(acc, spec.l2_penalty))

        mse_val = mse_node.item()
        total_val = total_node.item()
        if not (math.isfinite(mse_val) and math.isfinite(total_val)):
            last = {k: (v[-1] if v else None) for k, v in history.items()}
            raise TrainingDivergenceError(
                f"non-finite loss at step {step}; last finite losses: {last}"
            )
        history["mse"].append(mse_val)
        history["ipm"].append(ipm_val)
        history["total"].append(total_val)

        ad.zero_grads(params)
        ad.backward(total_node, params)
        ad.adam_step(values, [p.grad for p in params], opt)

    return CBRNetModel(
        spec=spec,
        phi_values=_stack_values(phi_layers),
        inference_values=_stack_values(inf_layers),
        delta=delta,
        lambda_=lambda_,
        ipm=ipm,
        base_cluster=base,
        y_scaler=scaler,
        history=history,
        steps_per_epoch=steps_per_epoch,
    )


def train_mlp(x: np.ndarray, s: np.ndarray, y: np.ndarray,
              spec: NetworkSpec) -> CBRNetModel:
    """Unbalanced baseline: the identical network body trained with
    lambda=0 and no clustering."""
    return train_cbrnet(x, s, y, spec, lambda_=0.0, ipm=None, delta=None)


# ---------------------------------------------------------------------------
# DRNet

N_STRATA = 10


def dose_stratum(s: np.ndarray) -> np.ndarray:
    """Right-closed stratum index in {0..9}: (i/10, (i+1)/10] owns its upper
    boundary, and 0.0 joins the first stratum."""
    s = np.asarray(s, dtype=np.float64)
    return np.clip(np.ceil(s * N_STRATA).astype(np.int64) - 1, 0, N_STRATA - 1)


@dataclass
class DRNetModel:
    """Shared trunk plus one head per dose stratum."""

    spec: NetworkSpec
    trunk_values: list[np.ndarray]
    head_values: list[list[np.ndarray]]
    y_scaler: YScaler
    history: dict[str, list[float]] = field(default_factory=dict)
    steps_per_epoch: int = 0

    def predict(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        s = _check_dose(np.asarray(s, dtype=np.float64).reshape(-1))
        if x.shape[0] != s.shape[0]:
            raise DimensionError("x rows and dose entries differ")
        trunk = _forward_pure(self.trunk_values, x, final_linear=False)
        joint = np.hstack([trunk, s[:, None]])
        out = np.empty(x.shape[0])
        strata = dose_stratum(s)
        for h in range(N_STRATA):
            rows = np.nonzero(strata == h)[0]
            if rows.size:
                z = _forward_pure(self.head_values[h], joint[rows], final_linear=True)
                out[rows] = z[:, 0]
        return self.y_scaler.inverse(out)


def train_drnet(x: np.ndarray, s: np.ndarray, y: np.ndarray,
                spec: NetworkSpec) -> DRNetModel:
    """Trunk on x, heads on [trunk(x); s]; each batch row contributes its
    squared error through the head owning its dose stratum."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    s = _check_dose(np.asarray(s, dtype=np.float64).reshape(-1))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    _check_xy(x, s, y)

    n = x.shape[0]
    scaler = YScaler.fit(y)
    y_std = scaler.transform(y)[:, None]
    strata = dose_stratum(s)

    rng = np.random.default_rng(derive_seed(spec.seed, "train"))
    trunk_layers = _init_stack(rng, _phi_sizes(x.shape[1], spec))
    head_layers = [_init_stack(rng, _inference_sizes(spec)) for _ in range(N_STRATA)]
    params = _stack_params(trunk_layers)
    for hl in head_layers:
        params += _stack_params(hl)
    values = [p.value for p in params]
    opt = ad.adam_init(values, lr=spec.learning_rate)

    batch = min(spec.batch_size, n)
    steps_per_epoch = max(n // batch, 1)
    history = {"mse": [], "total": []}

    order = np.arange(n)
    pos = steps_per_epoch
    for step in range(spec.training_steps):
        if pos >= steps_per_epoch:
            rng.shuffle(order)
            pos = 0
        idx = order[pos * batch:(pos + 1) * batch]
        pos += 1

        xb = ad.constant(x[idx])
        sb = ad.constant(s[idx][:, None])
        trunk = _stack_forward(trunk_layers, xb, final_linear=False)
        joint = ad.concat_cols(trunk, sb)

        sq_terms = []
        for h in range(N_STRATA):
            rows = np.nonzero(strata[idx] == h)[0]
            if rows.size == 0:
                continue
            pred = _stack_forward(head_layers[h], ad.take_rows(joint, rows),
                                  final_linear=True)
            err = ad.sub(pred, ad.constant(y_std[idx][rows]))
            sq_terms.append(ad.sum_all(ad.square(err)))
        acc = sq_terms[0]
        for t in sq_terms[1:]:
            acc = ad.add(acc, t)
        mse_node = ad.scale(acc, 1.0 / idx.size)

        total_node = mse_node
        if spec.l2_penalty > 0:
            l2 = ad.sum_all(ad.square(params[0]))
            for p in params[1:]:
                l2 = ad.add(l2, ad.sum_all(ad.square(p)))
            total_node = ad.add(total_node, ad.scale(l2, spec.l2_penalty))

        mse_val = mse_node.item()
        total_val = total_node.item()
        if not (math.isfinite(mse_val) and math.isfinite(total_val)):
            last = {k: (v[-1] if v else None) for k, v in history.items()}
            raise TrainingDivergenceError(
                f"non-finite loss at step {step}; last finite losses: {last}"
            )
        history["mse"].append(mse_val)
        history["total"].append(total_val)

        ad.zero_grads(params)
        ad.backward(total_node, params)
        ad.adam_step(values, [p.grad for p in params], opt)

    return DRNetModel(
        spec=spec,
        trunk_values=_stack_values(trunk_layers),
        head_values=[_stack_values(hl) for hl in head_layers],
        y_scaler=scaler,
        history=history,
        steps_per_epoch=steps_per_epoch,
    )


# ---------------------------------------------------------------------------
# linear regression


@dataclass
class LinearModel:
    """Affine model over [x; s; 1]; 18 coefficients for 16 covariates."""

    coefficients: np.ndarray
    ridge: float = 0.0

    def predict(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        s = _check_dose(np.asarray(s, dtype=np.float64).reshape(-1))
        if x.shape[0] != s.shape[0]:
            raise DimensionError("x rows and dose entries differ")
        design = np.hstack([x, s[:, None], np.ones((x.shape[0], 1))])
        if design.shape[1] != self.coefficients.shape[0]:
            raise DimensionError(
                f"design width {design.shape[1]} != coefficient length "
                f"{self.coefficients.shape[0]}"
            )
        return design @ self.coefficients


def fit_linear(x: np.ndarray, s: np.ndarray, y: np.ndarray,
               ridge: float = 0.0) -> LinearModel:
    """Closed-form least squares on [x; s; 1]; `ridge` > 0 adds an L2
    penalty on every coefficient (intercept included)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    s = _check_dose(np.asarray(s, dtype=np.float64).reshape(-1))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    _check_xy(x, s, y)
    if ridge < 0:
        raise InvalidArgumentError(f"ridge must be >= 0, got {ridge}")
    design = np.hstack([x, s[:, None], np.ones((x.shape[0], 1))])
    gram = design.T @ design
    if ridge > 0:
        gram = gram + ridge * np.eye(gram.shape[0])
    rhs = design.T @ y
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise RankError(
            "normal equations are singular (collinear design); "
            "enable the ridge penalty"
        ) from exc
    pivots = np.diag(chol)
    if pivots.min() <= 1e-6 * pivots.max():
        # an exactly collinear design can still squeak through the
        # factorization on rounding noise; benchmark designs sit orders of
        # magnitude above this guard
        raise RankError(
            "normal equations are numerically singular (collinear design); "
            "enable the ridge penalty"
        )
    coef = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
    return LinearModel(coefficients=coef, ridge=ridge)


# ---------------------------------------------------------------------------
# uniform prediction entry point


def predict_cadr(model, x: np.ndarray, s) -> np.ndarray:
    """Point estimate of the dose response at (x, s) for any trained
    estimator; doses are validated to [0, 1]."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    s_arr = np.asarray(s, dtype=np.float64).reshape(-1)
    if s_arr.shape[0] == 1 and x.shape[0] > 1:
        s_arr = np.full(x.shape[0], s_arr[0])
    return model.predict(x, s_arr)
