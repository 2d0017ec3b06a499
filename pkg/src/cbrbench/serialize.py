"""Binary-free text checkpoints for trained estimators.

Layout::

    #cbrbench-checkpoint v1
    {one-line JSON manifest: kind, spec, lambda, ipm, scaler, ...}
    array <name> <rows> <cols>
    <rows lines of cols space-separated floats at 17 significant digits>
    ...

Floats survive a save/load round trip bit-exactly; the format stays
portable across languages (no pickles, no endianness).
"""

from __future__ import annotations

import json

import numpy as np

from .clustering import KMeansModel
from .errors import InvalidArgumentError
from .ipm import IPMKind
from .models import CBRNetModel, DRNetModel, LinearModel, NetworkSpec, YScaler

HEADER = "#cbrbench-checkpoint v1"


def _emit_array(lines: list[str], name: str, arr: np.ndarray):
    a = np.atleast_2d(np.asarray(arr, dtype=np.float64))
    lines.append(f"array {name} {a.shape[0]} {a.shape[1]}")
    from .utils import array_to_lines
    lines.extend(array_to_lines(a))


def _collect(model) -> tuple[dict, dict[str, np.ndarray]]:
    if isinstance(model, CBRNetModel):
        manifest = {
            "kind": "cbrnet",
            "spec": model.spec.to_dict(),
            "lambda": model.lambda_,
            "ipm": model.ipm.name if model.ipm else None,
            "base_cluster": model.base_cluster,
            "y_scaler": {"mean": model.y_scaler.mean, "std": model.y_scaler.std},
            "steps_per_epoch": model.steps_per_epoch,
            "n_phi": len(model.phi_values) // 2,
            "n_inference": len(model.inference_values) // 2,
            "delta": None,
        }
        arrays = {}
        for i in range(manifest["n_phi"]):
            arrays[f"phi.{i}.w"] = model.phi_values[2 * i]
            arrays[f"phi.{i}.b"] = model.phi_values[2 * i + 1]
        for i in range(manifest["n_inference"]):
            arrays[f"inference.{i}.w"] = model.inference_values[2 * i]
            arrays[f"inference.{i}.b"] = model.inference_values[2 * i + 1]
        if model.delta is not None:
            manifest["delta"] = {
                "k": model.delta.k,
                "dose_weight": model.delta.dose_weight,
                "inertia": model.delta.inertia,
            }
            arrays["delta.centroids"] = model.delta.centroids
        return manifest, arrays
    if isinstance(model, DRNetModel):
        manifest = {
            "kind": "drnet",
            "spec": model.spec.to_dict(),
            "y_scaler": {"mean": model.y_scaler.mean, "std": model.y_scaler.std},
            "steps_per_epoch": model.steps_per_epoch,
            "n_trunk": len(model.trunk_values) // 2,
            "n_head_layers": len(model.head_values[0]) // 2,
            "n_heads": len(model.head_values),
        }
        arrays = {}
        for i in range(manifest["n_trunk"]):
            arrays[f"trunk.{i}.w"] = model.trunk_values[2 * i]
            arrays[f"trunk.{i}.b"] = model.trunk_values[2 * i + 1]
        for h, hv in enumerate(model.head_values):
            for i in range(manifest["n_head_layers"]):
                arrays[f"head.{h}.{i}.w"] = hv[2 * i]
                arrays[f"head.{h}.{i}.b"] = hv[2 * i + 1]
        return manifest, arrays
    if isinstance(model, LinearModel):
        manifest = {"kind": "linear", "ridge": model.ridge}
        return manifest, {"coefficients": model.coefficients[:, None]}
    raise InvalidArgumentError(f"cannot serialize model of type {type(model).__name__}")


def save_model(path, model):
    manifest, arrays = _collect(model)
    lines = [HEADER, json.dumps(manifest, sort_keys=True)]
    for name in arrays:  # insertion order is the documented order
        _emit_array(lines, name, arrays[name])
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_arrays(lines: list[str]) -> dict[str, np.ndarray]:
    from .utils import lines_to_array
    arrays = {}
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if len(parts) != 4 or parts[0] != "array":
            raise InvalidArgumentError(f"malformed array header: {lines[i]!r}")
        name, rows, cols = parts[1], int(parts[2]), int(parts[3])
        arrays[name] = lines_to_array(lines[i + 1:i + 1 + rows], rows, cols)
        i += 1 + rows
    return arrays


def load_model(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != HEADER:
        raise InvalidArgumentError(
            f"not a checkpoint file (expected leading {HEADER!r})"
        )
    manifest = json.loads(lines[1])
    arrays = _parse_arrays(lines[2:])
    kind = manifest.get("kind")
    if kind == "linear":
        return LinearModel(coefficients=arrays["coefficients"][:, 0],
                           ridge=manifest["ridge"])
    if kind == "cbrnet":
        spec = NetworkSpec.from_dict(manifest["spec"])
        phi = []
        for i in range(manifest["n_phi"]):
            phi += [arrays[f"phi.{i}.w"], arrays[f"phi.{i}.b"]]
        inference = []
        for i in range(manifest["n_inference"]):
            inference += [arrays[f"inference.{i}.w"], arrays[f"inference.{i}.b"]]
        delta = None
        if manifest["delta"] is not None:
            d = manifest["delta"]
            delta = KMeansModel(k=d["k"], centroids=arrays["delta.centroids"],
                                dose_weight=d["dose_weight"], inertia=d["inertia"])
        return CBRNetModel(
            spec=spec, phi_values=phi, inference_values=inference, delta=delta,
            lambda_=manifest["lambda"],
            ipm=IPMKind(manifest["ipm"]) if manifest["ipm"] else None,
            base_cluster=manifest["base_cluster"],
            y_scaler=YScaler(**manifest["y_scaler"]),
            steps_per_epoch=manifest["steps_per_epoch"],
        )
    if kind == "drnet":
        spec = NetworkSpec.from_dict(manifest["spec"])
        trunk = []
        for i in range(manifest["n_trunk"]):
            trunk += [arrays[f"trunk.{i}.w"], arrays[f"trunk.{i}.b"]]
        heads = []
        for h in range(manifest["n_heads"]):
            hv = []
            for i in range(manifest["n_head_layers"]):
                hv += [arrays[f"head.{h}.{i}.w"], arrays[f"head.{h}.{i}.b"]]
            heads.append(hv)
        return DRNetModel(spec=spec, trunk_values=trunk, head_values=heads,
                          y_scaler=YScaler(**manifest["y_scaler"]),
                          steps_per_epoch=manifest["steps_per_epoch"])
    raise InvalidArgumentError(f"unknown checkpoint kind {kind!r}")
