"""Versioned JSON serialization for fitted models.

Documents are emitted with sorted keys and fixed separators so the
same model always serializes to the same bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .forest import ForestModel
from .gbm import GbmModel
from .linear import LinearModel
from .tree import Tree

FORMAT_VERSION = 1


def _arr(values, dtype=np.float64) -> np.ndarray:
    a = np.asarray(values, dtype=dtype)
    a.setflags(write=False)
    return a


def model_to_dict(model) -> dict:
    if isinstance(model, LinearModel):
        return {
            "kind": "linear",
            "coefficients": model.coefficients.tolist(),
            "intercept": model.intercept,
            "feature_means": model.feature_means.tolist(),
            "feature_sds": model.feature_sds.tolist(),
        }
    if isinstance(model, Tree):
        return {
            "kind": "tree",
            "feature": model.feature.tolist(),
            "threshold": model.threshold.tolist(),
            "left": model.left.tolist(),
            "right": model.right.tolist(),
            "value": model.value.tolist(),
            "n_samples": model.n_samples.tolist(),
            "depth": model.depth.tolist(),
            "n_features": model.n_features,
        }
    if isinstance(model, ForestModel):
        return {
            "kind": "forest",
            "trees": [model_to_dict(t) for t in model.trees],
            "tree_seeds": list(model.tree_seeds),
            "n_features": model.n_features,
            "feature_subset_size": model.feature_subset_size,
            "seed": model.seed,
        }
    if isinstance(model, GbmModel):
        return {
            "kind": "gbm",
            "bin_edges": [e.tolist() for e in model.bin_edges],
            "init": model.init,
            "stages": [{"tree": model_to_dict(t), "learning_rate": lr}
                       for t, lr in model.stages],
            "train_rmse": list(model.train_rmse),
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(doc: dict):
    kind = doc.get("kind")
    if kind == "linear":
        return LinearModel(
            coefficients=_arr(doc["coefficients"]),
            intercept=float(doc["intercept"]),
            feature_means=_arr(doc["feature_means"]),
            feature_sds=_arr(doc["feature_sds"]),
        )
    if kind == "tree":
        return Tree(
            feature=_arr(doc["feature"], np.int32),
            threshold=_arr(doc["threshold"]),
            left=_arr(doc["left"], np.int32),
            right=_arr(doc["right"], np.int32),
            value=_arr(doc["value"]),
            n_samples=_arr(doc["n_samples"], np.int32),
            depth=_arr(doc["depth"], np.int32),
            n_features=int(doc["n_features"]),
        )
    if kind == "forest":
        return ForestModel(
            trees=tuple(model_from_dict(t) for t in doc["trees"]),
            tree_seeds=tuple(int(s) for s in doc["tree_seeds"]),
            n_features=int(doc["n_features"]),
            feature_subset_size=int(doc["feature_subset_size"]),
            seed=int(doc["seed"]),
        )
    if kind == "gbm":
        return GbmModel(
            bin_edges=tuple(_arr(e) for e in doc["bin_edges"]),
            init=float(doc["init"]),
            stages=tuple((model_from_dict(st["tree"]), float(st["learning_rate"]))
                         for st in doc["stages"]),
            train_rmse=tuple(float(v) for v in doc["train_rmse"]),
        )
    raise ValueError(f"unknown model kind: {kind!r}")


def dumps_model(model) -> str:
    doc = {"format_version": FORMAT_VERSION}
    doc.update(model_to_dict(model))
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def loads_model(text: str):
    doc = json.loads(text)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version: {version!r}")
    return model_from_dict(doc)


def save_model(model, path) -> None:
    Path(path).write_text(dumps_model(model) + "\n")


def load_model(path):
    return loads_model(Path(path).read_text())
