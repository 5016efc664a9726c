"""JSON persistence for trained models.

Schema (one object per model, discriminated by "kind"):

  svr:  {"kind": "svr", "gamma", "epsilon", "C", "bias",
         "support_inputs": [[...]], "dual_coefficients": [...]}
  msvr: {"kind": "msvr", "gamma", "epsilon", "C",
         "support_inputs": [[...]], "coefficient_matrix": [[...]],
         "biases": [...]}
  mlp:  {"kind": "mlp", "hidden_size",
         "hidden_weights": [[...]], "hidden_biases": [...],
         "output_weights": [[...]], "output_biases": [...]}

Doubles are written with 17 significant digits, so a load reproduces the
trained model bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..util import dumps_exact
from .mlp import MlpModel
from .msvr import MsvrModel
from .svr import SvrModel


def model_to_dict(model) -> dict:
    if isinstance(model, SvrModel):
        return {
            "kind": "svr",
            "gamma": model.gamma,
            "epsilon": model.epsilon,
            "C": model.C,
            "bias": model.bias,
            "support_inputs": model.support_inputs,
            "dual_coefficients": model.dual_coefficients,
        }
    if isinstance(model, MsvrModel):
        return {
            "kind": "msvr",
            "gamma": model.gamma,
            "epsilon": model.epsilon,
            "C": model.C,
            "support_inputs": model.support_inputs,
            "coefficient_matrix": model.coefficient_matrix,
            "biases": model.biases,
        }
    if isinstance(model, MlpModel):
        return {
            "kind": "mlp",
            "hidden_size": model.hidden_size,
            "hidden_weights": model.hidden_weights,
            "hidden_biases": model.hidden_biases,
            "output_weights": model.output_weights,
            "output_biases": model.output_biases,
        }
    raise TypeError(f"unknown model type {type(model).__name__}")


def model_from_dict(payload: dict):
    kind = payload.get("kind")
    if kind == "svr":
        support = np.asarray(payload["support_inputs"], dtype=np.float64)
        if support.size == 0:
            support = support.reshape(0, 0)
        return SvrModel(
            support_inputs=support,
            dual_coefficients=np.asarray(payload["dual_coefficients"], dtype=np.float64),
            bias=float(payload["bias"]),
            gamma=float(payload["gamma"]),
            epsilon=float(payload["epsilon"]),
            C=float(payload["C"]),
        )
    if kind == "msvr":
        return MsvrModel(
            support_inputs=np.asarray(payload["support_inputs"], dtype=np.float64),
            coefficient_matrix=np.asarray(payload["coefficient_matrix"], dtype=np.float64),
            biases=np.asarray(payload["biases"], dtype=np.float64),
            gamma=float(payload["gamma"]),
            epsilon=float(payload["epsilon"]),
            C=float(payload["C"]),
        )
    if kind == "mlp":
        return MlpModel(
            hidden_weights=np.asarray(payload["hidden_weights"], dtype=np.float64),
            hidden_biases=np.asarray(payload["hidden_biases"], dtype=np.float64),
            output_weights=np.asarray(payload["output_weights"], dtype=np.float64),
            output_biases=np.asarray(payload["output_biases"], dtype=np.float64),
            hidden_size=int(payload["hidden_size"]),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def dumps_model(model) -> str:
    return dumps_exact(model_to_dict(model))


def loads_model(text: str):
    return model_from_dict(json.loads(text))


def save_model(model, path) -> None:
    Path(path).write_text(dumps_model(model) + "\n", encoding="utf-8")


def load_model(path):
    return loads_model(Path(path).read_text(encoding="utf-8"))
