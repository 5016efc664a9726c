"""Regressors behind a common train/predict contract."""

from .kernels import rbf_gram, rbf_kernel
from .mlp import (
    MlpGradients,
    MlpModel,
    init_mlp,
    loss_and_gradients,
    predict_mlp,
    train_mlp,
)
from .msvr import MsvrModel, msvr_objective, predict_msvr, train_msvr
from .serialize import (
    dumps_model,
    load_model,
    loads_model,
    model_from_dict,
    model_to_dict,
    save_model,
)
from .svr import (
    SvrModel,
    dual_objective,
    model_dual_objective,
    predict_svr,
    train_svr,
)

__all__ = [
    "MlpGradients",
    "MlpModel",
    "MsvrModel",
    "SvrModel",
    "dual_objective",
    "dumps_model",
    "init_mlp",
    "load_model",
    "loads_model",
    "loss_and_gradients",
    "model_dual_objective",
    "model_from_dict",
    "model_to_dict",
    "msvr_objective",
    "predict_mlp",
    "predict_msvr",
    "predict_svr",
    "rbf_gram",
    "rbf_kernel",
    "save_model",
    "train_mlp",
    "train_msvr",
    "train_svr",
]
