from .imageio import read_image, write_image
from .mlp import Layer, MlpWeights, load_mlp, mlp_predict, save_mlp
from .models import LinearModel, MlpModel, SphereModel, model_from_dict
from .oracle import (
    MeteredOracle,
    OracleSpec,
    QueryLedger,
    phi,
    true_gradient,
    untargeted_view,
)
from .remote import RemoteModel, remote_predict, start_stub_server

__all__ = [
    "Layer",
    "LinearModel",
    "MeteredOracle",
    "MlpModel",
    "MlpWeights",
    "OracleSpec",
    "QueryLedger",
    "RemoteModel",
    "SphereModel",
    "load_mlp",
    "mlp_predict",
    "model_from_dict",
    "phi",
    "read_image",
    "remote_predict",
    "save_mlp",
    "start_stub_server",
    "true_gradient",
    "untargeted_view",
    "write_image",
]
