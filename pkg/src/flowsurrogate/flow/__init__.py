from .layers import ActNormLayer, CouplingLayer, PermutationLayer
from .model import (
    FlowModel,
    base_params,
    build_flow,
    conditional_forward,
    coupling_forward,
    coupling_inverse,
    extract_zc,
    flow_forward,
    flow_inverse,
    gaussian_logprob,
    init_actnorm_identity,
    load_flow,
    log_likelihood,
    sample_zk,
    save_flow,
    unconditional_forward,
    unconditional_inverse,
)
from .training import FlowTrainConfig, flow_loss, flow_loss_and_grads, train_flow

__all__ = [
    "ActNormLayer", "CouplingLayer", "PermutationLayer", "FlowModel",
    "base_params", "build_flow", "conditional_forward", "coupling_forward",
    "coupling_inverse", "extract_zc", "flow_forward", "flow_inverse",
    "gaussian_logprob", "init_actnorm_identity", "load_flow", "log_likelihood",
    "sample_zk", "save_flow", "unconditional_forward", "unconditional_inverse",
    "FlowTrainConfig", "flow_loss", "flow_loss_and_grads", "train_flow",
]
