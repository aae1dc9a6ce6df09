"""
Parameter sets and federated averaging.

A parameter set is an OrderedDict mapping state-dict names to numpy arrays.
It carries batch-norm running statistics too, so the broadcast model is the
complete model.
"""

from collections import OrderedDict

import numpy as np
import torch

from dronerf.src.errors import ValidationError


def get_parameters(model):
    """Copy a model's full state into a parameter set."""
    return OrderedDict(
        (name, tensor.detach().cpu().numpy().copy()) for name, tensor in model.state_dict().items()
    )


def set_parameters(model, parameters):
    """Load a parameter set into a model (exact copy, dtypes preserved)."""
    state = OrderedDict(
        (name, torch.from_numpy(np.array(value, copy=True))) for name, value in parameters.items()
    )
    model.load_state_dict(state, strict=True)
    return model


def copy_parameters(parameters):
    return OrderedDict((name, np.array(value, copy=True)) for name, value in parameters.items())


def weighted_average(parameter_sets, weights):
    """
    Entry-wise weighted mean, accumulated in float64 and cast back.

    Integer entries (batch counters) are rounded to the nearest integer.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if len(parameter_sets) == 0 or len(parameter_sets) != len(weights):
        raise ValidationError("Need one weight per parameter set and at least one set")
    if (weights <= 0).any():
        raise ValidationError("Weights must be positive")
    weights = weights / weights.sum()

    names = list(parameter_sets[0])
    averaged = OrderedDict()
    for name in names:
        reference = np.asarray(parameter_sets[0][name])
        total = np.zeros(reference.shape, dtype=np.float64)
        for params, weight in zip(parameter_sets, weights):
            total += weight * np.asarray(params[name], dtype=np.float64)
        if np.issubdtype(reference.dtype, np.integer):
            total = np.rint(total)
        averaged[name] = total.astype(reference.dtype)
    return averaged


def aggregate(updates):
    """
    FedAvg over accepted updates, weighted by sample_count.

    A single update is returned verbatim.

    Raises:
        ValidationError: no updates, or non-positive sample counts
    """
    updates = list(updates)
    if not updates:
        raise ValidationError("Cannot aggregate zero updates")
    if len(updates) == 1:
        return copy_parameters(updates[0].parameters)
    return weighted_average([u.parameters for u in updates], [u.sample_count for u in updates])
