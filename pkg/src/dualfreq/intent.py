"""Macro-loop intent encoder.

Stands in for the slow scene-understanding stage: a grid observation plus a
2-way task tag map to a compact embedding. The encoder trains jointly with the
velocity field (gradients arrive through the policy loss) and is queried only
once per macro cycle, so its output is timestamped with the step it was born.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .nets import MlpNetwork, mlp_forward

Array = np.ndarray

TASK_TAGS = ("dynamic", "static")
EMBED_DIM_DEFAULT = 32


def task_tag_onehot(tag: str) -> Array:
    if tag not in TASK_TAGS:
        raise ConfigurationError(f"unknown task tag {tag!r}; expected one of {TASK_TAGS}")
    vec = np.zeros(len(TASK_TAGS))
    vec[TASK_TAGS.index(tag)] = 1.0
    return vec


def tag_for_tier(tier: str) -> str:
    return "static" if tier == "static" else "dynamic"


def intent_input(grid: Array, tag: str) -> Array:
    """Flatten the grid and append the task tag one-hot."""
    g = np.asarray(grid, dtype=np.float64)
    return np.concatenate([g.ravel(), task_tag_onehot(tag)])


def intent_input_batch(grids: Array, tag_indices: Array) -> Array:
    flat = np.asarray(grids, dtype=np.float64).reshape(len(grids), -1)
    onehot = np.zeros((len(grids), len(TASK_TAGS)))
    onehot[np.arange(len(grids)), np.asarray(tag_indices, dtype=int)] = 1.0
    return np.concatenate([flat, onehot], axis=1)


@dataclass
class IntentEmbedding:
    vec: Array
    born_step: int


def encode_intent(net: MlpNetwork, grid: Array, tag: str, born_step: int = 0) -> IntentEmbedding:
    x = intent_input(grid, tag)
    if x.shape[0] != net.layer_dims[0]:
        raise ConfigurationError(
            f"grid/tag input dim {x.shape[0]} does not match encoder dims {net.layer_dims}")
    return IntentEmbedding(vec=mlp_forward(net, x), born_step=int(born_step))
