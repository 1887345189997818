"""Dense float64 MLPs with hand-rolled backprop, Adam, and a text weight format.

Everything downstream (intent encoder, motion predictor, velocity field) is an
MlpNetwork, so gradient correctness is checked once here against central finite
differences and inherited everywhere else.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

Array = np.ndarray

ACTIVATIONS = ("tanh", "relu")

WEIGHT_FORMAT_VERSION = 1


@dataclass
class MlpNetwork:
    """Fully connected net: weights[l] has shape (dims[l], dims[l+1]).

    Hidden layers use the activation named in hidden_activations; the output
    layer is linear. All parameters are float64.
    """

    layer_dims: list[int]
    weights: list[Array]
    biases: list[Array]
    hidden_activations: list[str]

    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


@dataclass
class MlpGrads:
    d_weights: list[Array]
    d_biases: list[Array]


def _validate_dims(layer_dims: list[int]) -> None:
    if len(layer_dims) < 3:
        raise ConfigurationError(f"need at least one hidden layer, got dims {layer_dims}")
    for d in layer_dims:
        if int(d) <= 0:
            raise ConfigurationError(f"non-positive layer dim in {layer_dims}")


def mlp_init(layer_dims: list[int], rng: np.random.Generator, activation: str = "tanh",
             out_scale: float = 1.0) -> MlpNetwork:
    """Gaussian init scaled by 1/sqrt(fan_in); biases start at zero.

    out_scale multiplies the output projection; 0.0 makes the net start as the
    constant zero function, a common stabilizer for regression heads.
    """
    _validate_dims(layer_dims)
    if activation not in ACTIVATIONS:
        raise ConfigurationError(f"unknown activation {activation!r}")
    dims = [int(d) for d in layer_dims]
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in))
        biases.append(np.zeros(fan_out))
    weights[-1] *= out_scale
    n_hidden = len(dims) - 2
    return MlpNetwork(dims, weights, biases, [activation] * n_hidden)


def _act(z: Array, name: str) -> Array:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    raise ConfigurationError(f"unknown activation {name!r}")


def _act_grad(z: Array, name: str) -> Array:
    if name == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    raise ConfigurationError(f"unknown activation {name!r}")


def mlp_forward(net: MlpNetwork, x: Array, want_cache: bool = False):
    """Run the net on x of shape (in,) or (batch, in).

    With want_cache=True returns (output, cache) where cache feeds mlp_backward.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.layer_dims[0]:
        raise ConfigurationError(
            f"input shape {x.shape} incompatible with net dims {net.layer_dims}")
    layer_inputs = [x]
    preacts = []
    a = x
    n_layers = len(net.weights)
    for l in range(n_layers):
        z = a @ net.weights[l] + net.biases[l]
        if l < n_layers - 1:
            preacts.append(z)
            a = _act(z, net.hidden_activations[l])
            layer_inputs.append(a)
        else:
            a = z
    out = a[0] if squeeze else a
    if want_cache:
        return out, (layer_inputs, preacts, squeeze)
    return out


def mlp_backward(net: MlpNetwork, cache, output_grad: Array):
    """Exact gradients for one forward pass.

    output_grad is dLoss/dOutput with the same leading shape the forward saw.
    Returns (MlpGrads, input_grad); batched passes sum parameter gradients over
    the batch, so the caller bakes any 1/B into output_grad.
    """
    layer_inputs, preacts, squeeze = cache
    g = np.asarray(output_grad, dtype=np.float64)
    if squeeze:
        g = g[None, :]
    if g.shape != (layer_inputs[0].shape[0], net.layer_dims[-1]):
        raise ConfigurationError(
            f"output_grad shape {output_grad.shape} incompatible with net dims {net.layer_dims}")
    n_layers = len(net.weights)
    d_weights: list[Array] = [None] * n_layers  # type: ignore[list-item]
    d_biases: list[Array] = [None] * n_layers  # type: ignore[list-item]
    delta = g
    for l in range(n_layers - 1, -1, -1):
        d_weights[l] = layer_inputs[l].T @ delta
        d_biases[l] = delta.sum(axis=0)
        delta = delta @ net.weights[l].T
        if l > 0:
            delta = delta * _act_grad(preacts[l - 1], net.hidden_activations[l - 1])
    input_grad = delta[0] if squeeze else delta
    return MlpGrads(d_weights, d_biases), input_grad


def grads_zeros_like(net: MlpNetwork) -> MlpGrads:
    return MlpGrads([np.zeros_like(w) for w in net.weights],
                    [np.zeros_like(b) for b in net.biases])


def grads_add(acc: MlpGrads, extra: MlpGrads) -> MlpGrads:
    for a, e in zip(acc.d_weights, extra.d_weights):
        a += e
    for a, e in zip(acc.d_biases, extra.d_biases):
        a += e
    return acc


@dataclass
class AdamState:
    lr: float
    beta1: float
    beta2: float
    eps: float
    step: int
    m_w: list[Array]
    v_w: list[Array]
    m_b: list[Array]
    v_b: list[Array]


def adam_init(net: MlpNetwork, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    if lr <= 0.0:
        raise ConfigurationError(f"lr must be positive, got {lr}")
    return AdamState(
        lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0,
        m_w=[np.zeros_like(w) for w in net.weights],
        v_w=[np.zeros_like(w) for w in net.weights],
        m_b=[np.zeros_like(b) for b in net.biases],
        v_b=[np.zeros_like(b) for b in net.biases],
    )


def adam_step(net: MlpNetwork, grads: MlpGrads, state: AdamState):
    """One bias-corrected Adam update, applied in place."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for i in range(len(net.weights)):
        for param, g, m, v in (
            (net.weights[i], grads.d_weights[i], state.m_w[i], state.v_w[i]),
            (net.biases[i], grads.d_biases[i], state.m_b[i], state.v_b[i]),
        ):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / c1
            v_hat = v / c2
            param -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return net, state


def _fmt(x: float) -> str:
    # 17 significant digits round-trips any float64 exactly
    return "%.17g" % x


def save_mlp_text(net: MlpNetwork, path: str) -> None:
    """Versioned text checkpoint: dims, activation tags, then row-major params."""
    lines = [f"mlp-text {WEIGHT_FORMAT_VERSION}"]
    lines.append("dims " + " ".join(str(d) for d in net.layer_dims))
    lines.append("acts " + " ".join(net.hidden_activations))
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"W{l} " + " ".join(_fmt(v) for v in w.ravel(order="C")))
        lines.append(f"b{l} " + " ".join(_fmt(v) for v in b))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mlp_text(path: str) -> MlpNetwork:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split()
    if header[0] != "mlp-text":
        raise ConfigurationError(f"{path}: not an mlp-text checkpoint")
    if int(header[1]) != WEIGHT_FORMAT_VERSION:
        raise ConfigurationError(f"{path}: unsupported format version {header[1]}")
    if not lines[1].startswith("dims ") or not lines[2].startswith("acts "):
        raise ConfigurationError(f"{path}: malformed header")
    dims = [int(t) for t in lines[1].split()[1:]]
    acts = lines[2].split()[1:]
    _validate_dims(dims)
    weights = []
    biases = []
    idx = 3
    for l, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        wtok = lines[idx].split()
        btok = lines[idx + 1].split()
        if wtok[0] != f"W{l}" or btok[0] != f"b{l}":
            raise ConfigurationError(f"{path}: expected layer {l} records at line {idx}")
        w = np.array([float(t) for t in wtok[1:]], dtype=np.float64)
        b = np.array([float(t) for t in btok[1:]], dtype=np.float64)
        if w.size != fan_in * fan_out or b.size != fan_out:
            raise ConfigurationError(f"{path}: layer {l} has wrong parameter count")
        weights.append(w.reshape(fan_in, fan_out))
        biases.append(b)
        idx += 2
    return MlpNetwork(dims, weights, biases, acts)


def mlp_fingerprint(net: MlpNetwork) -> str:
    """Stable hash of the exact parameter values, for freeze checks."""
    h = hashlib.sha256()
    h.update(("dims " + " ".join(map(str, net.layer_dims))).encode())
    h.update((" acts " + " ".join(net.hidden_activations)).encode())
    for w, b in zip(net.weights, net.biases):
        h.update(np.ascontiguousarray(w).tobytes())
        h.update(np.ascontiguousarray(b).tobytes())
    return h.hexdigest()


def mlp_copy(net: MlpNetwork) -> MlpNetwork:
    return MlpNetwork(list(net.layer_dims),
                      [w.copy() for w in net.weights],
                      [b.copy() for b in net.biases],
                      list(net.hidden_activations))
