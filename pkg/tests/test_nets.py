"""Math substrate checks: forward arithmetic, backprop vs finite differences,
Adam, and the text weight format."""

import numpy as np
import pytest

from dualfreq.errors import ConfigurationError
from dualfreq.nets import (AdamState, MlpNetwork, adam_init, adam_step,
                           load_mlp_text, mlp_backward, mlp_copy,
                           mlp_fingerprint, mlp_forward, mlp_init,
                           save_mlp_text)
from dualfreq.sampling import make_rng


def reference_forward(net, x):
    """Independent loop-and-math re-implementation used as the oracle."""
    a = np.array(x, dtype=float)
    n_layers = len(net.weights)
    for l in range(n_layers):
        z = np.zeros(net.layer_dims[l + 1])
        for j in range(net.layer_dims[l + 1]):
            s = net.biases[l][j]
            for i in range(net.layer_dims[l]):
                s += a[i] * net.weights[l][i, j]
            z[j] = s
        if l < n_layers - 1:
            if net.hidden_activations[l] == "tanh":
                a = np.tanh(z)
            else:
                a = np.maximum(z, 0.0)
        else:
            a = z
    return a


def fd_gradient(loss_fn, arrays, idx_list, h=1e-5):
    """Central finite differences on selected scalar parameters."""
    out = []
    for arr_i, flat_i in idx_list:
        arr = arrays[arr_i]
        orig = arr.flat[flat_i]
        arr.flat[flat_i] = orig + h
        lp = loss_fn()
        arr.flat[flat_i] = orig - h
        lm = loss_fn()
        arr.flat[flat_i] = orig
        out.append((lp - lm) / (2.0 * h))
    return np.array(out)


def test_zero_weight_net_outputs_biases():
    rng = make_rng(0)
    net = mlp_init([4, 8, 3], rng)
    for w in net.weights:
        w[:] = 0.0
    net.biases[-1][:] = [0.5, -1.0, 2.0]
    y = mlp_forward(net, np.ones(4))
    assert np.array_equal(y, np.array([0.5, -1.0, 2.0]))


def test_identity_scalar_net_at_zero():
    rng = make_rng(1)
    net = mlp_init([1, 1, 1], rng)
    net.weights[0][:] = 1.0
    net.weights[1][:] = 1.0
    net.biases[0][:] = 0.0
    net.biases[1][:] = 0.0
    assert mlp_forward(net, np.zeros(1))[0] == 0.0


def test_forward_matches_reference_loops():
    rng = make_rng(2)
    net = mlp_init([4, 8, 3], rng)
    x = rng.standard_normal(4)
    got = mlp_forward(net, x)
    want = reference_forward(net, x)
    assert np.allclose(got, want, rtol=0, atol=1e-12)


def test_forward_batched_matches_single():
    rng = make_rng(3)
    net = mlp_init([5, 16, 5], rng)
    xs = rng.standard_normal((7, 5))
    batched = mlp_forward(net, xs)
    rows = np.stack([mlp_forward(net, x) for x in xs])
    # BLAS may order the reductions differently for gemm vs gemv, so allow
    # a few ulps rather than demanding bit equality across the two paths
    assert np.allclose(batched, rows, rtol=0, atol=1e-13)


def test_forward_rejects_bad_input_width():
    net = mlp_init([4, 8, 3], make_rng(0))
    with pytest.raises(ConfigurationError):
        mlp_forward(net, np.ones(5))


def test_init_requires_hidden_layer():
    with pytest.raises(ConfigurationError):
        mlp_init([4, 3], make_rng(0))


def test_backward_zero_output_grad_gives_zero_grads():
    rng = make_rng(4)
    net = mlp_init([3, 6, 2], rng)
    x = rng.standard_normal(3)
    y, cache = mlp_forward(net, x, want_cache=True)
    grads, gin = mlp_backward(net, cache, np.zeros_like(y))
    assert all(np.all(g == 0.0) for g in grads.d_weights)
    assert all(np.all(g == 0.0) for g in grads.d_biases)
    assert np.all(gin == 0.0)


def test_backward_scalar_linear_chain():
    # one hidden relu unit held in its linear region: y = w1 * (w0 * x), so
    # dy/dw0 = w1 * x exactly
    net = MlpNetwork([1, 1, 1],
                     [np.array([[2.0]]), np.array([[3.0]])],
                     [np.array([0.0]), np.array([0.0])],
                     ["relu"])
    x = np.array([1.5])
    y, cache = mlp_forward(net, x, want_cache=True)
    grads, gin = mlp_backward(net, cache, np.array([1.0]))
    assert grads.d_weights[0][0, 0] == pytest.approx(3.0 * 1.5, abs=0)
    assert grads.d_weights[1][0, 0] == pytest.approx(2.0 * 1.5, abs=0)
    assert gin[0] == pytest.approx(6.0, abs=0)


@pytest.mark.parametrize("dims,act", [
    ([5, 16, 5], "tanh"),
    ([5, 16, 5], "relu"),
    ([93, 128, 128, 48], "tanh"),
    ([258, 64, 32], "tanh"),
    ([256, 64, 8], "tanh"),
    ([8, 32, 6], "tanh"),
])
def test_backprop_matches_central_differences(dims, act):
    """Gradient fidelity on every net shape the pipeline uses: 100 probes,
    relative error <= 1e-4 against central finite differences."""
    rng = make_rng(17)
    net = mlp_init(dims, rng, activation=act)
    x = rng.standard_normal(dims[0])
    coef = rng.standard_normal(dims[-1])

    def loss():
        y = mlp_forward(net, x)
        return float(coef @ y + 0.5 * y @ y)

    y, cache = mlp_forward(net, x, want_cache=True)
    grads, _ = mlp_backward(net, cache, coef + y)

    arrays = net.weights + net.biases
    grad_arrays = grads.d_weights + grads.d_biases
    probes = []
    for _ in range(100):
        arr_i = int(rng.integers(0, len(arrays)))
        flat_i = int(rng.integers(0, arrays[arr_i].size))
        probes.append((arr_i, flat_i))
    fd = fd_gradient(loss, arrays, probes)
    an = np.array([grad_arrays[a].flat[f] for a, f in probes])
    denom = np.maximum(np.maximum(np.abs(fd), np.abs(an)), 1e-8)
    rel = np.abs(fd - an) / denom
    assert rel.max() <= 1e-4, f"worst relative error {rel.max():.2e}"


def test_backward_batched_matches_sum_of_singles():
    rng = make_rng(5)
    net = mlp_init([4, 8, 3], rng)
    xs = rng.standard_normal((6, 4))
    gouts = rng.standard_normal((6, 3))
    _, cache = mlp_forward(net, xs, want_cache=True)
    grads, gin = mlp_backward(net, cache, gouts)
    acc_w = [np.zeros_like(w) for w in net.weights]
    acc_b = [np.zeros_like(b) for b in net.biases]
    gins = []
    for x, g in zip(xs, gouts):
        _, c1 = mlp_forward(net, x, want_cache=True)
        g1, gi = mlp_backward(net, c1, g)
        for a, e in zip(acc_w, g1.d_weights):
            a += e
        for a, e in zip(acc_b, g1.d_biases):
            a += e
        gins.append(gi)
    for got, want in zip(grads.d_weights, acc_w):
        assert np.allclose(got, want, atol=1e-12)
    for got, want in zip(grads.d_biases, acc_b):
        assert np.allclose(got, want, atol=1e-12)
    assert np.allclose(gin, np.stack(gins), atol=1e-12)


def test_adam_zero_grad_leaves_params_unchanged():
    rng = make_rng(6)
    net = mlp_init([3, 5, 2], rng)
    before = [w.copy() for w in net.weights] + [b.copy() for b in net.biases]
    from dualfreq.nets import grads_zeros_like
    adam_step(net, grads_zeros_like(net), adam_init(net))
    after = net.weights + net.biases
    for b, a in zip(before, after):
        assert np.array_equal(b, a)


def test_adam_single_step_magnitude():
    # grad 1 everywhere, lr 0.1: bias-corrected update is -lr * 1/(1 + eps) per entry
    rng = make_rng(7)
    net = mlp_init([2, 3, 1], rng)
    before = net.weights[0].copy()
    grads = [np.ones_like(w) for w in net.weights]
    gb = [np.ones_like(b) for b in net.biases]
    from dualfreq.nets import MlpGrads
    adam_step(net, MlpGrads(grads, gb), adam_init(net, lr=0.1))
    delta = net.weights[0] - before
    assert np.allclose(delta, -0.1, rtol=1e-6)


def test_adam_first_step_descends():
    rng = make_rng(8)
    net = mlp_init([4, 8, 2], rng)
    x = rng.standard_normal(4)
    target = rng.standard_normal(2)
    st = adam_init(net, lr=1e-2)

    def loss_val():
        y = mlp_forward(net, x)
        return float(((y - target) ** 2).sum())

    l0 = loss_val()
    y, cache = mlp_forward(net, x, want_cache=True)
    grads, _ = mlp_backward(net, cache, 2.0 * (y - target))
    adam_step(net, grads, st)
    assert loss_val() < l0


def test_text_roundtrip_bit_exact(tmp_path):
    rng = make_rng(9)
    net = mlp_init([7, 11, 4], rng, activation="relu")
    # exercise awkward values
    net.weights[0][0, 0] = 1.0 / 3.0
    net.weights[0][0, 1] = -1e-17
    net.biases[1][0] = 1e17 + 0.123456789
    p = tmp_path / "net.txt"
    save_mlp_text(net, str(p))
    back = load_mlp_text(str(p))
    assert back.layer_dims == net.layer_dims
    assert back.hidden_activations == net.hidden_activations
    for a, b in zip(net.weights, back.weights):
        assert np.array_equal(a, b)
    for a, b in zip(net.biases, back.biases):
        assert np.array_equal(a, b)
    assert mlp_fingerprint(back) == mlp_fingerprint(net)


def test_text_format_has_version_header(tmp_path):
    net = mlp_init([2, 3, 2], make_rng(10))
    p = tmp_path / "net.txt"
    save_mlp_text(net, str(p))
    assert open(p).readline().strip() == "mlp-text 1"


def test_load_rejects_wrong_version(tmp_path):
    net = mlp_init([2, 3, 2], make_rng(10))
    p = tmp_path / "net.txt"
    save_mlp_text(net, str(p))
    body = open(p).read().replace("mlp-text 1", "mlp-text 99", 1)
    open(p, "w").write(body)
    with pytest.raises(ConfigurationError):
        load_mlp_text(str(p))


def test_same_seed_same_init():
    a = mlp_init([6, 12, 3], make_rng(42))
    b = mlp_init([6, 12, 3], make_rng(42))
    assert mlp_fingerprint(a) == mlp_fingerprint(b)
    c = mlp_init([6, 12, 3], make_rng(43))
    assert mlp_fingerprint(c) != mlp_fingerprint(a)


def test_copy_is_deep():
    net = mlp_init([3, 4, 2], make_rng(11))
    dup = mlp_copy(net)
    dup.weights[0][0, 0] += 1.0
    assert net.weights[0][0, 0] != dup.weights[0][0, 0]
