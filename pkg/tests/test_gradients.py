"""Analytic gradients against finite differences, and against torch autograd when torch is installed."""

import numpy as np
import pytest

from codemix.common.models.attention.modeling_attention import BiLstmParams, attend, attn_forward, bilstm_annotate
from codemix.common.models.cnn.modeling_cnn import CNN_WIDTHS, CnnParams, cnn_forward
from codemix.common.models.configuration_codemix import TrainConfig
from codemix.common.models.embedding import EmbeddingTable, embed, init_table
from codemix.common.models.modeling_ensemble import CodeMixEnsemble
from codemix.common.numerics.gradcheck import grad_check
from codemix.common.numerics.kernels import (
    DualResult,
    conv1d_forward,
    cross_entropy,
    embedding_lookup,
    linear_forward,
    lstm_cell_forward,
    max_over_time,
    relu,
    softmax,
    softmax_cross_entropy,
)

# Settings for composite ops: five-point stencil, and a denominator floor so that coordinates whose
# gradient is numerically zero do not dominate the relative error.
SMOOTH = {"eps": 1e-4, "order": 4, "floor": 1e-6}


def away_from_zero(rng, shape, low=0.5, high=2.0):
    return rng.uniform(low, high, size=shape) * rng.choice([-1.0, 1.0], size=shape)


def test_linear_forward_gradients():
    rng = np.random.default_rng(0)
    inputs = {"x": away_from_zero(rng, 3), "W": away_from_zero(rng, (4, 3)), "b": away_from_zero(rng, 4)}
    assert grad_check(linear_forward, inputs, eps=1e-4) < 1e-7


def test_conv1d_gradients():
    rng = np.random.default_rng(1)
    inputs = {
        "x": away_from_zero(rng, (6, 2)),
        "filters": away_from_zero(rng, (2, 3, 2)),
        "bias": away_from_zero(rng, 2),
    }
    assert grad_check(conv1d_forward, inputs, eps=1e-4) < 1e-6


def test_relu_gradient_away_from_kink():
    rng = np.random.default_rng(2)
    assert grad_check(relu, {"x": away_from_zero(rng, 8)}, eps=1e-4) < 1e-7


def test_max_over_time_gradient_without_ties():
    featmap = np.array([[0.1, 2.0, -1.0], [1.5, 0.3, -0.2], [0.7, 1.1, -3.0]])
    assert grad_check(max_over_time, {"featmap": featmap}, eps=1e-4) < 1e-7


def test_softmax_and_cross_entropy_gradients():
    rng = np.random.default_rng(3)
    assert grad_check(softmax, {"z": rng.standard_normal(5)}, **SMOOTH) < 1e-6
    probs = softmax(rng.standard_normal(3)).output
    assert grad_check(lambda probs: cross_entropy(probs, 1), {"probs": probs}, **SMOOTH) < 1e-5
    logits = rng.standard_normal(3)
    assert grad_check(lambda logits: softmax_cross_entropy(logits, 0), {"logits": logits}, **SMOOTH) < 1e-6


def test_lstm_cell_gradients():
    rng = np.random.default_rng(4)
    hidden, dim = 3, 2
    inputs = {
        "x": rng.standard_normal(dim),
        "h_prev": rng.standard_normal(hidden),
        "c_prev": rng.standard_normal(hidden),
        "weight": 0.5 * rng.standard_normal((4 * hidden, dim + hidden)),
        "bias": 0.5 * rng.standard_normal(4 * hidden),
    }
    assert grad_check(lstm_cell_forward, inputs, **SMOOTH) < 1e-5


def test_lstm_cell_gradients_of_summed_h():
    rng = np.random.default_rng(5)
    hidden, dim = 3, 2
    h_prev, c_prev = rng.standard_normal(hidden), rng.standard_normal(hidden)

    def summed_h(x, weight, bias):
        step = lstm_cell_forward(x, h_prev, c_prev, weight, bias)
        h = step.output[0]
        return DualResult(np.asarray(h.sum()), lambda g: step.backward((float(g) * np.ones(hidden), None)))

    inputs = {
        "x": rng.standard_normal(dim),
        "weight": 0.5 * rng.standard_normal((4 * hidden, dim + hidden)),
        "bias": 0.5 * rng.standard_normal(4 * hidden),
    }
    assert grad_check(summed_h, inputs, eps=1e-5, floor=1e-6) < 1e-5


def test_embedding_lookup_gradient():
    rng = np.random.default_rng(6)
    ids = [1, 0, 3, 1]
    table = rng.standard_normal((5, 3))
    assert grad_check(lambda table: embedding_lookup(table, ids), {"table": table}, eps=1e-4) < 1e-7


def test_embed_gradient_only_reaches_real_non_pad_rows():
    rng = np.random.default_rng(7)
    table = EmbeddingTable(init_table(6, 3, rng))
    ids = np.array([4, 2, 4, 0, 0])
    dtable = embed(ids, table).backward(rng.standard_normal((5, 3)))["table"]
    assert set(np.flatnonzero(np.abs(dtable).sum(axis=1))) == {2, 4}

    # only the non-pad rows are perturbed; the pad row must stay zero
    pad_row = np.zeros((1, 3))

    def embed_op(rows):
        result = embed(ids[:3], EmbeddingTable(np.vstack([pad_row, rows])))
        return DualResult(result.output, lambda g: {"rows": result.backward(g)["table"][1:]})

    assert grad_check(embed_op, {"rows": table.table[1:]}, eps=1e-4) < 1e-7


def _kink_free_cnn(seed: int, length: int, dim: int, n_filters: int, margin: float = 0.05):
    """Random CNN inputs whose ReLU inputs and pooling winners are all at least `margin` from a tie."""
    for offset in range(1000):
        rng = np.random.default_rng([seed, offset])
        x = rng.standard_normal((length, dim))
        params = CnnParams.init(dim, n_filters, rng)
        ok = True
        for bank in params.banks:
            xb = np.vstack([x, np.zeros((max(0, bank.width - length), dim))])
            conv = conv1d_forward(xb, bank.filters, bank.bias).output
            if np.abs(conv).min() < margin:
                ok = False
                break
            act = np.sort(np.maximum(conv, 0.0), axis=0)
            if act.shape[0] > 1 and np.any((act[-1] > 0) & (act[-1] - act[-2] < margin)):
                ok = False
                break
        if ok:
            return x, params
    raise RuntimeError("no kink-free sample found")


def test_cnn_end_to_end_gradients():
    x, params = _kink_free_cnn(seed=8, length=5, dim=4, n_filters=2)

    def op(**inputs):
        p = CnnParams.from_state_dict({k: v for k, v in inputs.items() if k != "x"})
        out = cnn_forward(inputs["x"], p)
        probs = softmax(out.logits)
        return DualResult(out.p_cnn, lambda g: out.backward(probs.backward(g)["z"]))

    inputs = {"x": x, **params.state_dict()}
    assert grad_check(op, inputs, **SMOOTH) < 1e-5


def test_cnn_pooled_vector_is_concatenated_in_width_order():
    x, params = _kink_free_cnn(seed=9, length=6, dim=3, n_filters=2)
    out = cnn_forward(x, params)
    for k, bank in enumerate(params.banks):
        assert bank.width == CNN_WIDTHS[k]
        pooled = max_over_time(relu(conv1d_forward(x, bank.filters, bank.bias).output).output).output
        np.testing.assert_array_equal(out.pooled[2 * k : 2 * k + 2], pooled)


def _attention_op(mask=None):
    def op(**inputs):
        p = BiLstmParams.from_state_dict({k: v for k, v in inputs.items() if k != "x"})
        out = attn_forward(inputs["x"], mask, p)
        probs = softmax(out.logits)
        return DualResult(out.p_att, lambda g: out.backward(probs.backward(g)["z"]))

    return op


def test_attention_end_to_end_gradients():
    rng = np.random.default_rng(10)
    params = BiLstmParams.init(3, 3, rng)
    inputs = {"x": rng.standard_normal((4, 3)), **params.state_dict()}
    assert grad_check(_attention_op(), inputs, **SMOOTH) < 1e-5


def test_attention_gradients_with_padding():
    rng = np.random.default_rng(11)
    params = BiLstmParams.init(3, 2, rng)
    x = rng.standard_normal((5, 3))
    inputs = {"x": x, **params.state_dict()}
    assert grad_check(_attention_op(mask=np.array([1, 1, 1, 0, 0], dtype=bool)), inputs, **SMOOTH) < 1e-5


def test_bilstm_annotate_and_attend_gradients():
    rng = np.random.default_rng(12)
    params = BiLstmParams.init(2, 3, rng)

    def annotate(x):
        result = bilstm_annotate(x, None, params)
        return DualResult(result.output, lambda g: {"x": result.backward(g)["x"]})

    assert grad_check(annotate, {"x": rng.standard_normal((4, 2))}, **SMOOTH) < 1e-5
    assert grad_check(attend, {"K": rng.standard_normal((4, 6))}, **SMOOTH) < 1e-5


def test_ensemble_loss_gradients_of_attention_branch():
    cfg = TrainConfig(embedding_dim=3, hidden_size=2, num_filters=2, dropout_rate=0.0, seed=3)
    model = CodeMixEnsemble(cfg, vocab_size=8)
    ids, n, label = np.array([5, 4, 6, 7, 0, 0]), 4, 2

    def loss_op(**params):
        loss, grads = CodeMixEnsemble(cfg, params=params).loss_and_grads(ids, n, label)
        return DualResult(np.asarray(loss), lambda g: {k: float(g) * v for k, v in grads.items()})

    wrt = [
        "attention.embedding",
        "attention.lstm_fwd.weight",
        "attention.lstm_bwd.bias",
        "attention.fc.weight",
        "attention.fc.bias",
    ]
    assert grad_check(loss_op, dict(model.params), wrt=wrt, **SMOOTH) < 1e-5


def test_lstm_cell_matches_torch():
    torch = pytest.importorskip("torch")
    rng = np.random.default_rng(13)
    hidden, dim = 3, 2
    weight = rng.standard_normal((4 * hidden, dim + hidden))
    bias = rng.standard_normal(4 * hidden)
    x, h_prev, c_prev = rng.standard_normal(dim), rng.standard_normal(hidden), rng.standard_normal(hidden)

    step = lstm_cell_forward(x, h_prev, c_prev, weight, bias)
    grads = step.backward((np.ones(hidden), None))

    # torch stacks the gates as input, forget, candidate, output
    blocks = [np.arange(k * hidden, (k + 1) * hidden) for k in (0, 1, 3, 2)]
    perm = np.concatenate(blocks)
    cell = torch.nn.LSTMCell(dim, hidden).double()
    with torch.no_grad():
        cell.weight_ih.copy_(torch.from_numpy(weight[perm, :dim]))
        cell.weight_hh.copy_(torch.from_numpy(weight[perm, dim:]))
        cell.bias_ih.copy_(torch.from_numpy(bias[perm]))
        cell.bias_hh.zero_()
    tx = torch.tensor(x[None], requires_grad=True)
    th = torch.tensor(h_prev[None], requires_grad=True)
    tc = torch.tensor(c_prev[None], requires_grad=True)
    h, c = cell(tx, (th, tc))
    h.sum().backward()

    np.testing.assert_allclose(step.output[0], h.detach().numpy()[0], atol=1e-12)
    np.testing.assert_allclose(step.output[1], c.detach().numpy()[0], atol=1e-12)
    np.testing.assert_allclose(grads["x"], tx.grad.numpy()[0], atol=1e-12)
    np.testing.assert_allclose(grads["h_prev"], th.grad.numpy()[0], atol=1e-12)
    np.testing.assert_allclose(grads["c_prev"], tc.grad.numpy()[0], atol=1e-12)
    np.testing.assert_allclose(grads["bias"][perm], cell.bias_ih.grad.numpy(), atol=1e-12)


@pytest.mark.parametrize("seed", range(50))
def test_component_gradients_across_seeds(seed):
    rng = np.random.default_rng([seed, 99])
    dim, hidden, n_filters = int(rng.integers(2, 5)), int(rng.integers(2, 5)), int(rng.integers(1, 4))

    inputs = {"x": rng.standard_normal(dim), "W": rng.standard_normal((hidden, dim)), "b": rng.standard_normal(hidden)}
    assert grad_check(linear_forward, inputs, **SMOOTH) < 1e-5

    width = int(rng.integers(1, 5))
    inputs = {
        "x": rng.standard_normal((width + int(rng.integers(0, 4)), dim)),
        "filters": rng.standard_normal((n_filters, width, dim)),
        "bias": rng.standard_normal(n_filters),
    }
    assert grad_check(conv1d_forward, inputs, **SMOOTH) < 1e-5

    inputs = {
        "x": rng.standard_normal(dim),
        "h_prev": rng.standard_normal(hidden),
        "c_prev": rng.standard_normal(hidden),
        "weight": 0.5 * rng.standard_normal((4 * hidden, dim + hidden)),
        "bias": 0.5 * rng.standard_normal(4 * hidden),
    }
    assert grad_check(lstm_cell_forward, inputs, **SMOOTH) < 1e-5

    ids = rng.integers(0, 6, size=int(rng.integers(1, 8)))
    table = rng.standard_normal((6, dim))
    assert grad_check(lambda table: embedding_lookup(table, ids), {"table": table}, **SMOOTH) < 1e-5

    x, params = _kink_free_cnn(seed=1000 + seed, length=int(rng.integers(1, 7)), dim=dim, n_filters=n_filters)

    def cnn_op(**inputs):
        p = CnnParams.from_state_dict({k: v for k, v in inputs.items() if k != "x"})
        out = cnn_forward(inputs["x"], p)
        return DualResult(out.logits, lambda g: out.backward(g))

    assert grad_check(cnn_op, {"x": x, **params.state_dict()}, **SMOOTH) < 1e-5

    length = int(rng.integers(1, 7))
    attention = BiLstmParams.init(dim, hidden, rng)
    inputs = {"x": rng.standard_normal((length, dim)), **attention.state_dict()}
    assert grad_check(_attention_op(), inputs, **SMOOTH) < 1e-5

    gold = int(rng.integers(0, 3))
    logits = 2.0 * rng.standard_normal(3)
    assert grad_check(lambda logits: softmax_cross_entropy(logits, gold), {"logits": logits}, **SMOOTH) < 1e-5
