import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcheck import model_grad_errors, numeric_grad, rel_error
from gliomaseq.nn import (
    INFER,
    TRAIN,
    AdamState,
    Architecture,
    BatchNorm,
    DenseLayer,
    LstmCell,
    StaleCacheError,
    adam_step,
    batchnorm_backward,
    batchnorm_forward,
    dense_backward,
    dense_forward,
    dropout_forward,
    init_model,
    lstm_backward,
    lstm_forward,
    param_count,
    softmax_cross_entropy,
)
from gliomaseq.nn.container import ContainerError, dumps, load_model, loads, save_model

# --- dense -----------------------------------------------------------------


def test_dense_identity_and_bias():
    x = np.random.default_rng(0).normal(size=(5, 3))
    np.testing.assert_array_equal(dense_forward(DenseLayer(np.eye(3), np.zeros(3)), x), x)
    c = np.array([1.0, -2.0])
    np.testing.assert_array_equal(dense_forward(DenseLayer(np.zeros((2, 3)), c), x), np.tile(c, (5, 1)))


def test_dense_hand_values():
    layer = DenseLayer(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([0.5, -0.5]))
    np.testing.assert_allclose(dense_forward(layer, np.array([[1.0, -1.0]])), [[-0.5, -1.5]])


def test_dense_dimension_mismatch():
    with pytest.raises(ValueError):
        dense_forward(DenseLayer(np.zeros((2, 3)), np.zeros(2)), np.zeros((1, 4)))


def test_dense_backward_fd():
    rng = np.random.default_rng(1)
    layer = DenseLayer(rng.normal(size=(4, 3)), rng.normal(size=4))
    x = rng.normal(size=(5, 3))
    w = rng.normal(size=(5, 4))
    f = lambda: float(np.sum(dense_forward(layer, x) * w))
    dx, dW, db = dense_backward(layer, x, w)
    assert rel_error(dW, numeric_grad(f, layer.W)) < 1e-8
    assert rel_error(db, numeric_grad(f, layer.b)) < 1e-8
    assert rel_error(dx, numeric_grad(f, x)) < 1e-8


# --- softmax cross-entropy -------------------------------------------------


def test_ce_uniform_logits():
    loss, _ = softmax_cross_entropy(np.zeros((4, 3)), np.array([0, 1, 2, 1]))
    assert loss == pytest.approx(math.log(3), abs=1e-15)


def test_ce_saturated():
    logits = np.zeros((2, 3))
    logits[[0, 1], [2, 0]] = 100.0
    loss, grad = softmax_cross_entropy(logits, np.array([2, 0]))
    assert loss < 1e-40
    assert np.all(np.isfinite(grad))


def test_ce_gradient_fd():
    rng = np.random.default_rng(2)
    logits = rng.normal(size=(6, 3)) * 3
    y = rng.integers(0, 3, 6)
    _, g = softmax_cross_entropy(logits, y)
    num = numeric_grad(lambda: softmax_cross_entropy(logits, y)[0], logits)
    assert rel_error(g, num) < 1e-6


def test_ce_label_out_of_range():
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros((2, 3)), np.array([0, 3]))


# --- batch norm -------------------------------------------------------------


def test_batchnorm_train_standardizes():
    x = np.random.default_rng(3).normal(5, 3, size=(64, 4))
    y, _ = batchnorm_forward(BatchNorm.init(4), x, TRAIN)
    np.testing.assert_allclose(y.mean(0), 0, atol=1e-12)
    # variance shrinks slightly because of eps=1e-3
    np.testing.assert_allclose(y.var(0), x.var(0) / (x.var(0) + 1e-3), rtol=1e-12)


def test_batchnorm_affine():
    x = np.random.default_rng(4).normal(size=(200, 3))
    x = (x - x.mean(0)) / x.std(0)
    bn = BatchNorm.init(3)
    bn.gamma[:] = 2.0
    bn.beta[:] = 3.0
    y, _ = batchnorm_forward(bn, x, TRAIN)
    np.testing.assert_allclose(y.mean(0), 3.0, atol=1e-12)
    np.testing.assert_allclose(y.std(0), 2.0, rtol=1e-3)


def test_batchnorm_infer_identity_stats():
    bn = BatchNorm.init(3)
    bn.gamma[:] = [1.0, 2.0, 3.0]
    bn.beta[:] = [0.0, -1.0, 1.0]
    bn.running_var[:] = 1.0 - bn.eps
    x = np.random.default_rng(5).normal(size=(4, 3))
    y, _ = batchnorm_forward(bn, x, INFER)
    np.testing.assert_allclose(y, bn.gamma * x + bn.beta, rtol=1e-12)


def test_batchnorm_running_stats_update():
    bn = BatchNorm.init(2)
    x = np.array([[1.0, 2.0], [3.0, 6.0]])
    batchnorm_forward(bn, x, TRAIN)
    np.testing.assert_allclose(bn.running_mean, 0.01 * np.array([2.0, 4.0]))
    np.testing.assert_allclose(bn.running_var, 0.99 + 0.01 * np.array([1.0, 4.0]))


def test_batchnorm_batch_of_one():
    with pytest.raises(ValueError):
        batchnorm_forward(BatchNorm.init(2), np.zeros((1, 2)), TRAIN)


def test_batchnorm_backward_fd():
    rng = np.random.default_rng(6)
    bn = BatchNorm.init(3)
    bn.gamma[:] = rng.normal(size=3)
    bn.beta[:] = rng.normal(size=3)
    x = rng.normal(size=(5, 3))
    w = rng.normal(size=(5, 3))
    f = lambda: float(np.sum(batchnorm_forward(bn, x, TRAIN)[0] * w))
    _, cache = batchnorm_forward(bn, x, TRAIN)
    dx, dgamma, dbeta = batchnorm_backward(cache, w)
    assert rel_error(dx, numeric_grad(f, x)) < 1e-6
    assert rel_error(dgamma, numeric_grad(f, bn.gamma)) < 1e-6
    assert rel_error(dbeta, numeric_grad(f, bn.beta)) < 1e-6


def test_batchnorm_param_bookkeeping():
    assert BatchNorm.init(150).n_params == 600


# --- dropout ----------------------------------------------------------------


def test_dropout_identities():
    x = np.random.default_rng(7).normal(size=(10, 10))
    rng = np.random.default_rng(0)
    np.testing.assert_array_equal(dropout_forward(0.0, x, TRAIN, rng)[0], x)
    np.testing.assert_array_equal(dropout_forward(0.0, x, INFER)[0], x)
    np.testing.assert_array_equal(dropout_forward(0.5, x, INFER)[0], x)


def test_dropout_survival_rate():
    y, mask = dropout_forward(0.2, np.ones(10**6), TRAIN, np.random.default_rng(8))
    survivors = np.count_nonzero(y)
    assert abs(survivors / 1e6 - 0.8) < 0.002
    np.testing.assert_allclose(y[y != 0], 1 / 0.8)


def test_dropout_deterministic_with_seed():
    x = np.ones((4, 5))
    a = dropout_forward(0.3, x, TRAIN, np.random.default_rng(1))[0]
    b = dropout_forward(0.3, x, TRAIN, np.random.default_rng(1))[0]
    np.testing.assert_array_equal(a, b)


def test_dropout_rate_validation():
    with pytest.raises(ValueError):
        dropout_forward(1.0, np.ones(3), TRAIN, np.random.default_rng(0))


# --- LSTM -------------------------------------------------------------------


def scalar_lstm_oracle(xs, wx, wh, b):
    """Step-by-step scalar recurrence with gates in (i, f, g, o) order."""
    sig = lambda z: 1 / (1 + math.exp(-z))
    h = c = 0.0
    hs = []
    for x in xs:
        a = [wx[k] * x + wh[k] * h + b[k] for k in range(4)]
        i, f, g, o = sig(a[0]), sig(a[1]), math.tanh(a[2]), sig(a[3])
        c = f * c + i * g
        h = o * math.tanh(c)
        hs.append(h)
    return hs, c


def test_lstm_zero_weights():
    cell = LstmCell(np.zeros((8, 3)), np.zeros((8, 2)), np.zeros(8))
    hs, (h, c), _ = lstm_forward(cell, np.random.default_rng(0).normal(size=(5, 3)))
    assert np.all(hs == 0) and np.all(h == 0) and np.all(c == 0)


def test_lstm_scalar_hand_recurrence():
    wx, wh, b = [0.5, -0.3, 0.8, 0.2], [0.1, 0.4, -0.6, 0.3], [0.0, 1.0, 0.1, -0.2]
    cell = LstmCell(np.array(wx)[:, None], np.array(wh)[:, None], np.array(b))
    xs = [0.7, -1.2]
    hs, (h, c), _ = lstm_forward(cell, np.array(xs)[:, None])
    want, c_want = scalar_lstm_oracle(xs, wx, wh, b)
    np.testing.assert_allclose(hs[:, 0], want, rtol=1e-12, atol=1e-15)
    assert c[0] == pytest.approx(c_want, rel=1e-12)


def test_lstm_shapes():
    cell = LstmCell.init(5, 4, np.random.default_rng(0))
    hs, (h, c), _ = lstm_forward(cell, np.zeros((7, 5)))
    assert hs.shape == (7, 4)
    np.testing.assert_array_equal(h, hs[-1])
    hs_b, (hb, _), _ = lstm_forward(cell, np.zeros((3, 7, 5)))
    assert hs_b.shape == (3, 7, 4) and hb.shape == (3, 4)
    with pytest.raises(ValueError):
        lstm_forward(cell, np.zeros((7, 6)))


def test_lstm_param_count_and_forget_bias():
    cell = LstmCell.init(64, 21, np.random.default_rng(0))
    assert cell.n_params == 4 * (21 * (64 + 21) + 21)
    np.testing.assert_array_equal(cell.b[21:42], 1.0)
    assert np.all(cell.b[:21] == 0) and np.all(cell.b[42:] == 0)


def _lstm_fd_errors(cell, x, w):
    def loss():
        hs, _, _ = lstm_forward(cell, x)
        return float(np.sum(hs[..., -1, :] * w))

    hs, _, cache = lstm_forward(cell, x)
    g = lstm_backward(cell, cache, dh_last=w)
    errs = {k: rel_error(g[k], numeric_grad(loss, getattr(cell, k))) for k in ("Wx", "Wh", "b")}
    errs["x"] = rel_error(g["x"], numeric_grad(loss, x))
    return errs


def test_lstm_zero_upstream_gradient():
    cell = LstmCell.init(3, 2, np.random.default_rng(0))
    _, _, cache = lstm_forward(cell, np.ones((4, 3)))
    g = lstm_backward(cell, cache, dh_last=np.zeros(2))
    assert all(np.all(v == 0) for v in g.values())


def test_lstm_scalar_fd():
    rng = np.random.default_rng(1)
    cell = LstmCell(rng.normal(size=(4, 1)), rng.normal(size=(4, 1)), rng.normal(size=4))
    errs = _lstm_fd_errors(cell, rng.normal(size=(3, 1)), np.array([1.3]))
    assert max(errs.values()) < 1e-6, errs


@pytest.mark.parametrize("seed", range(3))
def test_lstm_random_fd(seed):
    rng = np.random.default_rng(seed)
    cell = LstmCell.init(5, 4, rng)
    cell.b[:] = rng.normal(size=16) * 0.5
    errs = _lstm_fd_errors(cell, rng.normal(size=(2, 7, 5)), rng.normal(size=(2, 4)))
    assert max(errs.values()) < 1e-4, errs


def test_lstm_all_hidden_state_gradients():
    rng = np.random.default_rng(4)
    cell = LstmCell.init(3, 2, rng)
    x = rng.normal(size=(6, 3))
    w = rng.normal(size=(6, 2))
    loss = lambda: float(np.sum(lstm_forward(cell, x)[0] * w))
    _, _, cache = lstm_forward(cell, x)
    g = lstm_backward(cell, cache, dhs=w)
    assert rel_error(g["Wh"], numeric_grad(loss, cell.Wh)) < 1e-6
    assert rel_error(g["x"], numeric_grad(loss, x)) < 1e-6


def test_lstm_stale_cache():
    cell = LstmCell.init(3, 2, np.random.default_rng(0))
    _, _, cache = lstm_forward(cell, np.ones((4, 3)))
    cell.Wx[0, 0] += 1.0
    with pytest.raises(StaleCacheError):
        lstm_backward(cell, cache, dh_last=np.ones(2))


def test_lstm_gradient_flow_30_steps():
    rng = np.random.default_rng(5)
    cell = LstmCell.init(16, 21, rng)
    x = rng.normal(size=(4, 30, 16))
    _, _, cache = lstm_forward(cell, x)
    g = lstm_backward(cell, cache, dh_last=rng.normal(size=(4, 21)))
    first = np.linalg.norm(g["x"][:, 0])
    last = np.linalg.norm(g["x"][:, -1])
    assert all(np.all(np.isfinite(v)) for v in g.values())
    assert first > 0 and first / last > 1e-12


# --- Adam -------------------------------------------------------------------


def test_adam_first_step_is_lr_sign():
    for g in (3.0, -0.02):
        p = {"w": np.array([1.0])}
        adam_step(p, {"w": np.array([g])}, AdamState(), lr=0.01)
        assert p["w"][0] == pytest.approx(1.0 - 0.01 * np.sign(g), abs=1e-8)


def test_adam_zero_gradient_fixed_point():
    p = {"w": np.array([0.3, -2.0])}
    st_ = AdamState()
    for _ in range(50):
        adam_step(p, {"w": np.zeros(2)}, st_, lr=0.1)
    np.testing.assert_array_equal(p["w"], [0.3, -2.0])
    assert st_.t == 50


def test_adam_three_step_trace():
    lr, b1, b2, eps = 0.005, 0.9, 0.999, 1e-8
    w, m, v = 0.5, 0.0, 0.0
    expected = []
    for t in (1, 2, 3):
        m = b1 * m + (1 - b1) * 1.0
        v = b2 * v + (1 - b2) * 1.0
        w = w - lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
        expected.append(w)
    p = {"w": np.array([0.5])}
    s = AdamState()
    for t in range(3):
        adam_step(p, {"w": np.array([1.0])}, s, lr, b1, b2, eps)
        assert p["w"][0] == pytest.approx(expected[t], abs=1e-15)
    assert s.t == 3 and np.all(s.v["w"] >= 0)


def test_adam_lr_zero_bit_identical_but_moments_advance():
    rng = np.random.default_rng(0)
    p = {"a": rng.normal(size=(3, 4))}
    before = p["a"].copy()
    s = AdamState()
    adam_step(p, {"a": rng.normal(size=(3, 4))}, s, lr=0.0)
    assert p["a"].tobytes() == before.tobytes()
    assert s.t == 1 and np.any(s.m["a"] != 0)


def test_adam_shape_mismatch():
    with pytest.raises(ValueError):
        adam_step({"a": np.zeros(3)}, {"a": np.zeros(4)}, AdamState(), lr=0.1)


# --- architectures ----------------------------------------------------------


@pytest.mark.parametrize(
    "name,d,s,count",
    [("lstm21", 64, 30, 7290), ("lstm32", 64, 30, 12515), ("baseline", 64, 30, 302973), ("lstm21", 164, 30, 15690)],
)
def test_param_count_table(name, d, s, count):
    arch = Architecture.from_name(name, d, s)
    assert param_count(arch) == count
    model = init_model(arch, 0)
    assert sum(a.size for _, a in model.arrays()) == count


def test_unknown_architecture():
    with pytest.raises(ValueError):
        Architecture.from_name("gru8", 64)


@pytest.mark.parametrize("seed", range(3))
def test_lstm_network_gradients(seed):
    rng = np.random.default_rng(seed)
    arch = Architecture("lstm", 6, 8, hidden=5)
    model = init_model(arch, seed)
    errs = model_grad_errors(model, rng.normal(size=(4, 8, 6)), rng.integers(0, 3, 4))
    assert max(errs.values()) < 1e-4, errs


@pytest.mark.parametrize("seed", range(3))
def test_baseline_network_gradients(seed):
    rng = np.random.default_rng(seed)
    arch = Architecture("baseline", 3, 4, widths=(10, 7))
    model = init_model(arch, seed)
    errs = model_grad_errors(model, rng.normal(size=(6, 4, 3)), rng.integers(0, 3, 6), dropout_seed=seed)
    assert max(errs.values()) < 1e-4, errs


def test_model_forward_deterministic():
    arch = Architecture("baseline", 4, 5, widths=(8, 6))
    x = np.random.default_rng(0).normal(size=(3, 5, 4))
    a, b = init_model(arch, 3), init_model(arch, 3)
    np.testing.assert_array_equal(a.forward(x, TRAIN, np.random.default_rng(1)), b.forward(x, TRAIN, np.random.default_rng(1)))


# --- container --------------------------------------------------------------


@pytest.mark.parametrize("arch", [Architecture("lstm", 7, 30, hidden=21), Architecture("baseline", 5, 4, widths=(9, 6))])
def test_container_round_trip(tmp_path, arch):
    model = init_model(arch, 42)
    for _, a in model.arrays():
        a[...] = np.random.default_rng(a.size).normal(size=a.shape)
    save_model(tmp_path / "m.glm", model)
    back = load_model(tmp_path / "m.glm")
    assert back.arch == model.arch
    for (n1, a1), (n2, a2) in zip(model.arrays(), back.arrays()):
        assert n1 == n2 and a1.tobytes() == a2.tobytes()
    assert dumps(back) == dumps(model)


def test_container_layout():
    model = init_model(Architecture("lstm", 2, 3, hidden=1), 0)
    blob = dumps(model)
    assert blob[:4] == b"GLM1"
    assert blob[4] == 4 and blob[5:9] == b"lstm"
    assert np.frombuffer(blob, "<u4", count=5, offset=9).tolist() == [4, 2, 1, 3, 3]
    assert len(blob) == 9 + 20 + 8 * param_count(model.arch)
    np.testing.assert_array_equal(np.frombuffer(blob, "<f8", count=8, offset=29), model.cell.Wx.ravel())


def test_container_rejects_garbage():
    with pytest.raises(ContainerError):
        loads(b"NOPE" + b"\0" * 20)
    blob = dumps(init_model(Architecture("lstm", 2, 3, hidden=1), 0))
    with pytest.raises(ContainerError):
        loads(blob[:-8])
    with pytest.raises(ContainerError):
        loads(blob + b"\0")


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.integers(1, 8))
def test_param_count_matches_arrays(d, h, s):
    for arch in (Architecture("lstm", d, s, hidden=h), Architecture("baseline", d, s, widths=(h + 1, h + 2))):
        assert param_count(arch) == sum(a.size for _, a in init_model(arch, 0).arrays())
