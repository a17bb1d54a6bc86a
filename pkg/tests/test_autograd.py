"""Tape engine: op semantics, backward rules, gradcheck harness, checkpoints."""

import numpy as np
import pytest

from dialact import autograd as ag


def fd_grad(closure, flat, eps=1e-6):
    """Central-difference gradient of a scalar closure over a flat view."""
    grad = np.empty(flat.size)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + eps
        up = float(closure().data)
        flat[j] = orig - eps
        down = float(closure().data)
        flat[j] = orig
        grad[j] = (up - down) / (2 * eps)
    return grad


# ---------------------------------------------------------------------------
# forward semantics
# ---------------------------------------------------------------------------


def test_matmul_identity():
    out = ag.tensor_op("matmul", [ag.Tensor(np.eye(2)), ag.Tensor([[3.0], [4.0]])])
    assert np.array_equal(out.data, [[3.0], [4.0]])


def test_tanh_odd_at_origin():
    assert ag.tensor_op("tanh", [ag.Tensor([0.0])]).data[0] == 0.0


def test_conv1d_single_window_hand_evaluated():
    # one-hot chars "a","b": the single width-2 window sums both -> 2
    x = ag.Tensor([[[1.0, 0.0], [0.0, 1.0]]])
    w = ag.Tensor(np.ones((4, 1)))
    b = ag.Tensor(np.zeros(1))
    conv = ag.tensor_op("conv1d", [x, w, b], width=2)
    out = ag.tensor_op("max_over_time", [conv])
    assert out.data.shape == (1, 1)
    assert out.data[0, 0] == pytest.approx(2.0)


def test_softmax_uniform_and_singleton():
    out = ag.softmax(ag.Tensor([0.0, 0.0, 0.0]), axis=-1)
    assert np.allclose(out.data, [1 / 3, 1 / 3, 1 / 3], atol=1e-12)
    for x in (-7.3, 0.0, 123.0):
        assert ag.softmax(ag.Tensor([x]), axis=-1).data[0] == pytest.approx(1.0)


def test_softmax_direct_arithmetic():
    logits = np.array([1.0, 2.0, 3.0])
    expected = np.exp(logits) / np.exp(logits).sum()  # [0.09003, 0.24473, 0.66524]
    out = ag.softmax(ag.Tensor(logits), axis=-1)
    assert np.allclose(out.data, expected, atol=1e-5)
    assert np.allclose(out.data, [0.09003, 0.24473, 0.66524], atol=1e-5)


def test_softmax_rows_sum_to_one_and_shift_invariant():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.normal(scale=10.0, size=(4, 6))
        out = ag.softmax(ag.Tensor(x), axis=1).data
        assert np.abs(out.sum(axis=1) - 1.0).max() < 1e-10
        shifted = ag.softmax(ag.Tensor(x + rng.normal() * np.ones((4, 1))), axis=1).data
        assert np.abs(out - shifted).max() < 1e-10


def test_softmax_rejects_nan():
    with pytest.raises(ValueError, match="NaN"):
        ag.softmax(ag.Tensor([np.nan, 1.0]), axis=-1)


def test_dropout_inverted_scaling_and_eval_identity():
    x = ag.Tensor(np.ones((1000,)), requires_grad=True)
    rng = np.random.default_rng(3)
    out = ag.tensor_op("dropout", [x], rate=0.2, rng=rng, train=True)
    kept = out.data != 0.0
    assert np.allclose(out.data[kept], 1.0 / 0.8)
    assert 0.7 < kept.mean() < 0.9
    assert ag.dropout(x, 0.2, rng, train=False) is x
    assert ag.dropout(x, 0.0, rng, train=True) is x


def test_shape_errors_name_op_and_shapes():
    with pytest.raises(ag.ShapeError, match="matmul.*\\(2, 3\\).*\\(2, 3\\)"):
        ag.matmul(ag.Tensor(np.zeros((2, 3))), ag.Tensor(np.zeros((2, 3))))
    with pytest.raises(IndexError, match="gather"):
        ag.gather(ag.Tensor(np.zeros((3, 2))), np.array([0, 3]))
    with pytest.raises(ag.ShapeError, match="conv1d"):
        ag.conv1d(ag.Tensor(np.zeros((1, 2, 3))), ag.Tensor(np.zeros((9, 4))), ag.Tensor(np.zeros(4)), width=3)


# ---------------------------------------------------------------------------
# backward rules
# ---------------------------------------------------------------------------


def test_backward_quadratic():
    w = ag.Tensor(np.array([3.0]), requires_grad=True)
    with ag.Tape() as tape:
        loss = ag.reduce_sum(ag.mul(w, w))
    tape.backward(loss)
    assert np.array_equal(w.grad, [6.0])


def test_backward_linearity_of_sum():
    a = ag.Tensor(np.arange(4.0), requires_grad=True)
    b = ag.Tensor(np.ones(4), requires_grad=True)
    with ag.Tape() as tape:
        loss = ag.reduce_sum(ag.add(a, b))
    tape.backward(loss)
    assert np.array_equal(a.grad, np.ones(4))
    assert np.array_equal(b.grad, np.ones(4))


def test_backward_sum_of_losses_equals_sum_of_gradients():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 3))

    def grads(build):
        w = ag.Tensor(x.copy(), requires_grad=True)
        with ag.Tape() as tape:
            loss = build(w)
        tape.backward(loss)
        return w.grad

    loss_a = lambda w: ag.reduce_sum(ag.mul(w, w))
    loss_b = lambda w: ag.reduce_sum(ag.tanh(w))
    combined = grads(lambda w: ag.add(loss_a(w), loss_b(w)))
    assert np.abs(combined - (grads(loss_a) + grads(loss_b))).max() < 1e-12


def test_backward_requires_scalar():
    w = ag.Tensor(np.ones(3), requires_grad=True)
    with ag.Tape() as tape:
        out = ag.mul(w, w)
    with pytest.raises(ValueError, match="scalar"):
        tape.backward(out)


def test_backward_accumulates_across_calls():
    w = ag.Tensor(np.array([2.0]), requires_grad=True)
    for _ in range(2):
        with ag.Tape() as tape:
            loss = ag.reduce_sum(ag.mul(w, w))
        tape.backward(loss)
    assert np.array_equal(w.grad, [8.0])  # 2 backward passes, 4.0 each


def test_forward_bit_reproducible():
    rng_data = np.random.default_rng(5).normal(size=(4, 4))

    def run():
        x = ag.Tensor(rng_data, requires_grad=True)
        with ag.Tape():
            out = ag.reduce_sum(ag.softmax(ag.tanh(ag.matmul(x, x)), axis=1))
        return out.data.copy()

    assert np.array_equal(run(), run())


PRIMITIVE_CASES = {
    "matmul2d": lambda p: ag.matmul(p, ag.Tensor(np.arange(6.0).reshape(3, 2))),
    "matmul3d": lambda p: ag.matmul(ag.reshape(ag.concat([p, p], axis=0), (2, 3, 3)),
                                    ag.Tensor(np.arange(6.0).reshape(3, 2) / 7.0)),
    "add_broadcast": lambda p: ag.add(ag.reshape(p, (3, 3, 1)), ag.Tensor(np.arange(4.0))),
    "sub_broadcast": lambda p: ag.sub(ag.Tensor(np.ones(3)), p),
    "mul_broadcast": lambda p: ag.mul(p, ag.Tensor(np.arange(3.0))),
    "concat": lambda p: ag.concat([p, ag.mul(p, 2.0)], axis=1),
    "tanh": ag.tanh,
    "sigmoid": ag.sigmoid,
    "exp": lambda p: ag.exp(ag.mul(p, 0.3)),
    "log": lambda p: ag.log(ag.add(ag.mul(p, p), 1.5)),
    "softmax": lambda p: ag.softmax(p, axis=0),
    "logsumexp": lambda p: ag.logsumexp(p, axis=1),
    "reduce_sum_axis": lambda p: ag.reduce_sum(p, axis=0),
    "reshape": lambda p: ag.reshape(p, (9,)),
    "transpose_last": ag.transpose_last,
    "select": lambda p: ag.select(p, 1, axis=0),
    "gather": lambda p: ag.gather(p, np.array([[0, 2], [2, 2]])),
    "pick": lambda p: ag.pick(p, np.array([0, 2, 1])),
    "gather_pairs": lambda p: ag.gather_pairs(p, np.array([0, 2, 2]), np.array([1, 1, 2])),
    "max_over_time": lambda p: ag.max_over_time(ag.reshape(p, (1, 3, 3))),
    "conv1d": lambda p: ag.conv1d(ag.reshape(p, (1, 3, 3)),
                                  ag.Tensor(np.arange(6.0).reshape(6, 1) / 5.0),
                                  ag.Tensor(np.zeros(1)), width=2),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVE_CASES))
def test_primitive_backward_matches_finite_differences(name):
    build = PRIMITIVE_CASES[name]
    base = np.random.default_rng(7).normal(size=(3, 3))
    param = ag.Tensor(base.copy(), requires_grad=True)

    def closure():
        out = build(param)
        return ag.reduce_sum(ag.mul(out, out))

    param.zero_grad()
    with ag.Tape() as tape:
        loss = closure()
    tape.backward(loss)
    numeric = fd_grad(closure, param.data.reshape(-1)).reshape(3, 3)
    assert np.abs(param.grad - numeric).max() < 1e-6


# ---------------------------------------------------------------------------
# gradient checker
# ---------------------------------------------------------------------------


def test_grad_check_linear_model_exact():
    reg = ag.ParamRegistry()
    w = reg.add("w", np.array([[1.5]]))
    x = ag.Tensor(np.array([[2.0]]))
    report = ag.grad_check(lambda: ag.reduce_sum(ag.matmul(x, w)), reg, eps=1e-4, tol=1e-8)
    assert report.passed
    assert report.entries[0][1] < 1e-8  # linear: FD is exact


def test_grad_check_sigmoid_chain():
    reg = ag.ParamRegistry()
    w1 = reg.add("w1", np.random.default_rng(0).normal(size=(4, 4)) * 0.3)
    w2 = reg.add("w2", np.random.default_rng(1).normal(size=(4, 1)) * 0.3)
    x = ag.Tensor(np.random.default_rng(2).normal(size=(5, 4)))

    def closure():
        return ag.reduce_sum(ag.sigmoid(ag.matmul(ag.sigmoid(ag.matmul(x, w1)), w2)))

    assert ag.grad_check(closure, reg, eps=1e-4, tol=1e-4).passed


def test_grad_check_flags_corrupted_tanh_rule(monkeypatch):
    def broken_tanh(x):
        x = ag._as_tensor(x)
        out_data = np.tanh(x.data)

        def bwd(g):
            if x.requires_grad:
                x.accumulate_grad(g * (1.0 - 0.5 * out_data * out_data))  # wrong rule

        return ag._record("tanh", (x,), out_data, bwd)

    monkeypatch.setattr(ag, "tanh", broken_tanh)
    reg = ag.ParamRegistry()
    tanh_w = reg.add("tanh_w", np.array([[0.7, -0.4], [0.2, 0.9]]))
    sig_w = reg.add("sigmoid_w", np.array([[0.3], [-0.6]]))
    x = ag.Tensor(np.array([[1.0, 2.0], [0.5, -1.0]]))

    def closure():
        return ag.reduce_sum(
            ag.add(ag.sigmoid(ag.matmul(x, sig_w)), ag.tanh(ag.matmul(x, tanh_w)))
        )

    report = ag.grad_check(closure, reg, eps=1e-4, tol=1e-4)
    assert not report.passed
    failing = [name for name, _ in report.failures()]
    assert failing == ["tanh_w"]  # the corrupted rule's parameter, not the clean one
    assert "tanh_w" in report.summary()


def test_grad_check_rejects_nondeterministic_closure():
    reg = ag.ParamRegistry()
    w = reg.add("w", np.array([1.0]))
    rng = np.random.default_rng(0)

    def closure():
        return ag.reduce_sum(ag.mul(w, float(rng.random())))

    with pytest.raises(RuntimeError, match="deterministic"):
        ag.grad_check(closure, reg)


def test_grad_check_skips_frozen_rows():
    reg = ag.ParamRegistry()
    table = reg.add("emb", np.zeros((3, 2)), frozen_rows=[0])
    idx = np.array([0, 1, 2])

    def closure():
        rows = ag.gather(table, idx)
        return ag.reduce_sum(ag.mul(rows, rows))

    report = ag.grad_check(closure, reg, eps=1e-4, tol=1e-4)
    assert report.passed
    assert report.entries[0][2] == 4  # 6 elements minus the 2 pinned ones


# ---------------------------------------------------------------------------
# registry and checkpoints
# ---------------------------------------------------------------------------


def test_registry_buffers_shape_match_and_names_unique():
    reg = ag.ParamRegistry()
    reg.add("a", np.zeros((2, 3)))
    assert reg.sq_accum["a"].shape == (2, 3)
    assert reg.ema["a"].shape == (2, 3)
    with pytest.raises(ValueError, match="duplicate"):
        reg.add("a", np.zeros(1))


def test_registry_ema_swap_restores():
    reg = ag.ParamRegistry()
    p = reg.add("p", np.array([1.0, 2.0]))
    reg.ema["p"][:] = [10.0, 20.0]
    with reg.using_ema():
        assert np.array_equal(p.data, [10.0, 20.0])
    assert np.array_equal(p.data, [1.0, 2.0])


def test_checkpoint_round_trip(tmp_path):
    tensors = {
        "alpha": np.random.default_rng(0).normal(size=(3, 4)),
        "beta": np.array([1.5]),
        "gamma/nested.name": np.arange(24.0).reshape(2, 3, 4),
    }
    path = tmp_path / "model.ckpt"
    ag.save_checkpoint(path, tensors)
    loaded = ag.load_checkpoint(path)
    assert set(loaded) == set(tensors)
    for name in tensors:
        assert np.array_equal(loaded[name], tensors[name])


def test_checkpoint_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        ag.load_checkpoint(path)
