import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cwae_irl.errors import ParseError, TrainingError, UsageError, ValidationError
from cwae_irl.neural import AdamState, Mlp, adam_step, finite_diff_check


def sq_loss(target):
    def fn(outputs):
        y = outputs[0]
        return 0.5 * np.sum((y - target) ** 2), [y - target]
    return fn


def away_from_kinks(net, x, rng, margin=1e-3):
    """Redraw ``x`` until no hidden pre-activation lies within ``margin`` of 0."""
    while True:
        _, cache = net.forward(x)
        if all(z is None or np.abs(z).min() > margin for _, z, _, _ in cache["layers"]):
            return x
        x = rng.normal(size=x.shape)


def test_zero_net_outputs_zero(rng):
    net = Mlp((3, 5, 2))
    assert np.all(net(rng.normal(size=(4, 3))) == 0)


def test_affine_layer():
    net = Mlp((1, 1))
    net.params[0][...] = 2.0
    net.params[1][...] = 1.0
    assert net(np.array([[3.0]]))[0, 0] == 7.0


def test_no_dropout_train_equals_eval(rng):
    net = Mlp((4, 8, 8, 2), rng=rng)
    x = rng.normal(size=(5, 4))
    train, _ = net.forward(x, train=True, rng=rng)
    np.testing.assert_array_equal(train[0], net(x))


def test_shape_errors(rng):
    net = Mlp((4, 8, 2), rng=rng)
    with pytest.raises(ValidationError):
        net.forward(np.zeros((2, 3)))
    with pytest.raises(ValidationError):
        Mlp((4, 8, 2), heads=(1, 2))
    other = Mlp((4, 8, 2), rng=rng)
    _, cache = other.forward(np.zeros((1, 4)))
    with pytest.raises(UsageError):
        net.backward(cache, np.zeros((1, 2)))


def test_dropout_needs_rng():
    net = Mlp((4, 8, 2), dropout=0.5)
    with pytest.raises(UsageError):
        net.forward(np.zeros((2, 4)), train=True)


def test_two_heads_split(rng):
    net = Mlp((3, 6, 4), heads=(1, 3), rng=rng)
    out = net(rng.normal(size=(2, 3)))
    assert [o.shape for o in out] == [(2, 1), (2, 3)]


def test_unused_block_has_zero_gradient(rng):
    net = Mlp((3, 6, 2), heads=(1, 1), rng=rng)
    (a, b), cache = net.forward(rng.normal(size=(4, 3)))
    grads, _ = net.backward(cache, [np.ones_like(a), np.zeros_like(b)])
    assert np.all(grads[2][:, 1] == 0) and grads[3][1] == 0


def test_backward_is_linear_in_output_grad(rng):
    net = Mlp((3, 6, 6, 2), rng=rng, dropout=0.2)
    x = rng.normal(size=(4, 3))
    out, cache = net.forward(x, train=True, rng=np.random.default_rng(1))
    g = rng.normal(size=out[0].shape)
    g1, _ = net.backward(cache, g)
    g2, _ = net.backward(cache, 2 * g)
    for a, b in zip(g1, g2):
        np.testing.assert_allclose(b, 2 * a)


@pytest.mark.parametrize("activation", ["relu", "tanh"])
@pytest.mark.parametrize("train", [False, True])
def test_two_hidden_layer_gradients(rng, activation, train):
    net = Mlp((4, 7, 6, 3), activation=activation, dropout=0.25 if train else 0.0, rng=rng)
    x = away_from_kinks(net, rng.normal(size=(5, 4)), rng)
    report = finite_diff_check(net, sq_loss(rng.normal(size=(5, 3))), x, train=train)
    assert report.max_rel_error < 1e-4


def test_linear_quadratic_is_tight(rng):
    net = Mlp((3, 2), rng=rng)
    report = finite_diff_check(net, sq_loss(rng.normal(size=(4, 2))), rng.normal(size=(4, 3)))
    assert report.max_rel_error < 1e-7


def test_input_gradient_matches_finite_differences(rng):
    net = Mlp((3, 5, 2), activation="tanh", rng=rng)
    x = rng.normal(size=(2, 3))
    t = rng.normal(size=(2, 2))
    out, cache = net.forward(x)
    _, g_in = net.backward(cache, out[0] - t)
    eps = 1e-6
    num = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += eps
        xm[idx] -= eps
        num[idx] = (0.5 * np.sum((net(xp) - t) ** 2) - 0.5 * np.sum((net(xm) - t) ** 2)) / (2 * eps)
    np.testing.assert_allclose(g_in, num, rtol=1e-6, atol=1e-9)


def test_corrupted_gradient_is_flagged(rng):
    net = Mlp((3, 5, 2), activation="tanh", rng=rng)
    x = rng.normal(size=(4, 3))
    loss = sq_loss(rng.normal(size=(4, 2)))
    out, cache = net.forward(x)
    grads, _ = net.backward(cache, loss(out)[1])
    grads = [g.copy() for g in grads]
    flat = grads[2].reshape(-1)
    flat[np.argmax(np.abs(flat))] *= 2
    report = finite_diff_check(net, loss, x, analytic=grads)
    assert report.block_errors[2] > 0.5
    assert max(report.block_errors[:2] + report.block_errors[3:]) < 1e-4


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), width=st.integers(1, 6))
def test_random_net_gradients(seed, width):
    rng = np.random.default_rng(seed)
    net = Mlp((3, width, width, 2), rng=rng)
    x = away_from_kinks(net, rng.normal(size=(3, 3)), rng)
    assert finite_diff_check(net, sq_loss(rng.normal(size=(3, 2))), x).max_rel_error < 1e-4


def test_dropout_expectation_matches_eval(rng):
    net = Mlp((3, 16, 2), dropout=0.3, rng=rng)
    x = rng.normal(size=(1, 3))
    draws = np.array([net.forward(x, train=True, rng=rng)[0][0][0] for _ in range(10_000)])
    se = draws.std(axis=0) / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - net(x)[0]) < 3 * se)


def test_adam_zero_gradient_keeps_params():
    p = [np.array([1.0, -2.0])]
    state = AdamState()
    adam_step(p, [np.array([0.3, 0.3])], state)
    before = p[0].copy()
    m_before = state.m[0].copy()
    adam_step(p, [np.zeros(2)], state)
    # parameters still move from momentum, moments decay
    np.testing.assert_allclose(state.m[0], 0.9 * m_before)
    fresh = [np.array([1.0, -2.0])]
    adam_step(fresh, [np.zeros(2)], AdamState())
    np.testing.assert_array_equal(fresh[0], [1.0, -2.0])
    assert state.step == 2 and not np.array_equal(before, p[0])


@pytest.mark.parametrize("g", [1e-3, -0.5, 40.0])
def test_adam_first_step_moves_by_lr(g):
    p = [np.array([0.0])]
    adam_step(p, [np.array([g])], AdamState(lr=0.01))
    # m_hat = g, v_hat = g^2 so the step is lr * g / (|g| + eps)
    assert p[0][0] == pytest.approx(-0.01 * np.sign(g), rel=1e-4)


def test_adam_identical_blocks_update_identically(rng):
    g = rng.normal(size=3)
    p = [np.zeros(3), np.zeros(3)]
    state = AdamState()
    for _ in range(3):
        adam_step(p, [g, g], state)
    np.testing.assert_array_equal(p[0], p[1])


def test_adam_rejects_non_finite():
    with pytest.raises(TrainingError):
        adam_step([np.zeros(2)], [np.array([np.nan, 0.0])], AdamState())


def test_same_seed_same_training():
    def train(seed):
        rng = np.random.default_rng(seed)
        net = Mlp((2, 8, 1), dropout=0.1, rng=rng)
        state = AdamState()
        x = rng.normal(size=(16, 2))
        y = x[:, :1] * x[:, 1:]
        for _ in range(20):
            out, cache = net.forward(x, train=True, rng=rng)
            grads, _ = net.backward(cache, out[0] - y)
            adam_step(net.params, grads, state)
        return net.params

    for a, b in zip(train(3), train(3)):
        np.testing.assert_array_equal(a, b)


def test_checkpoint_round_trip(tmp_path, rng):
    net = Mlp((3, 4, 3), heads=(1, 2), activation="tanh", dropout=0.2, rng=rng)
    net.save(tmp_path / "n.txt", ["note hello"])
    back = Mlp.load(tmp_path / "n.txt")
    assert back.sizes == net.sizes and back.heads == net.heads
    assert back.activation == "tanh" and back.dropout == 0.2
    for a, b in zip(net.params, back.params):
        np.testing.assert_array_equal(a, b)
    lines = (tmp_path / "n.txt").read_text().splitlines()
    lines[-1] = "oops"
    (tmp_path / "n.txt").write_text("\n".join(lines))
    with pytest.raises(ParseError):
        Mlp.load(tmp_path / "n.txt")
