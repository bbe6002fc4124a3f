from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cwae_irl.cwae import (
    LOGVAR_CLAMP,
    CwaeModel,
    CwaeTrainConfig,
    cwae_loss,
    decode,
    encode,
    extract_reward_map,
    kl_gaussian,
    make_batch,
    median_bandwidth,
    mmd_divergence,
    mmd_grad,
    predict_rewards,
    reparameterize,
    state_repr,
    train_cwae,
)
from cwae_irl.envs.objectworld import ObjectworldSpec, build_objectworld
from cwae_irl.envs.pendulum import Pendulum, encode as pend_state
from cwae_irl.errors import ParseError, ValidationError
from cwae_irl.expert import Dataset, Trajectory, expert_policy_objectworld, sample_trajectories
from cwae_irl.neural import gradient_check


def naive_mmd(z, zp, lam, bw):
    """Triple-loop evaluation of the three kernel sums."""
    n = len(z)

    def k(x, y):
        return np.exp(-sum((xi - yi) ** 2 for xi, yi in zip(x, y)) / (2 * bw**2))

    a = sum(k(z[l], z[j]) for l, j in product(range(n), repeat=2) if l != j)
    b = sum(k(zp[l], zp[j]) for l, j in product(range(n), repeat=2) if l != j)
    c = sum(k(z[l], zp[j]) for l, j in product(range(n), repeat=2))
    return lam * a / (n * (n - 1)) + lam * b / (n * (n - 1)) - 2 * lam * c / n**2


@pytest.fixture(scope="module")
def world():
    return build_objectworld(ObjectworldSpec(grid_size=5, placement_seed=3))


@pytest.fixture(scope="module")
def small_dataset(world):
    return sample_trajectories(world, expert_policy_objectworld(world.mdp, world.reward), 16, 8, 0)


def test_state_repr_examples():
    world = build_objectworld(ObjectworldSpec(grid_size=10, placement_seed=0))
    feats = world.features.copy()
    feats[0] = [1, 2, 3, 4]
    patched = type(world)(world.spec, world.mdp, feats, world.reward, world.placement)
    np.testing.assert_array_equal(state_repr(patched, 0), [0, 0, 1, 2, 3, 4])
    np.testing.assert_array_equal(state_repr(patched, 23), [0.3, 0.2, *feats[23]])
    env = Pendulum()
    np.testing.assert_array_equal(state_repr(env, pend_state(0.0, 0.0)), [1, 0, 0])
    assert state_repr(env, pend_state(0.3, 8.0))[2] == 1.0


def test_zero_model_encodes_and_decodes_zero(world, small_dataset):
    model = CwaeModel.create("objectworld", 6, 5)
    b = make_batch(world, *small_dataset.transitions())
    mu, logvar = encode(model, b.s, b.a, b.s_next)
    assert np.all(mu == 0) and np.all(logvar == 0)
    assert np.all(decode(model, b.s, b.a, mu) == 0)
    assert np.all(extract_reward_map(model, world).mean == 0)


def test_eval_mode_is_deterministic(world, small_dataset, rng):
    model = CwaeModel.create("objectworld", 6, 5, rng=rng, dropout=0.3)
    b = make_batch(world, *small_dataset.transitions())
    first = encode(model, b.s, b.a, b.s_next)
    second = encode(model, b.s, b.a, b.s_next)
    np.testing.assert_array_equal(first[0], second[0])
    np.testing.assert_array_equal(decode(model, b.s, b.a, first[0]), decode(model, b.s, b.a, first[0]))
    with pytest.raises(ValidationError):
        decode(model, b.s, b.a, np.zeros((len(b), 2)))


def test_reparameterize_examples():
    assert reparameterize([1.5], [0.3], [0.0])[0] == 1.5
    assert reparameterize([0.0], [0.0], [1.5])[0] == 1.5
    assert reparameterize([2.0], [np.log(4.0)], [-1.0])[0] == pytest.approx(0.0)
    assert abs(reparameterize([0.7], [-LOGVAR_CLAMP], [1.5])[0] - 0.7) < 1e-4
    with pytest.raises(ValidationError):
        reparameterize([0.0], [0.0, 0.0], [0.0])


def test_mmd_examples():
    zeros = np.zeros((2, 1))
    assert mmd_divergence(zeros, zeros, 1.0, 0.37) == pytest.approx(0.0, abs=1e-15)
    z = np.array([[0.0], [1.0]])
    expected = 2 * np.exp(-0.5) - (1 + np.exp(-0.5))
    assert mmd_divergence(z, z, 1.0, 1.0) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(-0.39347, abs=1e-5)
    with pytest.raises(ValidationError):
        mmd_divergence(z[:1], z[:1], 1.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 9), d=st.integers(1, 3),
       lam=st.floats(0.01, 50), c=st.floats(0.1, 10))
def test_mmd_matches_naive_and_is_linear(seed, n, d, lam, c):
    rng = np.random.default_rng(seed)
    z, zp = rng.normal(size=(n, d)), rng.normal(size=(n, d))
    bw = rng.uniform(0.3, 3.0)
    value = mmd_divergence(z, zp, lam, bw)
    assert value == pytest.approx(naive_mmd(z, zp, lam, bw), abs=1e-12)
    assert mmd_divergence(z, zp, c * lam, bw) == pytest.approx(c * value, rel=1e-12, abs=1e-14)
    # symmetric under swapping the sample sets and under permutations within each
    assert mmd_divergence(zp, z, lam, bw) == pytest.approx(value, abs=1e-12)
    assert mmd_divergence(z[rng.permutation(n)], zp[rng.permutation(n)], lam, bw) == pytest.approx(value, abs=1e-12)


def test_mmd_gradient(rng):
    z, zp = rng.normal(size=(6, 2)), rng.normal(size=(6, 2))
    g = mmd_grad(z, zp, 3.0, 0.8)
    report = gradient_check([z], lambda: mmd_divergence(z, zp, 3.0, 0.8), [g], eps=1e-6)
    assert report.max_rel_error < 1e-6


def test_median_bandwidth():
    z = np.array([[0.0], [1.0]])
    zp = np.array([[3.0], [7.0]])
    # pairwise distances 1, 3, 7, 2, 6, 4 -> median 3.5
    assert median_bandwidth(z, zp) == pytest.approx(3.5)
    assert median_bandwidth(np.zeros((3, 1)), np.zeros((3, 1))) == 1e-6


def test_kl_closed_forms():
    assert kl_gaussian([0.0], [0.0]) == 0.0
    assert kl_gaussian([1.0], [0.0]) == pytest.approx(0.5)
    assert kl_gaussian([0.0], [np.log(2.0)]) == pytest.approx(0.5 * (1 - np.log(2)))
    assert kl_gaussian([0.0], [np.log(2.0)]) == pytest.approx(0.15343, abs=1e-5)


def test_lambda_zero_loss_is_reconstruction(world, small_dataset, rng):
    model = CwaeModel.create("objectworld", 6, 5, rng=rng)
    b = make_batch(world, *small_dataset.transitions())
    terms = cwae_loss(model, b, CwaeTrainConfig(lam=0.0), np.random.default_rng(0))
    assert terms.total == terms.recon and terms.divergence == 0.0


def test_perfect_decoder_gives_zero_reconstruction(world, rng):
    """A decoder that copies s_t is exact on pure self-transitions."""
    model = CwaeModel.create("objectworld", 6, 5, rng=rng, hidden=(6,), dropout=0.0)
    dec = model.decoder
    dec.params[0][...] = 0.0
    dec.params[0][:6, :6] = np.eye(6)
    dec.params[1][...] = 0.0
    dec.params[2][...] = np.eye(6)
    dec.params[3][...] = 0.0
    states = np.arange(25)
    b = make_batch(world, states, np.full(25, 4), states)
    terms = cwae_loss(model, b, CwaeTrainConfig(dropout=0.0), np.random.default_rng(1), train=False)
    assert terms.recon == 0.0 and terms.total == terms.divergence


@pytest.mark.parametrize("divergence", ["mmd", "kl"])
def test_cwae_loss_gradient(world, small_dataset, divergence):
    rng = np.random.default_rng(4)
    model = CwaeModel.create("objectworld", 6, 5, latent_dim=2, hidden=(8, 8), dropout=0.2, rng=rng)
    b = make_batch(world, *small_dataset.transitions()).take(np.arange(12))
    cfg = CwaeTrainConfig(divergence=divergence, lam=5.0, bandwidth=1.0)
    params = model.encoder.params + model.decoder.params
    terms = cwae_loss(model, b, cfg, np.random.default_rng(9), with_grads=True)
    report = gradient_check(params, lambda: cwae_loss(model, b, cfg, np.random.default_rng(9)).total,
                            terms.grads)
    assert report.max_rel_error < 1e-4


def test_batch_of_one_rejected_for_mmd(world, small_dataset, rng):
    model = CwaeModel.create("objectworld", 6, 5, rng=rng)
    b = make_batch(world, *small_dataset.transitions()).take([0])
    with pytest.raises(ValidationError):
        cwae_loss(model, b, CwaeTrainConfig(), rng)
    with pytest.raises(ValidationError):
        CwaeTrainConfig(batch_size=1)


def test_zero_epochs(world, small_dataset):
    model, curves = train_cwae(small_dataset, world, CwaeTrainConfig(epochs=0, hidden=(8,)))
    assert all(len(v) == 0 for v in curves.values())
    assert model.encoder.sizes == (17, 8, 2)


def test_training_is_deterministic(world, small_dataset):
    cfg = CwaeTrainConfig(epochs=3, hidden=(8, 8), seed=5)
    (m1, c1), (m2, c2) = train_cwae(small_dataset, world, cfg), train_cwae(small_dataset, world, cfg)
    for a, b in zip(m1.encoder.params + m1.decoder.params, m2.encoder.params + m2.decoder.params):
        np.testing.assert_array_equal(a, b)
    assert c1 == c2


def test_curves_decompose(world, small_dataset):
    _, curves = train_cwae(small_dataset, world, CwaeTrainConfig(epochs=4, hidden=(8,)))
    for t, r, d in zip(curves["total"], curves["recon"], curves["divergence"]):
        assert t == pytest.approx(r + d, abs=1e-12)
    assert len(curves["val_total"]) == 4 and np.all(np.isfinite(curves["val_total"]))


def test_loss_terms_sum_exactly(world, small_dataset, rng):
    model = CwaeModel.create("objectworld", 6, 5, rng=rng)
    b = make_batch(world, *small_dataset.transitions())
    for seed in range(5):
        t = cwae_loss(model, b, CwaeTrainConfig(), np.random.default_rng(seed))
        assert t.total == t.recon + t.divergence


def test_training_reduces_heldout_reconstruction(world):
    pi = expert_policy_objectworld(world.mdp, world.reward)
    train = sample_trajectories(world, pi, 64, 16, 0)
    test = sample_trajectories(world, pi, 16, 16, 99)
    cfg = CwaeTrainConfig(epochs=30, seed=1)
    hb = make_batch(world, *test.transitions())
    init = CwaeModel.create("objectworld", 6, 5, cfg.latent_dim, cfg.hidden, cfg.dropout,
                            np.random.default_rng(cfg.seed))
    model, _ = train_cwae(train, world, cfg)

    def mse(m):
        mu, _ = encode(m, hb.s, hb.a, hb.s_next)
        return np.mean((decode(m, hb.s, hb.a, mu) - hb.s_next) ** 2)

    assert mse(model) < mse(init)


def test_dataset_average_single_visits(world, rng):
    model = CwaeModel.create("objectworld", 6, 5, rng=rng)
    # a path visiting each arrival state exactly once
    states = np.arange(24)
    traj = Trajectory(states, np.full(24, 3), states + 1)
    ds = Dataset("objectworld", 0, [traj])
    est = extract_reward_map(model, world, "dataset-average", ds)
    per_step = predict_rewards(model, world, traj.states, traj.actions, traj.next_states)
    np.testing.assert_allclose(est.mean[1:], per_step)
    np.testing.assert_allclose(est.mean[0], extract_reward_map(model, world).mean[0])
    assert np.all(est.variance >= 0)


def test_extraction_mode_errors(world, rng):
    model = CwaeModel.create("objectworld", 6, 5, rng=rng)
    with pytest.raises(ValidationError):
        extract_reward_map(model, world, "dataset-average")
    with pytest.raises(ValidationError):
        extract_reward_map(model, Pendulum())


def test_checkpoint_round_trip(tmp_path, world, small_dataset):
    cfg = CwaeTrainConfig(epochs=1, hidden=(8,))
    model, _ = train_cwae(small_dataset, world, cfg)
    model.save(tmp_path / "m", cfg)
    head = (tmp_path / "m.encoder.txt").read_text().splitlines()[1]
    assert head.startswith("# meta {") and '"env": "objectworld"' in head
    back = CwaeModel.load(tmp_path / "m")
    assert (back.latent_dim, back.state_dim, back.env) == (1, 6, "objectworld")
    for a, b in zip(model.encoder.params + model.decoder.params, back.encoder.params + back.decoder.params):
        np.testing.assert_array_equal(a, b)
    (tmp_path / "x.encoder.txt").write_text("# mlp-checkpoint v1\n")
    with pytest.raises(ParseError):
        CwaeModel.load(tmp_path / "x")
