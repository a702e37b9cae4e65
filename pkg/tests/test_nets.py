import numpy as np
import pytest

from seqfdi.nets import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    Adam,
    PolicyNetwork,
    PolicySpec,
    ValueNetwork,
    flatten_like,
    get_flat_params,
    set_flat_params,
    surrogate_loss_and_grads,
    value_loss_and_grads,
)


def make_batch(policy, rng, B=32, spread=3.0):
    n = policy.n
    states = rng.normal(size=(B, n)) * spread
    if policy.mode == "categorical":
        gammas = np.eye(n)[rng.integers(0, n, B)]
    else:
        gammas = rng.integers(0, 2, size=(B, n)).astype(float)
    thetas = rng.normal(size=B)
    old_lp = policy.log_prob(states, gammas, thetas) + rng.normal(size=B) * 0.05
    adv = rng.normal(size=B)
    return states, gammas, thetas, old_lp, adv


def central_differences(policy, loss_fn, h=1e-6):
    flat = get_flat_params(policy.params)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        set_flat_params(policy.params, flat)
        up = loss_fn()
        flat[i] = orig - h
        set_flat_params(policy.params, flat)
        down = loss_fn()
        flat[i] = orig
        grad[i] = (up - down) / (2.0 * h)
    set_flat_params(policy.params, flat)
    return grad


@pytest.mark.parametrize("mode", ["categorical", "binary"])
def test_surrogate_gradients_match_finite_differences(mode):
    rng = np.random.default_rng(7)
    policy = PolicyNetwork(3, PolicySpec(hidden_sizes=(8, 8), seed=1), mode=mode)
    batch = make_batch(policy, rng)

    def loss_fn():
        loss, _ = surrogate_loss_and_grads(policy, *batch, 0.2, 0.01)
        return loss

    _, grads = surrogate_loss_and_grads(policy, *batch, 0.2, 0.01)
    analytic = flatten_like(policy.params, grads)
    numeric = central_differences(policy, loss_fn)
    err = np.abs(analytic - numeric) / np.maximum(
        1.0, np.maximum(np.abs(analytic), np.abs(numeric))
    )
    assert err.max() < 1e-7


def test_value_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    net = ValueNetwork(4, (8, 8), seed=2)
    states = rng.normal(size=(16, 4))
    targets = rng.normal(size=16) * 50

    def loss_fn():
        loss, _ = value_loss_and_grads(net, states, targets)
        return loss

    _, grads = value_loss_and_grads(net, states, targets)
    analytic = flatten_like(net.params, grads)

    flat = get_flat_params(net.params)
    numeric = np.zeros_like(flat)
    h = 1e-5
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        set_flat_params(net.params, flat)
        up = loss_fn()
        flat[i] = orig - h
        set_flat_params(net.params, flat)
        down = loss_fn()
        flat[i] = orig
        numeric[i] = (up - down) / (2.0 * h)
    set_flat_params(net.params, flat)
    err = np.abs(analytic - numeric) / np.maximum(
        1.0, np.maximum(np.abs(analytic), np.abs(numeric))
    )
    assert err.max() < 1e-6


def test_categorical_probabilities_sum_to_one():
    policy = PolicyNetwork(5, PolicySpec(seed=0))
    probs, _, _ = policy.distribution(np.random.default_rng(0).normal(size=(7, 5)))
    assert np.allclose(probs.sum(axis=1), 1.0)
    assert np.all(probs >= 0.0)


def test_log_std_clamped_at_use():
    policy = PolicyNetwork(2, PolicySpec(seed=0))
    policy.params["log_std"][0] = -40.0
    _, _, std = policy.distribution(np.zeros((1, 2)))
    assert std == pytest.approx(np.exp(LOG_STD_MIN))
    policy.params["log_std"][0] = 40.0
    _, _, std = policy.distribution(np.zeros((1, 2)))
    assert std == pytest.approx(np.exp(LOG_STD_MAX))


def test_log_prob_matches_manual_formula():
    rng = np.random.default_rng(5)
    policy = PolicyNetwork(3, PolicySpec(hidden_sizes=(8,), seed=4))
    states = rng.normal(size=(6, 3))
    gammas = np.eye(3)[rng.integers(0, 3, 6)]
    thetas = rng.normal(size=6)
    probs, mu, std = policy.distribution(states)
    manual = (
        np.log(probs[np.arange(6), np.argmax(gammas, axis=1)])
        - 0.5 * ((thetas - mu) / std) ** 2
        - np.log(std)
        - 0.5 * np.log(2 * np.pi)
    )
    assert np.allclose(policy.log_prob(states, gammas, thetas), manual)


def test_binary_log_prob_sums_bernoulli_terms():
    rng = np.random.default_rng(6)
    policy = PolicyNetwork(4, PolicySpec(hidden_sizes=(8,), seed=4), mode="binary")
    states = rng.normal(size=(5, 4))
    gammas = rng.integers(0, 2, size=(5, 4)).astype(float)
    thetas = rng.normal(size=5)
    probs, mu, std = policy.distribution(states)
    lp_sel = (gammas * np.log(probs) + (1 - gammas) * np.log1p(-probs)).sum(axis=1)
    manual = lp_sel - 0.5 * ((thetas - mu) / std) ** 2 - np.log(std) - 0.5 * np.log(2 * np.pi)
    assert np.allclose(policy.log_prob(states, gammas, thetas), manual)


def test_sampling_is_seed_deterministic():
    policy = PolicyNetwork(3, PolicySpec(seed=11))
    x = np.array([0.5, -1.0, 2.0])
    a = policy.act(x, 0, np.random.default_rng(1))
    b = policy.act(x, 0, np.random.default_rng(1))
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_greedy_action_is_mode_and_mean():
    policy = PolicyNetwork(3, PolicySpec(seed=2))
    x = np.array([1.0, 0.0, -1.0])
    gamma, theta = policy.act_greedy(x, 0)
    probs, mu, _ = policy.distribution(x)
    assert gamma[np.argmax(probs[0])] == 1.0 and gamma.sum() == 1.0
    assert theta == pytest.approx(mu[0])


def test_same_spec_same_parameters():
    a = PolicyNetwork(3, PolicySpec(hidden_sizes=(16, 16), seed=9))
    b = PolicyNetwork(3, PolicySpec(hidden_sizes=(16, 16), seed=9))
    assert np.array_equal(get_flat_params(a.params), get_flat_params(b.params))
    c = PolicyNetwork(3, PolicySpec(hidden_sizes=(16, 16), seed=10))
    assert not np.array_equal(get_flat_params(a.params), get_flat_params(c.params))


def test_adam_decreases_value_loss():
    rng = np.random.default_rng(0)
    net = ValueNetwork(3, (16, 16), seed=1)
    states = rng.normal(size=(64, 3))
    targets = states.sum(axis=1) * 2.0 + 1.0
    opt = Adam(net.params, lr=1e-2)
    first, _ = value_loss_and_grads(net, states, targets)
    for _ in range(200):
        _, grads = value_loss_and_grads(net, states, targets)
        opt.update(net.params, grads)
    last, _ = value_loss_and_grads(net, states, targets)
    assert last < first * 0.05
