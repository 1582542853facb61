import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cdp_twin import analysis, channel, imaging, metrics
from cdp_twin.errors import OutOfDomainError, ParameterError, UsageError
from conftest import deterministic_print_model


def _neigh(bits9):
    t = np.zeros((5, 5), dtype=np.uint8)
    t[1:4, 1:4] = np.asarray(bits9, dtype=np.uint8).reshape(3, 3)
    return t


@pytest.mark.parametrize("bits, expected", [
    ([0] * 9, 0),
    ([1] * 9, 511),
    ([0, 0, 0, 0, 1, 0, 0, 0, 0], 16),
    ([1, 0, 0, 0, 0, 0, 0, 0, 0], 256),
    ([0, 0, 0, 0, 0, 0, 0, 0, 1], 1),
])
def test_extract_pattern_bit_order(bits, expected):
    assert channel.extract_pattern(_neigh(bits), 2, 2) == expected


def test_extract_pattern_is_a_bijection():
    seen = set()
    for bits in itertools.product([0, 1], repeat=9):
        p = channel.extract_pattern(_neigh(bits), 2, 2)
        assert np.array_equal(channel.pattern_from_id(p), np.reshape(bits, (3, 3)))
        seen.add(p)
    assert seen == set(range(512))


@pytest.mark.parametrize("rc", [(0, 2), (2, 0), (4, 2), (2, 4)])
def test_extract_pattern_rejects_border(rc):
    with pytest.raises(OutOfDomainError):
        channel.extract_pattern(np.zeros((5, 5)), *rc)


@given(arrays(np.uint8, st.tuples(st.integers(3, 9), st.integers(3, 9)), elements=st.integers(0, 1)))
def test_pattern_map_matches_pointwise_extraction(t):
    pm = channel.pattern_map(t)
    h, w = t.shape
    assert np.all(pm[0] == -1) and np.all(pm[:, 0] == -1)
    for r in range(1, h - 1):
        for c in range(1, w - 1):
            assert pm[r, c] == channel.extract_pattern(t, r, c)


def test_fit_recovers_known_means(known_channel):
    zs = [imaging.generate_template(228, 228, 0.5, seed=11, index=i) for i in range(3)]
    pairs = [(z, channel.simulate_print(known_channel, z, 1, seed=12, stream_index=i)[0])
             for i, z in enumerate(zs)]
    fit = channel.fit_channel(pairs, "print", 1)
    n = fit.table.count
    assert n.min() >= 200
    true_mu, true_sd = known_channel.table.mean, known_channel.table.std
    ok = np.abs(fit.table.mean - true_mu) <= 4 * true_sd / np.sqrt(n)
    assert ok.mean() >= 0.99


def test_fit_on_deterministic_channel_has_zero_std(noiseless_model):
    z = imaging.generate_template(40, 40, 0.5, seed=1)
    x = imaging.upscale(z, 1).astype(float)
    fit = channel.fit_channel([(z, x)], "print", 1)
    assert np.all(fit.table.std[fit.table.observed] == 0)


def test_fit_scale_three_uses_block_centres():
    z = imaging.generate_template(30, 30, 0.5, seed=2)
    x = imaging.upscale(z, 3).astype(float)
    x[1::3, 1::3] = np.where(z == 1, 0.9, 0.1)  # centres differ from the rest of the block
    fit = channel.fit_channel([(z, x)], "print", 3)
    obs = fit.table.observed
    cb = channel.center_bit(np.arange(512))
    assert np.allclose(fit.table.mean[obs], np.where(cb == 1, 0.9, 0.1)[obs])
    block = channel.fit_channel([(z, x)], "print", 3, fit_target="block")
    assert not np.allclose(block.table.mean[obs], fit.table.mean[obs])


def test_fit_rejects_empty_and_mismatched_input():
    with pytest.raises(ParameterError):
        channel.fit_channel([], "print", 1)
    z = np.zeros((8, 8), np.uint8)
    with pytest.raises(ParameterError):
        channel.fit_channel([(z, np.zeros((9, 9)))], "print", 1)


def test_unobserved_patterns_get_central_bit_fallback():
    z = np.zeros((10, 10), np.uint8)
    z[4:6, 4:6] = 1
    x = z.astype(float) * 0.7 + 0.1
    fit = channel.fit_channel([(z, x)], "print", 1)
    un = ~fit.table.observed
    assert un.any()
    cb = channel.center_bit(np.arange(512))
    assert np.allclose(fit.table.mean[un], np.asarray(fit.fallback_mean)[cb[un]])


def test_simulate_print_noiseless_realizations_identical(noiseless_model):
    z = imaging.generate_template(20, 20, 0.5, seed=3)
    stack = channel.simulate_print(noiseless_model, z, k=5, seed=1)
    assert stack.shape == (5, 20, 20)
    assert all(np.array_equal(stack[0], s) for s in stack)
    assert np.array_equal(stack[0], z)


def test_simulate_print_geometry_and_clipping():
    model = channel.synthetic_channel("print", 3, noise=0.4)
    z = imaging.generate_template(228, 228, 0.5, seed=4)
    stack = channel.simulate_print(model, z, k=21, seed=9)
    assert stack.shape == (21, 684, 684)
    assert stack.min() >= 0.0 and stack.max() <= 1.0


def test_simulate_print_determinism_and_direction(known_channel):
    z = imaging.generate_template(16, 16, 0.5, seed=5)
    a = channel.simulate_print(known_channel, z, 3, seed=2)
    b = channel.simulate_print(known_channel, z, 3, seed=2)
    assert np.array_equal(a, b)
    # realization r does not depend on how many realizations were requested
    assert np.array_equal(channel.simulate_print(known_channel, z, 1, seed=2)[0], a[0])
    est = channel.synthetic_channel("estimate", 1)
    with pytest.raises(UsageError):
        channel.simulate_print(est, z, 1, seed=0)
    with pytest.raises(UsageError):
        channel.estimate_template(known_channel, z.astype(float), 1, seed=0)


def test_std_map_matches_pattern_sigma(known_channel):
    z = imaging.generate_template(24, 24, 0.5, seed=6)
    stack = channel.simulate_print(known_channel, z, k=1000, seed=3)
    sm = analysis.std_map(stack)
    mu, sd = known_channel.law_maps(z)
    assert np.all(np.abs(sm - sd) <= 0.10 * sd)


def test_estimate_closed_loop_on_deterministic_channel():
    model = deterministic_print_model(scale=3)
    zs = [imaging.generate_template(30, 30, 0.5, seed=7, index=i) for i in range(4)]
    xs = [channel.simulate_print(model, z, 1, seed=0, stream_index=i)[0] for i, z in enumerate(zs)]
    est = channel.fit_channel(list(zip(zs, xs)), "estimate", 3)
    for z, x in zip(zs, xs):
        zt = channel.estimate_template(est, x, k=2, seed=1)
        assert zt.shape == (2, 30, 30)
        assert np.array_equal(metrics.binarize(zt[0]), z)


def test_estimate_realizations_differ_with_noise():
    est = channel.synthetic_channel("estimate", 1)
    x = imaging.generate_template(16, 16, 0.5, seed=8).astype(float)
    zt = channel.estimate_template(est, x, k=3, seed=4)
    assert not np.array_equal(zt[0], zt[1])


def test_model_json_round_trip(known_channel):
    text = known_channel.to_json()
    back = channel.ChannelModel.from_json(text)
    assert back.to_json() == text
    assert np.array_equal(back.table.mean, known_channel.table.mean)
    assert np.array_equal(back.table.std, known_channel.table.std)
    keys = list(__import__("json").loads(text))
    assert keys[:4] == ["direction", "scale", "sampling_law", "table"]


def test_model_json_rejects_bad_table():
    with pytest.raises(ParameterError):
        channel.ChannelModel.from_json('{"direction": "print", "scale": 1, "table": []}')
