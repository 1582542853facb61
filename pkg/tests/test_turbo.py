import numpy as np
import pytest

from cdp_twin import imaging, turbo
from cdp_twin.errors import ParameterError


def _tuple(gen, zs=(6, 6), xs=(6, 6)):
    return turbo.TurboTuple(*(gen.random(zs) for _ in range(3)), *(gen.random(xs) for _ in range(3)))


def test_weights_positions():
    w = turbo.TurboWeights(lambda_T=2, lambda_D=1, lambda_R=0.5)
    assert w.position_weights() == (1.0, 1, 2, 1.0)
    with pytest.raises(ParameterError):
        turbo.TurboWeights(lambda_T=-1)


def test_hand_weighted_sum():
    w = turbo.TurboWeights(lambda_T=2, lambda_D=1, lambda_R=0.5)
    res = turbo.combine([0.1, 0.2, 0.3, 0.4], w)
    assert abs(res.total - 1.3) <= 1e-12


def test_zero_plug_matches_unet_exactly():
    gen = np.random.default_rng(0)
    for _ in range(200):
        tup = _tuple(gen, xs=(6, 12))
        w = turbo.TurboWeights(*gen.random(3) * 3)
        assert turbo.turbo_loss_full(tup, w, turbo.zero_plug) == turbo.turbo_loss_unet(tup, w)


def test_constant_plug_adds_weighted_constant():
    gen = np.random.default_rng(1)
    tup = _tuple(gen)
    w = turbo.TurboWeights(1, 1, 1)
    base = turbo.turbo_loss_unet(tup, w).total
    full = turbo.turbo_loss_full(tup, w, lambda a, b: 0.25).total
    assert full == pytest.approx(base + 4 * 0.25, abs=1e-12)


def test_squared_mean_difference_hand_case():
    z = np.zeros((1, 1))
    x = np.ones((1, 1))
    tup = turbo.TurboTuple(z, z, x, x, x, z)
    res = turbo.turbo_loss_full(tup, turbo.TurboWeights(), turbo.squared_mean_difference)
    # positions (z, z~)=1, (x, x^)=0, (x, x~)=1, (z, z^)=0, both l1 and divergence
    assert (res.l_z_tilde, res.l_x_hat, res.l_x_tilde, res.l_z_hat) == (1, 0, 1, 0)
    assert (res.d_z_tilde, res.d_x_hat, res.d_x_tilde, res.d_z_hat) == (1, 0, 1, 0)
    assert res.total == 4.0


def test_csv_row_fields():
    res = turbo.combine([0.1, 0.2, 0.3, 0.4], turbo.TurboWeights())
    assert len(res.csv_row().split(",")) == len(turbo.LossBreakdown.CSV_HEADER.split(","))


def test_tuple_shape_checks():
    with pytest.raises(ParameterError):
        turbo.TurboTuple(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)),
                         np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(ParameterError):
        turbo.l1_pairwise(np.zeros((2, 2)), np.zeros((3, 2)))


def test_lower_median():
    assert turbo.lower_median([0.1, 0.9, 0.9]) == 0.9
    assert turbo.lower_median([0.4, 0.1, 0.3, 0.2]) == 0.2
    with pytest.raises(ParameterError):
        turbo.lower_median([])


def _pairs(model, n, seed, size=20):
    from cdp_twin import channel
    out = []
    for i in range(n):
        z = imaging.generate_template(size, size, seed=seed, index=i)
        out.append((z, channel.simulate_print(model, z, k=1, seed=seed, stream_index=i)[0]))
    return out


def test_median_not_worse_than_mean(known_channel):
    for seed in range(8):
        pairs = _pairs(known_channel, 3, seed)
        med = turbo.fit_pattern_generator(pairs, statistic="median")
        mean = turbo.fit_pattern_generator(pairs, statistic="mean")
        assert turbo.pattern_l1_loss(med, pairs) <= turbo.pattern_l1_loss(mean, pairs) + 1e-15


def test_median_is_l1_optimal_per_pattern(known_channel):
    pairs = _pairs(known_channel, 2, 3)
    gen = turbo.fit_pattern_generator(pairs)
    base = turbo.pattern_l1_loss(gen, pairs)
    observed = np.flatnonzero(gen.count)
    rng = np.random.default_rng(0)
    for p in rng.choice(observed, 30, replace=False):
        for delta in (-0.01, 0.01):
            vals = gen.values.copy()
            vals[p] += delta
            moved = turbo.PatternGenerator(gen.direction, gen.scale, vals, gen.count, gen.fallback)
            assert turbo.pattern_l1_loss(moved, pairs) >= base - 1e-15


def test_generator_determinism_and_geometry(known_channel):
    pairs = _pairs(known_channel, 2, 4)
    gen = turbo.fit_pattern_generator(pairs)
    z = imaging.generate_template(20, 20, seed=9)
    a, b = gen.generate(z), gen.generate(z)
    assert np.array_equal(a, b) and a.shape == (20, 20)
    with pytest.raises(ParameterError):
        turbo.fit_pattern_generator([])
    with pytest.raises(ParameterError):
        turbo.fit_pattern_generator(pairs, statistic="mode")
