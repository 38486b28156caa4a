import numpy as np
import pytest

import oracles
from contrastnli import autodiff as ad
from contrastnli import crossattn
from contrastnli.crossattn import (CrossAttnParams, attend, coattention,
                                   enhance, interaction_features, join,
                                   pair_forward)
from contrastnli.gradcheck import check_gradients


def make_params(k=4, d=3, seed=0):
    rng = np.random.default_rng(seed)
    return CrossAttnParams(
        w=ad.parameter(rng.normal(size=(d, k))),
        p=ad.parameter(rng.normal(size=d)),
        f=ad.parameter(rng.normal(size=(k, 4 * k))),
        b=ad.parameter(rng.normal(size=k)),
        ln_gamma=ad.parameter(rng.normal(size=k) + 1.5),
        ln_beta=ad.parameter(rng.normal(size=k)),
    )


def states(rows, k=4, seed=1):
    rng = np.random.default_rng(seed)
    return ad.parameter(rng.normal(size=(rows, k)))


# ---------------------------------------------------------------------------
# coattention
# ---------------------------------------------------------------------------

def test_coattention_zero_p_annihilates():
    params = make_params()
    params.p.data[:] = 0.0
    c = coattention(params, states(3), states(5, seed=2))
    assert np.array_equal(c.data, np.zeros((3, 5)))


def test_coattention_single_pair_shape():
    c = coattention(make_params(), states(1), states(1, seed=2))
    assert c.shape == (1, 1)


def test_coattention_matches_nested_loop_oracle():
    params = make_params()
    s_p, s_h = states(3, seed=4), states(5, seed=5)
    got = coattention(params, s_p, s_h).data
    want = oracles.coattention(params.w.data.tolist(), params.p.data.tolist(),
                               s_p.data.tolist(), s_h.data.tolist())
    assert np.abs(got - np.array(want)).max() < 1e-12


# ---------------------------------------------------------------------------
# attend
# ---------------------------------------------------------------------------

def test_attend_single_target_copies_rows():
    s_p, s_h = states(4, seed=6), states(1, seed=7)
    c = ad.constant(np.random.default_rng(8).normal(size=(4, 1)))
    attended_p, _ = attend(c, s_p, s_h)
    assert np.allclose(attended_p.data, np.repeat(s_h.data, 4, axis=0), atol=1e-15)


def test_attend_uniform_scores_give_means():
    s_p, s_h = states(3, seed=9), states(5, seed=10)
    c = ad.constant(np.zeros((3, 5)))
    attended_p, attended_h = attend(c, s_p, s_h)
    assert np.allclose(attended_p.data, np.tile(s_h.data.mean(axis=0), (3, 1)), atol=1e-14)
    assert np.allclose(attended_h.data, np.tile(s_p.data.mean(axis=0), (5, 1)), atol=1e-14)


def test_attend_convex_hull():
    rng = np.random.default_rng(11)
    s_p, s_h = states(6, seed=12), states(4, seed=13)
    c = ad.constant(rng.normal(size=(6, 4)))
    attended_p, attended_h = attend(c, s_p, s_h)
    lo, hi = s_h.data.min(axis=0), s_h.data.max(axis=0)
    assert (attended_p.data >= lo - 1e-12).all() and (attended_p.data <= hi + 1e-12).all()
    lo, hi = s_p.data.min(axis=0), s_p.data.max(axis=0)
    assert (attended_h.data >= lo - 1e-12).all() and (attended_h.data <= hi + 1e-12).all()


# ---------------------------------------------------------------------------
# enhance
# ---------------------------------------------------------------------------

def test_interaction_features_self_alignment():
    s = states(3, k=4, seed=14)
    u = interaction_features(s, s).data
    assert np.array_equal(u[:, 8:12], np.zeros((3, 4)))        # difference block
    assert np.array_equal(u[:, 12:16], s.data * s.data)        # product block


def test_enhance_preserves_shape():
    params = make_params()
    s, attended = states(5, seed=15), states(5, seed=16)
    assert enhance(params, s, attended).shape == s.shape


def test_enhance_rows_standardized_before_affine():
    params = make_params(seed=17)
    params.ln_gamma.data[:] = 1.0
    params.ln_beta.data[:] = 0.0
    out = enhance(params, states(6, seed=18), states(6, seed=19)).data
    assert np.abs(out.mean(axis=1)).max() < 1e-12
    assert np.abs(out.var(axis=1) - 1.0).max() < 1e-3


def test_enhance_gradient_fd():
    params = make_params(seed=20)
    s, attended = states(3, seed=21), states(3, seed=22)

    def build():
        return ad.sum_all(ad.tanh(enhance(params, s, attended)))

    report = check_gradients(build, params.named() + [("s", s), ("attended", attended)])
    assert max(report.values()) < 1e-4


# ---------------------------------------------------------------------------
# join
# ---------------------------------------------------------------------------

def test_join_single_row_collapse():
    ep, eh = states(1, seed=23), states(1, seed=24)
    z = join(ep, eh).data
    assert np.array_equal(z, np.concatenate([ep.data[0], ep.data[0], eh.data[0], eh.data[0]]))


def test_join_dimension():
    assert join(states(3), states(4, seed=25)).shape == (16,)


def test_join_swap_symmetry():
    ep, eh = states(3, seed=26), states(4, seed=27)
    z = join(ep, eh).data
    swapped = join(eh, ep).data
    assert np.array_equal(swapped, np.concatenate([z[8:], z[:8]]))


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------

def test_pair_forward_equals_stepwise():
    params = make_params(seed=28)
    s_p, s_h = states(3, seed=29), states(4, seed=30)
    z = pair_forward(params, s_p, s_h).data
    c = coattention(params, s_p, s_h)
    attended_p, attended_h = attend(c, s_p, s_h)
    step = join(enhance(params, s_p, attended_p), enhance(params, s_h, attended_h)).data
    assert np.array_equal(z, step)


def test_pair_forward_sensitive_to_hypothesis_token_order():
    # raw row permutations cancel out in attention sums and pooling, but
    # token order reaches z through the encoder's position mixing
    from contrastnli.encoder import encode, init_params
    enc = init_params(vocab_size=9, k=4, rng_seed=40)
    params = make_params(k=4, seed=31)
    s_p = encode(enc, [3, 4, 5])
    z1 = pair_forward(params, s_p, encode(enc, [6, 7])).data
    z2 = pair_forward(params, s_p, encode(enc, [7, 6])).data
    assert not np.allclose(z1, z2)


def test_pair_forward_full_fd():
    params = make_params(k=4, d=4, seed=34)
    s_p, s_h = states(2, seed=35), states(2, seed=36)

    def build():
        return ad.sum_all(ad.tanh(pair_forward(params, s_p, s_h)))

    report = check_gradients(build, params.named())
    assert max(report.values()) < 1e-4


def test_pair_forward_matches_nested_loop_oracle():
    rng = np.random.default_rng(37)
    for trial in range(5):
        m, n, k, d = rng.integers(1, 5), rng.integers(1, 5), 4, 3
        params = make_params(k=k, d=d, seed=38 + trial)
        s_p, s_h = states(int(m), k, seed=48 + trial), states(int(n), k, seed=58 + trial)
        got = pair_forward(params, s_p, s_h).data
        want = oracles.pair_forward(
            params.w.data.tolist(), params.p.data.tolist(), params.f.data.tolist(),
            params.b.data.tolist(), params.ln_gamma.data.tolist(),
            params.ln_beta.data.tolist(), s_p.data.tolist(), s_h.data.tolist())
        assert np.abs(got - np.array(want)).max() < 1e-10
