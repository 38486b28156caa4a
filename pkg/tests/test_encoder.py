import numpy as np
import pytest

from contrastnli import autodiff as ad
from contrastnli import encoder
from contrastnli.encoder import encode, init_params, sentence_embedding
from contrastnli.gradcheck import check_gradients


@pytest.fixture
def params():
    return init_params(vocab_size=11, k=8, rng_seed=3, max_seq_len=16)


def test_init_rejects_odd_or_tiny_k():
    with pytest.raises(ValueError):
        init_params(5, 7, 0)
    with pytest.raises(ValueError):
        init_params(5, 2, 0)


def test_init_layer_norm_identity(params):
    assert np.array_equal(params.ln1_gamma.data, np.ones(8))
    assert np.array_equal(params.ln1_beta.data, np.zeros(8))


def test_init_deterministic():
    a, b = init_params(9, 8, 42), init_params(9, 8, 42)
    for (_, pa), (_, pb) in zip(a.named(), b.named()):
        assert np.array_equal(pa.data, pb.data)


def test_init_projection_bound(params):
    bound = 1.0 / np.sqrt(8)
    for name, p in params.named():
        if name.endswith(("_b1", "_b2", "gamma", "beta")):
            continue
        assert np.abs(p.data).max() <= bound, name


def test_encode_shape(params):
    out = encode(params, [1, 4, 9])
    assert out.shape == (3, 8)


def test_encode_position_sensitive(params):
    a = encode(params, [3, 4]).data
    b = encode(params, [4, 3]).data
    assert not np.allclose(a, b)


def test_encode_all_ones_mask_bitwise_identity(params):
    ids = [1, 2, 3]
    bare = encode(params, ids).data
    masked = encode(params, ids, np.ones((3, 8))).data
    assert np.array_equal(bare, masked)


def test_encode_rejects_bad_lengths(params):
    with pytest.raises(ValueError):
        encode(params, [])
    with pytest.raises(ValueError):
        encode(params, [1] * 17)


def test_encode_rejects_out_of_vocab(params):
    with pytest.raises(IndexError):
        encode(params, [11])


def test_encode_deterministic(params):
    ids = [5, 6, 7, 8]
    mask = np.ones((4, 8))
    mask[2, 3] = 0.0
    assert np.array_equal(encode(params, ids, mask).data, encode(params, ids, mask).data)


def test_encode_output_rows_nonzero(params):
    out = encode(params, [1, 2, 3, 4, 5]).data
    assert (np.linalg.norm(out, axis=1) > 0).all()


def test_sentence_embedding_single_row():
    row = ad.constant(np.array([[1.0, 2.0, 3.0]]))
    assert np.array_equal(sentence_embedding(row).data, [1.0, 2.0, 3.0])


def test_sentence_embedding_identical_rows():
    rows = ad.constant(np.array([[1.0, 2.0], [1.0, 2.0]]))
    assert np.array_equal(sentence_embedding(rows).data, [1.0, 2.0])


def test_sentence_embedding_gradient_fd(params):
    def build():
        return ad.sum_all(ad.tanh(sentence_embedding(encode(params, [1, 2, 6]))))

    report = check_gradients(build, params.named())
    assert max(report.values()) < 1e-5


def test_training_step_touches_only_present_embedding_rows():
    from contrastnli.corpus import SentencePair, build_vocab
    from contrastnli.trainer import TrainConfig, init_model, batch_loss, adam_step, AdamState
    from contrastnli.batcher import build_batch

    pairs = [
        SentencePair(("a", "dog", "chases", "a", "ball"), ("a", "dog", "finds", "a", "ball"), 2),
        SentencePair(("a", "cat", "is", "fast"), ("a", "cat", "is", "slow"), 1),
    ]
    extra = SentencePair(("unused", "word"), ("unused", "word"), 2)
    vocab = build_vocab(pairs + [extra])
    config = TrainConfig(k=8, d=8, batch_size=2, weight_decay=0.0, seed=1)
    model = init_model(config, vocab)
    before = model.enc.embed.data.copy()

    batch = build_batch(pairs, config.strategy_objects(), 12, embed_dim=8)
    breakdown = batch_loss(model, batch)
    ad.backward(breakdown.total)
    adam_step(model.named_parameters(), AdamState(), config.lr, config.weight_decay)

    after = model.enc.embed.data
    present = set()
    for view in batch.views:
        present.update(vocab.encode(view.premise))
        present.update(vocab.encode(view.hypothesis))
    for row in range(len(vocab)):
        changed = not np.array_equal(before[row], after[row])
        assert changed == (row in present)
