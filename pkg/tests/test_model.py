import json

import numpy as np
import pytest

from mathrel.data import Corpus, RelationLabel, Statement, generate_synthetic
from mathrel.model import (
    CLS,
    MASK,
    PAD,
    UNK,
    AdamW,
    FormatError,
    Model,
    ModelConfig,
    NonFiniteError,
    ShapeError,
    TrainConfig,
    VersionError,
    Vocab,
    attention_weights,
    build_vocab,
    encode,
    forward,
    gradient_check,
    init_parameters,
    load_checkpoint,
    loss_and_grads,
    predict,
    random_batch,
    save_checkpoint,
    stack,
    train,
)
from mathrel.model.encoder import is_decayed
from mathrel.model.vocab import RESERVED


def _corpus(texts):
    return Corpus([Statement(f"s{i}", t, "one", "one", RelationLabel.Addition) for i, t in enumerate(texts)])


@pytest.fixture
def small():
    cfg = ModelConfig(vocab_size=30, d_model=16, n_layers=2, n_heads=2, ffn_dim=32, max_len=12)
    return cfg, init_parameters(cfg, seed=0, std=0.3)


def test_vocab_ordering():
    vocab = build_vocab(_corpus(["five five", "ten"]))
    assert vocab.tokens[:6] == ["[PAD]", "[UNK]", "[CLS]", "[MASK]", "five", "ten"]
    assert (PAD, UNK, CLS, MASK) == (0, 1, 2, 3)
    assert vocab.id("never-seen") == UNK
    assert build_vocab(_corpus(["five five", "ten"])) == vocab


def test_encode_examples():
    vocab = build_vocab(_corpus(["five five", "ten"]))
    e = encode("", vocab, 8)
    assert e.ids.tolist() == [CLS] + [PAD] * 7 and e.attention_mask.tolist() == [1] + [0] * 7
    long = encode(" ".join(["five"] * 60), vocab, 50)
    assert len(long.ids) == 50 and long.ids[0] == CLS and long.attention_mask.sum() == 50
    e = encode("five ten seven", vocab, 8)
    assert len(e.ids) == 8 and e.attention_mask.sum() == 4 and e.ids[3] == UNK
    assert (e.segment_ids == 0).all()


def test_softmax_rows_and_batch_independence(small, rng):
    cfg, params = small
    ids, mask, seg, _ = random_batch(cfg, batch=4, length=10, seed=1)
    probs = forward(ids, mask, seg, params, cfg)
    assert probs.shape == (4, 6)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)
    assert (probs > 0).all() and (probs < 1).all()
    perm = np.array([2, 0, 3, 1])
    np.testing.assert_allclose(forward(ids[perm], mask[perm], seg[perm], params, cfg), probs[perm], atol=1e-6)


def test_padding_invariance(small):
    cfg, params = small
    ids, mask, seg, _ = random_batch(cfg, batch=4, length=10, seed=2)
    before = forward(ids, mask, seg, params, cfg)
    mutated = ids.copy()
    mutated[mask == 0] = 7
    np.testing.assert_array_equal(forward(mutated, mask, seg, params, cfg), before)


def test_attention_rows_sum_to_one(small):
    cfg, params = small
    ids, mask, seg, _ = random_batch(cfg, batch=3, length=9, seed=3)
    for att in attention_weights(ids, mask, seg, params, cfg):
        np.testing.assert_allclose(att.sum(axis=-1), 1.0, atol=1e-6)
        keys_masked = np.broadcast_to((mask == 0)[:, None, None, :], att.shape)
        assert np.all(att[keys_masked] < 1e-6)


def test_shape_and_finiteness_errors(small):
    cfg, params = small
    ids, mask, seg, _ = random_batch(cfg, batch=2, length=6, seed=0)
    with pytest.raises(ShapeError):
        forward(ids, mask[:, :5], seg, params, cfg)
    with pytest.raises(ShapeError):
        forward(np.full((1, 13), CLS), np.ones((1, 13), int), np.zeros((1, 13), int), params, cfg)
    with pytest.raises(ShapeError):
        forward(ids + 100, mask, seg, params, cfg)
    bad = dict(params)
    bad["head.b"] = np.full(6, np.nan, dtype=np.float32)
    with pytest.raises(NonFiniteError):
        forward(ids, mask, seg, bad, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(vocab_size=10, d_model=10, n_heads=3)
    with pytest.raises(ValueError):
        ModelConfig(vocab_size=10, n_classes=5)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)


def test_gradient_check_small(small):
    cfg, params = small
    cfg = ModelConfig(**{**cfg.to_dict(), "dropout_rate": 0.0})
    batch = random_batch(cfg, batch=2, length=6, seed=4)
    worst, details = gradient_check(params, batch, cfg, samples_per_group=4, return_details=True)
    assert worst < 1e-4
    assert details["head.b"] < 1e-6
    with pytest.raises(ValueError):
        gradient_check(params, random_batch(cfg, batch=5, length=6), cfg)


def test_gradient_check_degenerate_batch(small):
    cfg, params = small
    params = {k: v.astype(np.float64) for k, v in params.items()}
    params["head.b"] = np.array([60.0, 0, 0, 0, 0, 0])
    batch = random_batch(cfg, batch=2, length=5, seed=5)
    batch = (*batch[:3], np.zeros(2, dtype=np.int64))
    assert gradient_check(params, batch, cfg, samples_per_group=3) < 1e-4


def test_adamw_single_step_matches_hand_computation():
    p = {"w": np.array([1.0]), "b": np.array([1.0])}
    opt = AdamW(p, lr=0.1, weight_decay=0.01, decay=["w"])
    opt.step({"w": np.array([0.5]), "b": np.array([0.5])})
    # m_hat = 0.5, v_hat = 0.25, update = 0.1 * 0.5 / (0.5 + 1e-8)
    step = 0.1 * 0.5 / (0.5 + 1e-8)
    assert p["w"][0] == pytest.approx(1.0 * (1 - 0.1 * 0.01) - step, abs=1e-15)
    assert p["b"][0] == pytest.approx(1.0 - step, abs=1e-15)


def test_decay_groups():
    assert is_decayed("layers.0.attn.wq") and is_decayed("tok_emb") and is_decayed("head.w")
    assert not is_decayed("layers.0.attn.bq") and not is_decayed("layers.1.ln2.gamma") and not is_decayed("head.b")


def test_zero_parameters_tie_break():
    vocab = build_vocab(_corpus(["five"]))
    cfg = ModelConfig(vocab_size=len(vocab))
    params = {k: np.zeros_like(v) for k, v in init_parameters(cfg).items()}
    label, probs = predict("five apples", params, vocab, cfg)
    assert label is RelationLabel.Addition
    np.testing.assert_allclose(probs, 1 / 6, atol=1e-7)


def test_checkpoint_roundtrip_and_errors(tmp_path, small):
    cfg, params = small
    vocab = Vocab(list(RESERVED) + [f"w{i}" for i in range(cfg.vocab_size - 4)])
    path = tmp_path / "ck.json"
    save_checkpoint(params, cfg, vocab, path)
    p2, cfg2, vocab2 = load_checkpoint(path)
    assert cfg2 == cfg and vocab2 == vocab
    ids, mask, seg, _ = random_batch(cfg, batch=3, length=8, seed=6)
    np.testing.assert_array_equal(forward(ids, mask, seg, p2, cfg2), forward(ids, mask, seg, params, cfg))

    raw = path.read_text()
    (tmp_path / "trunc.json").write_text(raw[: len(raw) // 2])
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "trunc.json")
    doc = json.loads(raw)
    doc["format_version"] = 99
    (tmp_path / "v.json").write_text(json.dumps(doc))
    with pytest.raises(VersionError):
        load_checkpoint(tmp_path / "v.json")
    with pytest.raises(ValueError):
        save_checkpoint(params, cfg, Vocab(list(RESERVED)), tmp_path / "x.json")


@pytest.mark.slow
def test_overfit_tiny_corpus():
    c = generate_synthetic(32, seed=5)
    model, hist = train(c, c, train_config=TrainConfig(epochs=200, seed=1))
    assert hist.val_accuracy[-1] == 1.0
    assert len(hist) == 200


def test_training_is_deterministic(tmp_path):
    c = generate_synthetic(60, seed=2)
    tc = TrainConfig(epochs=3, seed=9)
    m1, h1 = train(c, c, {"d_model": 16, "n_heads": 2, "ffn_dim": 32}, tc)
    m2, h2 = train(c, c, {"d_model": 16, "n_heads": 2, "ffn_dim": 32}, tc)
    h1.to_csv(tmp_path / "a.csv")
    h2.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert all(np.array_equal(m1.parameters[k], m2.parameters[k]) for k in m1.parameters)


def test_loss_and_grads_shapes(small):
    cfg, params = small
    ids, mask, seg, labels = random_batch(cfg, batch=2, length=7)
    loss, grads, probs = loss_and_grads(ids, mask, seg, labels, params, cfg)
    assert np.isfinite(loss) and set(grads) == set(params)
    assert all(grads[k].shape == params[k].shape for k in params)


def test_stack_trims_padding():
    vocab = build_vocab(_corpus(["five ten"]))
    ids, mask, _ = stack([encode("five", vocab, 10), encode("five ten", vocab, 10)])
    assert ids.shape == (2, 3) and mask.sum() == 5


def test_desk_model_predicts_square_root(desk_model):
    assert isinstance(desk_model, Model)
    label, probs = predict("The square root of four is two", desk_model.parameters, desk_model.vocab,
                           desk_model.config)
    assert label is RelationLabel.SquareRoot
    assert abs(probs.sum() - 1) < 1e-6


def test_desk_history_decreases(desk_run):
    _, history, _ = desk_run
    drops = sum(b < a for a, b in zip(history.train_loss, history.train_loss[1:]))
    assert drops >= 0.9 * (len(history) - 1)
