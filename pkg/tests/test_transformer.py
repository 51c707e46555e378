import numpy as np
import pytest

from oracles import reference_logits
from sinklab.kvcache import CachePolicy, CacheStack
from sinklab.transformer import (
    ModelConfig,
    TinyLM,
    TrainingLog,
    forward_full,
    forward_step,
    full_perplexity,
    generate,
    generate_session,
    grad_check,
    new_caches,
    sliding_perplexity,
    streaming_perplexity,
    train_char_lm,
)
from sinklab.transformer.training import finite_difference, loss_and_grads

SMALL = ModelConfig(n_layers=2, n_heads=2, d_model=16, d_ff=32, vocab_size=32, train_context_len=16)


def small_model(seed=0, config=SMALL):
    return TinyLM.init(config, seed=seed)


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(d_model=30, n_heads=4)
    with pytest.raises(ValueError):
        ModelConfig(n_layers=0)
    with pytest.raises(ValueError):
        ModelConfig(d_model=6, n_heads=2)  # odd head size cannot be rotated
    assert ModelConfig().d_head == 32


def test_zero_weights_give_uniform_logits():
    model = TinyLM.zeros(ModelConfig())
    caches = new_caches(model, CachePolicy.dense())
    for t, tok in enumerate([5, 200, 17]):
        logits = forward_step(model, tok, caches, t)
        assert np.all(logits == logits[0])


def test_dense_steps_match_full_forward():
    model = small_model(1)
    toks = np.random.default_rng(0).integers(0, 32, size=40)
    full = forward_full(model, toks)
    caches = new_caches(model, CachePolicy.dense())
    steps = np.array([forward_step(model, int(t), caches, i) for i, t in enumerate(toks)])
    assert np.max(np.abs(steps - full)) < 1e-9


@pytest.mark.parametrize("policy,kind,args", [
    (CachePolicy.window(5), "window", dict(window=5)),
    (CachePolicy.sink(2, 4), "sink", dict(sink=2, recent=4)),
    (CachePolicy.dense(), "dense", {}),
])
def test_steps_match_reference_over_retained_subset(policy, kind, args):
    model = small_model(2)
    toks = np.random.default_rng(3).integers(0, 32, size=25)
    caches = new_caches(model, policy)
    steps = np.array([forward_step(model, int(t), caches, i) for i, t in enumerate(toks)])
    ref = reference_logits(model.params, SMALL, [int(t) for t in toks], kind, **args)
    assert np.max(np.abs(steps - ref)) < 1e-9


def test_forward_step_is_deterministic():
    model = small_model(4)
    runs = []
    for _ in range(2):
        caches = new_caches(model, CachePolicy.sink(2, 3))
        runs.append([forward_step(model, t, caches, i) for i, t in enumerate([1, 2, 3, 4, 5, 6, 7])])
    assert all(np.array_equal(a, b) for a, b in zip(*runs))


def test_forward_step_rejects_mixed_policies_and_bad_tokens():
    model = small_model()
    mixed = [CacheStack(CachePolicy.dense(), 1).layers[0], CacheStack(CachePolicy.window(3), 1).layers[0]]
    with pytest.raises(ValueError, match="policy"):
        forward_step(model, 1, mixed, 0)
    with pytest.raises(ValueError):
        forward_step(model, 32, new_caches(model, CachePolicy.dense()), 0)
    with pytest.raises(ValueError):
        forward_step(model, 1, new_caches(TinyLM.init(ModelConfig(n_layers=3, d_model=16, d_ff=8,
                                                                  vocab_size=32), 0),
                                          CachePolicy.dense()), 0)


def test_model_roundtrip_is_bit_exact(tmp_path):
    model = small_model(5)
    path = tmp_path / "m.tlm"
    model.save(path)
    raw = path.read_bytes()
    assert raw[:4] == b"TLM1"
    back = TinyLM.load(path)
    assert back.config == model.config
    assert all(np.array_equal(back.params[k], model.params[k]) for k in model.params)
    assert back.to_bytes() == raw


def test_model_file_corruption_detected():
    raw = small_model().to_bytes()
    with pytest.raises(ValueError):
        TinyLM.from_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        TinyLM.from_bytes(raw[:-8])
    with pytest.raises(ValueError):
        TinyLM.from_bytes(raw + b"\0")


def test_generate_basics():
    model = small_model(6)
    assert generate(model, [1, 2, 3], 0, CachePolicy.dense()) == []
    out = generate(model, [1, 2, 3], 12, CachePolicy.dense())
    assert len(out) == 12 and all(0 <= t < 32 for t in out)
    assert out == generate(model, [1, 2, 3], 12, CachePolicy.dense())
    with pytest.raises(ValueError):
        generate(model, [], 3, CachePolicy.dense())


def test_generate_breaks_ties_by_lowest_id():
    model = TinyLM.zeros(SMALL)
    assert generate(model, [7], 4, CachePolicy.dense()) == [0, 0, 0, 0]


def test_generate_stops_at_end_token():
    model = TinyLM.zeros(SMALL)
    assert generate(model, [7], 10, CachePolicy.dense(), eos=0) == [0]


def test_sink_keeps_whole_prompt():
    model = small_model(7)
    prompt = [3, 1, 4, 1, 5, 9, 2, 6]
    out, caches = generate_session(model, prompt, 50, CachePolicy.sink(None, 6))
    for layer in caches:
        kept = layer.retained_original_positions()
        assert kept[: len(prompt)] == list(range(len(prompt)))
        assert len(kept) == len(prompt) + 6


def test_sink_rejects_prompt_larger_than_cache():
    with pytest.raises(ValueError, match="prompt must fit"):
        generate(small_model(), list(range(10)), 3, CachePolicy.sink(2, 4))


def test_dense_and_sink_agree_until_eviction():
    model = small_model(8)
    prompt = [5, 6, 7, 8]
    R = 10
    dense = generate(model, prompt, 30, CachePolicy.dense())
    sink = generate(model, prompt, 30, CachePolicy.sink(None, R))
    assert dense[:R] == sink[:R]


def test_zero_model_perplexity_is_vocab_size():
    model = TinyLM.zeros(ModelConfig())
    toks = list(np.random.default_rng(0).integers(0, 256, size=300))
    for policy in (CachePolicy.dense(), CachePolicy.window(64), CachePolicy.sink(4, 60)):
        assert streaming_perplexity(model, toks, policy) == 256.0
    assert sliding_perplexity(model, toks) == 256.0


def test_dense_perplexity_matches_uncached_pass():
    model = small_model(9)
    toks = list(np.random.default_rng(1).integers(0, 32, size=15))
    a = streaming_perplexity(model, toks, CachePolicy.dense())
    assert abs(a - full_perplexity(model, toks)) < 1e-9


def test_sliding_baseline_matches_per_step_recompute():
    model = small_model(10)
    toks = np.random.default_rng(2).integers(0, 32, size=40)
    W = 8
    bits = []
    for t in range(len(toks) - 1):
        ctx = toks[max(0, t - W + 1): t + 1]
        logits = forward_full(model, ctx)[-1]
        m = logits.max()
        bits.append((np.log(np.exp(logits - m).sum()) - (logits[toks[t + 1]] - m)) / np.log(2))
    want = 2 ** np.mean(bits)
    assert abs(sliding_perplexity(model, toks, window=W) - want) < 1e-9


def test_perplexity_needs_two_tokens():
    with pytest.raises(ValueError):
        streaming_perplexity(small_model(), [1], CachePolicy.dense())


def test_training_is_deterministic_and_reduces_loss():
    corpus = bytes(np.random.default_rng(0).integers(97, 123, size=4000).tolist())
    cfg = ModelConfig(n_layers=1, n_heads=2, d_model=16, d_ff=32, vocab_size=256, train_context_len=16)
    logs = [TrainingLog(), TrainingLog()]
    a = train_char_lm(corpus, cfg, steps=30, seed=3, history=logs[0])
    b = train_char_lm(corpus, cfg, steps=30, seed=3, history=logs[1])
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    assert logs[0].losses == logs[1].losses
    assert logs[0].final_loss < logs[0].initial_loss


def test_training_learns_alternating_pattern():
    cfg = ModelConfig(n_layers=1, n_heads=2, d_model=16, d_ff=32, vocab_size=256, train_context_len=16)
    log = TrainingLog()
    model = train_char_lm(b"ab" * 400, cfg, steps=300, seed=0, history=log)
    assert log.final_loss < 0.05
    assert streaming_perplexity(model, list(b"ab" * 20), CachePolicy.dense()) < 1.1


def test_training_rejects_small_corpus():
    with pytest.raises(ValueError, match="10x"):
        train_char_lm(b"x" * 100, ModelConfig(train_context_len=64), steps=1)


def test_grad_check_one_layer():
    cfg = ModelConfig(n_layers=1, n_heads=2, d_model=16, d_ff=32, vocab_size=32, train_context_len=8)
    model = TinyLM.init(cfg, seed=0)
    rng = np.random.default_rng(0)
    x, y = rng.integers(0, 32, size=(2, 8)), rng.integers(0, 32, size=(2, 8))
    assert grad_check(model, x, y, n_checks=100) < 1e-3


def test_grad_check_refuses_large_models():
    model = TinyLM.init(ModelConfig(), seed=0)
    with pytest.raises(ValueError):
        grad_check(model, np.zeros((1, 4), int), np.zeros((1, 4), int))


def test_gradient_vanishes_when_targets_equal_model_distribution():
    cfg = ModelConfig(n_layers=1, n_heads=2, d_model=16, d_ff=32, vocab_size=32, train_context_len=8)
    model = TinyLM.init(cfg, seed=1)
    x = np.random.default_rng(1).integers(0, 32, size=(2, 8))
    logits = forward_full(model, x)
    p = np.exp(logits - logits.max(-1, keepdims=True))
    p /= p.sum(-1, keepdims=True)
    _, grads = loss_and_grads(model, x, p)
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    assert norm < 1e-12


def test_finite_difference_error_is_second_order():
    cfg = ModelConfig(n_layers=1, n_heads=2, d_model=8, d_ff=16, vocab_size=16, train_context_len=6)
    model = TinyLM.init(cfg, seed=2)
    rng = np.random.default_rng(2)
    x, y = rng.integers(0, 16, size=(1, 6)), rng.integers(0, 16, size=(1, 6))
    _, grads = loss_and_grads(model, x, y)
    name, idx = "layers.0.w1", 5
    exact = grads[name].reshape(-1)[idx]
    e1 = abs(finite_difference(model, x, y, name, idx, 2e-3) - exact)
    e2 = abs(finite_difference(model, x, y, name, idx, 4e-3) - exact)
    # doubling h multiplies an O(h^2) error by about 4
    assert 2.5 < e2 / e1 < 5.5
