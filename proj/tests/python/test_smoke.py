import math

import numpy as np
import pytest

import drnn


def test_tokenize_and_vocab():
    sents = drnn.tokenize("The cat sat. The dog sat!")
    assert sents == [["the", "cat", "sat", "."], ["the", "dog", "sat", "!"]]
    vocab = drnn.build_vocab(sents)
    assert vocab.words[-3:] == ["SENTENCE_START", "SENTENCE_END", "UNKNOWN_TOKEN"]
    assert vocab.words[:2] == ["the", "sat"]
    pairs = drnn.make_training_pairs(sents, vocab)
    assert pairs[0].input[0] == vocab.start_id
    assert pairs[0].label[-1] == vocab.end_id
    with pytest.raises(ValueError):
        drnn.build_vocab(sents, 0)


def test_uniform_model_perplexity():
    sents = drnn.tokenize("a b c. b c a. c a b.")
    vocab = drnn.build_vocab(sents)
    pairs = drnn.make_training_pairs(sents, vocab)
    params = drnn.LstmStackParams.zeros(len(vocab), 4)
    total, tokens, ppl = drnn.evaluate(params, pairs)
    assert tokens == 15  # 4 tokens per sentence plus the end marker
    assert ppl == pytest.approx(len(vocab), rel=1e-9)  # the 1e-12 probability floor shifts it slightly
    assert ppl == pytest.approx(math.exp(total / tokens), rel=1e-12)


def test_forward_outputs_are_distributions():
    params = drnn.init_params(9, 5, 1)
    outs = drnn.stack_forward(params, [0, 3, 8])
    assert len(outs) == 3
    for o in outs:
        assert o.shape == (9,)
        assert o.sum() == pytest.approx(1.0, abs=1e-12)
    assert [drnn.hard_sigmoid(v) for v in (-3.0, 0.0, 1.0, 3.0)] == pytest.approx([0.0, 0.5, 0.7, 1.0])


def test_training_reduces_loss(tmp_path):
    sents = drnn.tokenize("the cat sat on the mat. the dog sat on the mat. a cat ran home.")
    vocab = drnn.build_vocab(sents)
    pairs = drnn.make_training_pairs(sents, vocab)
    params = drnn.init_params(len(vocab), 8, 2)
    cfg = drnn.TrainConfig()
    cfg.epochs = 30
    cfg.learning_rate = 0.05
    log = drnn.train(params, pairs, cfg)
    assert len(log.epochs) == 30
    assert log.epochs[-1].mean_loss < log.epochs[0].mean_loss
    path = tmp_path / "m.drnn"
    drnn.save_model(params, path)
    back = drnn.load_model(path)
    for name, arr in params.arrays().items():
        assert np.array_equal(arr, back.arrays()[name])
    (path.parent / "bad.drnn").write_bytes(b"nope")
    with pytest.raises(RuntimeError):
        drnn.load_model(path.parent / "bad.drnn")


def test_gradient_shapes_match_parameters():
    params = drnn.init_params(6, 3, 4)
    pair = drnn.TrainingPair()
    pair.input = [0, 1, 2]
    pair.label = [1, 2, 3]
    loss, grads = drnn.bptt_gradients(params, pair)
    assert loss > 0
    for name, arr in params.arrays().items():
        assert grads.arrays()[name].shape == arr.shape


def test_fixed_point():
    fmt = drnn.FixedPointFormat(8, 8)
    assert drnn.quantize(1.5, fmt) == 384
    assert drnn.quantize(200.0, fmt) == 32767
    assert drnn.quantize(-200.0, fmt) == -32768
    assert drnn.dequantize(384, fmt) == 1.5
    with pytest.raises(ValueError):
        drnn.FixedPointFormat(10, 10)


def test_accelerator_golden_and_throughput():
    ok, hw, sw = drnn.golden_test()
    assert ok
    assert hw == [1275 * (r + 1) for r in range(50)]
    assert hw == sw

    core = drnn.AcceleratorCore()
    core.load_weights([[r + 1] * 50 for r in range(50)])
    y, report = core.run_batch(list(range(1, 51)))
    assert y == hw
    assert (report.mult_ops, report.add_ops, report.latency_ns, report.gops) == (2500, 2500, 250.0, 20.0)
    assert core.stream_roundtrip(list(range(1, 51))) == hw

    modeled, rows = drnn.throughput_report()
    assert modeled.gops == 20.0
    assert rows[0]["speedup"] == pytest.approx(70.5, abs=0.1)
    assert rows[1]["speedup"] == pytest.approx(2.75, abs=0.05)

    cfg = drnn.AcceleratorConfig()
    cfg.lanes_per_pe = 0
    with pytest.raises(ValueError):
        drnn.AcceleratorCore(cfg)


def test_fixed_matvec_within_bound():
    rng = np.random.default_rng(0)
    core = drnn.AcceleratorCore()
    fmt = drnn.FixedPointFormat()
    for _ in range(20):
        w = rng.uniform(-1, 1, (50, 50))
        x = rng.uniform(-1, 1, 50)
        y, _ = core.matvec_fixed(w, x, fmt)
        bound = drnn.matvec_error_bound(50, np.abs(x).max(), np.abs(w).max(), fmt)
        assert np.abs(y - w @ x).max() <= bound
