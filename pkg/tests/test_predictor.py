import numpy as np
import pytest

from conftest import spearman
from vredge import (PopularityPredictor, PredictorConfig, build_dataset,
                    encode_request, train_predictor, zipf_pmf)
from vredge.predictor import PredictorSample, encoding_matrix


def test_encode_request_reference(grid):
    vec = encode_request(grid, 1)
    assert vec.sum() == 4
    assert all(vec[t - 1] == 1.0 for t in (1, 2, 8, 9))


def test_encode_request_popcount_constant(grid):
    for k in range(1, 25):
        assert encode_request(grid, k).sum() == grid.fov_size


def test_encodings_of_disjoint_fovs_orthogonal(grid):
    # viewpoints 1 and 24 sit in opposite corners with empty overlap
    assert encode_request(grid, 1) @ encode_request(grid, 24) == 0.0


def test_encode_request_invalid(grid):
    with pytest.raises(ValueError):
        encode_request(grid, 0)


def _constant_gamma_trace(gamma, n_viewpoints, length, seed):
    pmf = zipf_pmf(gamma, n_viewpoints)
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(pmf)
    return [(int(np.searchsorted(cdf, rng.random(), side="right")) + 1, pmf)
            for _ in range(length)]


def test_build_dataset_sizes(tiny_grid):
    trace = _constant_gamma_trace(1.0, 4, 25, seed=0)
    assert len(build_dataset(trace, 24)) == 1
    assert len(build_dataset(trace, 10)) == 15
    with pytest.raises(ValueError):
        build_dataset(trace, 25)


def test_build_dataset_windows_overlap(tiny_grid):
    trace = _constant_gamma_trace(1.0, 4, 30, seed=1)
    samples = build_dataset(trace, 5)
    requests = [k for k, _ in trace]
    for i, sample in enumerate(samples):
        assert sample.requests == tuple(requests[i:i + 5])
        assert np.array_equal(sample.label, trace[i + 5][1])
        if i:
            assert sample.requests[:-1] == samples[i - 1].requests[1:]


def test_untrained_prediction_is_pmf(grid):
    cfg = PredictorConfig(window=6)
    model = PopularityPredictor(grid, cfg, seed=0)
    pmf = model.predict((1, 5, 7, 2, 24, 13))
    assert pmf.shape == (24,)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(pmf >= 0)


def test_predict_requires_full_window(grid):
    model = PopularityPredictor(grid, PredictorConfig(window=6), seed=0)
    with pytest.raises(ValueError):
        model.predict((1, 2, 3))


def test_inference_deterministic(grid):
    model = PopularityPredictor(grid, PredictorConfig(window=6), seed=3)
    window = (4, 4, 9, 1, 17, 6)
    assert np.array_equal(model.predict(window), model.predict(window))


def test_single_sample_overfits(tiny_grid):
    cfg = PredictorConfig(window=4, lstm_hidden=8, learning_rate=1e-2,
                          dropout=0.0, batch_size=1, epochs=300)
    model = PopularityPredictor(tiny_grid, cfg, seed=1)
    sample = PredictorSample((1, 2, 1, 3), zipf_pmf(1.0, 4))
    _, losses = train_predictor(model, [sample])
    assert losses[-1] < 1e-3
    assert losses[-1] < losses[0] / 100


def test_fixed_gamma_training_improves_tenfold(tiny_grid):
    trace = _constant_gamma_trace(1.0, 4, 400, seed=5)
    cfg = PredictorConfig(window=6, lstm_hidden=16, learning_rate=3e-3,
                          dropout=0.0, batch_size=32, epochs=40)
    model = PopularityPredictor(tiny_grid, cfg, seed=2)
    dataset = build_dataset(trace, cfg.window)
    _, losses = train_predictor(model, dataset)
    assert losses[-1] < losses[0] / 10


def test_training_loss_trend_negative(tiny_grid):
    trace = _constant_gamma_trace(1.0, 4, 300, seed=6)
    cfg = PredictorConfig(window=6, lstm_hidden=16, learning_rate=1e-3,
                          dropout=0.0, batch_size=32, epochs=25)
    model = PopularityPredictor(tiny_grid, cfg, seed=4)
    _, losses = train_predictor(model, build_dataset(trace, cfg.window))
    assert spearman(np.arange(len(losses)), losses) < 0


def test_trained_beats_uniform_predictor(tiny_grid):
    gamma, k = 1.0, 4
    trace = _constant_gamma_trace(gamma, k, 600, seed=7)
    cfg = PredictorConfig(window=6, lstm_hidden=16, learning_rate=3e-3,
                          dropout=0.1, batch_size=32, epochs=60)
    model = PopularityPredictor(tiny_grid, cfg, seed=5)
    train_predictor(model, build_dataset(trace, cfg.window))

    true_pmf = zipf_pmf(gamma, k)
    holdout = _constant_gamma_trace(gamma, k, 120, seed=8)
    eval_samples = build_dataset(holdout, cfg.window)
    model_mse = np.mean([np.sum((model.predict(s.requests) - true_pmf) ** 2)
                         for s in eval_samples])
    uniform_mse = np.sum((np.full(k, 1 / k) - true_pmf) ** 2)
    assert model_mse <= 0.25 * uniform_mse


def test_training_deterministic(tiny_grid):
    trace = _constant_gamma_trace(1.5, 4, 200, seed=9)

    def run():
        cfg = PredictorConfig(window=5, lstm_hidden=8, learning_rate=1e-3,
                              dropout=0.35, batch_size=16, epochs=5)
        model = PopularityPredictor(tiny_grid, cfg, seed=11)
        _, losses = train_predictor(model, build_dataset(trace, cfg.window))
        return losses, [p.copy() for p in model.params()]

    losses_a, params_a = run()
    losses_b, params_b = run()
    assert losses_a == losses_b
    assert all(np.array_equal(a, b) for a, b in zip(params_a, params_b))


def test_empty_dataset_rejected(grid):
    model = PopularityPredictor(grid, PredictorConfig(window=4), seed=0)
    with pytest.raises(ValueError):
        train_predictor(model, [])


def test_encoding_matrix_rows(grid):
    mat = encoding_matrix(grid)
    assert mat.shape == (24, 35)
    assert np.array_equal(mat[0], encode_request(grid, 1))
