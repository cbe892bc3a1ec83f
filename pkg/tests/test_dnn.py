import random

import numpy as np
import pytest

from pcsat.dnn import (
    BadDims,
    FormatError,
    Network,
    ShapeMismatch,
    SingleClassData,
    TrainConfig,
    gradient_check,
    init_network,
    kfold_validate,
    load_network,
    predict,
    predict_batch,
    save_network,
    train,
)
from pcsat.vectorize import PcMatrix


def rand_matrix(rng, rows=2, t_max=3, lo=-9, hi=9):
    cells = tuple(
        tuple(rng.randint(lo, hi) for _ in range(t_max + 2)) for _ in range(rows)
    )
    return PcMatrix(cells, t_max)


def toy_separable(n=400, seed=0):
    # The sign of cell [0][0] determines the label.
    rng = random.Random(seed)
    data = []
    for _ in range(n):
        m = rand_matrix(rng)
        cells = [list(r) for r in m.cells]
        cells[0][0] = rng.choice([-7, -5, -3, 3, 5, 7])
        m = PcMatrix(tuple(tuple(r) for r in cells), m.t_max)
        data.append((m, cells[0][0] > 0))
    return data


class TestInit:
    def test_deterministic(self):
        a = init_network([110, 5, 5, 5, 5, 5, 1], seed=7)
        b = init_network([110, 5, 5, 5, 5, 5, 1], seed=7)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_bad_dims(self):
        with pytest.raises(BadDims):
            init_network([4, 0, 1], seed=0)
        with pytest.raises(BadDims):
            init_network([4, 5, 2], seed=0)
        with pytest.raises(BadDims):
            init_network([4], seed=0)

    def test_he_variance(self):
        dims = [110, 5, 5, 5, 5, 5, 1]
        per_layer = [[] for _ in range(len(dims) - 1)]
        for seed in range(10):
            net = init_network(dims, seed)
            for i, w in enumerate(net.weights):
                per_layer[i].append(w.ravel())
        for i, (fan_in, chunks) in enumerate(zip(dims[:-1], per_layer)):
            samples = np.concatenate(chunks)
            target = 2.0 / fan_in
            assert abs(samples.var() - target) <= 0.2 * target, f"layer {i}"


class TestPredict:
    def test_score_in_unit_interval(self):
        rng = random.Random(1)
        net = init_network([10, 5, 1], seed=3)
        for _ in range(50):
            score, label = predict(net, rand_matrix(rng, rows=2, t_max=3))
            assert 0.0 <= score <= 1.0
            assert label == (score >= 0.5)

    def test_zero_weights_score_half(self):
        net = init_network([10, 5, 1], seed=0)
        for w in net.weights:
            w[:] = 0.0
        score, label = predict(net, rand_matrix(random.Random(2)))
        assert score == 0.5
        assert label is True

    def test_shape_mismatch(self):
        net = init_network([10, 5, 1], seed=0)
        with pytest.raises(ShapeMismatch):
            predict(net, rand_matrix(random.Random(0), rows=3, t_max=3))

    def test_group_enforced(self):
        net = init_network([10, 5, 1], seed=0, group=(2, 5))
        bad = PcMatrix(((0,) * 10,), 8)  # 1x10 flattens to 10 as well
        with pytest.raises(ShapeMismatch):
            predict(net, bad)


class TestTrain:
    def test_learns_separable_data(self):
        data = toy_separable()
        net = init_network([10, 5, 5, 1], seed=1)
        cfg = TrainConfig(epochs=50, seed=1, patience=50, learning_rate=3e-3)
        trained, report = train(net, data, cfg)
        assert max(report.val_accuracies) >= 0.99

    def test_loss_decreases(self):
        data = toy_separable(seed=4)
        net = init_network([10, 5, 5, 1], seed=2)
        trained, report = train(net, data, TrainConfig(epochs=20, seed=2))
        assert report.epoch_losses[-1] < report.epoch_losses[0]

    def test_deterministic(self):
        data = toy_separable(seed=5)
        cfg = TrainConfig(epochs=5, seed=9)
        a, _ = train(init_network([10, 5, 1], seed=9), data, cfg)
        b, _ = train(init_network([10, 5, 1], seed=9), data, cfg)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_single_class_rejected(self):
        rng = random.Random(0)
        data = [(rand_matrix(rng), True) for _ in range(10)]
        with pytest.raises(SingleClassData):
            train(init_network([10, 5, 1], seed=0), data, TrainConfig())

    def test_mixed_shapes_rejected(self):
        rng = random.Random(0)
        data = [(rand_matrix(rng, rows=2), True), (rand_matrix(rng, rows=3), False)]
        with pytest.raises(ShapeMismatch):
            train(init_network([10, 5, 1], seed=0), data, TrainConfig())

    def test_input_network_untouched(self):
        data = toy_separable(seed=6)
        net = init_network([10, 5, 1], seed=3)
        before = [w.copy() for w in net.weights]
        train(net, data, TrainConfig(epochs=3, seed=3))
        for w0, w1 in zip(before, net.weights):
            assert np.array_equal(w0, w1)

    def test_col_scale_floor_one(self):
        data = toy_separable(seed=7)
        trained, _ = train(
            init_network([10, 5, 1], seed=0), data, TrainConfig(epochs=2, seed=0)
        )
        assert (trained.col_scale >= 1.0).all()


class TestGradients:
    def test_analytic_matches_central_differences(self):
        # Small random biases keep every ReLU pre-activation away from its
        # kink, where one-sided subgradients would spoil the comparison.
        rng = np.random.default_rng(0)
        for seed in range(20):
            net = init_network([6, 5, 5, 1], seed=seed)
            for b in net.biases:
                b += rng.normal(0.0, 0.1, b.shape)
            x = rng.normal(size=(8, 6))
            y = (rng.random(8) > 0.5).astype(float)
            assert gradient_check(net, x, y) <= 1e-4


class TestKfold:
    def test_partitions_cover_and_disjoint(self):
        data = toy_separable(n=50, seed=8)
        cfg = TrainConfig(epochs=2, seed=1, k=5)
        accs, mean = kfold_validate(data, [10, 5, 1], cfg)
        assert len(accs) == 5
        assert mean == pytest.approx(sum(accs) / 5)

    def test_one_record_folds(self):
        data = toy_separable(n=10, seed=9)
        cfg = TrainConfig(epochs=1, seed=2, k=10)
        accs, _ = kfold_validate(data, [10, 5, 1], cfg)
        assert len(accs) == 10

    def test_k_bounds(self):
        data = toy_separable(n=10, seed=10)
        with pytest.raises(Exception):
            kfold_validate(data, [10, 5, 1], TrainConfig(k=1))
        with pytest.raises(Exception):
            kfold_validate(data, [10, 5, 1], TrainConfig(k=11))


class TestSerialization:
    def test_round_trip_predictions(self, tmp_path):
        data = toy_separable(seed=11)
        trained, _ = train(
            init_network([10, 5, 1], seed=4), data, TrainConfig(epochs=3, seed=4)
        )
        path = tmp_path / "model.json"
        save_network(trained, path)
        loaded = load_network(path)
        rng = random.Random(12)
        ms = [rand_matrix(rng) for _ in range(100)]
        assert np.array_equal(predict_batch(trained, ms), predict_batch(loaded, ms))

    def test_truncated_file(self, tmp_path):
        data = toy_separable(seed=13)
        trained, _ = train(
            init_network([10, 5, 1], seed=5), data, TrainConfig(epochs=2, seed=5)
        )
        path = tmp_path / "model.json"
        save_network(trained, path)
        path.write_text(path.read_text()[: 50])
        with pytest.raises(FormatError):
            load_network(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text('{"version": "2"}')
        with pytest.raises(FormatError):
            load_network(path)
