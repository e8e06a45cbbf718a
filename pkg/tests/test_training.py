import numpy as np
import pytest

import papernet.training as training_mod
from papernet.data import stratified_split
from papernet.errors import ConfigError, TrainingError
from papernet.model import build_papernet
from papernet.tensor import Tensor, softmax_lastaxis
from papernet.training import (
    AdamState,
    EarlyStopper,
    PlateauScheduler,
    TrainConfig,
    adam_step,
    predict_probs,
    train,
    weighted_cross_entropy,
)

from conftest import make_synthetic


def history_rows_without_seconds(path):
    lines = path.read_text().strip().splitlines()
    return [",".join(line.split(",")[:-1]) for line in lines]


class TestWeightedCrossEntropy:
    def test_perfect_predictions_zero_loss(self):
        onehot = np.eye(4)[[0, 1, 2, 3]]
        loss = weighted_cross_entropy(Tensor(onehot.astype(np.float64)), onehot)
        assert loss.item() == 0.0

    def test_uniform_probs_log_k(self):
        probs = Tensor(np.full((8, 4), 0.25))
        onehot = np.eye(4)[np.arange(8) % 4]
        loss = weighted_cross_entropy(probs, onehot)
        assert loss.item() == pytest.approx(np.log(4.0), rel=1e-6)

    def test_weight_scales_linearly(self):
        probs = Tensor(np.full((6, 4), 0.25))
        onehot = np.eye(4)[np.zeros(6, dtype=int)]
        loss = weighted_cross_entropy(probs, onehot, class_w=[2.0, 1.0, 1.0, 1.0])
        assert loss.item() == pytest.approx(2.0 * np.log(4.0), rel=1e-6)

    def test_l2_penalty_added(self):
        model = build_papernet(seed=0, dtype=np.float64)
        probs = Tensor(np.full((4, 4), 0.25))
        onehot = np.eye(4)
        plain = weighted_cross_entropy(probs, onehot).item()
        with_l2 = weighted_cross_entropy(probs, onehot, model=model, l2=1e-3).item()
        expected_penalty = 1e-3 * sum(
            float(np.sum(w.data**2)) for w in model.weight_matrices()
        )
        assert with_l2 - plain == pytest.approx(expected_penalty, rel=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            weighted_cross_entropy(Tensor(np.full((2, 4), 0.25)), np.eye(4))


class TestAdam:
    def test_first_step_magnitude(self):
        p = {"w": Tensor(np.array([1.0]), requires_grad=True)}
        p["w"].grad = np.array([1.0], dtype=np.float32)
        state = AdamState.for_params(p)
        adam_step(p, state, lr=1e-3)
        delta = p["w"].data[0] - 1.0
        assert delta == pytest.approx(-1e-3 / (1.0 + 1e-7), rel=1e-5)

    def test_zero_gradient_fixed_point(self):
        p = {"w": Tensor(np.array([2.5, -1.0]), requires_grad=True)}
        p["w"].grad = np.zeros(2, dtype=np.float32)
        adam_step(p, AdamState.for_params(p), lr=1e-3)
        np.testing.assert_array_equal(p["w"].data, [2.5, -1.0])

    def test_constant_gradient_recurrence_oracle(self):
        # independent scalar recurrence, iterated in plain python
        g, lr, b1, b2, eps = 0.7, 1e-3, 0.9, 0.999, 1e-7
        m = v = 0.0
        theta_expected = 5.0
        p = {"w": Tensor(np.array([5.0], dtype=np.float64), requires_grad=True)}
        state = AdamState.for_params(p)
        for t in range(1, 11):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            step = lr * m_hat / (np.sqrt(v_hat) + eps)
            theta_expected -= step
            p["w"].grad = np.array([g])
            adam_step(p, state, lr)
            assert p["w"].data[0] == pytest.approx(theta_expected, rel=1e-12)
            # constant gradient: per-step move approaches lr * sign(g)
            assert step == pytest.approx(lr, rel=1e-3)

    def test_non_finite_gradient_aborts(self):
        p = {"w": Tensor(np.array([1.0]), requires_grad=True)}
        p["w"].grad = np.array([np.inf], dtype=np.float32)
        with pytest.raises(TrainingError, match="w"):
            adam_step(p, AdamState.for_params(p), lr=1e-3)


class TestPlateauScheduler:
    def test_improving_keeps_lr(self):
        sched = PlateauScheduler(1e-3)
        for f1 in (0.5, 0.6, 0.7, 0.8):
            assert sched.observe(f1) == 1e-3

    def test_flat_three_epochs_halves(self):
        sched = PlateauScheduler(1e-3)
        sched.observe(0.5)
        assert sched.observe(0.5) == 1e-3
        assert sched.observe(0.5) == 1e-3
        assert sched.observe(0.5) == 5e-4

    def test_floors_at_min_lr(self):
        sched = PlateauScheduler(1e-3, min_lr=1e-6)
        sched.observe(0.9)
        for _ in range(40):
            lr = sched.observe(0.9)
        assert lr == 1e-6

    def test_lr_sequence_non_increasing(self):
        rng = np.random.default_rng(0)
        sched = PlateauScheduler(1e-3)
        last = 1e-3
        for f1 in rng.random(50):
            lr = sched.observe(f1)
            assert lr <= last
            last = lr


class TestEarlyStopper:
    def test_monotone_never_stops(self):
        stop = EarlyStopper()
        for f1 in np.linspace(0.1, 0.9, 60):
            assert not stop.observe(f1)

    def test_single_peak_then_flat_stops_at_seven(self):
        stop = EarlyStopper()
        flags = [stop.observe(f1) for f1 in [0.9] + [0.85] * 6]
        assert flags == [False] * 6 + [True]
        assert stop.best_epoch == 1

    def test_tie_keeps_earliest(self):
        stop = EarlyStopper()
        for f1 in (0.5, 0.8, 0.6, 0.7, 0.8):
            stop.observe(f1)
        assert stop.best_epoch == 2


class TestTrainLoop:
    def _setup(self, n=240, seed=3):
        features, labels = make_synthetic(n=n, seed=seed)
        features = (features - features.mean(axis=0)) / features.std(axis=0)
        splits = stratified_split(labels, seed=0)
        return features, labels, splits

    def _config(self, **kw):
        base = dict(batch_size=32, max_epochs=2, seed=1)
        base.update(kw)
        return TrainConfig(**base)

    def test_determinism_bitwise(self, tmp_path):
        features, labels, splits = self._setup()
        outs = []
        for run in ("a", "b"):
            outdir = tmp_path / run
            model = build_papernet(seed=5)
            train(model, features, labels, splits, self._config(), outdir=outdir)
            outs.append(outdir)
        assert (outs[0] / "weights_best").read_bytes() == (outs[1] / "weights_best").read_bytes()
        assert (outs[0] / "weights_final").read_bytes() == (outs[1] / "weights_final").read_bytes()
        assert history_rows_without_seconds(outs[0] / "history.csv") == \
            history_rows_without_seconds(outs[1] / "history.csv")

    def test_zero_lr_leaves_parameters_bitwise_unchanged(self):
        features, labels, splits = self._setup()
        model = build_papernet(seed=6)
        before = {k: v.data.copy() for k, v in model.trainable().items()}
        config = self._config(lr0=0.0, min_lr=1e-30, dropout=0.0,
                              class_weighting=False, max_epochs=1)
        train(model, features, labels, splits, config)
        for name, arr in before.items():
            np.testing.assert_array_equal(arr, model.params[name].data)

    def test_one_adam_step_per_batch(self, monkeypatch):
        features, labels, splits = self._setup()
        calls = []
        real = training_mod.adam_step

        def counting(params, state, lr):
            calls.append(lr)
            return real(params, state, lr)

        monkeypatch.setattr(training_mod, "adam_step", counting)
        config = self._config(max_epochs=3, batch_size=32)
        train(build_papernet(seed=7), features, labels, splits, config)
        n_train = len(splits.train)
        assert len(calls) == 3 * int(np.ceil(n_train / 32))

    def test_best_checkpoint_at_least_final(self):
        features, labels, splits = self._setup()
        model = build_papernet(seed=8)
        best, final, history = train(
            model, features, labels, splits, self._config(max_epochs=4)
        )

        def val_f1(m):
            from papernet.metrics import confusion, prf_metrics

            probs = predict_probs(m, features[splits.val])
            return prf_metrics(
                confusion(labels[splits.val], probs.argmax(axis=1), 4)
            ).macro_f1

        assert val_f1(best) >= val_f1(final) - 1e-12
        assert history.best_val_macro_f1() == pytest.approx(val_f1(best), abs=1e-12)

    def test_history_lr_column_non_increasing(self):
        features, labels, splits = self._setup()
        _, _, history = train(
            build_papernet(seed=9), features, labels, splits, self._config(max_epochs=3)
        )
        lrs = [r.lr for r in history.records]
        assert all(a >= b for a, b in zip(lrs, lrs[1:]))
        assert all(r.epoch == i + 1 for i, r in enumerate(history.records))

    def test_non_finite_loss_aborts_with_context(self):
        features, labels, splits = self._setup()
        model = build_papernet(seed=10)
        config = self._config(lr0=1e18, max_epochs=2)  # blows up immediately
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(TrainingError, match="epoch"):
                train(model, features, labels, splits, config)

    def test_learns_separable_data(self):
        features, labels, splits = self._setup(n=400, seed=11)
        config = self._config(max_epochs=8, batch_size=64)
        _, _, history = train(
            build_papernet(seed=12), features, labels, splits, config
        )
        assert history.best_val_macro_f1() > 0.8

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(batch_size=0).validate()
        with pytest.raises(ConfigError):
            TrainConfig(plateau_factor=1.5).validate()
        with pytest.raises(ConfigError):
            TrainConfig(dropout=1.0).validate()
        with pytest.raises(ConfigError):
            TrainConfig(seed=-1).validate()


class TestSoftmaxIntoLoss:
    def test_gradient_direction_reduces_loss(self):
        rng = np.random.default_rng(13)
        logits = Tensor(rng.normal(size=(16, 4)), requires_grad=True, dtype=np.float64)
        onehot = np.eye(4)[rng.integers(0, 4, size=16)]
        from papernet.tensor import ComputationTape, backward

        with ComputationTape() as tape:
            loss = weighted_cross_entropy(softmax_lastaxis(logits), onehot)
            backward(tape, loss)
        stepped = Tensor(logits.data - 0.1 * logits.grad, dtype=np.float64)
        new_loss = weighted_cross_entropy(softmax_lastaxis(stepped), onehot)
        assert new_loss.item() < loss.item()
