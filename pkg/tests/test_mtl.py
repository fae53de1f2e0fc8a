"""Losses, classifiers, gradients, and the training loop."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osamtl.imaging import BinaryMask, GrayImage, TargetSet
from osamtl.mtl import (
    ACE,
    EPS,
    MSE,
    FEATURE_COUNT,
    JointObjective,
    LogisticFeatures,
    Prediction,
    SingleTargetObjective,
    TinyConvNet,
    TraceRow,
    TrainConfig,
    TrainExample,
    TrainingDiverged,
    ace,
    batch_loss,
    blend_targets,
    extract_features,
    grad_check,
    gradient,
    joint_grad_t,
    joint_loss,
    load_model,
    mse,
    predict,
    save_model,
    trace_csv,
    train,
    variance_term,
    verify_theorem1,
)
from osamtl.mtl.models import _conv_same


def _gray(values) -> GrayImage:
    return GrayImage(np.asarray(values, dtype=np.uint8))


def _mask(values) -> BinaryMask:
    return BinaryMask(np.asarray(values, dtype=bool))


def _random_target_set(rng: np.random.Generator, shape) -> TargetSet:
    t1 = rng.random(shape) < 0.4
    t2 = t1 & (rng.random(shape) < 0.6)
    return TargetSet(_mask(t1), _mask(t2))


def _random_examples(rng: np.random.Generator, count: int, shape=(10, 10)):
    out = []
    for _ in range(count):
        img = _gray(rng.integers(0, 256, size=shape))
        out.append(TrainExample(img, _random_target_set(rng, shape)))
    return out


class TestAce:
    def test_half_vs_one_is_ln2(self):
        assert ace(np.array([[0.5]]), np.array([[1.0]])) == pytest.approx(math.log(2))

    def test_identity_case_is_tiny(self):
        target = np.array([[1.0, 0.0], [0.0, 1.0]])
        value = ace(target, target)  # prediction is the clipped copy
        assert 0.0 < value <= 1.01e-7

    def test_hand_evaluated_pair(self):
        value = ace(np.array([0.9, 0.2]), np.array([1.0, 0.0]))
        assert value == pytest.approx(0.164252, abs=1e-6)

    def test_soft_target_accepted(self):
        value = ace(np.array([0.5]), np.array([0.25]))
        assert value == pytest.approx(math.log(2))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            ace(np.zeros((2, 2)) + 0.5, np.zeros((2, 3)))


class TestMse:
    def test_identity_is_zero_up_to_clipping(self):
        target = np.array([[1.0, 0.0]])
        assert mse(target, target) < 1e-13

    def test_quarter(self):
        assert mse(np.array([0.5]), np.array([1.0])) == pytest.approx(0.25)

    def test_hand_evaluated_pair(self):
        assert mse(np.array([0.9, 0.2]), np.array([1.0, 0.0])) == pytest.approx(0.025)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mse(np.zeros(3) + 0.5, np.zeros(4))


class TestJointLoss:
    def test_single_target_degenerates_to_base(self):
        rng = np.random.default_rng(7)
        t = rng.uniform(0.05, 0.95, size=(4, 4))
        target = (rng.random((4, 4)) < 0.5).astype(float)
        assert joint_loss(t, [target], ACE, alphas=(1.0,)) == ace(t, target)

    def test_identical_targets_degenerate(self):
        bits = np.zeros((3, 3), dtype=bool)
        bits[1, 1] = True
        tset = TargetSet(_mask(bits), _mask(bits))
        t = np.full((3, 3), 0.3)
        assert joint_loss(t, tset, ACE) == pytest.approx(ace(t, bits.astype(float)))

    def test_total_disagreement_gives_ln2(self):
        # Everything labelled positive by one target and negative by the other.
        tset = TargetSet(_mask(np.ones((4, 4))), _mask(np.zeros((4, 4))))
        t = np.full((4, 4), 0.5)
        assert joint_loss(t, tset, ACE) == pytest.approx(math.log(2))
        # Same number through the blended-target route.
        assert ace(t, blend_targets(tset)) == pytest.approx(math.log(2))

    def test_weight_sum_violation(self):
        t = np.full((2, 2), 0.5)
        masks = [np.ones((2, 2)), np.zeros((2, 2))]
        with pytest.raises(ValueError):
            joint_loss(t, masks, ACE, alphas=(1.0, 1.0))

    def test_negative_weight_rejected(self):
        t = np.full((2, 2), 0.5)
        masks = [np.ones((2, 2)), np.zeros((2, 2))]
        with pytest.raises(ValueError):
            joint_loss(t, masks, ACE, alphas=(1.5, -0.5))

    def test_unknown_base_rejected(self):
        tset = TargetSet(_mask(np.ones((2, 2))), _mask(np.zeros((2, 2))))
        with pytest.raises(ValueError):
            joint_loss(np.full((2, 2), 0.5), tset, "huber")

    @given(st.data())
    @settings(max_examples=60, deadline=None)
    def test_permutation_invariance_is_exact(self, data):
        k = data.draw(st.integers(min_value=2, max_value=4))
        n = 6
        floats = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
        masks = [
            np.array(data.draw(st.lists(floats, min_size=n, max_size=n)))
            for _ in range(k)
        ]
        raw = [data.draw(st.floats(min_value=0.01, max_value=10.0)) for _ in range(k)]
        alphas = tuple(a / sum(raw) for a in raw)
        t = np.array(
            data.draw(
                st.lists(
                    st.floats(min_value=0.01, max_value=0.99), min_size=n, max_size=n
                )
            )
        )
        perm = data.draw(st.permutations(range(k)))
        for base in (ACE, MSE):
            direct = joint_loss(t, masks, base, alphas=alphas)
            shuffled = joint_loss(
                t,
                [masks[i] for i in perm],
                base,
                alphas=tuple(alphas[i] for i in perm),
            )
            assert direct == shuffled


class TestVarianceTerm:
    def test_identical_targets_zero(self):
        m = (np.arange(9).reshape(3, 3) % 2).astype(float)
        assert variance_term([m, m], alphas=(0.5, 0.5)) == 0.0

    def test_full_disagreement_quarter(self):
        zero = np.zeros((2, 2))
        one = np.ones((2, 2))
        assert variance_term([zero, one], alphas=(0.5, 0.5)) == pytest.approx(0.25)

    def test_point_mass_zero(self):
        rng = np.random.default_rng(3)
        other = rng.random((3, 3))
        assert variance_term([np.zeros((3, 3)), other], alphas=(1.0, 0.0)) == 0.0

    @given(st.data())
    @settings(max_examples=60, deadline=None)
    def test_never_negative(self, data):
        k = data.draw(st.integers(min_value=2, max_value=4))
        n = 5
        floats = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
        masks = [
            np.array(data.draw(st.lists(floats, min_size=n, max_size=n)))
            for _ in range(k)
        ]
        raw = [data.draw(st.floats(min_value=0.01, max_value=10.0)) for _ in range(k)]
        alphas = tuple(a / sum(raw) for a in raw)
        assert variance_term(masks, alphas=alphas) >= 0.0


class TestBlendedFormIdentities:
    def test_ace_identity_100_random_draws(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            k = int(rng.integers(2, 5))
            masks = [rng.random((5, 5)) for _ in range(k)]
            raw = rng.uniform(0.1, 1.0, size=k)
            alphas = tuple(raw / raw.sum())
            t = rng.uniform(0.02, 0.98, size=(5, 5))
            assert verify_theorem1(t, masks, ACE, alphas=alphas) <= 1e-9

    def test_mse_identity_100_random_draws(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            k = int(rng.integers(2, 5))
            masks = [rng.random((5, 5)) for _ in range(k)]
            raw = rng.uniform(0.1, 1.0, size=k)
            alphas = tuple(raw / raw.sum())
            t = rng.uniform(0.02, 0.98, size=(5, 5))
            assert verify_theorem1(t, masks, MSE, alphas=alphas) <= 1e-9

    def test_binary_target_set_route(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            tset = _random_target_set(rng, (8, 8))
            t = rng.uniform(0.05, 0.95, size=(8, 8))
            assert verify_theorem1(t, tset, ACE) <= 1e-9
            assert verify_theorem1(t, tset, MSE) <= 1e-9

    def test_identical_targets_mse_collapses(self):
        m = (np.arange(16).reshape(4, 4) % 3 == 0).astype(float)
        t = np.full((4, 4), 0.4)
        assert variance_term([m, m], alphas=(0.5, 0.5)) == 0.0
        assert verify_theorem1(t, [m, m], MSE, alphas=(0.5, 0.5)) <= 1e-12


class TestExtractFeatures:
    def test_constant_image_has_zero_gradient_feature(self):
        feats = extract_features(_gray(np.full((9, 9), 140)))
        assert np.all(feats[:, :, 3] == 0.0)

    def test_feature_count_is_five(self):
        feats = extract_features(_gray(np.zeros((4, 6))))
        assert feats.shape == (4, 6, FEATURE_COUNT)
        assert FEATURE_COUNT == 5

    def test_bias_feature_is_one(self):
        feats = extract_features(_gray(np.full((5, 5), 17)))
        assert np.all(feats[:, :, 0] == 1.0)

    def test_dark_dot_center(self):
        field = np.full((16, 16), 230, dtype=np.uint8)
        field[8, 8] = 12
        feats = extract_features(_gray(field))
        assert feats[8, 8, 1] == pytest.approx(12 / 255)
        assert feats[8, 8, 4] == pytest.approx(12 / 255)
        assert feats[7, 7, 4] == pytest.approx(12 / 255)  # 3x3 window reach
        # The centred difference vanishes at the symmetric dot centre; the
        # slope shows up one pixel over.
        assert feats[7, 8, 3] > 0.0

    def test_all_features_bounded(self):
        rng = np.random.default_rng(5)
        feats = extract_features(_gray(rng.integers(0, 256, size=(12, 12))))
        assert feats.min() >= 0.0
        assert feats.max() <= 1.0 + 1e-12


class TestPredict:
    def test_zero_weights_give_half(self):
        pred = predict(LogisticFeatures(), _gray(np.full((6, 6), 90)))
        assert np.all(pred.probs == 0.5)

    def test_huge_bias_hits_upper_clip(self):
        model = LogisticFeatures(np.array([40.0, 0.0, 0.0, 0.0, 0.0]))
        pred = predict(model, _gray(np.full((3, 3), 90)))
        assert np.all(pred.probs == 1.0 - EPS)

    def test_matches_scalar_reimplementation(self):
        rng = np.random.default_rng(21)
        img = _gray(rng.integers(0, 256, size=(8, 8)))
        weights = np.array([0.3, -1.2, 0.7, 2.0, -0.4])
        pred = predict(LogisticFeatures(weights), img)
        feats = extract_features(img)
        for y in range(8):
            for x in range(8):
                logit = sum(weights[f] * feats[y, x, f] for f in range(5))
                p = 1.0 / (1.0 + math.exp(-logit))
                p = min(max(p, EPS), 1.0 - EPS)
                assert pred.probs[y, x] == pytest.approx(p, abs=1e-12)

    def test_prediction_clips_and_validates(self):
        pred = Prediction(np.array([[0.0, 1.0], [0.5, 2.0]]))
        assert pred.probs.min() == EPS
        assert pred.probs.max() == 1.0 - EPS
        with pytest.raises(ValueError):
            Prediction(np.zeros(4))

    def test_conv_matches_quadruple_loop(self):
        rng = np.random.default_rng(22)
        x = rng.normal(size=(2, 5, 5))
        w = rng.normal(size=(3, 2, 3, 3))
        b = rng.normal(size=3)
        got = _conv_same(x, w, b)
        padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
        for o in range(3):
            for h in range(5):
                for c in range(5):
                    acc = b[o]
                    for i in range(2):
                        for k in range(3):
                            for l in range(3):
                                acc += padded[i, h + k, c + l] * w[o, i, k, l]
                    assert got[o, h, c] == pytest.approx(acc, abs=1e-12)

    def test_tinyconv_init_is_seeded_and_bounded(self):
        a = TinyConvNet(seed=4)
        b = TinyConvNet(seed=4)
        c = TinyConvNet(seed=5)
        assert np.array_equal(a.get_params(), b.get_params())
        assert not np.array_equal(a.get_params(), c.get_params())
        assert np.max(np.abs(a.tensors["w1"])) <= 1.0 / 3.0  # fan_in 9

    def test_bad_weights_rejected(self):
        with pytest.raises(ValueError):
            LogisticFeatures(np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            LogisticFeatures(np.array([np.nan, 0.0, 0.0, 0.0, 0.0]))
        model = LogisticFeatures()
        with pytest.raises(ValueError):
            model.set_params(np.array([np.inf, 0.0, 0.0, 0.0, 0.0]))


class TestGradients:
    def test_grad_check_logistic_ace(self):
        rng = np.random.default_rng(31)
        model = LogisticFeatures(rng.normal(scale=0.5, size=5))
        batch = [_gray(rng.integers(0, 256, size=(10, 10))) for _ in range(2)]
        targets = [_random_target_set(rng, (10, 10)) for _ in range(2)]
        err = grad_check(model, batch, targets, TrainConfig(base_loss=ACE))
        assert err < 1e-4

    def test_grad_check_logistic_mse(self):
        rng = np.random.default_rng(32)
        model = LogisticFeatures(rng.normal(scale=0.5, size=5))
        batch = [_gray(rng.integers(0, 256, size=(10, 10))) for _ in range(2)]
        targets = [_random_target_set(rng, (10, 10)) for _ in range(2)]
        err = grad_check(model, batch, targets, TrainConfig(base_loss=MSE))
        assert err < 1e-4

    def test_grad_check_single_target_objective(self):
        rng = np.random.default_rng(33)
        model = LogisticFeatures(rng.normal(scale=0.5, size=5))
        batch = [_gray(rng.integers(0, 256, size=(9, 9)))]
        targets = [_random_target_set(rng, (9, 9))]
        obj = SingleTargetObjective("target2", ACE)
        err = grad_check(model, batch, targets, TrainConfig(), objective=obj)
        assert err < 1e-4

    def test_grad_check_tinyconv(self):
        rng = np.random.default_rng(34)
        model = TinyConvNet(seed=6)
        batch = [_gray(rng.integers(0, 256, size=(7, 7)))]
        targets = [_random_target_set(rng, (7, 7))]
        err = grad_check(model, batch, targets, TrainConfig(base_loss=ACE))
        assert err < 1e-4

    def test_zero_gradient_at_mse_blend_optimum(self):
        # Targets disagree everywhere, alphas 0.5 each, so the blend is the
        # constant 0.5 that zero weights already produce.
        tset = TargetSet(_mask(np.ones((6, 6))), _mask(np.zeros((6, 6))))
        model = LogisticFeatures()
        grad = gradient(
            model, [_gray(np.full((6, 6), 128))], [tset], TrainConfig(base_loss=MSE)
        )
        assert np.linalg.norm(grad) < 1e-8

    def test_per_pixel_minimizer_is_the_blend(self):
        rng = np.random.default_rng(35)
        masks = [rng.random((5, 5)) for _ in range(3)]
        alphas = (0.2, 0.5, 0.3)
        blended = blend_targets(masks, alphas=alphas)
        grad = joint_grad_t(np.clip(blended, 0.01, 0.99), masks, MSE, alphas=alphas)
        assert np.max(np.abs(grad)) < 1e-12

    def test_alpha_violation_rejected_before_gradient(self):
        with pytest.raises(ValueError):
            TrainConfig(alphas=(1.0, 1.0))

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            gradient(LogisticFeatures(), [], [], TrainConfig())


class _Exploding:
    """Objective stub whose loss goes non-finite immediately."""

    def value(self, probs, targets):
        return float("nan")

    def grad_t(self, probs, targets):
        return np.zeros_like(probs)


class TestTrain:
    def test_fixed_seed_reproduces_weights(self):
        rng = np.random.default_rng(41)
        examples = _random_examples(rng, 5)
        config = TrainConfig(epochs=3, batch_size=2, seed=9)
        first = train(examples, None, config)
        second = train(examples, None, config)
        assert np.array_equal(first.model.get_params(), second.model.get_params())

    def test_zero_epochs_returns_initial_model(self):
        rng = np.random.default_rng(42)
        examples = _random_examples(rng, 3)
        result = train(examples, None, TrainConfig(epochs=0))
        assert np.array_equal(result.model.get_params(), LogisticFeatures().get_params())
        assert result.trace == ()
        assert result.best_epoch == 0

    def test_divergence_aborts_with_diagnostic(self):
        rng = np.random.default_rng(43)
        examples = _random_examples(rng, 2)
        with pytest.raises(TrainingDiverged, match="epoch 1"):
            train(examples, _Exploding(), TrainConfig(epochs=2))

    def test_validation_selects_a_real_checkpoint(self):
        rng = np.random.default_rng(44)
        examples = _random_examples(rng, 6, shape=(12, 12))
        val = _random_examples(rng, 2, shape=(12, 12))
        config = TrainConfig(epochs=5, batch_size=3, seed=2, learning_rate=0.5)
        result = train(examples, None, config, val_examples=val)
        val_rows = [r for r in result.trace if r.split == "val"]
        assert len(val_rows) == 5
        best = max(range(5), key=lambda i: (val_rows[i].lf1, -i)) + 1
        assert result.best_epoch == best
        # Re-running for exactly best_epoch epochs lands on the same weights.
        shorter = train(examples, None, TrainConfig(
            epochs=best, batch_size=3, seed=2, learning_rate=0.5))
        assert np.array_equal(result.model.get_params(), shorter.model.get_params())

    def test_tinyconv_trains_deterministically(self):
        rng = np.random.default_rng(45)
        examples = _random_examples(rng, 3, shape=(8, 8))
        config = TrainConfig(epochs=2, batch_size=2, seed=1, learning_rate=0.01)
        first = train(examples, None, config, model=TinyConvNet(seed=0))
        second = train(examples, None, config, model=TinyConvNet(seed=0))
        assert np.array_equal(first.model.get_params(), second.model.get_params())

    def test_batch_loss_matches_mean_of_values(self):
        rng = np.random.default_rng(46)
        examples = _random_examples(rng, 3)
        model = LogisticFeatures(rng.normal(scale=0.3, size=5))
        obj = JointObjective(ACE)
        batch = [ex.image for ex in examples]
        targets = [ex.targets for ex in examples]
        expected = np.mean([
            obj.value(predict(model, img).probs, tset)
            for img, tset in zip(batch, targets)
        ])
        assert batch_loss(model, batch, targets, TrainConfig()) == pytest.approx(expected)

    def test_trace_csv_format(self):
        rows = (TraceRow(1, "train", 0.5, 0.25), TraceRow(1, "val", 0.625, 0.125))
        assert trace_csv(rows) == (
            "epoch,split,loss,lf1\n"
            "1,train,0.500000,0.250000\n"
            "1,val,0.625000,0.125000\n"
        )


class TestCheckpoints:
    def test_logistic_round_trip_is_exact(self, tmp_path):
        model = LogisticFeatures(np.array([math.pi, -1.5, 1e-9, 0.0, 2.75]))
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.kind == "logistic"
        assert np.array_equal(loaded.get_params(), model.get_params())

    def test_tinyconv_round_trip_is_exact(self, tmp_path):
        model = TinyConvNet(seed=8)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.kind == "tinyconv"
        assert np.array_equal(loaded.get_params(), model.get_params())

    def test_wrong_format_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text('{"format": "something-else", "kind": "logistic"}')
        with pytest.raises(ValueError):
            load_model(path)
