import dataclasses
import math

import numpy as np
import pytest

from recallkit.domain import Direction, group_histories
from recallkit.mlr import (
    CollinearFeaturesError,
    FeatureVector,
    PerfectSeparationError,
    build_training_examples,
    extract_features,
    feature_group_sums,
    fit_mlr,
    predict_mlr,
    select_windows,
)
from recallkit.params import REFERENCE_MLR_PARAMS, MLRParams

from conftest import make_trial

W = REFERENCE_MLR_PARAMS.windows  # (6, 5, 3)

ZERO_PARAMS = MLRParams(
    beta=0.0,
    w_c=(0.0,) * 6,
    w_t=(0.0,) * 5,
    w_s=(0.0,) * 3,
    w_r0=0.0,
    w_r1=0.0,
    w_r2=0.0,
    n=6,
    m=5,
    l=3,
)


class TestExtractFeatures:
    def test_empty_history(self):
        fv = extract_features([], 1000, Direction.FORWARD, W)
        assert fv.correctness == ()
        assert fv.log_recency == ()
        assert fv.log_spacing == ()
        assert fv.same_direction_share == 0.0
        assert fv.trial_count == 0.0
        assert fv.log_span == 0.0

    def test_single_correct_trial_60s_ago(self):
        fv = extract_features([make_trial(940)], 1000, Direction.FORWARD, W)
        ln60 = math.log(60)
        assert fv.correctness == (1.0,)
        assert fv.log_recency == (pytest.approx(ln60),)
        assert fv.log_spacing == ()
        assert fv.same_direction_share == 1.0
        assert fv.trial_count == 1.0
        assert fv.log_span == pytest.approx(ln60)

    def test_three_trials_yield_one_spacing_term(self):
        # Spacing term k spans trials k+1 and k+2 (most recent first), so
        # three past trials produce exactly the gap between trials 2 and 3.
        trials = [make_trial(100), make_trial(160), make_trial(220)]
        fv = extract_features(trials, 1000, Direction.FORWARD, W)
        assert len(fv.log_spacing) == 1
        assert fv.log_spacing[0] == pytest.approx(math.log(60))  # t2 - t3

    def test_two_trials_yield_no_spacing_term(self):
        trials = [make_trial(100), make_trial(200)]
        fv = extract_features(trials, 1000, Direction.FORWARD, W)
        assert fv.log_spacing == ()

    def test_reverse_chronological_indexing(self):
        trials = [make_trial(100, correct=False), make_trial(500, correct=True)]
        fv = extract_features(trials, 1000, Direction.FORWARD, W)
        assert fv.correctness == (1.0, 0.0)  # trial 1 is the most recent
        assert fv.log_recency[0] == pytest.approx(math.log(500))
        assert fv.log_recency[1] == pytest.approx(math.log(900))

    def test_direction_share_counts_query_direction(self):
        trials = [
            make_trial(100, direction=Direction.FORWARD),
            make_trial(200, direction=Direction.BACKWARD),
            make_trial(300, direction=Direction.BACKWARD),
            make_trial(400, direction=Direction.BACKWARD),
        ]
        fv = extract_features(trials, 1000, Direction.BACKWARD, W)
        assert fv.same_direction_share == pytest.approx(0.75)
        fv = extract_features(trials, 1000, Direction.FORWARD, W)
        assert fv.same_direction_share == pytest.approx(0.25)

    def test_now_at_last_trial_rejected(self):
        with pytest.raises(ValueError):
            extract_features([make_trial(1000)], 1000, Direction.FORWARD, W)

    def test_same_second_gap_clamps_to_ln_1(self):
        # Trials 2 and 3 (most recent first) share a timestamp, so the
        # spacing term's ln argument is 0 s and clamps to 1.
        trials = [make_trial(500), make_trial(500), make_trial(600)]
        fv = extract_features(trials, 1000, Direction.FORWARD, W)
        assert fv.log_spacing[0] == 0.0

    def test_windows_truncate_components(self):
        trials = [make_trial(100 * i) for i in range(1, 9)]
        fv = extract_features(trials, 10_000, Direction.FORWARD, (2, 3, 1))
        assert len(fv.correctness) == 2
        assert len(fv.log_recency) == 3
        assert len(fv.log_spacing) == 1


class TestPredict:
    def test_empty_history_is_sigma_beta(self):
        fv = extract_features([], 1000, Direction.FORWARD, W)
        assert predict_mlr(REFERENCE_MLR_PARAMS, fv) == pytest.approx(
            0.6163773570927845, abs=1e-12
        )

    def test_worked_single_trial_example(self):
        # One correct same-direction trial 60 s earlier with the reference
        # coefficients; logit assembled by hand from the five group sums.
        fv = extract_features([make_trial(940)], 1000, Direction.FORWARD, W)
        correctness, recency, spacing, share, long_range = feature_group_sums(
            REFERENCE_MLR_PARAMS, fv
        )
        ln60 = math.log(60)
        assert correctness == pytest.approx(1.8193)
        assert recency == pytest.approx(-0.0958 * ln60)
        assert spacing == 0.0
        assert share == pytest.approx(0.2126)
        assert long_range == pytest.approx(-0.0719 + 0.0407 * ln60)
        logit = 0.4742 + correctness + recency + spacing + share + long_range
        assert logit == pytest.approx(2.2086016146215623, abs=1e-12)
        assert predict_mlr(REFERENCE_MLR_PARAMS, fv) == pytest.approx(
            0.9010192837894162, abs=1e-12
        )

    def test_all_zero_weights_give_half(self):
        trials = [make_trial(100 * i, correct=i % 2 == 0) for i in range(1, 8)]
        fv = extract_features(trials, 10_000, Direction.FORWARD, W)
        assert predict_mlr(ZERO_PARAMS, fv) == 0.5

    def test_non_finite_feature_rejected(self):
        fv = FeatureVector(
            correctness=(1.0,),
            log_recency=(math.inf,),
            log_spacing=(),
            same_direction_share=0.0,
            trial_count=1.0,
            log_span=0.0,
        )
        with pytest.raises(ValueError):
            predict_mlr(REFERENCE_MLR_PARAMS, fv)

    def test_truncation_consistency(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            h = int(rng.integers(0, 9))
            stamps = np.sort(rng.integers(1, 10_000, size=h))
            trials = [
                make_trial(int(t) + i, correct=bool(rng.random() < 0.6))
                for i, t in enumerate(stamps)
            ]
            now = 20_000
            full = extract_features(trials, now, Direction.FORWARD, W)
            shrunk_windows = (min(6, h), min(5, h), min(3, max(0, h - 2)))
            shrunk = extract_features(trials, now, Direction.FORWARD, shrunk_windows)
            p_full = predict_mlr(REFERENCE_MLR_PARAMS, full)
            shrunk_params = dataclasses.replace(
                REFERENCE_MLR_PARAMS,
                w_c=REFERENCE_MLR_PARAMS.w_c[: shrunk_windows[0]],
                w_t=REFERENCE_MLR_PARAMS.w_t[: shrunk_windows[1]],
                w_s=REFERENCE_MLR_PARAMS.w_s[: shrunk_windows[2]],
                n=shrunk_windows[0],
                m=shrunk_windows[1],
                l=shrunk_windows[2],
            )
            assert predict_mlr(shrunk_params, shrunk) == pytest.approx(p_full, abs=1e-15)

    def test_correctness_flip_weakly_increases_probability(self):
        # All reference correctness weights are positive, so flipping any
        # in-window trial from incorrect to correct must not lower p.
        rng = np.random.default_rng(11)
        for _ in range(30):
            h = int(rng.integers(1, 8))
            stamps = sorted(int(v) for v in rng.integers(1, 5000, size=h))
            stamps = [s + i for i, s in enumerate(stamps)]
            correct = [bool(rng.random() < 0.5) for _ in range(h)]
            flip_at = int(rng.integers(0, h))
            base = [make_trial(t, correct=c) for t, c in zip(stamps, correct)]
            flipped_corr = list(correct)
            flipped_corr[flip_at] = True
            flipped = [make_trial(t, correct=c) for t, c in zip(stamps, flipped_corr)]
            now = 10_000
            p_base = predict_mlr(
                REFERENCE_MLR_PARAMS,
                extract_features(base, now, Direction.FORWARD, W),
            )
            p_flip = predict_mlr(
                REFERENCE_MLR_PARAMS,
                extract_features(flipped, now, Direction.FORWARD, W),
            )
            assert p_flip >= p_base - 1e-15

    def test_recency_decay_with_full_window(self):
        # With >= 5 past trials every recency weight is active and the sum
        # of recency weights plus the long-range log-age weight is negative,
        # so pushing `now` later strictly lowers the prediction.
        trials = [make_trial(1000 * i) for i in range(1, 7)]
        probs = [
            predict_mlr(
                REFERENCE_MLR_PARAMS,
                extract_features(trials, now, Direction.FORWARD, W),
            )
            for now in (10_000, 100_000, 10_000_000, 3_000_000_000)
        ]
        assert all(a > b for a, b in zip(probs, probs[1:]))


def _logistic_dataset(rng, n, coefs, windows=(2, 1, 0)):
    """Synthetic (FeatureVector, label) pairs with known coefficients."""
    examples = []
    for _ in range(n):
        h = int(rng.integers(0, 6))
        correctness = tuple(float(rng.random() < 0.5) for _ in range(min(2, h)))
        recency = tuple(float(rng.uniform(3, 12)) for _ in range(min(1, h)))
        fv = FeatureVector(
            correctness=correctness,
            log_recency=recency,
            log_spacing=(),
            same_direction_share=float(rng.random()) if h else 0.0,
            trial_count=float(h),
            log_span=float(rng.uniform(3, 14)) if h else 0.0,
        )
        from recallkit.mlr import design_row

        logit = float(np.dot(coefs, design_row(fv, windows)))
        examples.append((fv, bool(rng.random() < 1 / (1 + math.exp(-logit)))))
    return examples


class TestFit:
    def test_intercept_only_matches_closed_form(self):
        fv = FeatureVector((), (), (), 0.0, 0.0, 0.0)
        dataset = [(fv, True)] * 70 + [(fv, False)] * 30
        fit = fit_mlr(dataset, (0, 0, 0))
        expected = math.log(0.7 / 0.3)
        se = math.sqrt(1.0 / (100 * 0.7 * 0.3))
        assert fit.params.beta == pytest.approx(expected, abs=1e-8)
        assert fit.standard_errors[0] == pytest.approx(se, rel=1e-6)
        assert fit.converged

    def test_single_class_rejected(self):
        fv = FeatureVector((), (), (), 0.0, 0.0, 0.0)
        with pytest.raises(ValueError, match="negative"):
            fit_mlr([(fv, True)] * 10, (0, 0, 0))
        with pytest.raises(ValueError, match="positive"):
            fit_mlr([(fv, False)] * 10, (0, 0, 0))

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            fit_mlr([], (0, 0, 0))

    def test_recovery_within_two_standard_errors(self):
        rng = np.random.default_rng(3)
        truth = np.array([0.4, 1.5, 0.7, -0.3, 0.5, -0.15, 0.1])
        dataset = _logistic_dataset(rng, 8000, truth)
        fit = fit_mlr(dataset, (2, 1, 0))
        from recallkit.mlr import coefficient_vector

        recovered = coefficient_vector(fit.params)
        misses = sum(
            abs(est - true) > 2 * se
            for est, true, se in zip(recovered, truth, fit.standard_errors)
        )
        assert misses <= 1  # ~5% expected miss rate at 2 SE

    def test_calibration_of_fitted_model(self):
        rng = np.random.default_rng(5)
        truth = np.array([0.2, 1.0, -0.5, -0.2, 0.3, -0.1, 0.05])
        dataset = _logistic_dataset(rng, 6000, truth)
        fit = fit_mlr(dataset, (2, 1, 0))
        preds = [predict_mlr(fit.params, fv) for fv, _ in dataset]
        rate = sum(label for _, label in dataset) / len(dataset)
        assert np.mean(preds) == pytest.approx(rate, abs=0.01)

    def test_perfect_separation_detected(self):
        # trial_count separates labels exactly.
        pos = FeatureVector((), (), (), 0.0, 5.0, 0.0)
        neg = FeatureVector((), (), (), 0.0, 1.0, 0.0)
        dataset = [(pos, True)] * 40 + [(neg, False)] * 40
        with pytest.raises(PerfectSeparationError):
            fit_mlr(dataset, (0, 0, 0))

    def test_collinear_features_detected(self):
        # Two correctness lags that are always identical duplicate a column.
        rng = np.random.default_rng(9)
        dataset = []
        for _ in range(200):
            c = float(rng.random() < 0.5)
            fv = FeatureVector(
                correctness=(c, c),
                log_recency=(),
                log_spacing=(),
                same_direction_share=0.0,
                trial_count=0.0,
                log_span=0.0,
            )
            dataset.append((fv, bool(rng.random() < 0.4 + 0.3 * c)))
        with pytest.raises(CollinearFeaturesError):
            fit_mlr(dataset, (2, 0, 0))

    def test_report_table_is_aligned_and_complete(self):
        fv = FeatureVector((), (), (), 0.0, 0.0, 0.0)
        dataset = [(fv, True)] * 60 + [(fv, False)] * 40
        fit = fit_mlr(dataset, (0, 0, 0))
        table = fit.report_table()
        assert "beta" in table and "P>|z|" in table
        rows = fit.report_rows()
        assert rows[0]["coef"] == "beta"
        assert rows[0]["ci_low"] < rows[0]["value"] < rows[0]["ci_high"]

    def test_dropped_columns_serialize_as_strict_json(self):
        import json

        # Intercept-only data leaves the share/count/span columns all-zero;
        # their statistics must become null, never NaN, on the wire.
        fv = FeatureVector((), (), (), 0.0, 0.0, 0.0)
        dataset = [(fv, True)] * 60 + [(fv, False)] * 40
        fit = fit_mlr(dataset, (0, 0, 0))
        text = json.dumps(fit.to_json_dict(), allow_nan=False)  # must not raise
        rows = {r["coef"]: r for r in fit.report_rows()}
        assert rows["w_r0"]["std_err"] is None
        assert rows["w_r0"]["value"] == 0.0
        assert rows["w_r0"]["p"] == 1.0
        assert rows["beta"]["std_err"] is not None
        assert "n/a" in fit.report_table()
        assert "NaN" not in text


class TestSelectWindows:
    def _history_dataset(self, rng, informative_lag_weight=2.5, n_students=600):
        """Histories where only the most recent trial's correctness matters."""
        records = []
        for s in range(n_students):
            t = 1000
            prev_correct = rng.random() < 0.5
            records.append(make_trial(t, correct=bool(prev_correct), student_id=f"s{s}"))
            for _ in range(int(rng.integers(2, 6))):
                t += int(rng.integers(60, 4000))
                logit = -0.5 + informative_lag_weight * float(prev_correct)
                correct = rng.random() < 1 / (1 + math.exp(-logit))
                records.append(make_trial(t, correct=bool(correct), student_id=f"s{s}"))
                prev_correct = correct
        return build_training_examples(group_histories(records).values(), (4, 4, 4))

    def test_only_first_lag_informative_selects_n_1(self):
        rng = np.random.default_rng(17)
        examples = self._history_dataset(rng)
        import warnings

        with warnings.catch_warnings():
            # The time families carry no signal in this generator, so their
            # size-0 warnings are expected.
            warnings.simplefilter("ignore", UserWarning)
            n, m, l = select_windows(examples, alpha=0.05, max_windows=(4, 2, 1))
        assert n == 1

    def test_alpha_one_returns_search_bound(self):
        rng = np.random.default_rng(23)
        examples = self._history_dataset(rng, n_students=150)
        windows = select_windows(examples, alpha=1.0, max_windows=(3, 2, 1))
        assert windows == (3, 2, 1)

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            select_windows([], alpha=0.0)
