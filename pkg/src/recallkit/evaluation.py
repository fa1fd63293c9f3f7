"""Model evaluation: AUC with standard errors, past-trial segmentation,
log-likelihood, and calibration.

The replay harness walks each (student, KC) history in time order and
asks the model for a prediction before every trial, using only strictly
earlier trials, so every score is causal by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .domain import FormatKind, KCHistory, QuestionFormat, TrialRecord
from .mlr import extract_features, predict_mlr
from .params import MLRParams, RPLParams
from .rpl import DEFAULT_COLD_START, evolve_states, predict_rpl


class SingleClassError(ValueError):
    """AUC is undefined when only one outcome class is present."""


@dataclass(frozen=True)
class ScoredTrial:
    predicted: float
    actual: bool
    past_trial_count: int
    format: QuestionFormat
    source: str  # "write_like" (cued recall only) or "learn_like" (mixed)

    def __post_init__(self) -> None:
        if not 0.0 <= self.predicted <= 1.0:
            raise ValueError(f"predicted probability {self.predicted} outside [0, 1]")


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing their average rank (midrank method)."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc_from_arrays(labels: np.ndarray, scores: np.ndarray) -> tuple[float, float]:
    """Rank-based (Mann-Whitney) AUC and its Hanley-McNeil standard error.

    Tied scores count half. O(n log n) via midranks.

    Raises:
        SingleClassError: if either outcome class is missing.
    """
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=float)
    n_pos = int(labels.sum())
    n_neg = int(len(labels) - n_pos)
    if n_pos == 0:
        raise SingleClassError("no positive outcomes; AUC undefined")
    if n_neg == 0:
        raise SingleClassError("no negative outcomes; AUC undefined")

    ranks = _average_ranks(scores)
    u = float(ranks[labels].sum()) - n_pos * (n_pos + 1) / 2.0
    auc_value = u / (n_pos * n_neg)

    q1 = auc_value / (2.0 - auc_value)
    q2 = 2.0 * auc_value**2 / (1.0 + auc_value)
    variance = (
        auc_value * (1.0 - auc_value)
        + (n_pos - 1) * (q1 - auc_value**2)
        + (n_neg - 1) * (q2 - auc_value**2)
    ) / (n_pos * n_neg)
    return auc_value, math.sqrt(max(variance, 0.0))


def auc(scored: Sequence[ScoredTrial]) -> tuple[float, float]:
    labels = np.array([s.actual for s in scored], dtype=bool)
    scores = np.array([s.predicted for s in scored])
    return auc_from_arrays(labels, scores)


def auc_bootstrap_se(
    scored: Sequence[ScoredTrial], n_resamples: int = 200, seed: int = 0
) -> float:
    """Seeded bootstrap SE of the AUC, for cross-checking Hanley-McNeil."""
    labels = np.array([s.actual for s in scored], dtype=bool)
    scores = np.array([s.predicted for s in scored])
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(n_resamples):
        idx = rng.integers(0, len(scored), size=len(scored))
        if labels[idx].all() or not labels[idx].any():
            continue
        values.append(auc_from_arrays(labels[idx], scores[idx])[0])
    return float(np.std(values, ddof=1)) if len(values) > 1 else math.nan


# --- Causal predictors -------------------------------------------------------

# A predictor maps (strictly earlier trials of this student-KC, the trial
# about to happen) to a recall probability.
CausalPredictor = Callable[[Sequence[TrialRecord], TrialRecord], float]


class ConstantPredictor:
    def __init__(self, probability: float) -> None:
        self.probability = probability

    def __call__(self, prefix: Sequence[TrialRecord], trial: TrialRecord) -> float:
        return self.probability


class MLRPredictor:
    """Logistic model over history features, evaluated causally.

    Feature extraction requires a strictly later prediction time, so when
    a log carries same-second trials the query time shifts to one second
    past the newest prefix trial (negligible on the ln scale).
    """

    def __init__(self, params: MLRParams) -> None:
        self.params = params

    def __call__(self, prefix: Sequence[TrialRecord], trial: TrialRecord) -> float:
        now = trial.timestamp_s
        if prefix:
            now = max(now, prefix[-1].timestamp_s + 1)
        features = extract_features(prefix, now, trial.direction, self.params.windows)
        return predict_mlr(self.params, features)


class RPLPredictor:
    def __init__(self, params: RPLParams, cold_start: float = DEFAULT_COLD_START) -> None:
        self.params = params
        self.cold_start = cold_start

    def __call__(self, prefix: Sequence[TrialRecord], trial: TrialRecord) -> float:
        states = evolve_states(self.params, prefix)
        return predict_rpl(
            self.params,
            states,
            trial.direction,
            trial.format,
            trial.timestamp_s,
            self.cold_start,
        ).probability


# --- Replay and reporting ----------------------------------------------------

Segmenter = Callable[[ScoredTrial], str]


def past_trial_segmenter(scored: ScoredTrial) -> str:
    """Default segments {0, 1, 2+}: prediction quality turns on having at
    least two past trials."""
    if scored.past_trial_count >= 2:
        return "2+"
    return str(scored.past_trial_count)


@dataclass(frozen=True)
class SegmentStats:
    auc: float  # NaN when the segment has a single outcome class
    standard_error: float
    n: int


@dataclass(frozen=True)
class CalibrationBin:
    mean_predicted: float
    empirical_rate: float
    n: int


@dataclass(frozen=True)
class EvaluationReport:
    auc: float
    auc_se: float
    n: int
    segments: Mapping[str, SegmentStats]
    mean_log_likelihood: float
    calibration: tuple[CalibrationBin, ...]
    source: str

    def to_json_dict(self) -> dict:
        # Degenerate (single-class) segments carry NaN internally; their
        # wire form is null so the report stays strict JSON.
        def jsonable(value: float) -> float | None:
            return None if math.isnan(value) else value

        return {
            "auc": self.auc,
            "auc_se": self.auc_se,
            "n": self.n,
            "source": self.source,
            "mean_log_likelihood": self.mean_log_likelihood,
            "segments": {
                label: {"auc": jsonable(st.auc), "se": jsonable(st.standard_error), "n": st.n}
                for label, st in self.segments.items()
            },
            "calibration": [
                {"mean_predicted": b.mean_predicted, "empirical_rate": b.empirical_rate, "n": b.n}
                for b in self.calibration
            ],
        }


def score_trials(
    predictor: CausalPredictor,
    histories: Iterable[KCHistory],
) -> list[ScoredTrial]:
    """Replay histories causally, collecting (prediction, outcome) pairs.

    The prefix passed to the predictor holds only trials with strictly
    earlier timestamps; an assertion audits that no prediction can see
    its own present or future.
    """
    ordered = sorted(histories, key=lambda h: (h.student_id, h.kc_id))
    all_cued = all(
        t.format.kind is FormatKind.CUED_RECALL for h in ordered for t in h.trials
    )
    source = "write_like" if all_cued else "learn_like"

    scored: list[ScoredTrial] = []
    for history in ordered:
        for i, trial in enumerate(history.trials):
            prefix = [
                t for t in history.trials[:i] if t.timestamp_s < trial.timestamp_s
            ]
            assert all(t.timestamp_s < trial.timestamp_s for t in prefix)
            p = predictor(prefix, trial)
            if not (isinstance(p, (int, float)) and 0.0 <= p <= 1.0):
                raise ValueError(
                    f"predictor returned {p!r} for trial of "
                    f"({trial.student_id}, {trial.kc_id}) at {trial.timestamp_s}"
                )
            scored.append(
                ScoredTrial(
                    predicted=float(p),
                    actual=trial.correct,
                    past_trial_count=len(history.trials[:i]),
                    format=trial.format,
                    source=source,
                )
            )
    return scored


def calibration_bins(scored: Sequence[ScoredTrial], n_bins: int = 10) -> tuple[CalibrationBin, ...]:
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    preds = np.array([s.predicted for s in scored])
    actual = np.array([s.actual for s in scored], dtype=float)
    out = []
    for i in range(n_bins):
        hi_inclusive = i == n_bins - 1
        mask = (preds >= edges[i]) & ((preds <= edges[i + 1]) if hi_inclusive else (preds < edges[i + 1]))
        if not mask.any():
            continue
        out.append(
            CalibrationBin(
                mean_predicted=float(preds[mask].mean()),
                empirical_rate=float(actual[mask].mean()),
                n=int(mask.sum()),
            )
        )
    return tuple(out)


def _segment_stats(scored: Sequence[ScoredTrial]) -> SegmentStats:
    try:
        value, se = auc(scored)
    except SingleClassError:
        value, se = math.nan, math.nan
    return SegmentStats(auc=value, standard_error=se, n=len(scored))


def mean_log_likelihood_of_scores(scored: Sequence[ScoredTrial], clamp: float = 1e-9) -> float:
    preds = np.clip(np.array([s.predicted for s in scored]), clamp, 1.0 - clamp)
    actual = np.array([s.actual for s in scored], dtype=bool)
    return float(np.mean(np.where(actual, np.log(preds), np.log1p(-preds))))


def evaluate_model(
    predictor: CausalPredictor,
    histories: Iterable[KCHistory],
    segmenter: Segmenter = past_trial_segmenter,
) -> EvaluationReport:
    """Causal replay -> overall AUC, per-segment AUC, likelihood, calibration.

    Raises:
        SingleClassError: if the whole log has a single outcome class
            (degenerate segments get NaN AUC instead).
    """
    scored = score_trials(predictor, histories)
    if not scored:
        raise ValueError("no trials to evaluate")
    overall, se = auc(scored)

    by_segment: dict[str, list[ScoredTrial]] = {}
    for s in scored:
        by_segment.setdefault(segmenter(s), []).append(s)

    return EvaluationReport(
        auc=overall,
        auc_se=se,
        n=len(scored),
        segments={label: _segment_stats(group) for label, group in sorted(by_segment.items())},
        mean_log_likelihood=mean_log_likelihood_of_scores(scored),
        calibration=calibration_bins(scored),
        source=scored[0].source,
    )


def log_likelihood(
    predictor: CausalPredictor,
    histories: Iterable[KCHistory],
    clamp: float = 1e-9,
) -> float:
    """Mean Bernoulli log-likelihood in nats per trial, clamped."""
    scored = score_trials(predictor, histories)
    if not scored:
        raise ValueError("no trials to evaluate")
    return mean_log_likelihood_of_scores(scored, clamp)


def train_test_split(
    histories: Iterable[KCHistory],
    test_fraction: float = 0.2,
    seed: int = 0,
) -> tuple[list[KCHistory], list[KCHistory]]:
    """Split whole histories (never individual trials) into train and test.

    Splitting on the (student, KC) boundary keeps both sides causally
    self-contained. Deterministic for a fixed seed.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    ordered = sorted(histories, key=lambda h: (h.student_id, h.kc_id))
    rng = np.random.default_rng(seed)
    assignments = rng.random(len(ordered)) < test_fraction
    train = [h for h, is_test in zip(ordered, assignments) if not is_test]
    test = [h for h, is_test in zip(ordered, assignments) if is_test]
    return train, test
