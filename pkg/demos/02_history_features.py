"""The logistic model's view of a study history.

The regression never sees raw trials; it sees five feature groups
computed over the past trials of one (student, KC) pair: recent
correctness, log recency, log spacing, the share of same-direction
study, and two long-range summaries. This script builds a small history
and walks through what the model extracts and predicts.
"""

from recallkit import (
    CUED_RECALL,
    Direction,
    REFERENCE_MLR_PARAMS,
    TrialRecord,
    extract_features,
    predict_mlr,
)
from recallkit.mlr import feature_group_sums

HOUR = 3600


def trial(ts, correct, direction=Direction.FORWARD):
    return TrialRecord(
        student_id="demo",
        kc_id="kc-1",
        direction=direction,
        format=CUED_RECALL,
        timestamp_s=ts,
        correct=correct,
    )


params = REFERENCE_MLR_PARAMS
t0 = 1_000_000
history = [
    trial(t0, False),
    trial(t0 + 2 * HOUR, True),
    trial(t0 + 26 * HOUR, True, Direction.BACKWARD),
    trial(t0 + 27 * HOUR, True),
]
now = t0 + 30 * HOUR

features = extract_features(history, now, Direction.FORWARD, params.windows)
print("history: miss, hit (+2 h), hit backward (+26 h), hit (+27 h); predicting at +30 h\n")
print("correctness (most recent first):", features.correctness)
print("log recency:                    ", [round(v, 3) for v in features.log_recency])
print("log spacing:                    ", [round(v, 3) for v in features.log_spacing])
print("same-direction share:           ", features.same_direction_share)
print("trial count / log span:         ", features.trial_count, "/", round(features.log_span, 3))

sums = feature_group_sums(params, features)
print(
    "\nweighted logit contributions: correctness=%.4f recency=%.4f "
    "spacing=%.4f direction=%.4f long-range=%.4f" % sums
)
print("prediction:", round(predict_mlr(params, features), 4))

print("\nWith no history at all, the model falls back to its intercept prior:")
cold = extract_features([], now, Direction.FORWARD, params.windows)
print("cold prediction:", round(predict_mlr(params, cold), 4))

print("\nThe same history queried in the backward direction scores lower,")
print("because only one of four past trials studied that side:")
backward = extract_features(history, now, Direction.BACKWARD, params.windows)
print("backward prediction:", round(predict_mlr(params, backward), 4))
