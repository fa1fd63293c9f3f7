"""Recovering the forgetting curve from raw outcomes.

A forgetting curve is never observed directly; each trial only shows
whether recall happened after some interval. Binning many second trials
by their retention interval turns those binary outcomes back into a
curve. Here the simulator generates pairs whose first answer was
correct, and the empirical recall rate per interval bucket is compared
against the closed-form curve the generator used, one line per bucket.
"""

import math

from recallkit import REFERENCE_RPL_PARAMS, SimulationConfig, empirical_forgetting_curve, simulate
from recallkit.simulator import expected_recall_curve

MIN, HOUR, DAY = 60, 3600, 86_400

config = SimulationConfig(
    students=8000,
    kcs_per_student=2,
    trials_per_kc=(2, 2),
    params=REFERENCE_RPL_PARAMS,
    direction_mix={"forward": 1.0},  # keep every second trial on the studied side
    gap_seconds=(30.0, 7 * DAY),
    seed=42,
)
result = simulate(config)
print(f"simulated {len(result.records)} trials ({config.students * config.kcs_per_student} pairs)\n")

edges = [30.0, 2 * MIN, 10 * MIN, HOUR, 6 * HOUR, DAY, 3 * DAY, 7 * DAY]
bins = empirical_forgetting_curve(result.records, edges)

def span(seconds: float) -> str:
    if seconds >= DAY:
        return f"{seconds / DAY:g}d"
    if seconds >= HOUR:
        return f"{seconds / HOUR:g}h"
    if seconds >= MIN:
        return f"{seconds / MIN:g}m"
    return f"{seconds:g}s"


print(f"{'interval':>12s}  {'n':>5s}  {'observed':>9s}  {'curve':>6s}  {'gap':>7s}")
for b in bins:
    center = math.sqrt(b.low_s * b.high_s)
    expected = expected_recall_curve(REFERENCE_RPL_PARAMS, first_correct=True, r=center)
    label = f"{span(b.low_s)}-{span(b.high_s)}"
    gap = b.recall_rate - expected
    print(f"{label:>12s}  {b.n:>5d}  {b.recall_rate:>8.3f}   {expected:>6.3f}  {gap:>+7.3f}")

print(
    "\nEvery bucket sits within sampling noise of the generating curve;"
    "\nthe same machinery applied to a real log estimates its curve."
)
