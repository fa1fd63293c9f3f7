"""Synthetic trial-log generation from known memory dynamics.

The generator evolves the recurrent power-law state for every simulated
(student, KC) pair, draws each outcome from the model's own predicted
probability, and records that probability alongside the trial. Logs
produced this way are the oracle for parameter recovery and for the
evaluation harness's qualitative patterns. A deliberately misspecified
exponential-decay generator is included to exercise robustness.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .domain import Direction, FormatKind, QuestionFormat, TrialRecord, group_histories
from .params import RPLParams
from .rpl import (
    DEFAULT_COLD_START,
    StatePair,
    apply_difficulty,
    apply_transfer,
    correct_probability,
    init_state,
    predict_rpl,
    recall_probability,
    update_state,
)

_DEFAULT_OPTIONS = {
    FormatKind.MULTIPLE_CHOICE: 4,
    FormatKind.MULTIPLE_CHOICE_WITH_NONE: 5,
    FormatKind.TRUE_FALSE: 2,
}


def _format_for(kind: FormatKind) -> QuestionFormat:
    return QuestionFormat(kind, _DEFAULT_OPTIONS.get(kind))


@dataclass(frozen=True)
class SimulationConfig:
    """Ground-truth dynamics plus the shape of the generated log.

    Gaps between trials of a pair are log-uniform over gap_seconds so
    retention intervals span orders of magnitude (a forgetting curve is
    unidentifiable from a single time scale). format_mix and
    direction_mix map wire names to weights summing to 1. The seed fixes
    the output exactly; every student draws from an independent
    (seed, student-index) substream, so generation order cannot matter.
    """

    students: int
    kcs_per_student: int
    trials_per_kc: tuple[int, int]
    params: RPLParams
    gap_seconds: tuple[float, float] = (30.0, 604800.0)
    format_mix: Mapping[str, float] = field(default_factory=lambda: {"cued_recall": 1.0})
    direction_mix: Mapping[str, float] = field(
        default_factory=lambda: {"forward": 0.7, "backward": 0.3}
    )
    cold_start: float = DEFAULT_COLD_START
    seed: int = 0
    start_time: int = 1_000_000_000
    ground_truth: str = "rpl"

    def __post_init__(self) -> None:
        if self.students <= 0 or self.kcs_per_student <= 0:
            raise ValueError("student and KC counts must be positive")
        lo, hi = self.trials_per_kc
        if lo < 1 or hi < lo:
            raise ValueError(f"bad trials_per_kc range {self.trials_per_kc}")
        if self.gap_seconds[0] < 1 or self.gap_seconds[1] < self.gap_seconds[0]:
            raise ValueError(f"bad gap_seconds range {self.gap_seconds}")
        for name, mix in (("format_mix", self.format_mix), ("direction_mix", self.direction_mix)):
            total = sum(mix.values())
            if not math.isclose(total, 1.0, rel_tol=1e-9):
                raise ValueError(f"{name} weights sum to {total}, expected 1")
        if self.ground_truth not in ("rpl", "exponential"):
            raise ValueError(f"unknown ground truth {self.ground_truth!r}")

    def to_json_dict(self) -> dict:
        return {
            "students": self.students,
            "kcs_per_student": self.kcs_per_student,
            "trials_per_kc": list(self.trials_per_kc),
            "gap_seconds": list(self.gap_seconds),
            "format_mix": dict(self.format_mix),
            "direction_mix": dict(self.direction_mix),
            "cold_start": self.cold_start,
            "seed": self.seed,
            "start_time": self.start_time,
            "ground_truth": self.ground_truth,
            "params": self.params.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "SimulationConfig":
        required = ("students", "kcs_per_student", "trials_per_kc", "params")
        for name in required:
            if name not in data:
                raise ValueError(f"simulation config missing field {name!r}")
        kwargs: dict = {
            "students": int(data["students"]),
            "kcs_per_student": int(data["kcs_per_student"]),
            "trials_per_kc": tuple(int(v) for v in data["trials_per_kc"]),
            "params": RPLParams.from_json_dict(data["params"]),
        }
        for name in ("gap_seconds",):
            if name in data:
                kwargs[name] = tuple(float(v) for v in data[name])
        for name in ("format_mix", "direction_mix"):
            if name in data:
                kwargs[name] = {str(k): float(v) for k, v in data[name].items()}
        for name, cast in (
            ("cold_start", float),
            ("seed", int),
            ("start_time", int),
            ("ground_truth", str),
        ):
            if name in data:
                kwargs[name] = cast(data[name])
        return cls(**kwargs)


@dataclass(frozen=True)
class SimulationResult:
    records: list[TrialRecord]
    true_probabilities: list[float]


def _choices(mix: Mapping[str, float]) -> tuple[list[str], np.ndarray]:
    names = sorted(mix)
    cumulative = np.cumsum([mix[n] for n in names])
    cumulative[-1] = 1.0  # guard against float drift in the last bin
    return names, cumulative


def _pick(names: list[str], cumulative: np.ndarray, u: float) -> str:
    return names[int(np.searchsorted(cumulative, u, side="right"))]


# Exponential-decay ground truth: half-life doubles-and-some on success,
# collapses on failure. Deliberately not the power-law model; used to
# probe fitter robustness under misspecification.
_EXP_INIT_CORRECT_HALF_LIFE = 4.0 * 3600.0
_EXP_INIT_INCORRECT_HALF_LIFE = 3600.0
_EXP_CORRECT_FACTOR = 2.2
_EXP_INCORRECT_FACTOR = 0.4


class _ExponentialItem:
    __slots__ = ("half_life", "last_time")

    def __init__(self, half_life: float, last_time: int) -> None:
        self.half_life = half_life
        self.last_time = last_time


def simulate(config: SimulationConfig) -> SimulationResult:
    """Generate a trial log plus the generating probability of each trial.

    Deterministic for a fixed config; trials of one (student, KC) pair
    are consecutive and time-ordered.
    """
    fmt_names, fmt_cum = _choices(config.format_mix)
    dir_names, dir_cum = _choices(config.direction_mix)
    lo_gap, hi_gap = math.log(config.gap_seconds[0]), math.log(config.gap_seconds[1])
    records: list[TrialRecord] = []
    truths: list[float] = []

    for student_index in range(config.students):
        rng = np.random.default_rng([config.seed, student_index])
        student_id = f"s{student_index:05d}"
        for kc_index in range(config.kcs_per_student):
            kc_id = f"kc{kc_index:05d}"
            n_trials = int(rng.integers(config.trials_per_kc[0], config.trials_per_kc[1] + 1))
            t = config.start_time + int(rng.integers(0, 86_400))
            rpl_states = StatePair()
            exp_items: dict[Direction, _ExponentialItem] = {}

            for _ in range(n_trials):
                direction = Direction(_pick(dir_names, dir_cum, rng.random()))
                fmt = _format_for(FormatKind(_pick(fmt_names, fmt_cum, rng.random())))

                if config.ground_truth == "rpl":
                    p = predict_rpl(
                        config.params, rpl_states, direction, fmt, t, config.cold_start
                    ).probability
                else:
                    p = _exponential_probability(
                        exp_items, direction, fmt, t, config
                    )

                correct = bool(rng.random() < p)
                records.append(
                    TrialRecord(
                        student_id=student_id,
                        kc_id=kc_id,
                        direction=direction,
                        format=fmt,
                        timestamp_s=t,
                        correct=correct,
                    )
                )
                truths.append(p)

                if config.ground_truth == "rpl":
                    current = rpl_states.get(direction)
                    if current is None:
                        new = init_state(correct, t, config.params)
                    else:
                        new = update_state(
                            current, correct, t, fmt.guess_probability, config.params
                        )
                    rpl_states = rpl_states.with_state(direction, new)
                else:
                    _exponential_update(exp_items, direction, correct, t)

                t += max(1, int(round(math.exp(rng.uniform(lo_gap, hi_gap)))))

    return SimulationResult(records=records, true_probabilities=truths)


def _exponential_probability(
    items: dict[Direction, _ExponentialItem],
    direction: Direction,
    fmt: QuestionFormat,
    now: int,
    config: SimulationConfig,
) -> float:
    target = items.get(direction)
    inverse = items.get(direction.inverse)
    if target is None and inverse is None:
        return config.cold_start
    p_know = 0.0
    if target is not None:
        p_know = 0.5 ** ((now - target.last_time) / target.half_life)
    p_k = apply_difficulty(p_know, config.params.k_for(fmt))
    p_c = correct_probability(p_k, fmt.guess_probability)
    p_o = None
    if inverse is not None:
        p_o = 0.5 ** ((now - inverse.last_time) / inverse.half_life)
    return apply_transfer(p_c, p_o, config.params.transfer_t)


def _exponential_update(
    items: dict[Direction, _ExponentialItem],
    direction: Direction,
    correct: bool,
    now: int,
) -> None:
    item = items.get(direction)
    if item is None:
        half_life = _EXP_INIT_CORRECT_HALF_LIFE if correct else _EXP_INIT_INCORRECT_HALF_LIFE
        items[direction] = _ExponentialItem(half_life, now)
        return
    item.half_life *= _EXP_CORRECT_FACTOR if correct else _EXP_INCORRECT_FACTOR
    item.last_time = now


@dataclass(frozen=True)
class CurveBin:
    low_s: float
    high_s: float
    n: int
    recall_rate: float
    standard_error: float


def empirical_forgetting_curve(
    records: Iterable[TrialRecord],
    bucket_edges: Sequence[float],
) -> list[CurveBin]:
    """Empirical second-trial recall rate vs retention interval.

    Considers each (student, KC) pair whose first trial was correct, bins
    the pair's second trial by elapsed seconds into [edge_i, edge_{i+1}),
    and reports per-bin accuracy with a binomial standard error. Empty
    buckets are omitted with a warning.
    """
    edges = list(bucket_edges)
    if len(edges) < 2 or any(a >= b for a, b in zip(edges, edges[1:])):
        raise ValueError("bucket_edges must be strictly increasing with >= 2 entries")
    hits = [0] * (len(edges) - 1)
    totals = [0] * (len(edges) - 1)
    for history in group_histories(records).values():
        if len(history.trials) < 2 or not history.trials[0].correct:
            continue
        first, second = history.trials[0], history.trials[1]
        r = second.timestamp_s - first.timestamp_s
        idx = int(np.searchsorted(edges, r, side="right")) - 1
        if idx < 0 or idx >= len(totals):
            continue
        totals[idx] += 1
        hits[idx] += 1 if second.correct else 0

    bins: list[CurveBin] = []
    for i, (h, n) in enumerate(zip(hits, totals)):
        if n == 0:
            warnings.warn(
                f"forgetting-curve bucket [{edges[i]}, {edges[i + 1]}) is empty; omitted",
                stacklevel=2,
            )
            continue
        rate = h / n
        bins.append(
            CurveBin(
                low_s=float(edges[i]),
                high_s=float(edges[i + 1]),
                n=n,
                recall_rate=rate,
                standard_error=math.sqrt(rate * (1.0 - rate) / n),
            )
        )
    return bins


def expected_recall_curve(params: RPLParams, first_correct: bool, r: float) -> float:
    """Closed-form curve value after one trial, for curve diagnostics."""
    state = init_state(first_correct, 1, params)
    return recall_probability(state, r)
