"""Domain types and trial-log ingestion shared by every model and tool.

A knowledge component (KC) is a two-sided flashcard pair; a trial is one
answer event on one KC in one study direction and question format. Trial
logs are line-delimited JSON (see ``parse_trial_log``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, NamedTuple


class Direction(Enum):
    """Which side of the pair served as cue (A-to-B vs B-to-A)."""

    FORWARD = "forward"
    BACKWARD = "backward"

    @property
    def inverse(self) -> "Direction":
        return Direction.BACKWARD if self is Direction.FORWARD else Direction.FORWARD


class FormatKind(Enum):
    CUED_RECALL = "cued_recall"
    MULTIPLE_CHOICE = "multiple_choice"
    MULTIPLE_CHOICE_WITH_NONE = "multiple_choice_with_none"
    TRUE_FALSE = "true_false"
    SELF_GRADED = "self_graded"


# Formats whose answer can be produced without knowledge by picking among
# a fixed option set; these require an explicit options_count on the wire.
_CHOICE_KINDS = frozenset(
    {
        FormatKind.MULTIPLE_CHOICE,
        FormatKind.MULTIPLE_CHOICE_WITH_NONE,
        FormatKind.TRUE_FALSE,
    }
)


@dataclass(frozen=True)
class QuestionFormat:
    """A question format and, for choice formats, its option count.

    Guess probability is 0 for cued recall and self-graded answers, and
    1/options_count for choice formats.
    """

    kind: FormatKind
    options_count: int | None = None

    def __post_init__(self) -> None:
        if self.kind in _CHOICE_KINDS:
            if self.options_count is None or self.options_count < 2:
                raise ValueError(
                    f"format {self.kind.value!r} requires options_count >= 2, "
                    f"got {self.options_count!r}"
                )
        elif self.options_count is not None:
            raise ValueError(
                f"format {self.kind.value!r} does not take options_count"
            )

    @property
    def guess_probability(self) -> float:
        if self.kind in _CHOICE_KINDS:
            return 1.0 / self.options_count  # type: ignore[operator]
        return 0.0


CUED_RECALL = QuestionFormat(FormatKind.CUED_RECALL)
SELF_GRADED = QuestionFormat(FormatKind.SELF_GRADED)
MULTIPLE_CHOICE_4 = QuestionFormat(FormatKind.MULTIPLE_CHOICE, 4)
TRUE_FALSE = QuestionFormat(FormatKind.TRUE_FALSE, 2)


@dataclass(frozen=True)
class TrialRecord:
    """One answer event: who, which KC, direction, format, when, outcome."""

    student_id: str
    kc_id: str
    direction: Direction
    format: QuestionFormat
    timestamp_s: int
    correct: bool

    def __post_init__(self) -> None:
        if self.timestamp_s <= 0:
            raise ValueError(f"timestamp_s must be positive, got {self.timestamp_s}")

    def to_json_dict(self) -> dict:
        out = {
            "student_id": self.student_id,
            "kc_id": self.kc_id,
            "direction": self.direction.value,
            "format": self.format.kind.value,
            "timestamp_s": self.timestamp_s,
            "correct": self.correct,
        }
        if self.format.options_count is not None:
            out["options_count"] = self.format.options_count
        return out


@dataclass(frozen=True)
class KCHistory:
    """Time-ordered trials of one (student, KC) pair, both directions.

    Timestamps are non-decreasing; equal timestamps keep ingestion order.
    """

    student_id: str
    kc_id: str
    trials: tuple[TrialRecord, ...]

    def __post_init__(self) -> None:
        for t in self.trials:
            if t.student_id != self.student_id or t.kc_id != self.kc_id:
                raise ValueError(
                    f"trial for ({t.student_id}, {t.kc_id}) does not belong to "
                    f"history ({self.student_id}, {self.kc_id})"
                )
        stamps = [t.timestamp_s for t in self.trials]
        if any(a > b for a, b in zip(stamps, stamps[1:])):
            raise ValueError("history timestamps must be non-decreasing")

    def __len__(self) -> int:
        return len(self.trials)


@dataclass(frozen=True)
class DeckItem:
    kc_id: str
    side_a: str
    side_b: str

    def __post_init__(self) -> None:
        if not self.side_a or not self.side_b:
            raise ValueError(f"deck item {self.kc_id!r} has an empty side")

    def side(self, direction: Direction) -> tuple[str, str]:
        """(cue, answer) for a study direction. Forward cues with side A."""
        if direction is Direction.FORWARD:
            return self.side_a, self.side_b
        return self.side_b, self.side_a


@dataclass(frozen=True)
class Deck:
    deck_id: str
    items: tuple[DeckItem, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for item in self.items:
            if item.kc_id in seen:
                raise ValueError(f"duplicate kc_id {item.kc_id!r} in deck")
            seen.add(item.kc_id)

    def item(self, kc_id: str) -> DeckItem:
        for it in self.items:
            if it.kc_id == kc_id:
                return it
        raise KeyError(kc_id)

    def to_json_dict(self) -> dict:
        return {
            "deck_id": self.deck_id,
            "items": [
                {"kc_id": i.kc_id, "side_a": i.side_a, "side_b": i.side_b}
                for i in self.items
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Deck":
        try:
            items = tuple(
                DeckItem(kc_id=i["kc_id"], side_a=i["side_a"], side_b=i["side_b"])
                for i in data["items"]
            )
            return cls(deck_id=data["deck_id"], items=items)
        except KeyError as exc:
            raise ValueError(f"deck JSON missing field {exc.args[0]!r}") from exc


class ParsedLog(NamedTuple):
    records: list[TrialRecord]
    skipped: int


def trial_from_json_dict(obj: dict) -> TrialRecord:
    """One trial from its JSONL object; raises ValueError on any violation."""
    for name in ("student_id", "kc_id", "direction", "format", "timestamp_s", "correct"):
        if name not in obj:
            raise ValueError(f"missing field {name!r}")
    ts = obj["timestamp_s"]
    if not isinstance(ts, int) or isinstance(ts, bool):
        raise ValueError(f"timestamp_s must be an integer, got {ts!r}")
    correct = obj["correct"]
    if not isinstance(correct, bool):
        raise ValueError(f"correct must be a boolean, got {correct!r}")
    options = obj.get("options_count")
    fmt = QuestionFormat(
        FormatKind(obj["format"]),
        int(options) if options is not None else None,
    )
    return TrialRecord(
        student_id=str(obj["student_id"]),
        kc_id=str(obj["kc_id"]),
        direction=Direction(obj["direction"]),
        format=fmt,
        timestamp_s=ts,
        correct=correct,
    )


def parse_trial_log(stream: IO[bytes] | IO[str]) -> ParsedLog:
    """Parse a JSONL trial log, skipping and counting malformed lines.

    Each line is one JSON object with fields student_id, kc_id, direction,
    format, options_count (choice formats only), timestamp_s, correct.
    Blank lines are ignored. Lines that fail to parse or violate trial
    invariants are skipped and counted, never silently dropped.

    Raises:
        OSError: if the stream itself cannot be read.
    """
    records: list[TrialRecord] = []
    skipped = 0
    for raw in stream:
        line = raw.decode("utf-8", errors="replace") if isinstance(raw, bytes) else raw
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("line is not a JSON object")
            records.append(trial_from_json_dict(obj))
        except ValueError:
            skipped += 1
    return ParsedLog(records, skipped)


def group_histories(
    records: Iterable[TrialRecord],
) -> dict[tuple[str, str], KCHistory]:
    """Partition records into per-(student, KC) histories sorted by time.

    Sorting is stable, so records sharing a timestamp keep their input
    order. Every record lands in exactly one history.
    """
    buckets: dict[tuple[str, str], list[TrialRecord]] = {}
    for rec in records:
        buckets.setdefault((rec.student_id, rec.kc_id), []).append(rec)
    return {
        key: KCHistory(
            student_id=key[0],
            kc_id=key[1],
            trials=tuple(sorted(trials, key=lambda t: t.timestamp_s)),
        )
        for key, trials in buckets.items()
    }
