"""Discrepancy-reduction study sessions.

A session tracks per-item knowledge state under one model and always
surfaces the item with the lowest predicted recall, on the premise that
reinforcing the weakest item is the locally optimal way to raise overall
mastery. Answering resets that item's predicted recall to 1 (feedback is
immediate), the state updates, and the ranking refreshes. The session
completes when every item's predicted recall reaches the mastery
threshold.

All operations take an explicit ``now`` so callers own the clock; the
HTTP service binds wall-clock time at its edge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .domain import (
    CUED_RECALL,
    Deck,
    Direction,
    FormatKind,
    QuestionFormat,
    TrialRecord,
    trial_from_json_dict,
)
from .mlr import extract_features, predict_mlr
from .params import MLRParams, RPLParams
from .rpl import (
    DEFAULT_COLD_START,
    StatePair,
    init_state,
    predict_rpl,
    state_from_json_dict,
    state_to_json_dict,
    update_state,
)


class SessionProtocolError(RuntimeError):
    """An answer arrived that does not match the outstanding question."""


@dataclass(frozen=True)
class Question:
    kc_id: str
    direction: Direction
    format: QuestionFormat
    prompt: str
    answer: str
    options: tuple[str, ...]  # shuffled, contains the answer exactly once
    predicted_recall: float

    def to_json_dict(self) -> dict:
        out = {
            "kc_id": self.kc_id,
            "direction": self.direction.value,
            "format": self.format.kind.value,
            "prompt": self.prompt,
            "answer": self.answer,
            "options": list(self.options),
            "predicted_recall": self.predicted_recall,
        }
        if self.format.options_count is not None:
            out["options_count"] = self.format.options_count
        return out

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Question":
        options = data.get("options_count")
        return cls(
            kc_id=data["kc_id"],
            direction=Direction(data["direction"]),
            format=QuestionFormat(FormatKind(data["format"]), options),
            prompt=data["prompt"],
            answer=data["answer"],
            options=tuple(data["options"]),
            predicted_recall=float(data["predicted_recall"]),
        )


@dataclass(frozen=True)
class RankedItem:
    kc_id: str
    direction: Direction
    predicted: float
    cold_start: bool
    last_studied: int  # -1 when never studied


@dataclass(frozen=True)
class ProgressSummary:
    items: tuple[RankedItem, ...]  # ascending by predicted recall
    mastered: int
    mean_predicted: float
    complete: bool
    mastery_threshold: float

    def to_json_dict(self) -> dict:
        return {
            "items": [
                {
                    "kc_id": i.kc_id,
                    "direction": i.direction.value,
                    "predicted_recall": i.predicted,
                    "cold_start": i.cold_start,
                }
                for i in self.items
            ],
            "mastered": self.mastered,
            "mean_predicted": self.mean_predicted,
            "complete": self.complete,
            "mastery_threshold": self.mastery_threshold,
        }


def grade_typed_answer(expected: str, typed: str, case_insensitive: bool = False) -> bool:
    """Exact match after trimming surrounding whitespace; optional case fold."""
    a, b = expected.strip(), typed.strip()
    if case_insensitive:
        return a.casefold() == b.casefold()
    return a == b


class StudySession:
    """One student's run through a deck under one model.

    format_policy "adaptive" asks recognition-style questions (multiple
    choice, or self-graded when the deck is too small for distractors)
    while an item's predicted recall is below 0.5 and cued recall above;
    "cued_recall" always asks typed recall. Distractor sampling is seeded
    per session and per question, so a restored session regenerates the
    same questions.
    """

    def __init__(
        self,
        session_id: str,
        deck: Deck,
        model_kind: str,
        params: MLRParams | RPLParams,
        direction: Direction = Direction.FORWARD,
        format_policy: str = "adaptive",
        mastery_threshold: float = 0.9,
        cold_start: float = DEFAULT_COLD_START,
        case_insensitive: bool = False,
        seed: int = 0,
    ) -> None:
        if model_kind not in ("mlr", "rpl"):
            raise ValueError(f"unknown model kind {model_kind!r}")
        if model_kind == "mlr" and not isinstance(params, MLRParams):
            raise TypeError("mlr session requires MLRParams")
        if model_kind == "rpl" and not isinstance(params, RPLParams):
            raise TypeError("rpl session requires RPLParams")
        if not 0.0 < mastery_threshold <= 1.0:
            raise ValueError("mastery_threshold must lie in (0, 1]")
        if format_policy not in ("adaptive", "cued_recall"):
            raise ValueError(f"unknown format policy {format_policy!r}")
        self.session_id = session_id
        self.deck = deck
        self.model_kind = model_kind
        self.params = params
        self.direction = direction
        self.format_policy = format_policy
        self.mastery_threshold = mastery_threshold
        self.cold_start = cold_start
        self.case_insensitive = case_insensitive
        self.seed = seed
        self.rpl_states: dict[str, StatePair] = {i.kc_id: StatePair() for i in deck.items}
        self.mlr_trials: dict[str, list[TrialRecord]] = {i.kc_id: [] for i in deck.items}
        self.answer_log: list[TrialRecord] = []
        self.outstanding: Question | None = None
        self.previous_kc: str | None = None
        self.question_count = 0

    # -- prediction ------------------------------------------------------

    def _predict_item(self, kc_id: str, now: int) -> tuple[float, bool, int]:
        """(cued-recall prediction, cold flag, last-studied or -1)."""
        if self.model_kind == "rpl":
            states = self.rpl_states[kc_id]
            pred = predict_rpl(
                self.params, states, self.direction, CUED_RECALL, now, self.cold_start
            )
            last = max(
                (st.last_trial_time for st in (states.forward, states.backward) if st),
                default=-1,
            )
            return pred.probability, pred.cold_start, last
        trials = self.mlr_trials[kc_id]
        # Feature time must be strictly after the newest trial; a same-second
        # query shifts one second forward, negligible on the ln scale.
        effective_now = max(now, trials[-1].timestamp_s + 1) if trials else now
        features = extract_features(
            trials, effective_now, self.direction, self.params.windows
        )
        return (
            predict_mlr(self.params, features),
            len(trials) == 0,
            trials[-1].timestamp_s if trials else -1,
        )

    def rank_items(self, now: int) -> list[RankedItem]:
        """All deck items, weakest first; ties fall to least-recently
        studied, then deck order."""
        deck_order = {item.kc_id: i for i, item in enumerate(self.deck.items)}
        ranked = []
        for item in self.deck.items:
            predicted, cold, last = self._predict_item(item.kc_id, now)
            ranked.append(
                RankedItem(
                    kc_id=item.kc_id,
                    direction=self.direction,
                    predicted=predicted,
                    cold_start=cold,
                    last_studied=last,
                )
            )
        ranked.sort(key=lambda r: (r.predicted, r.last_studied, deck_order[r.kc_id]))
        return ranked

    # -- question flow ---------------------------------------------------

    def _choose_format(self, predicted: float) -> QuestionFormat:
        if self.format_policy == "cued_recall":
            return CUED_RECALL
        if predicted < 0.5:
            if len(self.deck.items) >= 4:
                return QuestionFormat(FormatKind.MULTIPLE_CHOICE, 4)
            return QuestionFormat(FormatKind.SELF_GRADED)
        return CUED_RECALL

    def _assemble_question(self, item: RankedItem) -> Question:
        fmt = self._choose_format(item.predicted)
        deck_item = self.deck.item(item.kc_id)
        prompt, answer = deck_item.side(item.direction)
        options: tuple[str, ...] = ()
        if fmt.kind is FormatKind.MULTIPLE_CHOICE:
            rng = np.random.default_rng([self.seed, self.question_count])
            others = [i for i in self.deck.items if i.kc_id != item.kc_id]
            picked = rng.choice(len(others), size=fmt.options_count - 1, replace=False)
            distractors = [others[int(i)].side(item.direction)[1] for i in picked]
            opts = distractors + [answer]
            rng.shuffle(opts)
            options = tuple(opts)
        return Question(
            kc_id=item.kc_id,
            direction=item.direction,
            format=fmt,
            prompt=prompt,
            answer=answer,
            options=options,
            predicted_recall=item.predicted,
        )

    def next_question(self, now: int) -> Question | None:
        """The eligible weakest item's question, or None when every item
        has reached the mastery threshold.

        Repeated calls without an intervening answer return the same
        outstanding question. The immediately-previous item is skipped
        when any other item is still below threshold, so a failed item
        cannot be drilled with zero spacing.
        """
        if self.outstanding is not None:
            return self.outstanding
        ranked = self.rank_items(now)
        if ranked[0].predicted >= self.mastery_threshold:
            return None
        head = ranked[0]
        if head.kc_id == self.previous_kc:
            alternative = next(
                (
                    r
                    for r in ranked[1:]
                    if r.kc_id != self.previous_kc and r.predicted < self.mastery_threshold
                ),
                None,
            )
            if alternative is not None:
                head = alternative
        question = self._assemble_question(head)
        self.outstanding = question
        self.question_count += 1
        return question

    def record_answer(
        self,
        kc_id: str,
        direction: Direction,
        fmt: QuestionFormat,
        correct: bool,
        now: int,
    ) -> list[RankedItem]:
        """Apply an answer to the outstanding question; returns the
        refreshed ranking.

        Raises:
            SessionProtocolError: no outstanding question, or the answer
                names a different question.
        """
        q = self.outstanding
        if q is None:
            raise SessionProtocolError("no outstanding question to answer")
        if (q.kc_id, q.direction, q.format.kind) != (kc_id, direction, fmt.kind):
            raise SessionProtocolError(
                f"answer for ({kc_id}, {direction.value}, {fmt.kind.value}) does not "
                f"match outstanding question ({q.kc_id}, {q.direction.value}, "
                f"{q.format.kind.value})"
            )
        record = TrialRecord(
            student_id=self.session_id,
            kc_id=kc_id,
            direction=direction,
            format=q.format,
            timestamp_s=now,
            correct=correct,
        )
        self.answer_log.append(record)
        if self.model_kind == "rpl":
            pair = self.rpl_states[kc_id]
            current = pair.get(direction)
            if current is None:
                new = init_state(correct, now, self.params)
            else:
                new = update_state(
                    current, correct, now, q.format.guess_probability, self.params
                )
            self.rpl_states[kc_id] = pair.with_state(direction, new)
        else:
            self.mlr_trials[kc_id].append(record)
        self.previous_kc = kc_id
        self.outstanding = None
        return self.rank_items(now)

    def progress(self, now: int) -> ProgressSummary:
        ranked = self.rank_items(now)
        mastered = sum(1 for r in ranked if r.predicted >= self.mastery_threshold)
        return ProgressSummary(
            items=tuple(ranked),
            mastered=mastered,
            mean_predicted=sum(r.predicted for r in ranked) / len(ranked),
            complete=mastered == len(ranked),
            mastery_threshold=self.mastery_threshold,
        )

    # -- persistence -----------------------------------------------------

    def to_json_dict(self) -> dict:
        states = [
            state_to_json_dict(kc_id, direction, state)
            for kc_id, pair in sorted(self.rpl_states.items())
            for direction, state in (
                (Direction.FORWARD, pair.forward),
                (Direction.BACKWARD, pair.backward),
            )
            if state is not None
        ]
        return {
            "session_id": self.session_id,
            "deck": self.deck.to_json_dict(),
            "model": self.model_kind,
            "params": self.params.to_json_dict(),
            "direction": self.direction.value,
            "format_policy": self.format_policy,
            "mastery_threshold": self.mastery_threshold,
            "cold_start": self.cold_start,
            "case_insensitive": self.case_insensitive,
            "seed": self.seed,
            "question_count": self.question_count,
            "previous_kc": self.previous_kc,
            "outstanding": self.outstanding.to_json_dict() if self.outstanding else None,
            "states": states,
            "answer_log": [t.to_json_dict() for t in self.answer_log],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "StudySession":
        model_kind = data["model"]
        params: MLRParams | RPLParams
        if model_kind == "mlr":
            params = MLRParams.from_json_dict(data["params"])
        else:
            params = RPLParams.from_json_dict(data["params"])
        session = cls(
            session_id=data["session_id"],
            deck=Deck.from_json_dict(data["deck"]),
            model_kind=model_kind,
            params=params,
            direction=Direction(data["direction"]),
            format_policy=data["format_policy"],
            mastery_threshold=float(data["mastery_threshold"]),
            cold_start=float(data["cold_start"]),
            case_insensitive=bool(data["case_insensitive"]),
            seed=int(data["seed"]),
        )
        session.question_count = int(data["question_count"])
        session.previous_kc = data["previous_kc"]
        if data.get("outstanding"):
            session.outstanding = Question.from_json_dict(data["outstanding"])
        for state_dict in data["states"]:
            kc_id, direction, state = state_from_json_dict(state_dict)
            session.rpl_states[kc_id] = session.rpl_states[kc_id].with_state(direction, state)
        for trial_dict in data["answer_log"]:
            record = trial_from_json_dict(trial_dict)
            session.answer_log.append(record)
            if model_kind == "mlr":
                session.mlr_trials[record.kc_id].append(record)
        return session

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "StudySession":
        return cls.from_json_dict(json.loads(text))


def replay_answer_log(session: StudySession) -> dict[str, StatePair]:
    """Rebuild RPL states by replaying the session's answer log.

    The result must equal the live session states exactly; the scheduler's
    log is a complete record of every state transition.
    """
    states: dict[str, StatePair] = {i.kc_id: StatePair() for i in session.deck.items}
    for record in session.answer_log:
        pair = states[record.kc_id]
        current = pair.get(record.direction)
        if current is None:
            new = init_state(record.correct, record.timestamp_s, session.params)
        else:
            new = update_state(
                current,
                record.correct,
                record.timestamp_s,
                record.format.guess_probability,
                session.params,
            )
        states[record.kc_id] = pair.with_state(record.direction, new)
    return states
