import pytest

from recallkit.domain import (
    CUED_RECALL,
    Deck,
    DeckItem,
    Direction,
    QuestionFormat,
    TrialRecord,
)


def make_trial(
    timestamp_s: int,
    correct: bool = True,
    student_id: str = "s1",
    kc_id: str = "k1",
    direction: Direction = Direction.FORWARD,
    fmt: QuestionFormat = CUED_RECALL,
) -> TrialRecord:
    return TrialRecord(
        student_id=student_id,
        kc_id=kc_id,
        direction=direction,
        format=fmt,
        timestamp_s=timestamp_s,
        correct=correct,
    )


@pytest.fixture
def small_deck() -> Deck:
    return Deck(
        deck_id="d1",
        items=tuple(
            DeckItem(kc_id=f"kc{i}", side_a=f"cue {i}", side_b=f"answer {i}")
            for i in range(5)
        ),
    )
