"""A complete weakest-first study session, scripted.

The scheduler always asks the item with the lowest predicted recall
(never repeating the same item twice in a row while others still need
work) and ends the session once every item clears the mastery threshold.
A scripted student with 70% true accuracy plays one session here.
"""

import numpy as np

from recallkit import Deck, DeckItem, REFERENCE_RPL_PARAMS, StudySession

deck = Deck(
    deck_id="capitals",
    items=(
        DeckItem("kc-fr", "France", "Paris"),
        DeckItem("kc-jp", "Japan", "Tokyo"),
        DeckItem("kc-ke", "Kenya", "Nairobi"),
        DeckItem("kc-pe", "Peru", "Lima"),
    ),
)

session = StudySession(
    session_id="demo",
    deck=deck,
    model_kind="rpl",
    params=REFERENCE_RPL_PARAMS,
    mastery_threshold=0.9,
    seed=7,
)

rng = np.random.default_rng(7)
now = 1_000_000
step = 0
while True:
    question = session.next_question(now)
    if question is None:
        break
    step += 1
    correct = bool(rng.random() < 0.7)
    ranked = session.record_answer(
        question.kc_id, question.direction, question.format, correct, now
    )
    bars = "  ".join(f"{r.kc_id.removeprefix('kc-')}={r.predicted:.2f}" for r in ranked)
    outcome = "correct " if correct else "MISSED  "
    print(
        f"q{step:02d}  {question.prompt:<7s} ({question.format.kind.value:<15s}) "
        f"{outcome} -> {bars}"
    )
    now += int(rng.integers(3, 15))  # seconds the student spends per card

progress = session.progress(now)
print(
    f"\nsession complete after {step} questions: "
    f"{progress.mastered}/{len(progress.items)} items at or above "
    f"{progress.mastery_threshold:.0%} predicted recall"
)
print(f"answer log holds {len(session.answer_log)} trials; replaying it "
      f"reproduces the final knowledge states exactly.")
