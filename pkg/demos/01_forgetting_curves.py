"""Power-law forgetting curves and how answers reshape them.

Every studied item carries a curve p(r) = (1 + e^{-s} r)^{-e^{-tau}} over
the retention interval r. Feedback resets recall to 1 after every answer;
what an answer really changes is the curve's shape: correct answers
flatten it (slower forgetting), incorrect answers steepen it.
"""

from recallkit import REFERENCE_RPL_PARAMS, init_state, recall_probability, update_state

HOUR = 3600
DAY = 86_400
GRID = [("1 min", 60), ("1 hour", HOUR), ("1 day", DAY), ("1 week", 7 * DAY), ("30 days", 30 * DAY)]


def show_curve(label, state):
    cells = "  ".join(f"{name}: {recall_probability(state, r):.3f}" for name, r in GRID)
    print(f"{label:<34s} {cells}")


params = REFERENCE_RPL_PARAMS

print("Recall probability by retention interval (reference parameters)\n")
after_hit = init_state(True, trial_time=1, params=params)
after_miss = init_state(False, trial_time=1, params=params)
show_curve("first answer correct", after_hit)
show_curve("first answer incorrect", after_miss)

print("\nA second answer an hour later reshapes the curve:")
second_hit = update_state(after_hit, True, 1 + HOUR, g_f=0.0, params=params)
second_miss = update_state(after_hit, False, 1 + HOUR, g_f=0.0, params=params)
show_curve("correct, then correct (+1 h)", second_hit)
show_curve("correct, then incorrect (+1 h)", second_miss)

print("\nGuessing damps what a correct answer proves. The same second answer")
print("on a 4-option multiple-choice question moves the curve less:")
second_mc = update_state(after_hit, True, 1 + HOUR, g_f=0.25, params=params)
show_curve("correct via multiple choice", second_mc)

print("\nSpacing matters: a correct answer after a long gap (when predicted")
print("recall had decayed further) earns a larger update:")
massed = update_state(after_hit, True, 1 + 60, g_f=0.0, params=params)
spaced = update_state(after_hit, True, 1 + 3 * DAY, g_f=0.0, params=params)
show_curve("reinforced after 1 minute", massed)
show_curve("reinforced after 3 days", spaced)
