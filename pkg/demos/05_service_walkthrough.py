"""The HTTP session service, exercised in-process.

The same flow the browser UI drives: create a deck, open a session,
loop question -> answer -> refreshed predictions. Runs against an
in-process app instance; `recallkit serve` exposes the identical API
over a real socket.
"""

import warnings

warnings.filterwarnings("ignore", message="Using `httpx` with `starlette.testclient`")

from fastapi.testclient import TestClient

from recallkit.service import create_app

app = create_app()
client = TestClient(app)

deck = {
    "deck_id": "walkthrough",
    "items": [
        {"kc_id": "kc-de", "side_a": "Germany", "side_b": "Berlin"},
        {"kc_id": "kc-eg", "side_a": "Egypt", "side_b": "Cairo"},
        {"kc_id": "kc-cl", "side_a": "Chile", "side_b": "Santiago"},
    ],
}
print("POST /decks ->", client.post("/decks", json=deck).json())

view = client.post(
    "/sessions", json={"deck_id": "walkthrough", "model": "rpl"}
).json()
sid = view["session_id"]
print(f"POST /sessions -> session {sid}, {view['deck_size']} items, all cold at 0.5")

answers = {"kc-de": "Berlin", "kc-eg": "Cairo", "kc-cl": "wrong guess"}
for step in range(4):
    nxt = client.get(f"/sessions/{sid}/next").json()
    if nxt.get("complete"):
        # Recall resets to 1 after each answer and this scripted loop runs
        # within a single second of server time, so one pass masters
        # everything. Real sessions decay between questions (see demo 04).
        print("session complete")
        break
    q = nxt["question"]
    body = {
        "kc_id": q["kc_id"],
        "direction": q["direction"],
        "format": q["format"],
        "typed_answer": answers.get(q["kc_id"], ""),
    }
    if "options_count" in q:
        body["options_count"] = q["options_count"]
    result = client.post(f"/sessions/{sid}/answers", json=body).json()
    feedback = result["last_answer"]
    verdict = "correct" if feedback["correct"] else f"wrong (expected {feedback['expected_answer']!r})"
    print(f"  answered {q['prompt']!r}: {verdict}")

progress = client.get(f"/sessions/{sid}/progress").json()
print("GET /progress ->")
for item in progress["items"]:
    print(f"  {item['kc_id']}: predicted recall {item['predicted_recall']:.3f}")
print(f"mastered {progress['mastered']}/{len(progress['items'])}")
