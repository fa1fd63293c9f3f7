/** End-to-end acceptance: a scripted browser-style flow against the real
 * service. Creates a five-item deck, plays a session through the DOM
 * (typed answers, option clicks, self-grading), and checks after every
 * answer that each probability on screen equals the service's own
 * number. The session must run at least 15 questions and finish with
 * every item at or above the 0.9 mastery threshold.
 *
 * The window URL matches the service origin (same-origin, exactly like
 * the deployed UI served from the service itself).
 *
 * @vitest-environment happy-dom
 * @vitest-environment-options { "url": "http://127.0.0.1:18731" }
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { StudyApp } from "../src/app.js";
import type { ProgressView, QuestionView } from "../src/types.js";
import { ServiceHarness } from "./service_harness.js";

const harness = new ServiceHarness();

const DECK = {
  deck_id: "e2e-capitals",
  items: [
    { kc_id: "fr", side_a: "France", side_b: "Paris" },
    { kc_id: "jp", side_a: "Japan", side_b: "Tokyo" },
    { kc_id: "ke", side_a: "Kenya", side_b: "Nairobi" },
    { kc_id: "pe", side_a: "Peru", side_b: "Lima" },
    { kc_id: "cl", side_a: "Chile", side_b: "Santiago" },
  ],
};
const ANSWERS = new Map(DECK.items.map((i) => [i.kc_id, i.side_b]));

beforeAll(async () => {
  await harness.start();
});

afterAll(async () => {
  await harness.stop();
});

function recordingFetch() {
  const record: { progress: ProgressView | null; next: QuestionView | null } = {
    progress: null,
    next: null,
  };
  // Reads each body once and hands the app a rebuilt response, so the
  // recorded JSON and the JSON the app renders come from the same bytes.
  const impl = async (input: string, init?: RequestInit): Promise<Response> => {
    const response = await fetch(input, init);
    const text = await response.text();
    if (response.ok && input.endsWith("/progress")) {
      record.progress = JSON.parse(text) as ProgressView;
    } else if (response.ok && input.endsWith("/next")) {
      const body = JSON.parse(text) as { question?: QuestionView };
      record.next = body.question ?? null;
    }
    return new Response(text, {
      status: response.status,
      headers: { "content-type": "application/json" },
    });
  };
  return { impl, record };
}

function assertBarsMatchServer(root: HTMLElement, progress: ProgressView): void {
  const bars = [...root.querySelectorAll<HTMLElement>(".mastery-bar")];
  expect(bars.length).toBe(progress.items.length);
  bars.forEach((bar, i) => {
    expect(bar.dataset.kc).toBe(progress.items[i].kc_id);
    // Exact float equality: the DOM attribute must round-trip to the
    // same double the service sent.
    expect(Number(bar.dataset.p)).toBe(progress.items[i].predicted_recall);
  });
}

async function answerThroughDom(
  root: HTMLElement,
  app: StudyApp,
  question: QuestionView,
  answerCorrectly: boolean,
): Promise<void> {
  if (question.format === "cued_recall") {
    const input = root.querySelector<HTMLInputElement>("#answer-input")!;
    input.value = answerCorrectly ? ANSWERS.get(question.kc_id)! : "definitely wrong";
    root
      .querySelector<HTMLFormElement>("#typed-form")!
      .dispatchEvent(new Event("submit", { cancelable: true }));
  } else if (question.format === "self_graded") {
    root.querySelector<HTMLButtonElement>("#reveal")!.click();
    const button = answerCorrectly ? "#grade-knew" : "#grade-missed";
    root.querySelector<HTMLButtonElement>(button)!.click();
  } else {
    const correct = ANSWERS.get(question.kc_id)!;
    const options = [...root.querySelectorAll<HTMLButtonElement>("button.option")];
    const target = answerCorrectly
      ? options.find((b) => b.dataset.option === correct)
      : options.find((b) => b.dataset.option !== correct);
    target!.click();
  }
  await app.pending;
}

describe("scripted study session against the live service", () => {
  it("answers 15+ questions with exact display parity and completes at mastery 0.9", async () => {
    const api = new ApiClient(harness.baseUrl);
    await api.createDeck(DECK);

    document.body.innerHTML = `<div id="app"></div>`;
    const root = document.getElementById("app")!;
    const { impl, record } = recordingFetch();
    const app = new StudyApp({ root, api: new ApiClient(harness.baseUrl, impl) });

    await app.boot();
    expect(root.textContent).toContain("e2e-capitals");
    (root.querySelector<HTMLButtonElement>("button.deck"))!.click();
    await app.pending;
    expect(app.error).toBeNull();
    expect(app.screen).toBe("question");

    let answered = 0;
    while (answered < 40) {
      if (app.screen === "complete") break;
      expect(app.screen).toBe("question");
      const question = app.question!;
      // The question card's own confidence figure is also server-sourced.
      const shown = root.querySelector<HTMLElement>("[data-question-p]")!;
      expect(Number(shown.dataset.questionP)).toBe(record.next!.predicted_recall);

      // Miss roughly every third answer early on so the session cannot
      // finish before 15 questions; answer correctly afterwards.
      const answerCorrectly = answered >= 12 || answered % 3 !== 1;
      await answerThroughDom(root, app, question, answerCorrectly);
      answered += 1;

      expect(app.error).toBeNull();
      expect(["feedback", "question", "complete"]).toContain(app.screen);
      if (app.screen === "feedback") {
        // Every bar equals the service's freshest /progress payload.
        assertBarsMatchServer(root, record.progress!);
        if (!answerCorrectly) {
          expect(root.textContent).toContain(ANSWERS.get(question.kc_id)!);
        }
        // Let real seconds pass early so items decay below threshold and
        // the session keeps producing questions.
        if (answered < 15) {
          await new Promise((resolve) => setTimeout(resolve, 1100));
        }
        root.querySelector<HTMLButtonElement>("#next-question")!.click();
        await app.pending;
      }
    }

    expect(answered).toBeGreaterThanOrEqual(15);
    expect(app.screen).toBe("complete");
    expect(root.textContent).toContain("Session complete");

    // Completion means every displayed item sits at or above 0.9.
    assertBarsMatchServer(root, record.progress!);
    const finalProgress = record.progress!;
    expect(finalProgress.complete).toBe(true);
    for (const item of finalProgress.items) {
      expect(item.predicted_recall).toBeGreaterThanOrEqual(0.9);
    }
  }, 120_000);
});
