import { ApiClient, ApiError } from "./api.js";
import type {
  DeckSummary,
  LastAnswer,
  ProgressView,
  QuestionView,
  SessionView,
} from "./types.js";

export type Screen = "decks" | "question" | "feedback" | "complete";

export interface AppOptions {
  root: HTMLElement;
  api: ApiClient;
  /** Keeps the URL (or any external store) in sync for reload-resume. */
  onSessionChange?: (sessionId: string | null) => void;
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** The study screen. All state lives here; render() redraws everything
 * from it. The app computes no probabilities: bars and percentages are
 * lifted from the last `GET /progress` payload, question confidence from
 * the question payload. */
export class StudyApp {
  screen: Screen = "decks";
  decks: DeckSummary[] = [];
  session: SessionView | null = null;
  question: QuestionView | null = null;
  progressView: ProgressView | null = null;
  feedback: LastAnswer | null = null;
  error: string | null = null;
  revealed = false;
  busy = false;
  /** Last in-flight action; tests await this after dispatching DOM events. */
  pending: Promise<void> = Promise.resolve();

  private retryAction: (() => Promise<void>) | null = null;

  constructor(private readonly options: AppOptions) {}

  // -- actions ---------------------------------------------------------

  async boot(resumeSessionId?: string): Promise<void> {
    if (resumeSessionId) {
      try {
        this.session = await this.options.api.getSession(resumeSessionId);
        await this.refreshProgress();
        await this.fetchNext();
        return;
      } catch {
        // Stale or foreign session id: fall through to the deck picker.
        this.session = null;
        this.options.onSessionChange?.(null);
      }
    }
    await this.loadDecks();
  }

  async loadDecks(): Promise<void> {
    await this.guard(async () => {
      this.decks = (await this.options.api.listDecks()).decks;
      this.screen = "decks";
    });
  }

  async selectDeck(deckId: string): Promise<void> {
    await this.guard(async () => {
      this.session = await this.options.api.createSession({
        deck_id: deckId,
        mastery_threshold: 0.9,
        case_insensitive: true,
      });
      this.options.onSessionChange?.(this.session.session_id);
      await this.refreshProgress();
      await this.fetchNextInner();
    });
  }

  async fetchNext(): Promise<void> {
    await this.guard(() => this.fetchNextInner());
  }

  private async fetchNextInner(): Promise<void> {
    if (!this.session) return;
    const next = await this.options.api.nextQuestion(this.session.session_id);
    this.feedback = null;
    this.revealed = false;
    if (next.complete) {
      this.question = null;
      await this.refreshProgress();
      this.screen = "complete";
    } else {
      this.question = next.question ?? null;
      this.screen = "question";
    }
  }

  async submitTyped(text: string): Promise<void> {
    await this.answer({ typed_answer: text });
  }

  async chooseOption(option: string): Promise<void> {
    await this.answer({ typed_answer: option });
  }

  async grade(knewIt: boolean): Promise<void> {
    await this.answer({ correct: knewIt });
  }

  reveal(): void {
    this.revealed = true;
    this.render();
  }

  private async answer(outcome: { typed_answer?: string; correct?: boolean }): Promise<void> {
    const question = this.question;
    const session = this.session;
    if (!question || !session) return;
    await this.guard(async () => {
      try {
        const view = await this.options.api.submitAnswer(session.session_id, {
          kc_id: question.kc_id,
          direction: question.direction,
          format: question.format,
          ...(question.options_count !== undefined
            ? { options_count: question.options_count }
            : {}),
          ...outcome,
        });
        this.session = view;
        this.feedback = view.last_answer ?? null;
        await this.refreshProgress();
        this.screen = "feedback";
      } catch (error) {
        if (error instanceof ApiError && error.status === 409) {
          // The question on screen went stale; fetch the current one.
          await this.fetchNextInner();
          return;
        }
        throw error;
      }
    });
  }

  private async refreshProgress(): Promise<void> {
    if (!this.session) return;
    this.progressView = await this.options.api.progress(this.session.session_id);
  }

  async retry(): Promise<void> {
    const action = this.retryAction;
    this.retryAction = null;
    this.error = null;
    if (action) {
      await this.guard(action);
    } else {
      this.render();
    }
  }

  /** Serializes actions, maps failures to the banner, always re-renders. */
  private async guard(action: () => Promise<void>): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    this.render();
    try {
      await action();
      this.error = null;
      this.retryAction = null;
    } catch (error) {
      this.error = error instanceof Error ? error.message : String(error);
      this.retryAction = action;
    } finally {
      this.busy = false;
      this.render();
    }
  }

  // -- rendering -------------------------------------------------------

  render(): void {
    const root = this.options.root;
    root.innerHTML = `
      <main class="study">
        ${this.error ? this.renderError() : ""}
        ${this.renderScreen()}
      </main>
    `;
    this.wire(root);
  }

  private renderError(): string {
    return `
      <div class="banner error" role="alert">
        <span>${esc(this.error ?? "")}</span>
        <button id="retry">Retry</button>
      </div>
    `;
  }

  private renderScreen(): string {
    switch (this.screen) {
      case "decks":
        return this.renderDecks();
      case "complete":
        return `
          <section class="card complete">
            <h1>Session complete</h1>
            <p>Every item is at or above the mastery threshold.</p>
            ${this.renderMastery()}
            <button id="back-to-decks">Study another deck</button>
          </section>
        `;
      case "question":
      case "feedback":
        return `
          ${this.renderHeader()}
          ${this.screen === "question" ? this.renderQuestion() : this.renderFeedback()}
          ${this.renderMastery()}
        `;
    }
  }

  private renderDecks(): string {
    const list = this.decks.length
      ? this.decks
          .map(
            (d) => `
              <li>
                <button class="deck" data-deck="${esc(d.deck_id)}">
                  ${esc(d.deck_id)} <span class="size">${d.size} items</span>
                </button>
              </li>`,
          )
          .join("")
      : `<p class="empty">No decks yet. Create one through the API and reload.</p>`;
    return `
      <section class="card decks">
        <h1>Pick a deck</h1>
        <ul class="deck-list">${list}</ul>
      </section>
    `;
  }

  private renderHeader(): string {
    const s = this.session;
    const p = this.progressView;
    if (!s) return "";
    const counters = p
      ? `${p.mastered}/${p.items.length} mastered`
      : `${s.progress.mastered}/${s.progress.total} mastered`;
    return `
      <header class="session-header">
        <span class="deck-name">${esc(s.deck_id)}</span>
        <span class="counters">${counters} &middot; ${s.progress.answers} answers</span>
      </header>
    `;
  }

  private renderQuestion(): string {
    const q = this.question;
    if (!q) return "";
    const confidence = `predicted recall <strong data-question-p="${String(
      q.predicted_recall,
    )}">${(q.predicted_recall * 100).toFixed(0)}%</strong>`;
    let body: string;
    if (q.format === "cued_recall") {
      body = `
        <form id="typed-form">
          <input id="answer-input" autocomplete="off" placeholder="Type the answer" />
          <button id="submit-answer" type="submit" ${this.busy ? "disabled" : ""}>Check</button>
        </form>
      `;
    } else if (q.format === "self_graded") {
      body = this.revealed
        ? `
          <p class="revealed-answer">${esc(q.answer ?? "")}</p>
          <div class="grade">
            <button id="grade-knew" ${this.busy ? "disabled" : ""}>I knew it</button>
            <button id="grade-missed" ${this.busy ? "disabled" : ""}>I didn't</button>
          </div>
        `
        : `<button id="reveal">Show answer</button>`;
    } else {
      body = `
        <div class="options">
          ${q.options
            .map(
              (option) => `
                <button class="option" data-option="${esc(option)}" ${this.busy ? "disabled" : ""}>
                  ${esc(option)}
                </button>`,
            )
            .join("")}
        </div>
      `;
    }
    return `
      <section class="card question" data-kc="${esc(q.kc_id)}" data-format="${q.format}">
        <p class="confidence">${confidence}</p>
        <h1 class="prompt">${esc(q.prompt)}</h1>
        ${body}
      </section>
    `;
  }

  private renderFeedback(): string {
    const f = this.feedback;
    if (!f) return "";
    const verdict = f.correct
      ? `<p class="verdict correct">Correct</p>`
      : `
        <p class="verdict incorrect">Not quite</p>
        <p class="expected">Answer: <strong>${esc(f.expected_answer)}</strong></p>
      `;
    return `
      <section class="card feedback" data-kc="${esc(f.kc_id)}">
        ${verdict}
        <button id="next-question" ${this.busy ? "disabled" : ""}>Next question</button>
      </section>
    `;
  }

  /** Bars render the progress payload exactly as served: same order
   * (weakest first), raw probability in data-p, formatted label. */
  private renderMastery(): string {
    const p = this.progressView;
    if (!p) return "";
    const bars = p.items
      .map((item) => {
        const pct = (item.predicted_recall * 100).toFixed(1);
        const mastered = item.predicted_recall >= p.mastery_threshold;
        return `
          <div class="mastery-bar ${mastered ? "mastered" : ""}"
               data-kc="${esc(item.kc_id)}"
               data-p="${String(item.predicted_recall)}">
            <span class="label">${esc(item.kc_id)}</span>
            <span class="track"><span class="fill" style="width: ${pct}%"></span></span>
            <span class="value">${pct}%</span>
          </div>
        `;
      })
      .join("");
    return `
      <aside class="mastery" aria-label="predicted recall by item">
        <h2>Predicted recall</h2>
        ${bars}
      </aside>
    `;
  }

  // -- event wiring ------------------------------------------------------

  private wire(root: HTMLElement): void {
    root.querySelector<HTMLButtonElement>("#retry")?.addEventListener("click", () => {
      this.pending = this.retry();
    });
    root.querySelectorAll<HTMLButtonElement>("button.deck").forEach((button) => {
      button.addEventListener("click", () => {
        this.pending = this.selectDeck(button.dataset.deck ?? "");
      });
    });
    const form = root.querySelector<HTMLFormElement>("#typed-form");
    form?.addEventListener("submit", (event) => {
      event.preventDefault();
      const input = root.querySelector<HTMLInputElement>("#answer-input");
      this.pending = this.submitTyped(input?.value ?? "");
    });
    root.querySelectorAll<HTMLButtonElement>("button.option").forEach((button) => {
      button.addEventListener("click", () => {
        this.pending = this.chooseOption(button.dataset.option ?? "");
      });
    });
    root.querySelector<HTMLButtonElement>("#reveal")?.addEventListener("click", () => {
      this.reveal();
    });
    root.querySelector<HTMLButtonElement>("#grade-knew")?.addEventListener("click", () => {
      this.pending = this.grade(true);
    });
    root.querySelector<HTMLButtonElement>("#grade-missed")?.addEventListener("click", () => {
      this.pending = this.grade(false);
    });
    root.querySelector<HTMLButtonElement>("#next-question")?.addEventListener("click", () => {
      this.pending = this.fetchNext();
    });
    root.querySelector<HTMLButtonElement>("#back-to-decks")?.addEventListener("click", () => {
      this.session = null;
      this.progressView = null;
      this.options.onSessionChange?.(null);
      this.pending = this.loadDecks();
    });
  }
}
