/** Single-page rater app: setup -> chat -> questionnaire -> done.
 *
 * The server is the source of truth; the only client-side session state is
 * held in memory here (a reload abandons the session, it is never reset
 * silently). In A/B mode the hidden model order stays hidden until the
 * rating has been submitted.
 */

import { ApiError, Client, Reply } from "./api.js";
import {
  AB_CHOICES,
  RATING_METRICS,
  RatingMetric,
  buildAbPayload,
  buildScoresPayload,
} from "./schema.js";

interface Turn {
  seeker: string;
  replies: Reply[];
}

type Phase = "setup" | "chat" | "rate" | "done";

interface AppState {
  phase: Phase;
  arm: "single" | "ab";
  sessionId: string | null;
  labels: string[];
  turns: Turn[];
  showStrategies: boolean;
  busy: boolean;
  error: string | null;
  fieldError: string | null;
  scores: Partial<Record<RatingMetric, number>>;
  abChoice: string | null;
  comment: string;
  unblinded: Record<string, string> | null;
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export class App {
  state: AppState = {
    phase: "setup",
    arm: "single",
    sessionId: null,
    labels: [],
    turns: [],
    showStrategies: false,
    busy: false,
    error: null,
    fieldError: null,
    scores: {},
    abChoice: null,
    comment: "",
    unblinded: null,
  };

  private lastAction: (() => Promise<void>) | null = null;
  private draftMessage = "";
  private draftModels = "candidate";

  constructor(
    private root: HTMLElement,
    private client: Client,
  ) {
    this.render();
  }

  // --- actions ---------------------------------------------------------------

  private async run(action: () => Promise<void>): Promise<void> {
    this.lastAction = action;
    this.state.busy = true;
    this.state.error = null;
    this.render();
    try {
      await action();
    } catch (error) {
      this.state.error = error instanceof ApiError ? error.message : String(error);
    }
    this.state.busy = false;
    this.render();
  }

  startSession(arm: "single" | "ab", models: string[]): Promise<void> {
    return this.run(async () => {
      const info = await this.client.createSession(arm, models);
      this.state.phase = "chat";
      this.state.arm = info.arm;
      this.state.sessionId = info.session_id;
      this.state.labels = info.labels;
      this.state.turns = [];
    });
  }

  sendMessage(text: string): Promise<void> {
    return this.run(async () => {
      if (!this.state.sessionId) throw new Error("no open session");
      const body = await this.client.postMessage(this.state.sessionId, text);
      this.state.turns.push({ seeker: text, replies: body.replies });
      this.draftMessage = "";
    });
  }

  openQuestionnaire(): void {
    this.state.phase = "rate";
    this.state.fieldError = null;
    this.render();
  }

  ratingPayload() {
    return this.state.arm === "ab"
      ? this.state.abChoice
        ? buildAbPayload(this.state.abChoice, this.state.comment)
        : null
      : buildScoresPayload(this.state.scores, this.state.comment);
  }

  submitRating(): Promise<void> {
    return this.run(async () => {
      const payload = this.ratingPayload();
      if (!payload || !this.state.sessionId) return;
      try {
        const result = await this.client.submitRating(this.state.sessionId, payload);
        this.state.unblinded = result.unblinded_mapping;
        this.state.phase = "done";
      } catch (error) {
        if (error instanceof ApiError && error.status === 400) {
          this.state.fieldError = error.detail;
          return;
        }
        throw error;
      }
    });
  }

  retry(): Promise<void> {
    return this.lastAction ? this.run(this.lastAction) : Promise.resolve();
  }

  // --- rendering --------------------------------------------------------------

  render(): void {
    const { phase } = this.state;
    const banner = this.state.error
      ? `<div class="banner" data-testid="error-banner">
           <span>${escapeHtml(this.state.error)}</span>
           <button data-testid="retry-button">Retry</button>
         </div>`
      : "";
    const views: Record<Phase, () => string> = {
      setup: () => this.renderSetup(),
      chat: () => this.renderChat(),
      rate: () => this.renderRating(),
      done: () => this.renderDone(),
    };
    this.root.innerHTML = `<div class="app">${banner}${views[phase]()}</div>`;
    this.bind();
  }

  private renderSetup(): string {
    return `
      <section class="setup" data-testid="setup-view">
        <h1>Support chat evaluation</h1>
        <p>You will chat as someone seeking support, then rate the conversation.</p>
        <label>Mode
          <select data-testid="arm-select">
            <option value="single" ${this.state.arm === "single" ? "selected" : ""}>Single model</option>
            <option value="ab" ${this.state.arm === "ab" ? "selected" : ""}>Blind A/B comparison</option>
          </select>
        </label>
        <label>Model refs (comma separated; two for A/B)
          <input data-testid="models-input" value="${escapeHtml(this.draftModels)}" />
        </label>
        <button data-testid="start-button" ${this.state.busy ? "disabled" : ""}>Start session</button>
      </section>`;
  }

  private renderBubble(reply: Reply): string {
    const badge = this.state.showStrategies
      ? `<span class="strategy-badge" data-testid="strategy-badge">${escapeHtml(reply.strategy)}</span>`
      : "";
    return `<div class="bubble supporter">${badge}<p>${escapeHtml(reply.text)}</p></div>`;
  }

  private renderTurn(turn: Turn): string {
    const seeker = `<div class="bubble seeker"><p>${escapeHtml(turn.seeker)}</p></div>`;
    if (this.state.arm === "ab") {
      const cards = turn.replies
        .map(
          (reply) => `
            <div class="reply-card" data-label="${escapeHtml(reply.label)}">
              <span class="reply-label">${escapeHtml(reply.label)}</span>
              ${this.renderBubble(reply)}
            </div>`,
        )
        .join("");
      return `${seeker}<div class="reply-pair">${cards}</div>`;
    }
    return seeker + turn.replies.map((reply) => this.renderBubble(reply)).join("");
  }

  private renderChat(): string {
    const transcript = this.state.turns.map((turn) => this.renderTurn(turn)).join("");
    return `
      <section class="chat" data-testid="chat-view">
        <header>
          <label class="toggle">
            <input type="checkbox" data-testid="strategy-toggle" ${this.state.showStrategies ? "checked" : ""} />
            Show strategies
          </label>
          <button data-testid="finish-button" ${this.state.turns.length ? "" : "disabled"}>
            Finish &amp; rate
          </button>
        </header>
        <div class="transcript" data-testid="transcript">${transcript}</div>
        <footer class="composer">
          <input data-testid="message-input" placeholder="Write as the seeker…"
                 value="${escapeHtml(this.draftMessage)}" ${this.state.busy ? "disabled" : ""} />
          <button data-testid="send-button" ${this.state.busy ? "disabled" : ""}>Send</button>
        </footer>
      </section>`;
  }

  private renderRating(): string {
    const fieldError = this.state.fieldError
      ? `<p class="field-error" data-testid="field-error">${escapeHtml(this.state.fieldError)}</p>`
      : "";
    const complete = this.ratingPayload() !== null;
    const submit = `<button data-testid="submit-rating" ${complete && !this.state.busy ? "" : "disabled"}>Submit rating</button>`;
    if (this.state.arm === "ab") {
      const choices = AB_CHOICES.map(
        (choice) => `
          <label class="ab-choice">
            <input type="radio" name="ab-choice" value="${choice}"
                   ${this.state.abChoice === choice ? "checked" : ""} />
            ${choice}
          </label>`,
      ).join("");
      return `
        <section class="rating" data-testid="rating-view">
          <h2>Which response stream was better?</h2>
          <div data-testid="ab-choice-group">${choices}</div>
          <textarea data-testid="comment-input" placeholder="Optional comment">${escapeHtml(this.state.comment)}</textarea>
          ${fieldError}${submit}
        </section>`;
    }
    const rows = RATING_METRICS.map((metric) => {
      const cells = [1, 2, 3, 4, 5]
        .map(
          (value) => `
            <label><input type="radio" name="metric-${metric}" value="${value}"
                   ${this.state.scores[metric] === value ? "checked" : ""} /> ${value}</label>`,
        )
        .join("");
      return `<div class="likert-row" data-metric="${metric}"><span>${metric}</span>${cells}</div>`;
    }).join("");
    return `
      <section class="rating" data-testid="rating-view">
        <h2>Rate the conversation (1 = poor, 5 = excellent)</h2>
        <div data-testid="likert-grid">${rows}</div>
        <textarea data-testid="comment-input" placeholder="Optional comment">${escapeHtml(this.state.comment)}</textarea>
        ${fieldError}${submit}
      </section>`;
  }

  private renderDone(): string {
    const mapping = this.state.unblinded
      ? `<dl data-testid="unblinded-mapping">${Object.entries(this.state.unblinded)
          .map(([label, model]) => `<dt>${escapeHtml(label)}</dt><dd>${escapeHtml(model)}</dd>`)
          .join("")}</dl>`
      : "";
    const exportUrl = this.state.sessionId ? this.client.exportUrl(this.state.sessionId) : "#";
    return `
      <section class="done" data-testid="done-view">
        <h2>Thank you! Your rating was stored.</h2>
        ${mapping}
        <a data-testid="export-link" href="${escapeHtml(exportUrl)}">Download transcript</a>
      </section>`;
  }

  // --- event wiring -------------------------------------------------------------

  private q<T extends HTMLElement>(testId: string): T | null {
    return this.root.querySelector<T>(`[data-testid="${testId}"]`);
  }

  private bind(): void {
    this.q<HTMLButtonElement>("retry-button")?.addEventListener("click", () => void this.retry());

    this.q<HTMLSelectElement>("arm-select")?.addEventListener("change", (event) => {
      this.state.arm = (event.target as HTMLSelectElement).value as "single" | "ab";
    });
    this.q<HTMLInputElement>("models-input")?.addEventListener("input", (event) => {
      this.draftModels = (event.target as HTMLInputElement).value;
    });
    this.q<HTMLButtonElement>("start-button")?.addEventListener("click", () => {
      const models = this.draftModels
        .split(",")
        .map((ref) => ref.trim())
        .filter(Boolean);
      void this.startSession(this.state.arm, models);
    });

    const messageInput = this.q<HTMLInputElement>("message-input");
    messageInput?.addEventListener("input", (event) => {
      this.draftMessage = (event.target as HTMLInputElement).value;
    });
    this.q<HTMLButtonElement>("send-button")?.addEventListener("click", () => {
      const text = this.draftMessage.trim();
      if (text) void this.sendMessage(text);
    });
    this.q<HTMLInputElement>("strategy-toggle")?.addEventListener("change", (event) => {
      this.state.showStrategies = (event.target as HTMLInputElement).checked;
      this.render();
    });
    this.q<HTMLButtonElement>("finish-button")?.addEventListener("click", () => this.openQuestionnaire());

    for (const metric of RATING_METRICS) {
      this.root.querySelectorAll<HTMLInputElement>(`input[name="metric-${metric}"]`).forEach((radio) => {
        radio.addEventListener("change", () => {
          this.state.scores[metric] = Number(radio.value);
          this.render();
        });
      });
    }
    this.root.querySelectorAll<HTMLInputElement>('input[name="ab-choice"]').forEach((radio) => {
      radio.addEventListener("change", () => {
        this.state.abChoice = radio.value;
        this.render();
      });
    });
    this.q<HTMLTextAreaElement>("comment-input")?.addEventListener("input", (event) => {
      this.state.comment = (event.target as HTMLTextAreaElement).value;
    });
    this.q<HTMLButtonElement>("submit-rating")?.addEventListener("click", () => void this.submitRating());
  }
}
