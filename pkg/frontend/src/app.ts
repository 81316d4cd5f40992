// DOM wiring for the triage chat. One session per tab; the session id is the
// only state the client keeps (sessionStorage), so a refresh rebuilds the
// whole view from GET /v1/sessions/{id}.

import { ApiError, TriageApi } from "./api";
import {
  clearsThreshold,
  likelihoodPercent,
  SessionView,
  viewFromSnapshot,
  viewFromStart,
} from "./state";
import type { AnswerInput } from "./types";

const SESSION_KEY = "graphtriage.session";

const el = <K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string
): HTMLElementTagNameMap[K] => {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
};

export class TriageApp {
  // latest in-flight action; tests await this after dispatching events
  pending: Promise<void> = Promise.resolve();

  private view: SessionView | null = null;
  private readonly content: HTMLElement;
  private readonly toasts: HTMLElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: TriageApi,
    private readonly storage: Storage
  ) {
    this.content = el("div", "content");
    this.toasts = el("div", "toasts");
    this.root.append(this.content, this.toasts);
  }

  async init(): Promise<void> {
    const existing = this.storage.getItem(SESSION_KEY);
    if (existing) {
      try {
        this.view = viewFromSnapshot(await this.api.getSession(existing));
      } catch {
        this.storage.removeItem(SESSION_KEY);
        this.view = null;
      }
    }
    this.render();
  }

  private track(action: Promise<void>): Promise<void> {
    this.pending = action;
    return action;
  }

  private toast(message: string): void {
    const note = el("div", "toast", message);
    this.toasts.appendChild(note);
    setTimeout(() => note.remove(), 4000);
  }

  private async resync(): Promise<void> {
    if (this.view) {
      this.view = viewFromSnapshot(await this.api.getSession(this.view.sessionId));
    }
    this.render();
  }

  private async handle(work: () => Promise<void>): Promise<void> {
    try {
      await work();
      this.render();
    } catch (error) {
      if (error instanceof ApiError) {
        // non-destructive: report, then fall back to the server's view
        this.toast(`${error.code}: ${error.message}`);
        if (error.status === 409) await this.resync();
      } else {
        this.toast(String(error));
      }
    }
  }

  private async start(text: string, imageBase64?: string): Promise<void> {
    const started = await this.api.startSession(text, imageBase64);
    this.storage.setItem(SESSION_KEY, started.session_id);
    this.view = viewFromStart(started);
    if (this.view.phase === "finalize") {
      // single sharp match: no questions to ask, fetch the answer directly
      await this.api.submitAnswers(started.session_id, []);
      this.view = viewFromSnapshot(await this.api.getSession(started.session_id));
    }
  }

  private async submitAnswers(answers: AnswerInput[]): Promise<void> {
    if (!this.view) return;
    await this.api.submitAnswers(this.view.sessionId, answers);
    this.view = viewFromSnapshot(await this.api.getSession(this.view.sessionId));
  }

  private async followUp(text: string): Promise<void> {
    if (!this.view) return;
    await this.api.sendMessage(this.view.sessionId, text);
    this.view = viewFromSnapshot(await this.api.getSession(this.view.sessionId));
  }

  // --- rendering -----------------------------------------------------------

  private render(): void {
    this.content.textContent = "";
    if (!this.view) {
      this.content.appendChild(this.renderStartForm());
      return;
    }
    this.content.appendChild(this.renderCandidates());
    this.renderMessages();
    if (this.view.phase === "questions") {
      this.content.appendChild(this.renderQuestionForm());
    }
    if (this.view.verdicts.length || this.view.phase === "answered") {
      this.content.appendChild(this.renderVerdicts());
    }
    if (this.view.phase === "answered") {
      this.content.appendChild(this.renderFollowUpForm());
    }
  }

  private renderStartForm(): HTMLElement {
    const form = el("form", "start-form");
    const description = el("textarea");
    description.name = "description";
    description.placeholder =
      "Describe the skin problem: where it is, how it feels, how long you have had it.";
    const picture = el("input") as HTMLInputElement;
    picture.type = "file";
    picture.accept = "image/*";
    picture.name = "picture";
    const submit = el("button", "", "Check my symptoms");
    submit.type = "submit";
    form.append(description, picture, submit);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      if (!description.value.trim()) return;
      submit.disabled = true;
      this.track(
        this.handle(async () => {
          const image = picture.files?.[0]
            ? await readAsBase64(picture.files[0])
            : undefined;
          await this.start(description.value, image);
        }).finally(() => {
          submit.disabled = false;
        })
      );
    });
    return form;
  }

  private renderCandidates(): HTMLElement {
    const panel = el("div", "candidates");
    for (const candidate of this.view!.candidates) {
      const chip = el(
        "span",
        `chip ${candidate.via}`,
        `${candidate.name} ${candidate.score.toFixed(3)}`
      );
      chip.title =
        candidate.via === "direct"
          ? "matched your description directly"
          : "included as a related condition";
      panel.appendChild(chip);
    }
    return panel;
  }

  private renderMessages(): void {
    const log = el("div", "chat-log");
    for (const message of this.view!.messages) {
      log.appendChild(el("p", `msg ${message.who}`, message.text));
    }
    this.content.appendChild(log);
  }

  private renderQuestionForm(): HTMLElement {
    const form = el("form", "question-form");
    const rows: { id: string; input: HTMLInputElement; skip: HTMLInputElement }[] =
      [];
    for (const question of this.view!.questions) {
      const row = el("div", "question-row");
      row.appendChild(el("label", "", question.text));
      const input = el("input") as HTMLInputElement;
      input.type = "text";
      input.name = `answer-${question.id}`;
      const skip = el("input") as HTMLInputElement;
      skip.type = "checkbox";
      skip.name = `skip-${question.id}`;
      skip.addEventListener("change", () => {
        input.disabled = skip.checked;
      });
      const skipLabel = el("label", "skip-label", "skip");
      skipLabel.prepend(skip);
      row.append(input, skipLabel);
      form.appendChild(row);
      rows.push({ id: question.id, input, skip });
    }
    const submit = el("button", "", "Send answers");
    submit.type = "submit";
    form.appendChild(submit);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      submit.disabled = true;
      const answers: AnswerInput[] = rows.map((row) =>
        row.skip.checked || !row.input.value.trim()
          ? { question_id: row.id, skip: true }
          : { question_id: row.id, text: row.input.value }
      );
      this.track(
        this.handle(() => this.submitAnswers(answers)).finally(() => {
          submit.disabled = false;
        })
      );
    });
    return form;
  }

  private renderVerdicts(): HTMLElement {
    const panel = el("div", "verdicts");
    panel.appendChild(el("h3", "", "Condition likelihoods"));
    const nameOf = new Map(this.view!.candidates.map((c) => [c.id, c.name]));
    for (const verdict of this.view!.verdicts) {
      const row = el("details", `verdict ${clearsThreshold(verdict) ? "kept" : "pruned"}`);
      const summary = el("summary");
      summary.appendChild(
        el("span", "verdict-name", nameOf.get(verdict.condition) ?? verdict.condition)
      );
      const bar = el("div", "bar");
      const fill = el("div", "bar-fill");
      fill.style.width = `${likelihoodPercent(verdict)}%`;
      const threshold = el("div", "bar-threshold");
      threshold.style.left = "50%";
      bar.append(fill, threshold);
      summary.append(bar, el("span", "percent", `${likelihoodPercent(verdict)}%`));
      row.appendChild(summary);
      row.appendChild(el("p", "rationale", verdict.rationale));
      panel.appendChild(row);
    }
    return panel;
  }

  private renderFollowUpForm(): HTMLElement {
    const form = el("form", "follow-up-form");
    const input = el("input") as HTMLInputElement;
    input.type = "text";
    input.name = "follow-up";
    input.placeholder = "Ask a follow-up question";
    const submit = el("button", "", "Send");
    submit.type = "submit";
    form.append(input, submit);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      if (!input.value.trim()) return;
      submit.disabled = true;
      const text = input.value;
      this.track(
        this.handle(() => this.followUp(text)).finally(() => {
          submit.disabled = false;
        })
      );
    });
    return form;
  }
}

const readAsBase64 = (file: File): Promise<string> =>
  new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => {
      const url = String(reader.result);
      resolve(url.slice(url.indexOf(",") + 1));
    };
    reader.onerror = () => reject(reader.error);
    reader.readAsDataURL(file);
  });
