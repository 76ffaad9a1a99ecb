/**
 * Questionnaire flow: one card at a time, five-point answers, per-question
 * timing measured from card display to the rating click. Submissions wait
 * for the server acknowledgement (no optimistic advance), buttons stay
 * disabled until the ack arrives, and a failed submission keeps the chosen
 * rating for retry. There is no back button; resuming is entirely
 * server-driven (the session cursor decides the next card).
 */

import { CardPayload, QuestionnaireApi } from "./api.js";

export const RATING_LABELS: ReadonlyArray<string> = [
  "highly decrease",
  "moderately decrease",
  "no effect",
  "moderately increase",
  "highly increase",
];

export interface View {
  showCard(card: CardPayload, cursor: number, total: number): void;
  showDone(total: number, totalElapsedMs: number): void;
  showError(message: string, retryable: boolean): void;
  setButtonsEnabled(enabled: boolean): void;
}

export type Clock = () => number;

export class QuestionnaireController {
  private sessionId = "";
  private card: CardPayload | null = null;
  private cardShownAt = 0;
  private pendingRating: number | null = null;
  private submitting = false;
  private startedAt = 0;

  constructor(
    private readonly api: QuestionnaireApi,
    private readonly view: View,
    private readonly clock: Clock = () => Date.now(),
  ) {}

  get currentCard(): CardPayload | null {
    return this.card;
  }

  get isSubmitting(): boolean {
    return this.submitting;
  }

  async start(expertId: string): Promise<void> {
    this.startedAt = this.clock();
    try {
      const session = await this.api.startSession(expertId);
      this.sessionId = session.session_id;
      await this.advance();
    } catch (error) {
      this.view.showError(describe(error), false);
    }
  }

  /** Fetch and display the card at the server cursor (or the done screen). */
  async advance(): Promise<void> {
    try {
      const next = await this.api.nextRule(this.sessionId);
      if (next.done) {
        this.card = null;
        this.view.showDone(next.total, this.clock() - this.startedAt);
        return;
      }
      this.card = next.card ?? null;
      if (this.card === null) {
        this.view.showError("malformed payload: card missing", false);
        return;
      }
      if (!validCard(this.card)) {
        this.card = null;
        this.view.showError("malformed payload: bad card shape", false);
        return;
      }
      this.cardShownAt = this.clock();
      this.pendingRating = null;
      this.view.showCard(this.card, next.cursor, next.total);
      this.view.setButtonsEnabled(true);
    } catch (error) {
      this.view.showError(describe(error), false);
    }
  }

  /**
   * Submit the rating for the displayed card and advance on ack. While a
   * submission is in flight further ratings are ignored (double-click
   * guard); on network failure the rating is kept and retry() resends it.
   */
  async rate(rating: number): Promise<void> {
    if (this.card === null || this.submitting) {
      return;
    }
    if (!(Number.isInteger(rating) && rating >= 1 && rating <= 5)) {
      return;
    }
    this.pendingRating = rating;
    await this.send();
  }

  async retry(): Promise<void> {
    if (this.card !== null && this.pendingRating !== null && !this.submitting) {
      await this.send();
    }
  }

  private async send(): Promise<void> {
    if (this.card === null || this.pendingRating === null) {
      return;
    }
    this.submitting = true;
    this.view.setButtonsEnabled(false);
    const elapsed = Math.max(0, Math.round(this.clock() - this.cardShownAt));
    try {
      await this.api.submitAssessment(
        this.sessionId,
        this.card.rule_id,
        this.pendingRating,
        elapsed,
      );
      this.submitting = false;
      await this.advance();
    } catch (error) {
      this.submitting = false;
      this.view.showError(describe(error), true);
    }
  }
}

function validCard(card: CardPayload): boolean {
  return (
    typeof card.rule_id === "string" &&
    Array.isArray(card.features) &&
    card.features.length > 0 &&
    card.features.every(
      (f) =>
        typeof f.name === "string" &&
        typeof f.subpopulation === "string" &&
        typeof f.population === "string",
    )
  );
}

function describe(error: unknown): string {
  if (error instanceof Error) {
    return error.message;
  }
  return String(error);
}
