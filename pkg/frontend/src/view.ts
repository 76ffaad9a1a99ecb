/** DOM rendering for the questionnaire: a two-row table per feature
 * (subpopulation above, whole population below), five answer buttons, a
 * progress bar, and an error banner with a retry button. */

import { CardPayload } from "./api.js";
import { RATING_LABELS, View } from "./controller.js";

export class DomView implements View {
  private readonly cardHost: HTMLElement;
  private readonly progressFill: HTMLElement;
  private readonly progressText: HTMLElement;
  private readonly buttons: HTMLButtonElement[] = [];
  private readonly banner: HTMLElement;

  constructor(
    root: HTMLElement,
    private readonly onRate: (rating: number) => void,
    private readonly onRetry: () => void,
  ) {
    root.innerHTML = `
      <header class="progress">
        <div class="progress-track"><div class="progress-fill"></div></div>
        <span class="progress-text"></span>
      </header>
      <div class="banner hidden"></div>
      <main class="card-host"></main>
      <footer class="answers"></footer>
    `;
    this.cardHost = root.querySelector(".card-host") as HTMLElement;
    this.progressFill = root.querySelector(".progress-fill") as HTMLElement;
    this.progressText = root.querySelector(".progress-text") as HTMLElement;
    this.banner = root.querySelector(".banner") as HTMLElement;
    const answers = root.querySelector(".answers") as HTMLElement;
    RATING_LABELS.forEach((label, i) => {
      const button = document.createElement("button");
      button.type = "button";
      button.className = "answer";
      button.innerHTML = `<span class="key">${i + 1}</span>${label}`;
      button.addEventListener("click", () => this.onRate(i + 1));
      answers.appendChild(button);
      this.buttons.push(button);
    });
    document.addEventListener("keydown", (event) => {
      const n = Number(event.key);
      if (n >= 1 && n <= 5 && !this.buttons[0].disabled) {
        this.onRate(n);
      }
    });
  }

  showCard(card: CardPayload, cursor: number, total: number): void {
    this.banner.classList.add("hidden");
    const rows = card.features
      .map(
        (f) => `
      <tbody>
        <tr class="subpopulation">
          <th rowspan="2">${escapeHtml(f.name)}</th>
          <td class="tag">this group</td><td>${escapeHtml(f.subpopulation)}</td>
        </tr>
        <tr class="population">
          <td class="tag">everyone</td><td>${escapeHtml(f.population)}</td>
        </tr>
      </tbody>`,
      )
      .join("");
    this.cardHost.innerHTML = `
      <p class="prompt">Compared with the whole population, belonging to this
      group would make the risk&hellip;</p>
      <table class="card">${rows}</table>
    `;
    this.progressFill.style.width = `${total ? (100 * cursor) / total : 0}%`;
    this.progressText.textContent = `${cursor + 1} of ${total}`;
  }

  showDone(total: number, totalElapsedMs: number): void {
    this.banner.classList.add("hidden");
    const minutes = (totalElapsedMs / 60000).toFixed(1);
    this.cardHost.innerHTML = `
      <div class="done">
        <h2>All done</h2>
        <p>You assessed ${total} rules in ${minutes} minutes. Thank you.</p>
      </div>
    `;
    this.progressFill.style.width = "100%";
    this.progressText.textContent = `${total} of ${total}`;
    this.setButtonsEnabled(false);
  }

  showError(message: string, retryable: boolean): void {
    this.banner.classList.remove("hidden");
    this.banner.innerHTML = retryable
      ? `Could not submit: ${escapeHtml(message)} <button type="button" class="retry">Retry</button>`
      : `Something went wrong: ${escapeHtml(message)}`;
    const retry = this.banner.querySelector(".retry");
    if (retry) {
      retry.addEventListener("click", () => this.onRetry(), { once: true });
    }
  }

  setButtonsEnabled(enabled: boolean): void {
    this.buttons.forEach((b) => {
      b.disabled = !enabled;
    });
  }
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
