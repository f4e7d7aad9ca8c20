/** Page logic: connect, review one item at a time, submit five criteria. */

import { ApiError, ReviewClient, freshSession } from "./api.js";
import { clear, el, pretty, progressLabel } from "./dom.js";
import {
  CRITERIA,
  CRITERION_LABELS,
  type Criteria,
  type Progress,
  type ReviewItem,
} from "./types.js";

const PENDING_RETRY_MS = 3000;

interface Ui {
  root: HTMLElement;
  client: ReviewClient;
}

function notice(kind: "info" | "error", text: string): HTMLElement {
  return el("p", { class: `notice ${kind}` }, text);
}

function renderProgress(progress: Progress | null): HTMLElement {
  const bar = el("div", { class: "progress" });
  if (!progress) return bar;
  const fraction = progress.total > 0 ? progress.graded / progress.total : 0;
  const fill = el("div", { class: "progress-fill" });
  fill.style.width = `${Math.round(fraction * 100)}%`;
  bar.append(
    fill,
    el("span", { class: "progress-text" }, progressLabel(progress.graded, progress.total)),
  );
  return bar;
}

function renderSteps(item: ReviewItem): HTMLElement {
  const list = el("div", { class: "steps" });
  item.steps.forEach((step, index) => {
    const ok = step.status >= 200 && step.status < 300;
    const card = el(
      "section",
      { class: "step" },
      el(
        "header",
        {},
        el("span", { class: "step-index" }, `Call ${index + 1}`),
        el("code", { class: "step-route" }, `${step.method} ${step.path}`),
        el("span", { class: `status ${ok ? "ok" : "bad"}` }, String(step.status)),
      ),
    );
    const body = pretty(step.body);
    if (body && body !== "{}") {
      card.append(el("h4", {}, "Request"), el("pre", {}, body));
    }
    const response = pretty(step.response);
    if (response && response !== "{}") {
      card.append(el("h4", {}, "Response"), el("pre", {}, response));
    }
    list.append(card);
  });
  return list;
}

function renderCriteria(): { fieldset: HTMLElement; read: () => Criteria } {
  const inputs = new Map<string, HTMLInputElement>();
  const fieldset = el("fieldset", { class: "criteria" }, el("legend", {}, "Criteria"));
  for (const name of CRITERIA) {
    const input = el("input", { type: "checkbox", id: `crit-${name}` });
    input.checked = true;
    inputs.set(name, input);
    fieldset.append(
      el(
        "label",
        { class: "criterion", for: `crit-${name}` },
        input,
        el("span", {}, CRITERION_LABELS[name]),
      ),
    );
  }
  const read = () => {
    const out = {} as Criteria;
    for (const name of CRITERIA) out[name] = inputs.get(name)!.checked;
    return out;
  };
  return { fieldset, read };
}

function renderItem(ui: Ui, item: ReviewItem, progress: Progress): void {
  clear(ui.root);
  const { fieldset, read } = renderCriteria();
  const submit = el("button", { class: "submit" }, "Submit verdict");
  const messages = el("div", { class: "messages" });

  submit.addEventListener("click", async () => {
    submit.toggleAttribute("disabled", true);
    try {
      await ui.client.submit(item.token, read());
      await showNext(ui);
    } catch (err) {
      submit.toggleAttribute("disabled", false);
      if (err instanceof ApiError && (err.status === 409 || err.status === 410)) {
        // Graded elsewhere or lease lost: move on rather than block.
        clear(messages);
        messages.append(notice("info", `${err.detail} — fetching the next item.`));
        await showNext(ui);
        return;
      }
      clear(messages);
      messages.append(notice("error", err instanceof Error ? err.message : String(err)));
    }
  });

  ui.root.append(
    renderProgress(progress),
    el(
      "article",
      { class: "item" },
      el("h2", {}, "Query"),
      el("p", { class: "query" }, item.query),
      el(
        "p",
        { class: "software" },
        "Software check: ",
        el(
          "span",
          { class: `status ${item.software_pass ? "ok" : "bad"}` },
          item.software_pass ? "pass" : "fail",
        ),
      ),
      renderSteps(item),
      fieldset,
      submit,
      messages,
    ),
  );
}

function renderDone(ui: Ui, progress: Progress): void {
  clear(ui.root);
  ui.root.append(
    renderProgress(progress),
    el("h2", {}, "All items graded"),
    notice("info", "Every queued run has a verdict. Thank you."),
  );
}

function renderPending(ui: Ui, progress: Progress | null): void {
  clear(ui.root);
  ui.root.append(
    renderProgress(progress),
    notice(
      "info",
      "The remaining items are being graded in other sessions; retrying shortly…",
    ),
  );
  window.setTimeout(() => void showNext(ui), PENDING_RETRY_MS);
}

async function showNext(ui: Ui): Promise<void> {
  try {
    const result = await ui.client.next();
    if (result.state === "item") renderItem(ui, result.item, result.progress);
    else if (result.state === "done") renderDone(ui, result.progress);
    else renderPending(ui, result.progress);
  } catch (err) {
    clear(ui.root);
    ui.root.append(
      notice("error", err instanceof Error ? err.message : String(err)),
    );
  }
}

function renderConnect(root: HTMLElement): void {
  clear(root);
  const tokenInput = el("input", {
    type: "password",
    id: "token",
    placeholder: "access token",
    autocomplete: "off",
  });
  const button = el("button", { class: "submit" }, "Start reviewing");
  const messages = el("div", { class: "messages" });

  const start = async () => {
    const token = tokenInput.value.trim();
    if (!token) {
      clear(messages);
      messages.append(notice("error", "Enter the access token from the server."));
      return;
    }
    const ui: Ui = {
      root,
      client: new ReviewClient({
        baseUrl: "",
        token,
        session: freshSession(),
      }),
    };
    try {
      await ui.client.progress();
    } catch (err) {
      clear(messages);
      messages.append(
        notice("error", err instanceof Error ? err.message : String(err)),
      );
      return;
    }
    await showNext(ui);
  };

  button.addEventListener("click", () => void start());
  tokenInput.addEventListener("keydown", (event) => {
    if (event.key === "Enter") void start();
  });

  root.append(
    el("h2", {}, "Connect"),
    el(
      "p",
      {},
      "Runs are shown without any model or pipeline identity. ",
      "Grade each one on the five criteria.",
    ),
    el("div", { class: "connect" }, tokenInput, button),
    messages,
  );
}

export function mount(root: HTMLElement): void {
  renderConnect(root);
}

const rootNode = document.getElementById("app");
if (rootNode) mount(rootNode);
