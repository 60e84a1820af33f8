import type { UiMessage } from "./types";

export type RetryHandler = (text: string) => void;

function cellText(value: unknown): string {
  if (value === null || value === undefined) return "";
  return String(value); // verbatim: no client-side reformatting
}

function renderTable(table: { columns: string[]; data: unknown[][] }): HTMLTableElement {
  const element = document.createElement("table");
  element.className = "rows";
  const head = document.createElement("thead");
  const headRow = document.createElement("tr");
  for (const column of table.columns) {
    const th = document.createElement("th");
    th.textContent = column;
    headRow.appendChild(th);
  }
  head.appendChild(headRow);
  element.appendChild(head);
  const body = document.createElement("tbody");
  for (const row of table.data) {
    const tr = document.createElement("tr");
    for (const value of row) {
      const td = document.createElement("td");
      td.textContent = cellText(value);
      tr.appendChild(td);
    }
    body.appendChild(tr);
  }
  element.appendChild(body);
  return element;
}

function renderMessage(message: UiMessage, onRetry?: RetryHandler): HTMLElement {
  const article = document.createElement("article");
  article.className = `msg ${message.role}${message.error ? " has-error" : ""}`;

  const bubble = document.createElement("div");
  bubble.className = "bubble";
  article.appendChild(bubble);

  const text = document.createElement("p");
  text.className = "text";
  text.textContent = message.text;
  bubble.appendChild(text);

  if (message.error) {
    const error = document.createElement("div");
    error.className = "error-bubble";
    error.textContent = `${message.error.code}: ${message.error.message}`;
    if (message.retryText !== undefined && onRetry) {
      const retry = document.createElement("button");
      retry.className = "retry";
      retry.type = "button";
      retry.textContent = "Retry";
      const again = message.retryText;
      retry.addEventListener("click", () => onRetry(again));
      error.appendChild(retry);
    }
    bubble.appendChild(error);
    return article; // an error bubble replaces table/sql/map details
  }

  if (message.table) {
    bubble.appendChild(renderTable(message.table));
  }

  if (message.sql) {
    const details = document.createElement("details");
    details.className = "sql";
    const summary = document.createElement("summary");
    summary.textContent = "SQL";
    const pre = document.createElement("pre");
    pre.textContent = message.sql;
    details.appendChild(summary);
    details.appendChild(pre);
    bubble.appendChild(details);
  }

  if (message.assumptions?.length) {
    const list = document.createElement("ul");
    list.className = "assumptions";
    for (const assumption of message.assumptions) {
      const item = document.createElement("li");
      item.textContent = assumption;
      list.appendChild(item);
    }
    bubble.appendChild(list);
  }

  if (message.mapId) {
    const slot = document.createElement("div");
    slot.className = "map-slot";
    slot.dataset.mapId = message.mapId;
    bubble.appendChild(slot);
  }

  return article;
}

// The DOM under `container` is a pure function of `messages`.
export function renderMessages(
  container: HTMLElement,
  messages: UiMessage[],
  onRetry?: RetryHandler,
): void {
  container.replaceChildren();
  for (const message of messages) {
    container.appendChild(renderMessage(message, onRetry));
  }
}
