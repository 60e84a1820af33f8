import { fetchMap, sendChatMessage } from "./api";
import { renderMap } from "./map";
import { renderMessages } from "./render";
import { assistantMessage, transportFailure, userMessage } from "./state";
import type { UiMessage } from "./types";

const SESSION_KEY = "transit-agent-session";
const TILE_URL: string | undefined = import.meta.env?.VITE_TILE_URL || undefined;

export interface App {
  send(text: string): Promise<void>;
  readonly messages: UiMessage[];
}

export function initApp(root: HTMLElement): App {
  root.innerHTML = `
    <header><h1>Transit Agent</h1></header>
    <main id="messages" aria-live="polite"></main>
    <form id="composer">
      <input id="question" type="text" autocomplete="off"
             placeholder="Ask about routes, stops, municipalities..." />
      <button id="send" type="submit">Send</button>
    </form>
  `;
  const messagesElement = root.querySelector<HTMLElement>("#messages")!;
  const form = root.querySelector<HTMLFormElement>("#composer")!;
  const input = root.querySelector<HTMLInputElement>("#question")!;
  const button = root.querySelector<HTMLButtonElement>("#send")!;

  const messages: UiMessage[] = [];
  let pending = false;

  function redraw(): void {
    renderMessages(messagesElement, messages, (text) => void send(text));
    // map slots are filled after the (re)render; fetches may overlap chat
    for (const slot of messagesElement.querySelectorAll<HTMLElement>(".map-slot:empty")) {
      const mapId = slot.dataset.mapId!;
      fetchMap(mapId)
        .then((doc) => renderMap(slot, doc, TILE_URL))
        .catch((error) => {
          slot.textContent = `Map unavailable: ${error}`;
        });
    }
    messagesElement.scrollTop = messagesElement.scrollHeight;
  }

  async function send(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed || pending) return;
    pending = true;
    input.disabled = true;
    button.disabled = true;
    messages.push(userMessage(trimmed));
    redraw();
    try {
      const response = await sendChatMessage({
        message: trimmed,
        session_id: window.sessionStorage.getItem(SESSION_KEY) ?? undefined,
      });
      window.sessionStorage.setItem(SESSION_KEY, response.session_id);
      messages.push(assistantMessage(response));
    } catch (error) {
      messages.push(transportFailure(trimmed, error instanceof Error ? error.message : String(error)));
    } finally {
      pending = false;
      input.disabled = false;
      button.disabled = false;
      redraw();
      input.focus();
    }
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = input.value;
    input.value = "";
    void send(text);
  });

  return { send, messages };
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  initApp(document.getElementById("app")!);
}
