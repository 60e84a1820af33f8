import type { ChatResponse, UiMessage } from "./types";

export function userMessage(text: string): UiMessage {
  return { role: "user", text };
}

export function assistantMessage(response: ChatResponse): UiMessage {
  const message: UiMessage = { role: "assistant", text: response.answer_text };
  if (response.rows) message.table = response.rows;
  if (response.map_id) message.mapId = response.map_id;
  if (response.sql) message.sql = response.sql;
  if (response.assumptions?.length) message.assumptions = response.assumptions;
  if (response.error) message.error = response.error;
  return message;
}

export function transportFailure(originalText: string, reason: string): UiMessage {
  return {
    role: "assistant",
    text: `The request failed: ${reason}`,
    error: { code: "NETWORK", message: reason },
    retryText: originalText,
  };
}
