import type { ChatRequest, ChatResponse, GeoFeatureDocument } from "./types";

export const API_BASE: string = import.meta.env?.VITE_API_BASE ?? "";

export async function sendChatMessage(request: ChatRequest): Promise<ChatResponse> {
  const response = await fetch(`${API_BASE}/api/chat`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(request),
  });
  if (!response.ok) {
    throw new Error(`chat API error: ${response.status}`);
  }
  return response.json();
}

export async function fetchMap(mapId: string): Promise<GeoFeatureDocument> {
  const response = await fetch(`${API_BASE}/api/maps/${encodeURIComponent(mapId)}`);
  if (!response.ok) {
    throw new Error(`map API error: ${response.status}`);
  }
  return response.json();
}
