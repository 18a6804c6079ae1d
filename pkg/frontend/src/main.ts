// DOM shell: two images side by side, judged entirely by keyboard or click.

import { Api } from "./api.js";
import { KEY_BINDINGS, SurveyClient, ViewState } from "./state.js";

const imagesById: Record<string, string | null> = {};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function preload(src: string | null): void {
  if (!src) return;
  const img = new Image();
  img.src = src;
}

function render(state: ViewState): void {
  const left = el<HTMLImageElement>("left-image");
  const right = el<HTMLImageElement>("right-image");
  const banner = el<HTMLDivElement>("error-banner");
  const counter = el<HTMLSpanElement>("vote-count");
  const controls = document.querySelectorAll<HTMLButtonElement>("button.vote");

  if (state.ticket) {
    preload(state.ticket.left.image);
    preload(state.ticket.right.image);
    left.src = state.ticket.left.image ?? placeholder(state.ticket.left.id);
    right.src = state.ticket.right.image ?? placeholder(state.ticket.right.id);
    left.alt = state.ticket.left.id;
    right.alt = state.ticket.right.id;
  }
  counter.textContent = String(state.votes);
  banner.hidden = state.error === null;
  banner.textContent = state.error ?? "";
  const disabled = state.inFlight || !state.ticket || state.error !== null;
  controls.forEach((button) => {
    button.disabled = disabled;
  });

  const board = el<HTMLOListElement>("leaderboard");
  board.replaceChildren();
  if (state.leaderboard === null) return;
  if (state.leaderboard.length === 0) {
    const item = document.createElement("li");
    item.textContent = "no data yet";
    board.append(item);
    return;
  }
  const rows = state.leaderboard;
  const shown = rows.length <= 10 ? rows : [...rows.slice(0, 5), ...rows.slice(-5)];
  for (const row of shown) {
    const item = document.createElement("li");
    const thumb = document.createElement("img");
    thumb.className = "thumb";
    thumb.src = row.image ?? placeholder(row.id);
    thumb.alt = row.id;
    const label = document.createElement("span");
    label.textContent = `${row.id}  ${row.normalized.toFixed(3)}`;
    item.append(thumb, label);
    board.append(item);
  }
}

function placeholder(id: string): string {
  const svg =
    `<svg xmlns="http://www.w3.org/2000/svg" width="320" height="200">` +
    `<rect width="100%" height="100%" fill="#d8dee9"/>` +
    `<text x="50%" y="50%" dominant-baseline="middle" text-anchor="middle" font-size="20">${id}</text></svg>`;
  return `data:image/svg+xml;utf8,${encodeURIComponent(svg)}`;
}

export function boot(api: Api = new Api("")): SurveyClient {
  const client = new SurveyClient(api, render, imagesById);

  document.addEventListener("keydown", (event) => {
    if (KEY_BINDINGS[event.key]) {
      event.preventDefault();
      void client.handleKey(event.key);
    }
  });
  el<HTMLImageElement>("left-image").addEventListener("click", () => void client.submit("left"));
  el<HTMLImageElement>("right-image").addEventListener("click", () => void client.submit("right"));
  el<HTMLButtonElement>("tie-button").addEventListener("click", () => void client.submit("tie"));
  el<HTMLButtonElement>("skip-button").addEventListener("click", () => void client.submit("skip"));
  el<HTMLButtonElement>("retry-button").addEventListener("click", () => {
    if (client.state.sessionId === null) void client.start();
    else void client.refreshLeaderboard();
  });
  const method = el<HTMLSelectElement>("method-select");
  method.addEventListener("change", () => void client.refreshLeaderboard(method.value));
  el<HTMLButtonElement>("refresh-button").addEventListener(
    "click",
    () => void client.refreshLeaderboard(),
  );

  void api
    .items()
    .then((catalog) => {
      for (const item of catalog.items) imagesById[item.id] = item.image;
    })
    .catch(() => undefined)
    .then(() => client.start());
  return client;
}

declare global {
  interface Window {
    pairrank?: SurveyClient;
  }
}

if (typeof document !== "undefined" && document.getElementById("left-image")) {
  window.pairrank = boot();
}
