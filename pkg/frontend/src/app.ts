/**
 * Session view: turn timeline, tree inspector, instruction box.
 *
 * All rendering produces HTML strings from service data, so the view after a
 * reload is byte-identical to the view built incrementally turn by turn. The
 * only client-side state is which session is open and whether a submission is
 * in flight.
 */

import { ConsistencyTriplet, SessionClient, SessionTurn } from "./api.js";
import { SceneTree, escapeHtml, renderTree } from "./tree.js";

function badge(label: string, value: number | null): string {
  if (value === null) return "";
  return `<span class="badge badge-${label}">${label} ${(value * 100).toFixed(1)}</span>`;
}

export function renderTripletBadges(triplet: ConsistencyTriplet | null): string {
  if (!triplet) return '<span class="badge badge-none">unscored</span>';
  return ["style", "logic", "entity"]
    .map((dim) => badge(dim, triplet[dim as keyof ConsistencyTriplet] as number | null))
    .join(" ");
}

export function renderTurnCard(turn: SessionTurn, imageUrl: (id: string) => string): string {
  const parts: string[] = [`<article class="turn-card" data-turn="${turn.turn_id}">`];
  const title = turn.turn_id === 0 ? "(initial extraction)" : escapeHtml(turn.instruction);
  parts.push(`<header><b>turn ${turn.turn_id}</b> ${title}</header>`);
  if (turn.status !== "ok") {
    parts.push(
      `<p class="failure">failed <span class="stage-badge">${escapeHtml(turn.failed_stage ?? "?")}</span> ${escapeHtml(turn.error ?? "")}</p>`,
    );
  }
  if (turn.response_text) {
    parts.push(`<p class="response">${escapeHtml(turn.response_text)}</p>`);
  }
  for (const imageId of turn.generated_image_ids) {
    parts.push(`<img src="${imageUrl(imageId)}" alt="generated image ${escapeHtml(imageId)}">`);
  }
  if (turn.edits.trim()) {
    parts.push(`<pre class="edits">${escapeHtml(turn.edits)}</pre>`);
  }
  parts.push(`<footer>${renderTripletBadges(turn.triplet)}</footer>`);
  parts.push("</article>");
  return parts.join("");
}

export interface SessionViewModel {
  sessionId: string;
  iutMode: string;
  turns: SessionTurn[];
}

export function renderSessionView(model: SessionViewModel, imageUrl: (id: string) => string): string {
  const cards = model.turns.map((turn) => renderTurnCard(turn, imageUrl)).join("");
  const last = model.turns[model.turns.length - 1];
  // The inspector shows the latest state, highlighted by the latest edit script.
  const latest = [...model.turns].reverse().find((t) => t.state_after !== null);
  let inspector = '<p class="empty">no state</p>';
  if (latest && latest.state_after) {
    const tree = JSON.parse(latest.state_after.tree) as SceneTree;
    inspector = renderTree(tree, last === latest ? latest.edits : "");
  }
  return [
    `<section class="session" data-session="${escapeHtml(model.sessionId)}" data-mode="${escapeHtml(model.iutMode)}">`,
    `<div class="timeline">${cards}</div>`,
    `<aside class="inspector">${inspector}</aside>`,
    "</section>",
  ].join("");
}

export class SessionApp {
  private model: SessionViewModel | null = null;
  private inFlight = false;

  constructor(private readonly client: SessionClient) {}

  get viewModel(): SessionViewModel | null {
    return this.model;
  }

  async open(sessionId: string): Promise<void> {
    const log = await this.client.sessionLog(sessionId);
    this.model = { sessionId: log.session_id, iutMode: log.iut_mode, turns: log.turns };
  }

  async create(imageId: string, iutMode = "on"): Promise<void> {
    const created = await this.client.createSession({ image_id: imageId, iut_mode: iutMode });
    this.model = { sessionId: created.session_id, iutMode, turns: [created.turn] };
  }

  /** Submit one instruction; at most one submission may be in flight. */
  async submit(instruction: string): Promise<SessionTurn> {
    if (!this.model) throw new Error("no session open");
    if (this.inFlight) throw new Error("a turn is already in flight");
    this.inFlight = true;
    try {
      const turn = await this.client.postTurn(this.model.sessionId, instruction);
      this.model.turns.push(turn);
      return turn;
    } finally {
      this.inFlight = false;
    }
  }

  render(): string {
    if (!this.model) return '<p class="empty">open a session</p>';
    return renderSessionView(this.model, (id) => this.client.imageUrl(id));
  }
}

export async function renderSessionList(client: SessionClient): Promise<string> {
  const sessions = await client.listSessions();
  if (!sessions.length) return '<p class="empty">no sessions yet</p>';
  const items = sessions.map(
    (s) =>
      `<li><a href="#${escapeHtml(s.session_id)}">${escapeHtml(s.session_id)}</a> (${s.turns} turns)</li>`,
  );
  return `<ul class="session-list">${items.join("")}</ul>`;
}
