/**
 * Read-only scene-tree inspector rendered as an HTML string.
 *
 * Diff highlighting is driven entirely by the edit-line script the service
 * returned for the turn; the client never recomputes its own diff.
 */

export interface SceneEntity {
  name: string;
  type?: string;
  [attribute: string]: unknown;
}

export interface SceneTree {
  global_description: string;
  global_features: Record<string, string>;
  objects?: SceneEntity[];
  relationships?: string[];
  [extra: string]: unknown;
}

/** What an edit script touched, keyed for lookup while rendering. */
export interface DiffMarks {
  description: boolean;
  features: Set<string>;
  entities: Set<string>;
  attributes: Set<string>; // "entity attr"
  relations: Set<string>; // "s p o"
  removals: string[]; // DEL lines, shown verbatim
}

const norm = (name: string) => name.trim().replace(/\s+/g, " ").toLowerCase();
const attrKey = (entity: string, attr: string) => `${norm(entity)} ${norm(attr)}`;
const relKey = (s: string, p: string, o: string) => [s, p, o].map(norm).join("|");

/** Parse the service's edit-line script into highlight marks. */
export function parseEditMarks(edits: string): DiffMarks {
  const marks: DiffMarks = {
    description: false,
    features: new Set(),
    entities: new Set(),
    attributes: new Set(),
    relations: new Set(),
    removals: [],
  };
  for (const raw of edits.split("\n")) {
    const line = raw.trim();
    if (!line) continue;
    let m: RegExpMatchArray | null;
    if (line.startsWith("DEL ")) {
      marks.removals.push(line);
    } else if ((m = line.match(/^SET GLOBAL (.+?) = /))) {
      marks.features.add(norm(m[1]));
    } else if ((m = line.match(/^SET DESC = /))) {
      marks.description = true;
    } else if ((m = line.match(/^SET (.+)\.([^.= ]+) = /))) {
      marks.attributes.add(attrKey(m[1], m[2]));
    } else if ((m = line.match(/^ADD ENTITY (.+?) TYPE /)) || (m = line.match(/^ADD ENTITY (.+)$/))) {
      marks.entities.add(norm(m[1]));
    } else if ((m = line.match(/^ADD REL (.+?) \| (.+?) \| (.+)$/))) {
      marks.relations.add(relKey(m[1], m[2], m[3]));
    }
  }
  return marks;
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function li(content: string, changed: boolean): string {
  return changed ? `<li class="changed">${content}</li>` : `<li>${content}</li>`;
}

/** Match a relation surface string against highlighted triples. */
function relationChanged(surface: string, marks: DiffMarks): boolean {
  for (const key of marks.relations) {
    const [s, p, o] = key.split("|");
    const flat = norm(surface);
    if (flat === `${s} ${p} ${o}` || (flat.startsWith(s) && flat.endsWith(o) && flat.includes(p))) {
      return true;
    }
  }
  return false;
}

/**
 * Render the tree inspector. `edits` is the turn's edit-line script; pass ""
 * for an unchanged view.
 */
export function renderTree(tree: SceneTree, edits = ""): string {
  const marks = parseEditMarks(edits);
  const parts: string[] = ['<div class="tree-inspector">'];

  const desc = escapeHtml(tree.global_description);
  parts.push(
    marks.description
      ? `<p class="description changed">${desc}</p>`
      : `<p class="description">${desc}</p>`,
  );

  parts.push('<details open><summary>global features</summary><ul>');
  for (const [key, value] of Object.entries(tree.global_features)) {
    parts.push(
      li(`<b>${escapeHtml(key)}</b>: ${escapeHtml(String(value))}`, marks.features.has(norm(key))),
    );
  }
  parts.push("</ul></details>");

  parts.push('<details open><summary>objects</summary><ul>');
  for (const entity of tree.objects ?? []) {
    const entityChanged = marks.entities.has(norm(entity.name));
    const attrs: string[] = [];
    for (const [key, value] of Object.entries(entity)) {
      if (key === "name" || key === "type") continue;
      const changed = entityChanged || marks.attributes.has(attrKey(entity.name, key));
      attrs.push(li(`${escapeHtml(key)} = ${escapeHtml(String(value))}`, changed));
    }
    const label = `<b>${escapeHtml(entity.name)}</b>${entity.type ? ` <i>(${escapeHtml(entity.type)})</i>` : ""}`;
    const body = attrs.length ? `<ul>${attrs.join("")}</ul>` : "";
    parts.push(li(`<details open><summary>${label}</summary>${body}</details>`, entityChanged));
  }
  parts.push("</ul></details>");

  parts.push('<details open><summary>relationships</summary><ul>');
  for (const surface of tree.relationships ?? []) {
    parts.push(li(escapeHtml(surface), relationChanged(surface, marks)));
  }
  parts.push("</ul></details>");

  if (marks.removals.length) {
    parts.push('<details open><summary>removed this turn</summary><ul>');
    for (const line of marks.removals) {
      parts.push(`<li class="removed">${escapeHtml(line)}</li>`);
    }
    parts.push("</ul></details>");
  }

  parts.push("</div>");
  return parts.join("");
}
