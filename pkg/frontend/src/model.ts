// model.ts
// ----------------------------------------------------------------------
// Pure view logic: tree-node access, client-side validation mirroring the
// service's rules (reject locally before a request goes out), calendar
// text parsing, and the HTML fragments for KPI / EMD / variant tables.
// Everything here is side-effect free so it is unit-testable without a
// browser; ui.ts only splices the returned strings into the page.
// ----------------------------------------------------------------------
import type {
  CalendarDoc,
  EmdDoc,
  KpiDoc,
  NodePath,
  TreeNode,
} from "./types.js";

export const OPERATOR_GLYPHS: Record<string, string> = {
  sequence: "→", // →
  xor: "X",
  parallel: "+",
  loop: "*",
};

export const OPERATOR_KINDS = ["sequence", "xor", "parallel", "loop"] as const;

export function isOperator(node: TreeNode): boolean {
  return node.kind in OPERATOR_GLYPHS;
}

export function nodeLabel(node: TreeNode): string {
  if (node.kind === "activity") return node.name ?? "?";
  if (node.kind === "tau") return "τ"; // τ
  return OPERATOR_GLYPHS[node.kind];
}

export function nodeAt(root: TreeNode, path: NodePath): TreeNode | null {
  let node: TreeNode = root;
  for (const index of path) {
    const children = node.children ?? [];
    if (index < 0 || index >= children.length) return null;
    node = children[index];
  }
  return node;
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

// -- validation (mirrors the service; errors shown inline, no request) ----

/** Null means valid; otherwise the inline error message. */
export function weightsError(weights: number[]): string | null {
  if (weights.some((w) => !Number.isFinite(w) || w < 0)) {
    return "weights must be non-negative numbers";
  }
  const total = weights.reduce((a, b) => a + b, 0);
  if (Math.abs(total - 1.0) > 1e-6) {
    return `weights must sum to 1 (got ${total.toFixed(4)})`;
  }
  return null;
}

export function nonNegativeError(value: number, field: string): string | null {
  if (!Number.isFinite(value) || value < 0) {
    return `${field} must be a non-negative number`;
  }
  return null;
}

export function positiveIntError(value: number, field: string): string | null {
  if (!Number.isInteger(value) || value < 1) {
    return `${field} must be a positive integer`;
  }
  return null;
}

// -- calendar text form ----------------------------------------------------

export const WEEKDAYS = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];

/** "9-17, 18-20" -> [[9,17],[18,20]]; "" -> [] (closed day). */
export function parseDayIntervals(text: string): [number, number][] {
  const trimmed = text.trim();
  if (!trimmed) return [];
  const intervals: [number, number][] = [];
  for (const part of trimmed.split(",")) {
    const match = part.trim().match(/^(\d{1,2})\s*-\s*(\d{1,2})$/);
    if (!match) throw new Error(`bad interval '${part.trim()}', expected OPEN-CLOSE`);
    const open = Number(match[1]);
    const close = Number(match[2]);
    if (open >= close || open < 0 || close > 24) {
      throw new Error(`bad interval '${part.trim()}': need 0 <= open < close <= 24`);
    }
    intervals.push([open, close]);
  }
  intervals.sort((a, b) => a[0] - b[0]);
  for (let i = 1; i < intervals.length; i++) {
    if (intervals[i][0] < intervals[i - 1][1]) {
      throw new Error("intervals overlap");
    }
  }
  return intervals;
}

export function formatDayIntervals(intervals: [number, number][]): string {
  return intervals.map(([open, close]) => `${open}-${close}`).join(", ");
}

export function calendarFromTexts(texts: Record<string, string>): CalendarDoc {
  const doc: CalendarDoc = {};
  for (const day of WEEKDAYS) {
    doc[day] = parseDayIntervals(texts[day] ?? "");
  }
  return doc;
}

// -- rendered fragments ------------------------------------------------------

const seconds = (value: number): string =>
  value >= 3600
    ? `${(value / 3600).toFixed(2)} h`
    : value >= 60
      ? `${(value / 60).toFixed(1)} min`
      : `${value.toFixed(1)} s`;

export function kpiTableHtml(kpis: KpiDoc): string {
  const rows = Object.entries(kpis.activities)
    .map(
      ([name, a]) =>
        `<tr><td>${escapeHtml(name)}</td>` +
        `<td>${seconds(a.mean_waiting)}</td>` +
        `<td>${seconds(a.mean_service)}</td>` +
        `<td>${a.max_queue}</td></tr>`,
    )
    .join("");
  return (
    `<table class="kpis"><thead><tr>` +
    `<th>activity</th><th>mean waiting</th><th>mean service</th><th>max queue</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>` +
    `<p class="kpi-summary">${kpis.traces} traces, ` +
    `mean sojourn ${seconds(kpis.mean_sojourn)}, ` +
    `max ${seconds(kpis.max_sojourn)}, ` +
    `${kpis.truncated} truncated, ${kpis.empty_traces} empty, ` +
    `${kpis.interruptions} interruptions</p>`
  );
}

export function emdBadgeHtml(distance: number): string {
  const bucket = distance <= 0.1 ? "close" : distance <= 0.4 ? "fair" : "far";
  return `<span class="emd-badge emd-${bucket}">EMD ${distance.toFixed(4)}</span>`;
}

export function variantsTableHtml(doc: EmdDoc, limit = 8): string {
  const row = (v: { sequence: string[]; count: number }) =>
    `<tr><td>${v.count}×</td><td>${escapeHtml(v.sequence.join(" › "))}</td></tr>`;
  const left = doc.variants1.slice(0, limit).map(row).join("");
  const right = doc.variants2.slice(0, limit).map(row).join("");
  return (
    `<div class="variant-tables">` +
    `<div><h4>source</h4><table>${left}</table></div>` +
    `<div><h4>simulated</h4><table>${right}</table></div>` +
    `</div>`
  );
}

// -- downloaded-log checks ----------------------------------------------------

/** Variant counts of a canonical CSV export (for the download round trip). */
export function csvVariantCounts(csv: string): Map<string, number> {
  const lines = csv.split("\n").filter((line) => line.trim().length > 0);
  const header = lines[0]?.split(",") ?? [];
  const caseCol = header.indexOf("case:concept:name");
  const activityCol = header.indexOf("concept:name");
  if (caseCol < 0 || activityCol < 0) {
    throw new Error("not a canonical event-log CSV");
  }
  const byCase = new Map<string, string[]>();
  for (const line of lines.slice(1)) {
    const cells = line.split(",");
    const caseId = cells[caseCol];
    let sequence = byCase.get(caseId);
    if (!sequence) {
      sequence = [];
      byCase.set(caseId, sequence);
    }
    sequence.push(cells[activityCol]);
  }
  const counts = new Map<string, number>();
  for (const sequence of byCase.values()) {
    const key = sequence.join(",");
    counts.set(key, (counts.get(key) ?? 0) + 1);
  }
  return counts;
}
