/**
 * Opportunity-table rendering: pre and post side by side, one row per
 * (justified, sensitive) cell and state, with the anchor rows marked and
 * per-row delta coloring against the anchor. Displays round to two
 * decimals; tooltips carry full precision.
 */

import type { TableBlock, TableRow } from "./api";

function rowKey(row: TableRow): string {
  const j = Object.entries(row.justified).map(([k, v]) => `${k}=${v}`).join(",");
  const s = row.sensitive
    ? Object.entries(row.sensitive).map(([k, v]) => `${k}=${v}`).join(",")
    : "*";
  return `${j} | ${s} | ${row.state}`;
}

function anchorKey(row: TableRow): string {
  const j = Object.entries(row.justified).map(([k, v]) => `${k}=${v}`).join(",");
  return `${j} | ${row.state}`;
}

export function formatPercent(p: number): string {
  return `${(p * 100).toFixed(2)}%`;
}

function deltaClass(delta: number): string {
  if (delta > 0.005) return "delta-up";
  if (delta < -0.005) return "delta-down";
  return "delta-flat";
}

export function renderTable(block: TableBlock, caption: string): HTMLElement {
  const wrapper = document.createElement("div");
  wrapper.className = "table-pane";

  const heading = document.createElement("h3");
  heading.textContent = caption;
  wrapper.appendChild(heading);

  const badge = document.createElement("div");
  badge.className = "deviation-badge";
  badge.textContent = `max deviation ${formatPercent(block.deviation)}`;
  badge.title = String(block.deviation);
  wrapper.appendChild(badge);

  const anchors = new Map<string, number>();
  for (const row of block.rows) {
    if (row.sensitive === null) {
      anchors.set(anchorKey(row), row.p);
    }
  }

  const table = document.createElement("table");
  table.className = "opportunity-table";
  const head = table.createTHead().insertRow();
  for (const label of ["justified", "sensitive", "state", "probability"]) {
    const th = document.createElement("th");
    th.textContent = label;
    head.appendChild(th);
  }
  const body = table.createTBody();
  for (const row of block.rows) {
    const tr = body.insertRow();
    tr.dataset.key = rowKey(row);
    const jCell = tr.insertCell();
    jCell.textContent = Object.entries(row.justified)
      .map(([k, v]) => `${k}=${v}`).join(", ");
    const sCell = tr.insertCell();
    sCell.textContent = row.sensitive
      ? Object.entries(row.sensitive).map(([k, v]) => `${k}=${v}`).join(", ")
      : "*";
    const stateCell = tr.insertCell();
    stateCell.textContent = row.state;
    const pCell = tr.insertCell();
    pCell.textContent = formatPercent(row.p);
    pCell.title = String(row.p);
    pCell.className = "prob";
    if (row.sensitive !== null) {
      const anchor = anchors.get(anchorKey(row));
      if (anchor !== undefined) {
        const delta = row.p - anchor;
        tr.classList.add(deltaClass(delta));
        pCell.title = `${row.p} (anchor ${anchor})`;
      }
    } else {
      tr.classList.add("anchor-row");
    }
  }
  wrapper.appendChild(table);
  return wrapper;
}

export function renderPlaceholder(text: string, stale: boolean): HTMLElement {
  const pane = document.createElement("div");
  pane.className = stale ? "table-pane stale" : "table-pane empty";
  const note = document.createElement("p");
  note.textContent = text;
  pane.appendChild(note);
  return pane;
}
