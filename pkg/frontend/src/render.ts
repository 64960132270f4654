import {
  allocationChoice,
  allocationSum,
  canSubmit,
  TaskViewState,
} from "./state";
import { GLYPHS, ReportDoc } from "./types";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** One evidence row: signed bar scaled by |woe|, glyph and direction colour
 * straight from the service payload (never recomputed here). */
export function evidenceBarRow(item: ReportDoc["items"][number], maxAbs: number): string {
  const width = maxAbs > 0 ? Math.min(100, (Math.abs(item.woe) / maxAbs) * 100) : 0;
  const side = item.woe >= 0 ? "pos" : "neg";
  const glyph = GLYPHS[item.category] ?? "?";
  return `
    <div class="evidence-row ${item.direction}" data-feature="${esc(item.feature_name)}">
      <span class="feature">${esc(item.feature_name)}</span>
      <span class="bar ${side}"><i style="width:${width.toFixed(1)}%"></i></span>
      <span class="woe">${item.woe >= 0 ? "+" : ""}${item.woe.toFixed(2)}</span>
      <span class="glyph">${esc(glyph)}</span>
    </div>`;
}

export function reportPanel(report: ReportDoc, title: string): string {
  const maxAbs = Math.max(...report.items.map((it) => Math.abs(it.woe)), 0);
  const rows = report.items.map((it) => evidenceBarRow(it, maxAbs)).join("");
  return `
    <section class="report-panel" data-title="${esc(title)}">
      <h3>${esc(title)}</h3>
      <div class="totals">total WoE ${report.total_woe.toFixed(2)}</div>
      ${rows}
    </section>`;
}

function instancePanel(state: TaskViewState): string {
  const task = state.task!;
  const rows = task.feature_names
    .map(
      (name, i) =>
        `<div class="feature-value"><span>${esc(name)}</span><b>${task.values[i].toFixed(2)}</b></div>`,
    )
    .join("");
  return `<section class="instance"><h2>Task ${task.index + 1}</h2>${rows}</section>`;
}

function hypothesisChips(state: TaskViewState, order: number[]): string {
  const chips = order
    .map((id) => {
      const label = state.labels.find((l) => l.id === id);
      if (!label) return "";
      const on = state.selected.includes(id) ? " selected" : "";
      const busy = state.inflight.has(id) ? " busy" : "";
      return `<button class="chip${on}${busy}" data-hypothesis="${id}">${esc(label.name)}</button>`;
    })
    .join("");
  const toggle = state.selected.length
    ? `<label class="rank-toggle"><input type="checkbox" data-action="rank" ${
        state.rankedOrdering ? "checked" : ""
      }/> order by evidence</label>`
    : "";
  return `<div class="chips">${chips}${toggle}</div>`;
}

function entryWidget(state: TaskViewState): string {
  const disabled = state.submitted ? " disabled" : "";
  if (state.entryMode === "allocation") {
    const sum = allocationSum(state);
    const ok = sum === 100 && allocationChoice(state) !== null;
    const rows = state.allocation
      .map((v, i) => {
        const name = state.labels[i]?.name ?? `option ${i}`;
        return `
          <div class="alloc-row">
            <span>${esc(name)}</span>
            <input type="number" min="0" max="100" step="1" value="${v}"
                   data-alloc="${i}"${disabled}/>
          </div>`;
      })
      .join("");
    return `
      <section class="entry allocation">
        <h3>Assign likelihoods (must total 100)</h3>
        ${rows}
        <div class="sum-badge ${ok ? "ok" : "bad"}">sum ${sum}</div>
        <button data-action="submit" ${canSubmit(state) ? "" : "disabled"}>Submit</button>
      </section>`;
  }
  const answers = state.labels
    .map(
      (l) =>
        `<label><input type="radio" name="answer" value="${l.id}" ${
          state.answer === l.id ? "checked" : ""
        }${disabled}/>${esc(l.name)}</label>`,
    )
    .join("");
  return `
    <section class="entry confidence">
      <h3>Your diagnosis and confidence</h3>
      <div class="answers">${answers}</div>
      <input type="range" min="0" max="1" step="0.01"
             value="${state.confidence ?? 0.5}" data-action="confidence"${disabled}/>
      <button data-action="submit" ${canSubmit(state) ? "" : "disabled"}>Submit</button>
    </section>`;
}

function statusBar(state: TaskViewState): string {
  const parts: string[] = [];
  if (state.error) {
    parts.push(
      `<div class="error">${esc(state.error)} <button data-action="retry">retry</button></div>`,
    );
  }
  if (state.lastAck) parts.push(`<div class="ack">${esc(state.lastAck)}</div>`);
  if (state.submitted) parts.push(`<div class="locked">task locked; exploring is allowed</div>`);
  return parts.join("");
}

/** Render the whole task screen for the current condition.
 *
 * C1 shows the prediction banner plus its evidence. C3 shows hypothesis
 * chips; a report panel appears only for hypotheses in the selected set.
 * No prediction banner ever appears in C2 or C3.
 */
export function renderCondition(state: TaskViewState, chipOrder?: number[]): string {
  if (!state.task) {
    return state.error
      ? `<div class="error">${esc(state.error)} <button data-action="retry">retry</button></div>`
      : `<div class="loading">loading task…</div>`;
  }
  const pieces: string[] = [instancePanel(state)];
  if (state.condition === "C1" && state.task.prediction && state.task.report) {
    pieces.push(
      `<div class="prediction-banner">AI suggests: <b>${esc(state.task.prediction.name)}</b></div>`,
      reportPanel(state.task.report, `Evidence for ${state.task.prediction.name}`),
    );
  } else if (state.condition === "C2" && state.task.report) {
    pieces.push(reportPanel(state.task.report, "Evidence for the AI's (hidden) answer"));
  } else if (state.condition === "C3") {
    pieces.push(hypothesisChips(state, chipOrder ?? state.labels.map((l) => l.id)));
    for (const id of state.selected) {
      const report = state.reports.get(id);
      const label = state.labels.find((l) => l.id === id);
      if (report && label) {
        pieces.push(reportPanel(report, `Evidence for ${label.name}`));
      }
    }
  }
  pieces.push(entryWidget(state), statusBar(state));
  return `<main class="condition-${state.condition}">${pieces.join("")}</main>`;
}
