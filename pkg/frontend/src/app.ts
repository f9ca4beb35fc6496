/**
 * The what-if explorer: pick a bundled scenario, adjust feasibility
 * constraints, solve, and compare pre/post opportunity tables.
 */

import { ConstraintDoc, ServiceClient, ServiceError } from "./api";
import {
  ViewState,
  bannerRaised,
  constraintProblem,
  constraintsApplied,
  displayablePost,
  fixtureLoaded,
  initialState,
  solveFailed,
  solveFinished,
  solveStarted,
} from "./state";
import { formatPercent, renderPlaceholder, renderTable } from "./tables";

interface ConstraintDraft {
  variable: string;
  state: string;
  op: "eq" | "le" | "ge";
  value: number;
}

export class App {
  private state: ViewState = initialState();
  private drafts: ConstraintDraft[] = [];
  private root: HTMLElement;

  constructor(private readonly client: ServiceClient, root: HTMLElement) {
    this.root = root;
  }

  async start(): Promise<void> {
    this.render();
    try {
      const fixtures = await this.client.listFixtures();
      this.renderFixturePicker(fixtures.map((f) => f.name));
    } catch (err) {
      this.state = bannerRaised(this.state, describe(err));
      this.render();
    }
  }

  async loadFixture(name: string): Promise<void> {
    try {
      const sessionId = await this.client.createSession(name);
      const tables = await this.client.getTables(sessionId);
      this.state = fixtureLoaded(this.state, name, sessionId, tables, []);
      this.drafts = [];
      this.render();
    } catch (err) {
      this.state = bannerRaised(this.state, describe(err));
      this.render();
    }
  }

  addDraft(draft: ConstraintDraft): void {
    this.drafts.push(draft);
    this.render();
  }

  updateDraftValue(index: number, value: number): void {
    this.drafts[index].value = value;
    this.render();
  }

  removeDraft(index: number): void {
    this.drafts.splice(index, 1);
    this.render();
  }

  draftDocuments(): ConstraintDoc[] {
    return this.drafts.map((d) => ({
      event: { [d.variable]: d.state },
      op: d.op,
      value: d.value,
    }));
  }

  async applyConstraints(): Promise<void> {
    if (!this.state.sessionId) return;
    const docs = this.draftDocuments();
    for (const doc of docs) {
      const problem = constraintProblem(doc);
      if (problem) {
        this.state = bannerRaised(this.state, `constraint rejected: ${problem}`);
        this.render();
        return;
      }
    }
    try {
      const revision = await this.client.putConstraints(
        this.state.sessionId, docs, this.state.revision);
      this.state = constraintsApplied(this.state, revision, docs);
      this.render();
    } catch (err) {
      this.state = bannerRaised(this.state, describe(err));
      this.render();
    }
  }

  async runSolve(): Promise<void> {
    const sessionId = this.state.sessionId;
    if (!sessionId || this.state.solveInFlight) return;
    this.state = solveStarted(this.state);
    this.render();
    try {
      const result = await this.client.solve(sessionId);
      const tables = await this.client.getTables(sessionId);
      this.state = solveFinished(this.state, result.status, tables);
    } catch (err) {
      const infeasible = err instanceof ServiceError && err.status === 409;
      this.state = solveFailed(this.state, describe(err), infeasible);
    }
    this.render();
  }

  snapshot(): ViewState {
    return this.state;
  }

  // --- rendering ------------------------------------------------------------

  private renderFixturePicker(names: string[]): void {
    const select = this.root.querySelector<HTMLSelectElement>("#fixture-select");
    if (!select) return;
    select.innerHTML = "";
    const placeholder = document.createElement("option");
    placeholder.value = "";
    placeholder.textContent = "pick a scenario";
    select.appendChild(placeholder);
    for (const name of names) {
      const option = document.createElement("option");
      option.value = name;
      option.textContent = name;
      select.appendChild(option);
    }
  }

  render(): void {
    let shell = this.root.querySelector<HTMLElement>(".shell");
    if (!shell) {
      shell = document.createElement("div");
      shell.className = "shell";
      shell.innerHTML = `
        <header>
          <h1>opportunity what-if explorer</h1>
          <div class="picker">
            <select id="fixture-select"></select>
            <button id="load-button">load</button>
          </div>
        </header>
        <div id="banner" class="banner" hidden></div>
        <section class="constraints">
          <h2>feasibility constraints</h2>
          <div id="constraint-list"></div>
          <div class="constraint-new">
            <input id="c-variable" placeholder="variable" size="14" />
            <input id="c-state" placeholder="state" size="10" />
            <select id="c-op">
              <option value="le">&le;</option>
              <option value="ge">&ge;</option>
              <option value="eq">=</option>
            </select>
            <input id="c-value" type="number" min="0" max="1" step="0.01" value="0.5" />
            <button id="c-add">add</button>
          </div>
          <button id="apply-button">apply constraints</button>
        </section>
        <section class="actions">
          <button id="solve-button">solve</button>
          <span id="status-chip" class="chip"></span>
        </section>
        <section id="tables" class="tables"></section>`;
      this.root.appendChild(shell);
      this.bind(shell);
    }
    this.paintBanner(shell);
    this.paintConstraints(shell);
    this.paintActions(shell);
    this.paintTables(shell);
  }

  private bind(shell: HTMLElement): void {
    shell.querySelector("#load-button")!.addEventListener("click", () => {
      const select = shell.querySelector<HTMLSelectElement>("#fixture-select")!;
      if (select.value) void this.loadFixture(select.value);
    });
    shell.querySelector("#c-add")!.addEventListener("click", () => {
      const variable = shell.querySelector<HTMLInputElement>("#c-variable")!.value.trim();
      const state = shell.querySelector<HTMLInputElement>("#c-state")!.value.trim();
      const op = shell.querySelector<HTMLSelectElement>("#c-op")!.value as "eq" | "le" | "ge";
      const value = Number(shell.querySelector<HTMLInputElement>("#c-value")!.value);
      if (!variable || !state) {
        this.state = bannerRaised(this.state, "constraint needs a variable and a state");
        this.render();
        return;
      }
      if (Number.isNaN(value) || value < 0 || value > 1) {
        this.state = bannerRaised(this.state, `bound ${value} outside [0, 1]`);
        this.render();
        return;
      }
      this.addDraft({ variable, state, op, value });
    });
    shell.querySelector("#apply-button")!.addEventListener("click", () => {
      void this.applyConstraints();
    });
    shell.querySelector("#solve-button")!.addEventListener("click", () => {
      void this.runSolve();
    });
  }

  private paintBanner(shell: HTMLElement): void {
    const banner = shell.querySelector<HTMLElement>("#banner")!;
    banner.hidden = this.state.banner === null;
    banner.textContent = this.state.banner ?? "";
  }

  private paintConstraints(shell: HTMLElement): void {
    const list = shell.querySelector<HTMLElement>("#constraint-list")!;
    list.innerHTML = "";
    this.drafts.forEach((draft, index) => {
      const row = document.createElement("div");
      row.className = "constraint-row";
      const label = document.createElement("span");
      label.textContent = `P(${draft.variable}=${draft.state}) ${symbol(draft.op)} `;
      row.appendChild(label);

      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = "0";
      slider.max = "1";
      slider.step = "0.01";
      slider.value = String(draft.value);
      slider.addEventListener("input", () => {
        this.updateDraftValue(index, Number(slider.value));
      });
      row.appendChild(slider);

      const number = document.createElement("input");
      number.type = "number";
      number.min = "0";
      number.max = "1";
      number.step = "0.01";
      number.value = String(draft.value);
      number.addEventListener("change", () => {
        const v = Number(number.value);
        if (Number.isNaN(v) || v < 0 || v > 1) {
          number.classList.add("invalid");
          return;
        }
        number.classList.remove("invalid");
        this.updateDraftValue(index, v);
      });
      row.appendChild(number);

      const remove = document.createElement("button");
      remove.textContent = "remove";
      remove.addEventListener("click", () => this.removeDraft(index));
      row.appendChild(remove);
      list.appendChild(row);
    });
  }

  private paintActions(shell: HTMLElement): void {
    const chip = shell.querySelector<HTMLElement>("#status-chip")!;
    chip.textContent = this.state.chip;
    chip.className = `chip chip-${this.state.chip}`;
    const solve = shell.querySelector<HTMLButtonElement>("#solve-button")!;
    solve.disabled = this.state.solveInFlight || !this.state.sessionId;
  }

  private paintTables(shell: HTMLElement): void {
    const host = shell.querySelector<HTMLElement>("#tables")!;
    host.innerHTML = "";
    if (!this.state.tables) {
      host.appendChild(renderPlaceholder("load a scenario to see its tables", false));
      return;
    }
    const side = document.createElement("div");
    side.className = "side-by-side";
    side.appendChild(renderTable(this.state.tables.pre, "before intervention"));
    const post = displayablePost(this.state);
    if (post) {
      side.appendChild(renderTable(post, "after intervention"));
    } else if (this.state.postStale) {
      side.appendChild(renderPlaceholder(
        "constraints changed - solve again to refresh this pane", true));
    } else {
      side.appendChild(renderPlaceholder("no solution yet", false));
    }
    host.appendChild(side);
    const summary = document.createElement("p");
    summary.className = "deviation-summary";
    const preDev = this.state.tables.pre.deviation;
    summary.textContent = post
      ? `deviation ${formatPercent(preDev)} → ${formatPercent(post.deviation)}`
      : `deviation ${formatPercent(preDev)}`;
    host.appendChild(summary);
  }
}

function symbol(op: "eq" | "le" | "ge"): string {
  return op === "eq" ? "=" : op === "le" ? "≤" : "≥";
}

function describe(err: unknown): string {
  if (err instanceof ServiceError) {
    const conflicts = err.conflicts.length ? ` (${err.conflicts.join("; ")})` : "";
    return `${err.title}: ${err.message}${conflicts}`;
  }
  return String(err);
}
