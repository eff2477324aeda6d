// ui.ts
// ----------------------------------------------------------------------
// DOM layer.  Each section re-renders only when the slice of state it
// mirrors actually changed (tracked by JSON fingerprints), so uncommitted
// form input survives the 1-second run polling.  All mutations flow
// through the store; nothing here touches the service directly.
// ----------------------------------------------------------------------
import type { Store } from "./store.js";
import type { State } from "./store.js";
import type {
  NodePath,
  OperatorKind,
  ProjectDoc,
  RunDoc,
  TreeNode,
} from "./types.js";
import {
  OPERATOR_KINDS,
  emdBadgeHtml,
  isOperator,
  kpiTableHtml,
  nodeLabel,
  nonNegativeError,
  parseDayIntervals,
  positiveIntError,
  variantsTableHtml,
  weightsError,
  WEEKDAYS,
} from "./model.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function button(label: string, onClick: () => void, cls = ""): HTMLButtonElement {
  const node = el("button", { type: "button", class: cls }, label);
  node.addEventListener("click", onClick);
  return node;
}

function numberInput(value: string, width = 5): HTMLInputElement {
  const node = el("input", { type: "text", value, size: String(width) });
  return node;
}

function inlineError(target: HTMLElement, message: string | null): void {
  const existing = target.querySelector(":scope > .inline-error");
  if (existing) existing.remove();
  if (message) {
    target.append(el("span", { class: "inline-error" }, message));
  }
}

export function mount(root: HTMLElement, store: Store): void {
  const errorBar = el("div", { class: "error-bar hidden" });
  const uploadSection = el("section", { class: "upload" });
  const sourceSection = el("section", { class: "source hidden" });
  const treeSection = el("section", { class: "tree hidden" });
  const paramsSection = el("section", { class: "params hidden" });
  const runSection = el("section", { class: "runs hidden" });
  root.append(
    el("h1", {}, "treesim"),
    errorBar,
    uploadSection,
    sourceSection,
    treeSection,
    paramsSection,
    runSection,
  );

  renderUpload(uploadSection, store);

  let fingerprints = { source: "", tree: "", params: "", runs: "" };

  store.subscribe((state) => {
    errorBar.textContent = state.error ?? "";
    errorBar.classList.toggle("hidden", !state.error);

    const project = state.project;
    for (const section of [sourceSection, treeSection, paramsSection, runSection]) {
      section.classList.toggle("hidden", !project);
    }
    if (!project) return;

    const next = {
      source: project.id + JSON.stringify(project.warnings),
      tree: project.id + project.tree_text + String(state.undoDepth),
      params: project.id + JSON.stringify(project.params),
      runs:
        project.id +
        JSON.stringify(project.runs) +
        String(state.selectedRunId) +
        String(Object.keys(state.emdByRun).length),
    };
    if (next.source !== fingerprints.source) {
      renderSource(sourceSection, project);
    }
    if (next.tree !== fingerprints.tree) {
      renderTree(treeSection, store, project, state);
    }
    if (next.params !== fingerprints.params) {
      renderParams(paramsSection, store, project);
    }
    if (next.runs !== fingerprints.runs) {
      renderRuns(runSection, store, project, state);
    }
    fingerprints = next;
  });
}

// -- upload ----------------------------------------------------------------

function renderUpload(section: HTMLElement, store: Store): void {
  const input = el("input", { type: "file", accept: ".csv,text/csv" });
  const load = button("upload event log", async () => {
    const file = input.files?.[0];
    if (!file) {
      inlineError(section, "choose a CSV file first");
      return;
    }
    inlineError(section, null);
    await store.createProject(await file.text());
  }, "primary");
  section.append(
    el("h2", {}, "event log"),
    el("p", {}, "Upload a CSV event log to mine its process tree and parameters."),
    input,
    load,
  );
}

// -- source summary ----------------------------------------------------------

function renderSource(section: HTMLElement, project: ProjectDoc): void {
  section.replaceChildren(
    el("h2", {}, "source log"),
    el(
      "p",
      {},
      `${project.source.cases} cases, ${project.source.events} events, ` +
        `${project.source.variants} variants, activities: ` +
        project.source.activities.join(", "),
    ),
    ...project.warnings.map((w) => el("p", { class: "warning" }, `⚠ ${w}`)),
  );
}

// -- tree editor ----------------------------------------------------------------

function renderTree(
  section: HTMLElement,
  store: Store,
  project: ProjectDoc,
  state: State,
): void {
  const header = el(
    "div",
    { class: "row" },
    el("h2", {}, "process tree"),
    button("undo", () => void store.undoEdit(), "small"),
    button("reset to mined", () => void store.resetTree(), "small"),
    el("span", { class: "muted" },
      state.undoDepth ? `${state.undoDepth} edit(s) on record` : "as mined"),
  );
  const text = el("code", { class: "tree-text" }, project.tree_text);
  const list = el("ul", { class: "tree-root" });
  list.append(renderNode(store, project.tree.root, []));
  section.replaceChildren(header, text, list);
}

function renderNode(store: Store, node: TreeNode, path: NodePath): HTMLLIElement {
  const item = el("li", {});
  const row = el("div", { class: "node-row" });
  row.append(el("span", { class: `glyph glyph-${node.kind}` }, nodeLabel(node)));

  if (isOperator(node)) {
    row.append(operatorSelect(store, node, path));
    if (node.kind === "xor") row.append(weightEditor(store, node, path));
    if (node.kind === "loop") row.append(loopEditor(store, node, path));
    row.append(insertControl(store, node, path));
  }
  item.append(row);

  const children = node.children ?? [];
  if (children.length) {
    const list = el("ul", {});
    children.forEach((child, index) => {
      const childItem = renderNode(store, child, [...path, index]);
      const controls = el("span", { class: "child-controls" });
      if (index > 0) {
        controls.append(
          button("↑", () =>
            void store.applyEdit({ op: "swap_children", path, i: index - 1, j: index }),
            "tiny"),
        );
      }
      if (index < children.length - 1) {
        controls.append(
          button("↓", () =>
            void store.applyEdit({ op: "swap_children", path, i: index, j: index + 1 }),
            "tiny"),
        );
      }
      if (children.length > 1) {
        controls.append(
          button("✕", () =>
            void store.applyEdit({ op: "delete_child", path, position: index }),
            "tiny danger"),
        );
      }
      childItem.querySelector(":scope > .node-row")?.append(controls);
      list.append(childItem);
    });
    item.append(list);
  }
  return item;
}

function operatorSelect(store: Store, node: TreeNode, path: NodePath): HTMLSelectElement {
  const select = el("select", { class: "op-select" });
  for (const kind of OPERATOR_KINDS) {
    const option = el("option", { value: kind }, kind);
    if (kind === node.kind) option.setAttribute("selected", "selected");
    select.append(option);
  }
  select.addEventListener("change", () => {
    void store.applyEdit({
      op: "change_operator",
      path,
      kind: select.value as OperatorKind,
    });
  });
  return select;
}

function weightEditor(store: Store, node: TreeNode, path: NodePath): HTMLSpanElement {
  const span = el("span", { class: "weight-editor" }, "weights: ");
  const count = node.children?.length ?? 0;
  const inputs: HTMLInputElement[] = [];
  for (let i = 0; i < count; i++) {
    const input = numberInput(
      node.weights ? node.weights[i].toFixed(3) : "",
      4,
    );
    inputs.push(input);
    span.append(input);
  }
  span.append(
    button("set", () => {
      const weights = inputs.map((input) => Number(input.value));
      const error = weightsError(weights);
      inlineError(span, error);
      if (error) return; // invalid: inline message, no request
      void store.applyEdit({ op: "set_xor_weights", path, weights });
    }, "tiny"),
  );
  return span;
}

function loopEditor(store: Store, node: TreeNode, path: NodePath): HTMLSpanElement {
  const span = el("span", { class: "loop-editor" }, "max redos: ");
  const input = numberInput(
    node.max_redo == null ? "" : String(node.max_redo),
    3,
  );
  span.append(
    input,
    button("set", () => {
      const value = Number(input.value);
      const error =
        input.value.trim() === ""
          ? null
          : Number.isInteger(value) && value >= 0
            ? null
            : "max redos must be a non-negative integer";
      inlineError(span, error);
      if (error) return;
      void store.applyEdit({
        op: "set_max_redo",
        path,
        max_redo: input.value.trim() === "" ? null : value,
      });
    }, "tiny"),
    el("span", { class: "muted" },
      node.p_redo == null ? "" : ` p(redo) ${node.p_redo.toFixed(3)}`),
  );
  return span;
}

function insertControl(store: Store, node: TreeNode, path: NodePath): HTMLSpanElement {
  const span = el("span", { class: "insert-control" });
  const kindSelect = el("select", {});
  for (const kind of ["activity", "tau", ...OPERATOR_KINDS]) {
    kindSelect.append(el("option", { value: kind }, kind));
  }
  const nameInput = el("input", { type: "text", placeholder: "name", size: "8" });
  span.append(
    kindSelect,
    nameInput,
    button("insert child", () => {
      const kind = kindSelect.value;
      let subtree: TreeNode;
      if (kind === "activity") {
        const name = nameInput.value.trim();
        if (!name) {
          inlineError(span, "activity needs a name");
          return;
        }
        subtree = { kind: "activity", name };
      } else if (kind === "tau") {
        subtree = { kind: "tau" };
      } else {
        // new operators need two children to be valid; seed with taus
        subtree = {
          kind: kind as OperatorKind,
          children: [{ kind: "tau" }, { kind: "tau" }],
        };
      }
      inlineError(span, null);
      void store.applyEdit({
        op: "insert_child",
        path,
        position: node.children?.length ?? 0,
        subtree,
      });
    }, "tiny"),
  );
  return span;
}

// -- parameter forms --------------------------------------------------------------

function renderParams(section: HTMLElement, store: Store, project: ProjectDoc): void {
  const params = project.params;
  section.replaceChildren(
    el(
      "div",
      { class: "row" },
      el("h2", {}, "parameters"),
      button("reset to mined", () => void store.resetParams(), "small"),
    ),
  );

  // arrival ------------------------------------------------------------
  const arrival = el("fieldset", {}, el("legend", {}, "arrival"));
  const meanIn = numberInput(String(params.arrival.mean_interarrival), 8);
  const stdIn = numberInput(String(params.arrival.std_interarrival), 8);
  const kindSelect = el("select", {});
  for (const kind of ["exponential", "normal_clamped"]) {
    const option = el("option", { value: kind }, kind);
    if (kind === params.arrival.kind) option.setAttribute("selected", "selected");
    kindSelect.append(option);
  }
  arrival.append(
    el("label", {}, "mean interarrival (s) ", meanIn),
    el("label", {}, "std (s) ", stdIn),
    el("label", {}, "distribution ", kindSelect),
    button("apply", () => {
      const mean = Number(meanIn.value);
      const std = Number(stdIn.value);
      const error =
        nonNegativeError(mean, "mean interarrival") ??
        nonNegativeError(std, "std");
      inlineError(arrival, error);
      if (error) return;
      void store.putParams({
        arrival: {
          mean_interarrival: mean,
          std_interarrival: std,
          kind: kindSelect.value,
        },
      });
    }, "small"),
  );
  section.append(arrival);

  // activities ------------------------------------------------------------
  const activities = el("fieldset", {}, el("legend", {}, "activities"));
  const table = el("table", { class: "activity-form" });
  table.append(
    el(
      "tr",
      {},
      ...["activity", "mean duration", "std", "capacity", "mean waiting", "resources"].map(
        (h) => el("th", {}, h),
      ),
    ),
  );
  const rows: Record<string, Record<string, HTMLInputElement>> = {};
  for (const [name, profile] of Object.entries(params.activities)) {
    const fields = {
      mean_duration: numberInput(String(profile.mean_duration), 8),
      std_duration: numberInput(String(profile.std_duration), 8),
      capacity: numberInput(String(profile.capacity), 4),
      mean_waiting: numberInput(String(profile.mean_waiting), 8),
      resources: numberInput(profile.resources.join(", "), 14),
    };
    rows[name] = fields;
    table.append(
      el(
        "tr",
        {},
        el("td", {}, name),
        el("td", {}, fields.mean_duration),
        el("td", {}, fields.std_duration),
        el("td", {}, fields.capacity),
        el("td", {}, fields.mean_waiting),
        el("td", {}, fields.resources),
      ),
    );
  }
  activities.append(
    table,
    button("apply", () => {
      const patch: Record<string, object> = {};
      for (const [name, fields] of Object.entries(rows)) {
        const mean = Number(fields.mean_duration.value);
        const std = Number(fields.std_duration.value);
        const capacity = Number(fields.capacity.value);
        const waiting = Number(fields.mean_waiting.value);
        const error =
          nonNegativeError(mean, `${name}: mean duration`) ??
          nonNegativeError(std, `${name}: std`) ??
          positiveIntError(capacity, `${name}: capacity`) ??
          nonNegativeError(waiting, `${name}: mean waiting`);
        inlineError(activities, error);
        if (error) return;
        patch[name] = {
          mean_duration: mean,
          std_duration: std,
          capacity,
          mean_waiting: waiting,
          resources: fields.resources.value
            .split(",")
            .map((r) => r.trim())
            .filter((r) => r.length > 0),
        };
      }
      inlineError(activities, null);
      void store.putParams({ activities: patch });
    }, "small"),
  );
  section.append(activities);

  // calendar -------------------------------------------------------------------
  const calendar = el("fieldset", {}, el("legend", {}, "calendar (hours open)"));
  const dayInputs: Record<string, HTMLInputElement> = {};
  for (const day of WEEKDAYS) {
    const intervals = params.calendar[day] ?? [];
    const input = numberInput(
      intervals.map(([o, c]) => `${o}-${c}`).join(", "),
      12,
    );
    dayInputs[day] = input;
    calendar.append(el("label", { class: "day" }, `${day} `, input));
  }
  calendar.append(
    button("apply", () => {
      const doc: Record<string, [number, number][]> = {};
      try {
        for (const day of WEEKDAYS) {
          doc[day] = parseDayIntervals(dayInputs[day].value);
        }
      } catch (error) {
        inlineError(calendar, String(error instanceof Error ? error.message : error));
        return;
      }
      inlineError(calendar, null);
      void store.putParams({ calendar: doc });
    }, "small"),
  );
  section.append(calendar);

  // process capacity ---------------------------------------------------------------
  const process = el("fieldset", {}, el("legend", {}, "process"));
  const capacityInput = numberInput(
    params.process_capacity == null ? "" : String(params.process_capacity),
    5,
  );
  process.append(
    el("label", {}, "process capacity (blank = unbounded) ", capacityInput),
    button("apply", () => {
      const text = capacityInput.value.trim();
      const value = text === "" ? null : Number(text);
      const error =
        value === null ? null : positiveIntError(value, "process capacity");
      inlineError(process, error);
      if (error) return;
      void store.putParams({ process_capacity: value });
    }, "small"),
  );
  section.append(process);
}

// -- run panel ---------------------------------------------------------------------

function renderRuns(
  section: HTMLElement,
  store: Store,
  project: ProjectDoc,
  state: State,
): void {
  section.replaceChildren(el("h2", {}, "simulation runs"));

  // launcher (holds uncommitted form input: read current DOM values if present)
  const form = el("fieldset", { class: "run-form" }, el("legend", {}, "new run"));
  const cases = numberInput(String(project.source.cases), 6);
  const seed = numberInput("7", 6);
  const start = el("input", {
    type: "text",
    value: "2024-01-01 00:00:00",
    size: "19",
  });
  const interruptActivity = el("input", { type: "checkbox" });
  const interruptCase = el("input", { type: "checkbox" });
  const processCapacity = numberInput("", 5);
  form.append(
    el("label", {}, "cases ", cases),
    el("label", {}, "seed ", seed),
    el("label", {}, "start ", start),
    el("label", {}, interruptActivity, " pause activities off-hours"),
    el("label", {}, interruptCase, " record case interruptions"),
    el("label", {}, "process capacity override ", processCapacity),
    button("start run", () => {
      const caseCount = Number(cases.value);
      const seedValue = Number(seed.value);
      const error =
        positiveIntError(caseCount, "cases") ??
        (Number.isInteger(seedValue) ? null : "seed must be an integer");
      inlineError(form, error);
      if (error) return;
      const override = processCapacity.value.trim();
      void store.startRun({
        cases: caseCount,
        seed: seedValue,
        start: start.value.trim(),
        interrupt_activity: interruptActivity.checked,
        interrupt_case: interruptCase.checked,
        process_capacity: override === "" ? null : Number(override),
      });
    }, "primary"),
  );
  section.append(form);

  // chronological run list ------------------------------------------------
  const list = el("ul", { class: "run-list" });
  for (const run of project.runs) {
    const entry = el(
      "li",
      { class: run.id === state.selectedRunId ? "selected" : "" },
      button(`${run.created} — ${run.id}`, () => store.selectRun(run.id), "link"),
      el("span", { class: `status status-${run.status}` }, run.status),
    );
    list.append(entry);
  }
  section.append(list.childElementCount ? list : el("p", { class: "muted" }, "no runs yet"));

  // selected run detail ------------------------------------------------------
  const run = project.runs.find((r) => r.id === state.selectedRunId);
  if (!run) return;
  const detail = el("div", { class: "run-detail" });
  detail.append(el("h3", {}, `run ${run.id} — ${run.status}`));
  if (run.status === "failed" && run.error) {
    detail.append(
      el("p", { class: "error" }, `${run.error.code}: ${run.error.message}`),
    );
  }
  if (run.status === "done") {
    detail.append(renderRunResults(store, run, state));
  }
  section.append(detail);
}

function renderRunResults(store: Store, run: RunDoc, state: State): HTMLElement {
  const wrap = el("div", {});
  if (run.kpis) {
    const holder = el("div", {});
    holder.innerHTML = kpiTableHtml(run.kpis);
    wrap.append(holder);
  }
  const emd = state.emdByRun[run.id];
  if (emd) {
    const badge = el("span", {});
    badge.innerHTML = emdBadgeHtml(emd.distance);
    const variants = el("div", {});
    variants.innerHTML = variantsTableHtml(emd);
    wrap.append(el("div", { class: "row" }, "vs. source: ", badge), variants);
  } else {
    void store.loadEmd(run.id);
    wrap.append(el("p", { class: "muted" }, "computing EMD…"));
  }
  wrap.append(
    el(
      "p",
      {},
      el(
        "a",
        { href: store.api.logUrl(run.id), download: `run-${run.id}.csv` },
        "download synthetic log",
      ),
    ),
  );
  return wrap;
}
