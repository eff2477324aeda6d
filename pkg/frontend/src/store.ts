// store.ts
// ----------------------------------------------------------------------
// The one mutable object in the app.  State is a pure function of service
// responses (plus transient error/busy flags); actions call the API and
// replace state wholesale, so a hard refresh rebuilds the same view from
// GET /projects/{id} alone.  Tree undo keeps the service-confirmed tree
// documents we navigated away from and restores them with targeted
// inverse edits (replace_subtree for structure, set_xor_weights /
// set_max_redo for annotation-only changes).
// ----------------------------------------------------------------------
import { ApiError, Client } from "./api.js";
import type {
  EmdDoc,
  ProjectDoc,
  RunDoc,
  TreeDoc,
  TreeEdit,
} from "./types.js";

export interface State {
  project: ProjectDoc | null;
  selectedRunId: string | null;
  emdByRun: Record<string, EmdDoc>;
  undoDepth: number;
  error: string | null;
  busy: boolean;
}

type Listener = (state: State) => void;

export class Store {
  private state: State = {
    project: null,
    selectedRunId: null,
    emdByRun: {},
    undoDepth: 0,
    error: null,
    busy: false,
  };
  private listeners: Listener[] = [];
  private history: TreeDoc[] = [];
  private pollTimer: ReturnType<typeof setInterval> | null = null;

  constructor(
    readonly api: Client,
    private pollMs = 1000,
  ) {}

  getState(): State {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private set(patch: Partial<State>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  private async guard<T>(work: () => Promise<T>): Promise<T | null> {
    this.set({ busy: true, error: null });
    try {
      return await work();
    } catch (error) {
      const message =
        error instanceof ApiError
          ? `${error.message}${error.detail ? ` — ${error.detail}` : ""}`
          : String(error);
      this.set({ error: message });
      return null;
    } finally {
      this.set({ busy: false });
    }
  }

  // -- project lifecycle --------------------------------------------------

  async createProject(csv: string, mapping?: Record<string, string>) {
    await this.guard(async () => {
      const project = await this.api.createProject(csv, mapping);
      this.history = [];
      this.set({
        project,
        selectedRunId: null,
        emdByRun: {},
        undoDepth: 0,
      });
    });
  }

  async refreshProject() {
    const id = this.state.project?.id;
    if (!id) return;
    const project = await this.api.getProject(id);
    this.set({ project });
  }

  // -- tree editing ---------------------------------------------------------

  async applyEdit(edit: TreeEdit) {
    const project = this.state.project;
    if (!project) return;
    await this.guard(async () => {
      const previous = project.tree;
      await this.api.patchTree(project.id, edit);
      this.history.push(previous);
      await this.refreshProject();
      this.set({ undoDepth: this.history.length });
    });
  }

  /** Restore the most recent service-confirmed tree from history. */
  async undoEdit() {
    const project = this.state.project;
    const previous = this.history.pop();
    if (!project || !previous) return;
    await this.guard(async () => {
      await this.api.patchTree(project.id, {
        op: "replace_subtree",
        path: [],
        subtree: previous.root,
      });
      // structure back; re-impose the remembered annotations in case
      // re-annotation of the restored structure mined different values
      await this.reimposeAnnotations(project.id, previous);
      await this.refreshProject();
      this.set({ undoDepth: this.history.length });
    });
  }

  private async reimposeAnnotations(projectId: string, doc: TreeDoc) {
    const walk = async (
      node: TreeDoc["root"],
      path: number[],
    ): Promise<void> => {
      if (node.kind === "xor" && node.weights != null) {
        await this.api.patchTree(projectId, {
          op: "set_xor_weights",
          path,
          weights: node.weights,
        });
      }
      if (node.kind === "loop" && node.max_redo != null) {
        await this.api.patchTree(projectId, {
          op: "set_max_redo",
          path,
          max_redo: node.max_redo,
        });
      }
      const children = node.children ?? [];
      for (let i = 0; i < children.length; i++) {
        await walk(children[i], [...path, i]);
      }
    };
    await walk(doc.root, []);
  }

  async resetTree() {
    const project = this.state.project;
    if (!project) return;
    await this.guard(async () => {
      await this.api.resetTree(project.id);
      this.history = [];
      await this.refreshProject();
      this.set({ undoDepth: 0 });
    });
  }

  // -- parameters -------------------------------------------------------------

  async putParams(partial: object) {
    const project = this.state.project;
    if (!project) return;
    await this.guard(async () => {
      await this.api.putParams(project.id, partial);
      await this.refreshProject();
    });
  }

  async resetParams() {
    const project = this.state.project;
    if (!project) return;
    await this.guard(async () => {
      await this.api.resetParams(project.id);
      await this.refreshProject();
    });
  }

  // -- runs ---------------------------------------------------------------------

  async startRun(config: Parameters<Client["startRun"]>[1]) {
    const project = this.state.project;
    if (!project) return;
    await this.guard(async () => {
      const run = await this.api.startRun(project.id, config);
      await this.refreshProject();
      this.set({ selectedRunId: run.id });
      this.startPolling();
    });
  }

  selectRun(runId: string | null) {
    this.set({ selectedRunId: runId });
    const run = this.selectedRun();
    if (run && (run.status === "queued" || run.status === "running")) {
      this.startPolling();
    }
    if (run && run.status === "done") void this.loadEmd(run.id);
  }

  selectedRun(): RunDoc | null {
    const { project, selectedRunId } = this.state;
    if (!project || !selectedRunId) return null;
    return project.runs.find((run) => run.id === selectedRunId) ?? null;
  }

  /** Poll every pollMs until no selected run is queued/running. */
  startPolling(): void {
    if (this.pollTimer !== null) return;
    this.pollTimer = setInterval(() => void this.pollOnce(), this.pollMs);
  }

  stopPolling(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  async pollOnce(): Promise<void> {
    const project = this.state.project;
    if (!project) {
      this.stopPolling();
      return;
    }
    const pending = project.runs.some(
      (run) => run.status === "queued" || run.status === "running",
    );
    if (!pending) {
      this.stopPolling();
      return;
    }
    try {
      await this.refreshProject();
    } catch {
      return; // transient; keep polling
    }
    const run = this.selectedRun();
    if (run && run.status === "done" && !this.state.emdByRun[run.id]) {
      void this.loadEmd(run.id);
    }
  }

  async loadEmd(runId: string): Promise<void> {
    if (this.state.emdByRun[runId]) return;
    try {
      const emd = await this.api.getEmd(runId);
      this.set({ emdByRun: { ...this.state.emdByRun, [runId]: emd } });
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) return;
      this.set({ error: String(error) });
    }
  }
}
