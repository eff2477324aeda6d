// types.ts
// ----------------------------------------------------------------------
// Client-side mirrors of the service's JSON documents.  These are never
// mutated locally: every field of the view is either a verbatim service
// response or uncommitted form input kept separately in the store.
// ----------------------------------------------------------------------

export type OperatorKind = "sequence" | "xor" | "parallel" | "loop";
export type NodeKind = OperatorKind | "activity" | "tau";

export interface TreeNode {
  kind: NodeKind;
  name?: string;
  children?: TreeNode[];
  weights?: number[] | null;
  max_redo?: number | null;
  p_redo?: number | null;
}

export interface TreeDoc {
  root: TreeNode;
  max_trace_length: number | null;
}

export interface ArrivalDoc {
  mean_interarrival: number;
  std_interarrival: number;
  kind: "exponential" | "normal_clamped";
}

export interface ActivityDoc {
  mean_duration: number;
  std_duration: number;
  capacity: number;
  resources: string[];
  mean_waiting: number;
}

/** Weekday name -> list of [open, close) hour pairs. */
export type CalendarDoc = Record<string, [number, number][]>;

export interface ParamsDoc {
  arrival: ArrivalDoc;
  activities: Record<string, ActivityDoc>;
  handover: Record<string, Record<string, number>>;
  calendar: CalendarDoc;
  process_capacity: number | null;
}

export interface RunConfig {
  cases: number;
  seed: number;
  start: string;
  interrupt_activity: boolean;
  interrupt_case: boolean;
  windows: [string, string][];
  process_capacity: number | null;
}

export interface KpiActivityDoc {
  mean_waiting: number;
  mean_service: number;
  max_queue: number;
}

export interface KpiDoc {
  activities: Record<string, KpiActivityDoc>;
  mean_sojourn: number;
  max_sojourn: number;
  traces: number;
  truncated: number;
  empty_traces: number;
  interruptions: number;
}

export type RunStatus = "queued" | "running" | "done" | "failed";

export interface RunDoc {
  id: string;
  project_id: string;
  status: RunStatus;
  created: string;
  config: RunConfig;
  error: { code: string; message: string } | null;
  kpis?: KpiDoc | null;
  emd?: number;
}

export interface SourceStats {
  cases: number;
  events: number;
  activities: string[];
  variants: number;
  replayed: number;
  unreplayable: number;
}

export interface ProjectDoc {
  id: string;
  created: string;
  tree: TreeDoc;
  tree_text: string;
  mined_tree: TreeDoc;
  mined_tree_text: string;
  params: ParamsDoc;
  mined_params: ParamsDoc;
  warnings: string[];
  source: SourceStats;
  runs: RunDoc[];
}

export interface EmdVariant {
  sequence: string[];
  count: number;
}

export interface EmdDoc {
  distance: number;
  variants1: EmdVariant[];
  variants2: EmdVariant[];
  flow: { i: number; j: number; mass: number; cost: number }[];
}

/** Child-index path from the root; [] is the root itself. */
export type NodePath = number[];

export type TreeEdit =
  | { op: "change_operator"; path: NodePath; kind: OperatorKind }
  | { op: "insert_child"; path: NodePath; position: number; subtree: TreeNode }
  | { op: "delete_child"; path: NodePath; position: number }
  | { op: "set_xor_weights"; path: NodePath; weights: number[] | null }
  | { op: "set_max_redo"; path: NodePath; max_redo: number | null }
  | { op: "replace_subtree"; path: NodePath; subtree: TreeNode }
  | { op: "swap_children"; path: NodePath; i: number; j: number };
