// api.ts
// ----------------------------------------------------------------------
// Typed client for the treesim HTTP service.  Every method maps to one
// endpoint; service errors ({code, message, detail}) are rethrown as
// ApiError so the UI can show the server's own wording.
// ----------------------------------------------------------------------
import type {
  EmdDoc,
  ParamsDoc,
  ProjectDoc,
  RunDoc,
  TreeDoc,
  TreeEdit,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail: string = "",
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface TreePatchResponse {
  tree: TreeDoc;
  tree_text: string;
  warnings: string[];
}

export class Client {
  constructor(private base: string = "") {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.base + path, {
        method,
        headers: body === undefined ? {} : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (error) {
      throw new ApiError(0, "unreachable", `service unreachable: ${error}`);
    }
    if (!response.ok) {
      let code = "http_error";
      let message = `${response.status} ${response.statusText}`;
      let detail = "";
      try {
        const doc = await response.json();
        if (doc && typeof doc.code === "string") {
          code = doc.code;
          message = doc.message ?? message;
          detail = doc.detail ?? "";
        }
      } catch {
        // non-JSON error body: keep the status line
      }
      throw new ApiError(response.status, code, message, detail);
    }
    return (await response.json()) as T;
  }

  createProject(
    csv: string,
    mapping?: Record<string, string>,
  ): Promise<ProjectDoc> {
    const body: Record<string, unknown> = { csv };
    if (mapping) body.mapping = mapping;
    return this.request<ProjectDoc>("POST", "/projects", body);
  }

  getProject(id: string): Promise<ProjectDoc> {
    return this.request<ProjectDoc>("GET", `/projects/${id}`);
  }

  patchTree(id: string, edit: TreeEdit): Promise<TreePatchResponse> {
    return this.request<TreePatchResponse>("PATCH", `/projects/${id}/tree`, {
      edit,
    });
  }

  resetTree(id: string): Promise<TreePatchResponse> {
    return this.request<TreePatchResponse>("PATCH", `/projects/${id}/tree`, {
      reset: true,
    });
  }

  putParams(id: string, params: object): Promise<{ params: ParamsDoc }> {
    return this.request<{ params: ParamsDoc }>(
      "PUT",
      `/projects/${id}/params`,
      { params },
    );
  }

  resetParams(id: string): Promise<{ params: ParamsDoc }> {
    return this.request<{ params: ParamsDoc }>(
      "PUT",
      `/projects/${id}/params`,
      { reset: true },
    );
  }

  startRun(
    id: string,
    config: {
      cases: number;
      seed: number;
      start?: string;
      interrupt_activity?: boolean;
      interrupt_case?: boolean;
      windows?: [string, string][];
      process_capacity?: number | null;
    },
  ): Promise<RunDoc> {
    return this.request<RunDoc>("POST", `/projects/${id}/runs`, config);
  }

  getRun(runId: string): Promise<RunDoc> {
    return this.request<RunDoc>("GET", `/runs/${runId}`);
  }

  getEmd(runId: string): Promise<EmdDoc> {
    return this.request<EmdDoc>("GET", `/runs/${runId}/emd`);
  }

  logUrl(runId: string): string {
    return `${this.base}/runs/${runId}/log.csv`;
  }

  async downloadLog(runId: string): Promise<string> {
    const response = await fetch(this.logUrl(runId));
    if (!response.ok) {
      throw new ApiError(response.status, "log_unavailable",
        `log download failed: ${response.status}`);
    }
    return response.text();
  }
}
