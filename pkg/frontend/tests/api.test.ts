// api.test.ts -- the HTTP client: request shaping and error mapping onto
// the service's {code, message, detail} contract, with fetch stubbed.
import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, Client } from "../src/api.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("client", () => {
  it("POSTs the project body and returns the parsed document", async () => {
    const fetchMock = vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
      expect(String(url)).toBe("http://svc/projects");
      expect(init?.method).toBe("POST");
      expect(JSON.parse(String(init?.body))).toEqual({ csv: "header\n" });
      return jsonResponse(201, { id: "p1", runs: [] });
    });
    vi.stubGlobal("fetch", fetchMock);
    const project = await new Client("http://svc").createProject("header\n");
    expect(project.id).toBe("p1");
    expect(fetchMock).toHaveBeenCalledTimes(1);
  });

  it("maps service error bodies onto ApiError", async () => {
    vi.stubGlobal("fetch", vi.fn(async () =>
      jsonResponse(409, {
        code: "invariant_violation",
        message: "loop needs at least 2 children",
        detail: "at [1]",
      }),
    ));
    const error = await new Client("http://svc")
      .patchTree("p1", { op: "set_max_redo", path: [1], max_redo: 2 })
      .catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(409);
    expect(error.code).toBe("invariant_violation");
    expect(error.message).toBe("loop needs at least 2 children");
    expect(error.detail).toBe("at [1]");
  });

  it("keeps the status line when the error body is not JSON", async () => {
    vi.stubGlobal("fetch", vi.fn(async () =>
      new Response("<html>boom</html>", { status: 500, statusText: "Server Error" }),
    ));
    const error = await new Client("").getProject("p1").catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.code).toBe("http_error");
    expect(error.message).toContain("500");
  });

  it("reports an unreachable service distinctly", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => {
      throw new TypeError("connect ECONNREFUSED");
    }));
    const error = await new Client("http://down").getRun("r1").catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.code).toBe("unreachable");
  });

  it("builds the log download URL from the base", () => {
    expect(new Client("http://svc").logUrl("abc")).toBe("http://svc/runs/abc/log.csv");
    expect(new Client("").logUrl("abc")).toBe("/runs/abc/log.csv");
  });
});
