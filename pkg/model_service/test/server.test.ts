import { AddressInfo } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { parseConfig } from "../src/bindings.js";
import { makeServer } from "../src/server.js";

let base = "";
let server: ReturnType<typeof makeServer>;

const CONFIG = parseConfig({
  max_image_bytes: 1024 * 1024,
  bindings: [
    {
      model_id: "cap",
      kind: "captioner",
      checkpoint: "builtin/caption-plain-v1",
      device: "cpu0",
      instruction_tuned: false,
    },
    {
      model_id: "emb",
      kind: "embedder",
      checkpoint: "builtin/embed-48",
      device: "cpu0",
      instruction_tuned: false,
    },
  ],
});

beforeAll(async () => {
  server = makeServer(CONFIG);
  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const addr = server.address() as AddressInfo;
  base = `http://127.0.0.1:${addr.port}`;
});

afterAll(async () => {
  await new Promise((resolve) => server.close(resolve));
});

const IMAGE_B64 = Buffer.from("png stand-in payload").toString("base64");

function captionRequest(extra: Record<string, unknown> = {}) {
  return fetch(`${base}/caption`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({
      image_b64: IMAGE_B64,
      prompt: "Describe the image.",
      temperature: 0,
      top_k: 0,
      beam_size: 1,
      max_tokens: 64,
      ...extra,
    }),
  });
}

describe("http surface", () => {
  it("GET /health lists the bindings", async () => {
    const resp = await fetch(`${base}/health`);
    expect(resp.status).toBe(200);
    const body = await resp.json();
    expect(body.status).toBe("ok");
    expect(body.models.map((m: { model_id: string }) => m.model_id)).toEqual([
      "cap",
      "emb",
    ]);
  });

  it("POST /caption round-trips and decodes greedily deterministic", async () => {
    const first = await captionRequest();
    expect(first.status).toBe(200);
    const a = (await first.json()).caption;
    const b = (await (await captionRequest()).json()).caption;
    expect(typeof a).toBe("string");
    expect(a.length).toBeGreaterThan(0);
    expect(a).toBe(b);
  });

  it("POST /embed returns dim and ordered vectors", async () => {
    const resp = await fetch(`${base}/embed`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ texts: ["a", "a", "something else"] }),
    });
    expect(resp.status).toBe(200);
    const body = await resp.json();
    expect(body.dim).toBe(48);
    expect(body.vectors).toHaveLength(3);
    expect(body.vectors[0]).toEqual(body.vectors[1]);
  });

  it("unknown routes get 404, broken JSON gets 400", async () => {
    const missing = await fetch(`${base}/nope`, { method: "POST", body: "{}" });
    expect(missing.status).toBe(404);
    const broken = await fetch(`${base}/caption`, { method: "POST", body: "{nope" });
    expect(broken.status).toBe(400);
  });

  it("unknown model_id gets 404 naming known captioners", async () => {
    const resp = await captionRequest({ model_id: "missing-model" });
    expect(resp.status).toBe(404);
    const body = await resp.json();
    expect(body.known).toEqual(["cap"]);
  });

  it("bodies past the transport limit get 413", async () => {
    const huge = "x".repeat(2 * 1024 * 1024);
    const resp = await fetch(`${base}/caption`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ image_b64: huge, prompt: "" }),
    }).catch(() => null);
    // the server may cut the socket mid-upload; either a clean 413 or a
    // reset is acceptable refusal, but never a 200
    if (resp !== null) {
      expect(resp.status).toBe(413);
    }
  });
});
