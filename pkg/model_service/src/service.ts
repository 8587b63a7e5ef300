// Request handling, independent of the HTTP plumbing: every route is a
// function from a parsed body to {status, body}, so the protocol surface
// is testable without sockets.

import { ModelBinding, ServiceConfig } from "./bindings.js";
import {
  DecodingParams,
  Engine,
  resolveCheckpoint,
} from "./engines.js";
import { Saturated, WorkerPool } from "./queue.js";

export interface Reply {
  status: number;
  body: unknown;
}

const DEFAULT_DECODING: DecodingParams = {
  temperature: 0,
  top_k: 0,
  beam_size: 3,
  max_tokens: 64,
};

function badRequest(message: string): Reply {
  return { status: 400, body: { error: message } };
}

export class Service {
  private engines = new Map<string, Engine>();
  private pool: WorkerPool;

  constructor(readonly config: ServiceConfig) {
    // resolve every checkpoint up front; a config naming a checkpoint we
    // cannot serve should fail at startup, not at first request
    for (const binding of config.bindings) {
      this.engines.set(binding.model_id, resolveCheckpoint(binding));
    }
    this.pool = new WorkerPool(config.max_queue);
  }

  private captioners(): ModelBinding[] {
    return this.config.bindings.filter((b) => b.kind === "captioner");
  }

  private embedders(): ModelBinding[] {
    return this.config.bindings.filter((b) => b.kind === "embedder");
  }

  health(): Reply {
    return {
      status: 200,
      body: {
        status: "ok",
        models: this.config.bindings.map((b) => ({
          model_id: b.model_id,
          kind: b.kind,
          device: b.device,
          instruction_tuned: b.instruction_tuned,
        })),
      },
    };
  }

  private pickBinding(
    requested: unknown,
    candidates: ModelBinding[],
  ): ModelBinding | Reply {
    const known = candidates.map((b) => b.model_id);
    if (requested === undefined || requested === null || requested === "") {
      if (candidates.length === 0) {
        return { status: 404, body: { error: "no model bound", known } };
      }
      return candidates[0];
    }
    if (typeof requested !== "string") {
      return badRequest("model_id must be a string");
    }
    const match = candidates.find((b) => b.model_id === requested);
    if (!match) {
      return {
        status: 404,
        body: { error: `unknown model_id ${requested}`, known },
      };
    }
    return match;
  }

  async caption(rawBody: unknown): Promise<Reply> {
    if (typeof rawBody !== "object" || rawBody === null) {
      return badRequest("body must be a JSON object");
    }
    const body = rawBody as Record<string, unknown>;
    if (typeof body.image_b64 !== "string" || body.image_b64 === "") {
      return badRequest("image_b64 is required");
    }
    let image: Buffer;
    try {
      image = Buffer.from(body.image_b64, "base64");
    } catch {
      return badRequest("image_b64 is not valid base64");
    }
    if (image.length === 0) {
      return badRequest("image_b64 decodes to zero bytes");
    }
    if (image.length > this.config.max_image_bytes) {
      return {
        status: 413,
        body: {
          error: `image is ${image.length} bytes, limit ${this.config.max_image_bytes}`,
        },
      };
    }
    const picked = this.pickBinding(body.model_id, this.captioners());
    if ("status" in picked) {
      return picked;
    }
    const binding = picked;
    const engine = this.engines.get(binding.model_id);
    if (engine === undefined || engine.kind !== "captioner") {
      return { status: 500, body: { error: "inference failed" } };
    }
    const decoding: DecodingParams = {
      temperature: num(body.temperature, DEFAULT_DECODING.temperature),
      top_k: num(body.top_k, DEFAULT_DECODING.top_k),
      beam_size: num(body.beam_size, DEFAULT_DECODING.beam_size),
      max_tokens: num(body.max_tokens, DEFAULT_DECODING.max_tokens),
    };
    const prompt = typeof body.prompt === "string" ? body.prompt : "";
    try {
      const out = await this.pool.withDevice(binding.device, async () => {
        await new Promise((r) => setTimeout(r, 0)); // model call boundary
        return engine.run(image, prompt, decoding, binding);
      });
      return { status: 200, body: out };
    } catch (err) {
      if (err instanceof Saturated) {
        return { status: 429, body: { error: "server saturated, retry later" } };
      }
      // opaque-safe: no internals in the message
      return { status: 500, body: { error: "inference failed" } };
    }
  }

  async embed(rawBody: unknown): Promise<Reply> {
    if (typeof rawBody !== "object" || rawBody === null) {
      return badRequest("body must be a JSON object");
    }
    const body = rawBody as Record<string, unknown>;
    if (!Array.isArray(body.texts) || body.texts.some((t) => typeof t !== "string")) {
      return badRequest("texts must be an array of strings");
    }
    const texts = body.texts as string[];
    const picked = this.pickBinding(body.model_id, this.embedders());
    if ("status" in picked) {
      return picked;
    }
    const binding = picked;
    const engine = this.engines.get(binding.model_id);
    if (engine === undefined || engine.kind !== "embedder") {
      return { status: 500, body: { error: "inference failed" } };
    }
    try {
      const vectors = await this.pool.withDevice(binding.device, async () => {
        await new Promise((r) => setTimeout(r, 0));
        return engine.run(texts);
      });
      return { status: 200, body: { dim: engine.dim, vectors } };
    } catch (err) {
      if (err instanceof Saturated) {
        return { status: 429, body: { error: "server saturated, retry later" } };
      }
      return { status: 500, body: { error: "inference failed" } };
    }
  }
}

function num(value: unknown, fallback: number): number {
  return typeof value === "number" && Number.isFinite(value) ? value : fallback;
}
