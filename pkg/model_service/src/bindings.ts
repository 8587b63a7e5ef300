import { readFileSync } from "node:fs";

export type ModelKind = "captioner" | "embedder";

export interface ModelBinding {
  model_id: string;
  kind: ModelKind;
  checkpoint: string;
  device: string;
  instruction_tuned: boolean;
}

export interface ServiceConfig {
  bindings: ModelBinding[];
  max_image_bytes: number;
  max_queue: number;
}

export const DEFAULT_MAX_IMAGE_BYTES = 8 * 1024 * 1024;
export const DEFAULT_MAX_QUEUE = 16;

export class ConfigError extends Error {}

function asBinding(raw: unknown, index: number): ModelBinding {
  if (typeof raw !== "object" || raw === null) {
    throw new ConfigError(`bindings[${index}] is not an object`);
  }
  const obj = raw as Record<string, unknown>;
  const modelId = obj.model_id;
  if (typeof modelId !== "string" || modelId === "") {
    throw new ConfigError(`bindings[${index}]: model_id must be a non-empty string`);
  }
  const kind = obj.kind;
  if (kind !== "captioner" && kind !== "embedder") {
    throw new ConfigError(
      `bindings[${index}] (${modelId}): kind must be "captioner" or "embedder"`,
    );
  }
  const checkpoint = obj.checkpoint;
  if (typeof checkpoint !== "string" || checkpoint === "") {
    throw new ConfigError(`bindings[${index}] (${modelId}): checkpoint is required`);
  }
  return {
    model_id: modelId,
    kind,
    checkpoint,
    device: typeof obj.device === "string" && obj.device !== "" ? obj.device : "cpu",
    instruction_tuned: Boolean(obj.instruction_tuned),
  };
}

export function parseConfig(raw: unknown): ServiceConfig {
  if (typeof raw !== "object" || raw === null) {
    throw new ConfigError("config must be a JSON object");
  }
  const obj = raw as Record<string, unknown>;
  if (!Array.isArray(obj.bindings) || obj.bindings.length === 0) {
    throw new ConfigError("config needs a non-empty bindings array");
  }
  const bindings = obj.bindings.map(asBinding);
  const seen = new Set<string>();
  for (const b of bindings) {
    if (seen.has(b.model_id)) {
      throw new ConfigError(`duplicate model_id ${b.model_id}`);
    }
    seen.add(b.model_id);
  }
  const maxImage = obj.max_image_bytes ?? DEFAULT_MAX_IMAGE_BYTES;
  const maxQueue = obj.max_queue ?? DEFAULT_MAX_QUEUE;
  if (typeof maxImage !== "number" || maxImage <= 0) {
    throw new ConfigError("max_image_bytes must be a positive number");
  }
  if (typeof maxQueue !== "number" || maxQueue < 0) {
    throw new ConfigError("max_queue must be >= 0");
  }
  return { bindings, max_image_bytes: maxImage, max_queue: maxQueue };
}

export function loadConfig(path: string): ServiceConfig {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch (err) {
    throw new ConfigError(`cannot read config ${path}: ${(err as Error).message}`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new ConfigError(`${path} is not valid JSON: ${(err as Error).message}`);
  }
  return parseConfig(raw);
}
