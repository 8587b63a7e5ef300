import { describe, expect, it } from "vitest";

import { ModelBinding } from "../src/bindings.js";
import { fnv1a64, indices, mix64 } from "../src/hashing.js";
import { CheckpointError, DecodingParams, resolveCheckpoint } from "../src/engines.js";

const GREEDY: DecodingParams = { temperature: 0, top_k: 0, beam_size: 1, max_tokens: 64 };

function binding(overrides: Partial<ModelBinding> = {}): ModelBinding {
  return {
    model_id: "m",
    kind: "captioner",
    checkpoint: "builtin/caption-plain-v1",
    device: "cpu",
    instruction_tuned: false,
    ...overrides,
  };
}

describe("hashing", () => {
  it("fnv1a64 matches published reference values", () => {
    expect(fnv1a64("")).toBe(0xcbf29ce484222325n);
    expect(fnv1a64("a")).toBe(0xaf63dc4c8601ec8cn);
    expect(fnv1a64("foobar")).toBe(0x85944171f73967e8n);
  });

  it("mix64 matches the splitmix64 reference sequence", () => {
    expect(mix64(0x9e3779b97f4a7c15n)).toBe(0xe220a8397b1dcdafn);
    expect(mix64((2n * 0x9e3779b97f4a7c15n) & 0xffffffffffffffffn))
      .toBe(0x6e789e6aa1b965f4n);
  });

  it("indices stay in range and depend on the digest", () => {
    const a = indices(1n, 8, 10);
    const b = indices(2n, 8, 10);
    expect(a.every((v) => v >= 0 && v < 10)).toBe(true);
    expect(a).not.toEqual(b);
    expect(indices(1n, 8, 10)).toEqual(a);
  });
});

describe("caption engine", () => {
  const image = new TextEncoder().encode("not really a png, any bytes do");

  it("is deterministic for fixed inputs", () => {
    const engine = resolveCheckpoint(binding());
    if (engine.kind !== "captioner") throw new Error("wrong kind");
    const one = engine.run(image, "", GREEDY, binding());
    const two = engine.run(image, "", GREEDY, binding());
    expect(one.caption).toBe(two.caption);
    expect(one.caption.length).toBeGreaterThan(0);
  });

  it("different images give different captions", () => {
    const engine = resolveCheckpoint(binding());
    if (engine.kind !== "captioner") throw new Error("wrong kind");
    const other = new TextEncoder().encode("different bytes entirely here");
    const a = engine.run(image, "", GREEDY, binding());
    const b = engine.run(other, "", GREEDY, binding());
    expect(a.caption).not.toBe(b.caption);
  });

  it("non-instruction-tuned models ignore the prompt", () => {
    const b = binding({ instruction_tuned: false });
    const engine = resolveCheckpoint(b);
    if (engine.kind !== "captioner") throw new Error("wrong kind");
    const plain = engine.run(image, "Describe the image.", GREEDY, b);
    const reasoning = engine.run(image, "What is happening in the image and why?", GREEDY, b);
    expect(plain.caption).toBe(reasoning.caption);
    expect(plain.applied_prompt).toBeUndefined();
  });

  it("instruction-tuned chat models wrap and honor the prompt", () => {
    const b = binding({ checkpoint: "builtin/caption-chat-v1", instruction_tuned: true });
    const engine = resolveCheckpoint(b);
    if (engine.kind !== "captioner") throw new Error("wrong kind");
    const basic = engine.run(image, "Describe the image.", GREEDY, b);
    const reasoning = engine.run(image, "What is happening in the image and why?", GREEDY, b);
    expect(basic.applied_prompt).toBe("USER: Describe the image.\nASSISTANT:");
    expect(basic.caption).not.toBe(reasoning.caption);
  });

  it("max_tokens truncates the caption", () => {
    const b = binding();
    const engine = resolveCheckpoint(b);
    if (engine.kind !== "captioner") throw new Error("wrong kind");
    const out = engine.run(image, "", { ...GREEDY, max_tokens: 3 }, b);
    expect(out.caption.split(" ")).toHaveLength(3);
  });
});

describe("embed engine", () => {
  const b = binding({ kind: "embedder", checkpoint: "builtin/embed-64" });

  it("produces unit-norm vectors of the checkpoint dim", () => {
    const engine = resolveCheckpoint(b);
    if (engine.kind !== "embedder") throw new Error("wrong kind");
    const [vec] = engine.run(["a dog on a bench"]);
    expect(vec).toHaveLength(64);
    const norm = Math.sqrt(vec.reduce((acc, v) => acc + v * v, 0));
    expect(Math.abs(norm - 1)).toBeLessThan(1e-9);
  });

  it("identical texts give identical vectors, empty text gives zeros", () => {
    const engine = resolveCheckpoint(b);
    if (engine.kind !== "embedder") throw new Error("wrong kind");
    const [x, y, z] = engine.run(["a", "a", ""]);
    expect(x).toEqual(y);
    expect(z.every((v) => v === 0)).toBe(true);
  });
});

describe("checkpoint resolution", () => {
  it("rejects unknown references and kind mismatches", () => {
    expect(() => resolveCheckpoint(binding({ checkpoint: "s3://weights" })))
      .toThrow(CheckpointError);
    expect(() => resolveCheckpoint(binding({ checkpoint: "builtin/embed-64" })))
      .toThrow(/binding says captioner/);
    expect(() =>
      resolveCheckpoint(binding({ kind: "embedder", checkpoint: "builtin/caption-plain-v1" })),
    ).toThrow(/binding says embedder/);
  });
});
