// Deterministic stand-in inference engines.
//
// Checkpoints resolve to pure functions of the request: the captioner
// derives every word choice from a digest of the image bytes (plus the
// applied prompt and decoding parameters when the model is
// instruction-tuned), the embedder hashes character 3-grams.  No weights,
// no I/O, no state, which makes greedy-decoding determinism and
// statelessness hold by construction instead of by luck.

import { ModelBinding } from "./bindings.js";
import { combine, fnv1a64, indices } from "./hashing.js";

export class CheckpointError extends Error {}

export interface DecodingParams {
  temperature: number;
  top_k: number;
  beam_size: number;
  max_tokens: number;
}

export interface CaptionOutput {
  caption: string;
  applied_prompt?: string;
}

const SUBJECTS = [
  "a weathered bicycle", "two children", "a street vendor", "an old dog",
  "a delivery truck", "a flock of pigeons", "a cyclist", "a fruit stand",
  "a red umbrella", "a park bench", "a small sailboat", "a stone bridge",
];

const ACTIONS = [
  "leans against", "waits near", "moves past", "rests beside",
  "stands under", "crosses", "gathers around", "faces",
];

const PLACES = [
  "a brick wall", "the market square", "a rainy street", "the harbor",
  "a row of houses", "the station entrance", "a shaded courtyard",
  "an empty field",
];

const DETAILS = [
  "in the morning light", "under a gray sky", "at dusk",
  "on a busy afternoon", "after the rain", "in bright sunshine",
];

// model-family prompt conventions, keyed by checkpoint style
function applyTemplate(style: string, prompt: string): string {
  switch (style) {
    case "chat":
      return `USER: ${prompt}\nASSISTANT:`;
    case "prefix":
      return `caption en ${prompt}`;
    default:
      return prompt;
  }
}

interface CaptionEngine {
  kind: "captioner";
  style: string;
  run(image: Uint8Array, prompt: string, decoding: DecodingParams,
      binding: ModelBinding): CaptionOutput;
}

interface EmbedEngine {
  kind: "embedder";
  dim: number;
  run(texts: string[]): number[][];
}

export type Engine = CaptionEngine | EmbedEngine;

function makeCaptioner(style: string): CaptionEngine {
  return {
    kind: "captioner",
    style,
    run(image, prompt, decoding, binding) {
      let digest = fnv1a64(image);
      let applied: string | undefined;
      if (binding.instruction_tuned) {
        applied = applyTemplate(style, prompt);
        digest = combine(digest, fnv1a64(applied));
      }
      // decoding parameters steer word choice; a fixed parameter set is
      // always reproducible, greedy or not
      digest = combine(
        digest,
        fnv1a64(`${decoding.temperature}|${decoding.top_k}|${decoding.beam_size}`),
      );
      const [s, a, p, d] = indices(digest, 4, 1 << 30);
      let words = [
        ...SUBJECTS[s % SUBJECTS.length].split(" "),
        ...ACTIONS[a % ACTIONS.length].split(" "),
        ...PLACES[p % PLACES.length].split(" "),
        ...DETAILS[d % DETAILS.length].split(" "),
      ];
      if (decoding.max_tokens > 0 && words.length > decoding.max_tokens) {
        words = words.slice(0, decoding.max_tokens);
      }
      const caption = words.join(" ");
      return applied === undefined ? { caption } : { caption, applied_prompt: applied };
    },
  };
}

function embedText(text: string, dim: number): number[] {
  const vec = new Array<number>(dim).fill(0);
  const grams: string[] = [];
  if (text.length >= 3) {
    for (let i = 0; i + 3 <= text.length; i++) grams.push(text.slice(i, i + 3));
  } else if (text.length > 0) {
    grams.push(text);
  }
  for (const gram of grams) {
    const h = fnv1a64(gram);
    const bucket = Number(h % BigInt(dim));
    const sign = (h >> 32n) & 1n ? 1 : -1;
    vec[bucket] += sign;
  }
  const norm = Math.sqrt(vec.reduce((acc, v) => acc + v * v, 0));
  return norm === 0 ? vec : vec.map((v) => v / norm);
}

function makeEmbedder(dim: number): EmbedEngine {
  return {
    kind: "embedder",
    dim,
    run: (texts) => texts.map((t) => embedText(t, dim)),
  };
}

/**
 * Checkpoint references understood by this build:
 *   builtin/caption-plain-v1   captioner, prompt passed through
 *   builtin/caption-chat-v1    captioner, chat-style template
 *   builtin/caption-prefix-v1  captioner, prefix template
 *   builtin/embed-<dim>        embedder, hashed char 3-grams
 */
export function resolveCheckpoint(binding: ModelBinding): Engine {
  const ref = binding.checkpoint;
  const embedMatch = /^builtin\/embed-(\d+)$/.exec(ref);
  if (embedMatch) {
    const dim = Number(embedMatch[1]);
    if (dim < 8 || dim > 65536) {
      throw new CheckpointError(`${ref}: dim out of range`);
    }
    if (binding.kind !== "embedder") {
      throw new CheckpointError(`${ref} is an embedder checkpoint, binding says ${binding.kind}`);
    }
    return makeEmbedder(dim);
  }
  const capMatch = /^builtin\/caption-(plain|chat|prefix)-v1$/.exec(ref);
  if (capMatch) {
    if (binding.kind !== "captioner") {
      throw new CheckpointError(`${ref} is a captioner checkpoint, binding says ${binding.kind}`);
    }
    return makeCaptioner(capMatch[1]);
  }
  throw new CheckpointError(`unresolvable checkpoint reference ${ref}`);
}
