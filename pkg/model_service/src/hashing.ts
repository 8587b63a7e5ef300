// 64-bit FNV-1a over bytes or UTF-8 text, BigInt arithmetic throughout.
// Everything downstream that needs "randomness" derives it from these
// digests, so the whole service is a pure function of its inputs.

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = 0xffffffffffffffffn;

export function fnv1a64(data: Uint8Array | string): bigint {
  const bytes =
    typeof data === "string" ? new TextEncoder().encode(data) : data;
  let h = FNV_OFFSET;
  for (const b of bytes) {
    h ^= BigInt(b);
    h = (h * FNV_PRIME) & MASK64;
  }
  return h;
}

const GOLDEN = 0x9e3779b97f4a7c15n;

// splitmix64 finalizer; good avalanche for combining digests
export function mix64(x: bigint): bigint {
  let z = x & MASK64;
  z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
  z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
  return z ^ (z >> 31n);
}

export function combine(a: bigint, b: bigint): bigint {
  return mix64((a ^ ((b * FNV_PRIME) & MASK64)) & MASK64);
}

/** n picks in [0, bound), splitmix64 counter mode from one digest. */
export function indices(digest: bigint, n: number, bound: number): number[] {
  const out: number[] = [];
  let state = digest;
  for (let i = 0; i < n; i++) {
    state = (state + GOLDEN) & MASK64;
    out.push(Number(mix64(state) % BigInt(bound)));
  }
  return out;
}
