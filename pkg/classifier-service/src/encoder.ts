/**
 * A tiny deterministic stand-in for a fine-tuned encoder: every token gets a
 * pseudo-random hidden vector derived from its text and position. Real model
 * weights are out of scope here; the service exists to pin down the wire
 * protocol and the pooling arithmetic.
 */

import { Token } from "./tokenizer.js";

export const HIDDEN_DIM = 16;
export const BOS = "<s>";

/** mulberry32: small, seedable, reproducible across platforms. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function hashString(text: string): number {
  let h = 2166136261 >>> 0; // FNV-1a
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 16777619) >>> 0;
  }
  return h >>> 0;
}

export function tokenVector(text: string, position: number): number[] {
  const rand = mulberry32(hashString(`${position}:${text}`));
  const vec = new Array<number>(HIDDEN_DIM);
  for (let d = 0; d < HIDDEN_DIM; d++) {
    vec[d] = rand() * 2 - 1;
  }
  return vec;
}

/**
 * Last-hidden-layer outputs for <s> followed by the text tokens. Index 0 is
 * the start token's vector.
 */
export function hiddenStates(tokens: Token[]): number[][] {
  const states: number[][] = [tokenVector(BOS, 0)];
  tokens.forEach((token, j) => {
    states.push(tokenVector(token.text, j + 1));
  });
  return states;
}
