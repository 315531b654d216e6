/**
 * Model-mode classification: tokenize, run the synthetic encoder, pool each
 * queried word with the shifted mean, and push the embedding through a
 * linear layer + sigmoid.
 */

import { HIDDEN_DIM, hiddenStates, mulberry32 } from "./encoder.js";
import { dot, shiftedMeanPool, sigmoid } from "./pooling.js";
import { tokenGroupForSpan, tokenize } from "./tokenizer.js";

export interface Span {
  start: number;
  end: number;
}

export interface LinearHead {
  weights: number[];
  bias: number;
}

export function seededHead(seed = 64206): LinearHead {
  const rand = mulberry32(seed);
  const weights = new Array<number>(HIDDEN_DIM);
  for (let d = 0; d < HIDDEN_DIM; d++) {
    weights[d] = rand() * 2 - 1;
  }
  return { weights, bias: rand() * 2 - 1 };
}

export function classifyText(
  text: string,
  spans: Span[],
  head: LinearHead = seededHead(),
): number[] {
  const tokens = tokenize(text);
  const hidden = hiddenStates(tokens);
  return spans.map((span) => {
    const group = tokenGroupForSpan(tokens, span.start, span.end);
    if (group.length === 0) {
      throw new Error(
        `span [${span.start}, ${span.end}) covers no tokens`,
      );
    }
    const pooled = shiftedMeanPool(hidden, group);
    return sigmoid(dot(head.weights, pooled) + head.bias);
  });
}
