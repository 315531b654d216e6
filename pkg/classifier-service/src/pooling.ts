/**
 * Shifted mean pooling: the embedding of a word made of tokens at indexes
 * {i0..i0+n-1} is the mean of the PREVIOUS token's hidden vector for each
 * member, e = (sum over i of hidden[i-1]) / n. A word whose first token
 * directly follows the start token therefore pools the start token's output.
 */

export function shiftedMeanPool(
  hidden: number[][],
  tokenGroup: number[],
): number[] {
  if (tokenGroup.length === 0) {
    throw new Error("cannot pool an empty token group");
  }
  const dim = hidden[0].length;
  const pooled = new Array<number>(dim).fill(0);
  for (const index of tokenGroup) {
    if (index < 1 || index >= hidden.length) {
      throw new Error(`token index ${index} outside the hidden sequence`);
    }
    const prev = hidden[index - 1];
    for (let d = 0; d < dim; d++) {
      pooled[d] += prev[d];
    }
  }
  for (let d = 0; d < dim; d++) {
    pooled[d] /= tokenGroup.length;
  }
  return pooled;
}

export function sigmoid(x: number): number {
  return 1 / (1 + Math.exp(-x));
}

export function dot(a: number[], b: number[]): number {
  let sum = 0;
  for (let d = 0; d < a.length; d++) {
    sum += a[d] * b[d];
  }
  return sum;
}
