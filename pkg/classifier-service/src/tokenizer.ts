/**
 * Whitespace tokenizer with byte-offset mapping, so word spans from the wire
 * can be matched to token index groups.
 */

export interface Token {
  text: string;
  start: number; // byte offset into the snippet text
  end: number;
}

export function tokenize(text: string): Token[] {
  const tokens: Token[] = [];
  const re = /\S+/g;
  let match: RegExpExecArray | null;
  while ((match = re.exec(text)) !== null) {
    tokens.push({ text: match[0], start: match.index, end: match.index + match[0].length });
  }
  return tokens;
}

/**
 * Indexes (into the <s>-prefixed sequence, so text token j sits at j+1) of
 * the tokens overlapping a [start, end) span.
 */
export function tokenGroupForSpan(
  tokens: Token[],
  start: number,
  end: number,
): number[] {
  const group: number[] = [];
  tokens.forEach((token, j) => {
    if (token.start < end && start < token.end) {
      group.push(j + 1);
    }
  });
  return group;
}
