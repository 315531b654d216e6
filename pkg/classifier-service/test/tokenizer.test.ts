import { describe, expect, it } from "vitest";

import { tokenGroupForSpan, tokenize } from "../src/tokenizer.js";

describe("tokenizer", () => {
  it("reports exact offsets", () => {
    const text = "mov eax, 0x1\njmp 0x4010";
    const tokens = tokenize(text);
    expect(tokens.map((t) => t.text)).toEqual([
      "mov", "eax,", "0x1", "jmp", "0x4010",
    ]);
    for (const token of tokens) {
      expect(text.slice(token.start, token.end)).toBe(token.text);
    }
  });

  it("maps spans to start-token-shifted index groups", () => {
    const text = "0x1000:\nmov eax, 0x1\nret\n; 0x1006\n";
    const tokens = tokenize(text);
    const movStart = text.indexOf("mov eax, 0x1");
    const group = tokenGroupForSpan(tokens, movStart, movStart + "mov eax, 0x1".length);
    // tokens: [0x1000:, mov, eax,, 0x1, ret, ;, 0x1006] at sequence
    // positions 1.. after <s>; the mov word covers positions 2, 3, 4
    expect(group).toEqual([2, 3, 4]);
  });

  it("returns an empty group for a whitespace-only span", () => {
    const text = "a b";
    expect(tokenGroupForSpan(tokenize(text), 1, 2)).toEqual([]);
  });
});
