/**
 * Ground-truth stub: answers 1.0 for instructions whose resolved address is
 * in the truth set and 0.0 otherwise, using a corpus stub bundle (truth
 * starts + per-offset decode table) to resolve snippet spans to addresses.
 */

import { readFileSync } from "node:fs";

import { Span } from "./model.js";
import { DecodeTable, addressForSpan, parseSnippet } from "./snippet.js";

export interface StubBundle {
  base: number;
  instruction_starts: number[];
  decode: [number, string][];
}

export class GroundTruthStub {
  private readonly truth: Set<number>;
  private readonly table: DecodeTable;

  constructor(bundle: StubBundle) {
    this.truth = new Set(bundle.instruction_starts);
    this.table = { base: bundle.base, rows: bundle.decode };
  }

  static fromFile(path: string): GroundTruthStub {
    const bundle = JSON.parse(readFileSync(path, "utf-8")) as StubBundle;
    if (
      typeof bundle.base !== "number" ||
      !Array.isArray(bundle.instruction_starts) ||
      !Array.isArray(bundle.decode)
    ) {
      throw new Error(`malformed stub bundle: ${path}`);
    }
    return new GroundTruthStub(bundle);
  }

  classifyText(text: string, spans: Span[]): number[] {
    const lines = parseSnippet(text, this.table);
    return spans.map((span) => {
      const address = addressForSpan(lines, span.start, span.end);
      return this.truth.has(address) ? 1.0 : 0.0;
    });
  }
}
