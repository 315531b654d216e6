/**
 * Shared golden request/response suite: cases captured from an
 * oracle-classified pipeline run on the primary side. The stub must
 * reproduce every probability exactly.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { GroundTruthStub } from "../src/stub.js";

const here = dirname(fileURLToPath(import.meta.url));
const goldenDir = join(here, "..", "..", "golden");

interface GoldenCase {
  request: { text: string; spans: { start: number; end: number }[] };
  expected: { probabilities: number[] };
  tag: string;
}

const doc = JSON.parse(
  readFileSync(join(goldenDir, "classify_conformance.json"), "utf-8"),
) as { stub_bundle: string; cases: GoldenCase[] };

const stub = GroundTruthStub.fromFile(join(goldenDir, doc.stub_bundle));

describe("protocol conformance goldens", () => {
  it("has cases from several pipeline stages", () => {
    const tags = new Set(doc.cases.map((c) => c.tag));
    expect(tags.size).toBeGreaterThanOrEqual(3);
    expect(doc.cases.length).toBeGreaterThanOrEqual(10);
  });

  for (const [index, goldenCase] of doc.cases.entries()) {
    it(`reproduces case ${index} (${goldenCase.tag})`, () => {
      const got = stub.classifyText(
        goldenCase.request.text,
        goldenCase.request.spans,
      );
      expect(got).toEqual(goldenCase.expected.probabilities);
    });
  }
});
