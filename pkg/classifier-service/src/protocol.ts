/** Wire-protocol schemas for POST /v1/classify. */

import { z } from "zod";

export const SpanSchema = z.object({
  start: z.number().int().nonnegative(),
  end: z.number().int().nonnegative(),
});

export const ClassifyRequestSchema = z.object({
  requests: z.array(
    z.object({
      text: z.string(),
      spans: z.array(SpanSchema),
    }),
  ),
});

export type ClassifyRequestBody = z.infer<typeof ClassifyRequestSchema>;

export interface ClassifyResponseBody {
  results: { probabilities: number[] }[];
}
