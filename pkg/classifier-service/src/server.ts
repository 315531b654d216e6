/**
 * HTTP service for instruction-validity classification.
 *
 *   node dist/server.js --port 8200              # synthetic-encoder mode
 *   node dist/server.js --port 8200 --stub t.json # ground-truth stub mode
 */

import express, { Express } from "express";

import { classifyText, seededHead } from "./model.js";
import {
  ClassifyRequestSchema,
  ClassifyResponseBody,
} from "./protocol.js";
import { GroundTruthStub } from "./stub.js";

export interface ServerOptions {
  stub?: GroundTruthStub;
  seed?: number;
  maxInflight?: number;
}

export function buildApp(options: ServerOptions = {}): Express {
  const app = express();
  app.use(express.json({ limit: "16mb" }));
  const head = seededHead(options.seed ?? 64206);
  const maxInflight = options.maxInflight ?? 64;
  let inflight = 0;

  app.get("/healthz", (_req, res) => {
    res.json({ status: "ok", mode: options.stub ? "stub" : "model" });
  });

  app.post("/v1/classify", (req, res) => {
    if (inflight >= maxInflight) {
      // shed load; the client retries 5xx responses
      res.status(503).json({ detail: "inference gate saturated" });
      return;
    }
    inflight += 1;
    try {
      const parsed = ClassifyRequestSchema.safeParse(req.body);
      if (!parsed.success) {
        res.status(400).json({ detail: parsed.error.message });
        return;
      }
      const results = parsed.data.requests.map((request) => ({
        probabilities: options.stub
          ? options.stub.classifyText(request.text, request.spans)
          : classifyText(request.text, request.spans, head),
      }));
      const body: ClassifyResponseBody = { results };
      res.json(body);
    } catch (err) {
      // a span or snippet the classifier cannot interpret is a caller error
      res.status(400).json({ detail: String(err) });
    } finally {
      inflight -= 1;
    }
  });

  return app;
}

function parseArgs(argv: string[]): { port: number; stubPath?: string; seed?: number } {
  let port = 8200;
  let stubPath: string | undefined;
  let seed: number | undefined;
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--port") {
      port = Number(argv[++i]);
    } else if (argv[i] === "--stub") {
      stubPath = argv[++i];
    } else if (argv[i] === "--seed") {
      seed = Number(argv[++i]);
    } else {
      throw new Error(`unknown argument: ${argv[i]}`);
    }
  }
  if (!Number.isInteger(port) || port < 1 || port > 65535) {
    throw new Error(`bad port: ${port}`);
  }
  return { port, stubPath, seed };
}

const isMain = process.argv[1]?.endsWith("server.js");
if (isMain) {
  const { port, stubPath, seed } = parseArgs(process.argv.slice(2));
  const options: ServerOptions = { seed };
  if (stubPath) {
    options.stub = GroundTruthStub.fromFile(stubPath);
  }
  const app = buildApp(options);
  app.listen(port, "127.0.0.1", () => {
    // systemd-style readiness line, watched by the integration tests
    console.log(`classifier-service listening on 127.0.0.1:${port}`);
  });
}
