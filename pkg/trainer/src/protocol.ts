/**
 * The stdio wire protocol: one JSON frame per line.
 *
 * Request:  {"candidate_id", "arch", "from_epoch", "n_epochs", "hyperparams",
 *            "checkpoint_dir"}
 * Response: {"candidate_id", "epoch_acc", "status": "ok"|"error", "message"?}
 *
 * A bad request yields an error frame, never a dead process; stdout carries
 * frames only, all logging goes to stderr.
 */

import * as readline from "readline";

export interface TrainRequestFrame {
  candidate_id: string;
  arch: unknown;
  from_epoch: number;
  n_epochs: number;
  hyperparams: Record<string, unknown>;
  checkpoint_dir: string | null;
}

const REQUEST_KEYS = ["candidate_id", "arch", "from_epoch", "n_epochs", "hyperparams", "checkpoint_dir"];

export function parseRequest(line: string): TrainRequestFrame {
  let data: unknown;
  try {
    data = JSON.parse(line);
  } catch {
    throw new Error(`request is not valid JSON: ${line.slice(0, 80)}`);
  }
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    throw new Error("request must be a JSON object");
  }
  const obj = data as Record<string, unknown>;
  for (const key of REQUEST_KEYS) {
    if (key === "checkpoint_dir") continue; // optional, defaults to null
    if (!(key in obj)) throw new Error(`request missing field '${key}'`);
  }
  for (const key of Object.keys(obj)) {
    if (!REQUEST_KEYS.includes(key)) throw new Error(`request has unknown field '${key}'`);
  }
  if (typeof obj.candidate_id !== "string" || obj.candidate_id === "") {
    throw new Error("candidate_id must be a non-empty string");
  }
  const fromEpoch = obj.from_epoch;
  const nEpochs = obj.n_epochs;
  if (typeof fromEpoch !== "number" || !Number.isInteger(fromEpoch) || fromEpoch < 0) {
    throw new Error(`from_epoch must be an integer >= 0, got ${String(fromEpoch)}`);
  }
  if (typeof nEpochs !== "number" || !Number.isInteger(nEpochs) || nEpochs < 1) {
    throw new Error(`n_epochs must be an integer >= 1, got ${String(nEpochs)}`);
  }
  if (typeof obj.hyperparams !== "object" || obj.hyperparams === null || Array.isArray(obj.hyperparams)) {
    throw new Error("hyperparams must be an object");
  }
  const checkpointDir = obj.checkpoint_dir ?? null;
  if (checkpointDir !== null && typeof checkpointDir !== "string") {
    throw new Error("checkpoint_dir must be a string or null");
  }
  return {
    candidate_id: obj.candidate_id,
    arch: obj.arch,
    from_epoch: fromEpoch,
    n_epochs: nEpochs,
    hyperparams: obj.hyperparams as Record<string, unknown>,
    checkpoint_dir: checkpointDir,
  };
}

export function okFrame(candidateId: string, epochAcc: number[]): string {
  return `${JSON.stringify({ candidate_id: candidateId, epoch_acc: epochAcc, status: "ok" })}\n`;
}

export function errorFrame(candidateId: string, message: string): string {
  return `${JSON.stringify({ candidate_id: candidateId, epoch_acc: [], status: "error", message })}\n`;
}

export function describeError(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

/** Answer requests strictly in arrival order until stdin closes. */
export async function serve(
  handle: (request: TrainRequestFrame) => Promise<number[]>,
  input: NodeJS.ReadableStream = process.stdin,
  output: NodeJS.WritableStream = process.stdout
): Promise<void> {
  const lines = readline.createInterface({ input, terminal: false });
  for await (const line of lines) {
    if (!line.trim()) continue;
    let request: TrainRequestFrame;
    try {
      request = parseRequest(line);
    } catch (err) {
      output.write(errorFrame("", describeError(err)));
      continue;
    }
    try {
      const epochAcc = await handle(request);
      output.write(okFrame(request.candidate_id, epochAcc));
    } catch (err) {
      output.write(errorFrame(request.candidate_id, describeError(err)));
    }
  }
}
