/**
 * Weight checkpoints keyed by candidate id, written as plain JSON.
 *
 * A checkpoint records how many epochs the weights have absorbed; a resume
 * request (from_epoch > 0) is only honored when the stored epoch count lines
 * up exactly, so a tournament round can never silently train on stale or
 * over-trained weights. Optimizer slots are not persisted: each round starts
 * a fresh optimizer over the restored weights.
 */

import * as fs from "fs";
import * as path from "path";

import * as tf from "@tensorflow/tfjs";

export interface CheckpointDoc {
  candidateId: string;
  epochsDone: number;
  weights: { shape: number[]; values: number[] }[];
}

function checkpointPath(dir: string, candidateId: string): string {
  return path.join(dir, `${candidateId.replace(/[^\w.-]/g, "_")}.ckpt.json`);
}

export async function saveCheckpoint(
  dir: string,
  candidateId: string,
  epochsDone: number,
  model: tf.LayersModel
): Promise<void> {
  const weights: CheckpointDoc["weights"] = [];
  for (const tensor of model.getWeights()) {
    weights.push({ shape: tensor.shape.slice(), values: Array.from(await tensor.data()) });
  }
  const doc: CheckpointDoc = { candidateId, epochsDone, weights };
  fs.mkdirSync(dir, { recursive: true });
  const target = checkpointPath(dir, candidateId);
  const tmp = `${target}.tmp`;
  fs.writeFileSync(tmp, JSON.stringify(doc));
  fs.renameSync(tmp, target);
}

export function loadCheckpoint(dir: string, candidateId: string): CheckpointDoc | null {
  const target = checkpointPath(dir, candidateId);
  if (!fs.existsSync(target)) return null;
  const doc = JSON.parse(fs.readFileSync(target, "utf-8")) as CheckpointDoc;
  if (doc.candidateId !== candidateId) {
    throw new Error(`checkpoint ${target} holds '${doc.candidateId}', expected '${candidateId}'`);
  }
  return doc;
}

export function applyCheckpoint(model: tf.LayersModel, doc: CheckpointDoc): void {
  const current = model.getWeights();
  if (current.length !== doc.weights.length) {
    throw new Error(
      `checkpoint for '${doc.candidateId}' has ${doc.weights.length} weight tensors, model wants ${current.length}`
    );
  }
  const restored = doc.weights.map((w, i) => {
    const want = current[i].shape;
    if (want.length !== w.shape.length || want.some((d, k) => d !== w.shape[k])) {
      throw new Error(
        `checkpoint for '${doc.candidateId}' tensor ${i} has shape [${w.shape}], model wants [${want}]`
      );
    }
    return tf.tensor(w.values, w.shape);
  });
  model.setWeights(restored);
  restored.forEach((t) => t.dispose());
}
