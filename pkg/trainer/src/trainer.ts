/**
 * One training request end to end: rebuild the model, restore weights if the
 * request resumes past epoch 0, fit, report per-epoch evaluation accuracy as
 * percentages, and checkpoint the new weights.
 */

import * as tf from "@tensorflow/tfjs";

import { parseDescriptor } from "./arch";
import { applyCheckpoint, loadCheckpoint, saveCheckpoint } from "./checkpoint";
import { Dataset } from "./dataset";
import { buildModel, hasHead } from "./model";
import { TrainRequestFrame } from "./protocol";

export interface TrainerOptions {
  dataset: Dataset;
  /** Used when a request does not name its own checkpoint directory. */
  checkpointDir: string | null;
  learningRate: number;
}

function pickOptimizer(name: unknown, learningRate: number): tf.Optimizer {
  const kind = name === undefined ? "rmsprop" : name;
  switch (kind) {
    case "rmsprop":
      return tf.train.rmsprop(learningRate);
    case "adam":
      return tf.train.adam(learningRate);
    case "sgd":
      return tf.train.sgd(learningRate);
    default:
      throw new Error(`unsupported optimizer '${String(kind)}'`);
  }
}

function asHistorySeries(history: tf.History, key: string): number[] {
  const series = history.history[key];
  if (!Array.isArray(series)) {
    throw new Error(`training history is missing '${key}'`);
  }
  return series.map((v) => (typeof v === "number" ? v : v.dataSync()[0]));
}

export async function handleTrainRequest(
  request: TrainRequestFrame,
  options: TrainerOptions
): Promise<number[]> {
  const arch = parseDescriptor(request.arch);
  if (!hasHead(arch)) {
    throw new Error(`descriptor '${arch.name}' has no head stage; nothing to classify with`);
  }
  const { dataset } = options;
  if (arch.inputResolution !== dataset.side) {
    throw new Error(
      `descriptor wants ${arch.inputResolution}x${arch.inputResolution} input but dataset '${dataset.name}' serves ${dataset.side}x${dataset.side}`
    );
  }
  if (arch.numClasses !== dataset.numClasses) {
    throw new Error(
      `descriptor wants ${arch.numClasses} classes but dataset '${dataset.name}' has ${dataset.numClasses}`
    );
  }
  const augmentation = request.hyperparams.augmentation_policy_id ?? "none";
  if (augmentation !== "none") {
    throw new Error(`unsupported augmentation_policy_id '${String(augmentation)}'`);
  }
  const rawBatch = request.hyperparams.batch_size ?? 100;
  if (typeof rawBatch !== "number" || !Number.isInteger(rawBatch) || rawBatch < 1) {
    throw new Error(`batch_size must be an integer >= 1, got ${String(rawBatch)}`);
  }

  const checkpointDir = request.checkpoint_dir ?? options.checkpointDir;
  const model = buildModel(arch);
  try {
    if (request.from_epoch > 0) {
      if (!checkpointDir) {
        throw new Error(`cannot resume '${request.candidate_id}' from epoch ${request.from_epoch} without a checkpoint_dir`);
      }
      const doc = loadCheckpoint(checkpointDir, request.candidate_id);
      if (!doc) {
        throw new Error(`no checkpoint for '${request.candidate_id}' in ${checkpointDir}`);
      }
      if (doc.epochsDone !== request.from_epoch) {
        throw new Error(
          `checkpoint for '${request.candidate_id}' holds ${doc.epochsDone} epochs, request resumes from ${request.from_epoch}`
        );
      }
      applyCheckpoint(model, doc);
    }

    model.compile({
      optimizer: pickOptimizer(request.hyperparams.optimizer, options.learningRate),
      loss: "categoricalCrossentropy",
      metrics: ["accuracy"],
    });
    const history = await model.fit(dataset.xsTrain, dataset.ysTrain, {
      epochs: request.n_epochs,
      batchSize: rawBatch,
      validationData: [dataset.xsEval, dataset.ysEval],
      shuffle: true,
      verbose: 0,
    });
    const accuracy = asHistorySeries(history, "val_acc").map((v) => v * 100);
    if (accuracy.length !== request.n_epochs) {
      throw new Error(`fit produced ${accuracy.length} epochs, expected ${request.n_epochs}`);
    }
    if (checkpointDir) {
      await saveCheckpoint(checkpointDir, request.candidate_id, request.from_epoch + request.n_epochs, model);
    }
    return accuracy;
  } finally {
    model.dispose();
  }
}
