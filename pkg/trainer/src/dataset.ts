/**
 * Procedural datasets: deterministic, self-contained, no downloads.
 *
 * "synthetic10" produces 10 classes of small RGB images, each class a
 * distinct oriented sinusoid pattern plus seeded noise. Easy enough that a
 * tiny CNN learns it in a couple of epochs, which keeps protocol round-trip
 * tests fast while still exercising a real fit/evaluate cycle.
 */

import * as tf from "@tensorflow/tfjs";

export interface Dataset {
  name: string;
  side: number;
  numClasses: number;
  xsTrain: tf.Tensor4D;
  ysTrain: tf.Tensor2D;
  xsEval: tf.Tensor4D;
  ysEval: tf.Tensor2D;
}

export interface DatasetOptions {
  seed: number;
  trainSize: number;
  evalSize: number;
  side: number;
}

/** Deterministic 32-bit PRNG (mulberry32); Math.random is not seedable. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const NUM_CLASSES = 10;

function renderSplit(
  rng: () => number,
  count: number,
  side: number
): { xs: tf.Tensor4D; ys: tf.Tensor2D } {
  const pixels = new Float32Array(count * side * side * 3);
  const labels = new Int32Array(count);
  let at = 0;
  for (let i = 0; i < count; i += 1) {
    const cls = i % NUM_CLASSES; // round-robin: exactly balanced splits
    labels[i] = cls;
    const fx = 1 + (cls % 5);
    const fy = 1 + Math.floor(cls / 5) * 2;
    const phase = rng() * Math.PI * 2;
    for (let y = 0; y < side; y += 1) {
      for (let x = 0; x < side; x += 1) {
        const angle = (2 * Math.PI * (fx * x + fy * y)) / side + phase;
        for (let c = 0; c < 3; c += 1) {
          const wave = 0.5 + 0.35 * Math.sin(angle + c * 0.9);
          pixels[at] = wave + (rng() - 0.5) * 0.2;
          at += 1;
        }
      }
    }
  }
  const xs = tf.tensor4d(pixels, [count, side, side, 3]);
  const ys = tf.oneHot(tf.tensor1d(labels, "int32"), NUM_CLASSES).toFloat() as tf.Tensor2D;
  return { xs, ys };
}

export function synthetic10(options: DatasetOptions): Dataset {
  const { seed, trainSize, evalSize, side } = options;
  if (trainSize < NUM_CLASSES || evalSize < NUM_CLASSES) {
    throw new Error(`synthetic10 needs at least ${NUM_CLASSES} samples per split`);
  }
  const train = renderSplit(mulberry32(seed), trainSize, side);
  const evalSplit = renderSplit(mulberry32(seed + 1), evalSize, side);
  return {
    name: "synthetic10",
    side,
    numClasses: NUM_CLASSES,
    xsTrain: train.xs,
    ysTrain: train.ys,
    xsEval: evalSplit.xs,
    ysEval: evalSplit.ys,
  };
}

export type DatasetBuilder = (options: DatasetOptions) => Dataset;

export const DATASETS: Record<string, DatasetBuilder> = {
  synthetic10,
};

export function makeDataset(name: string, options: DatasetOptions): Dataset {
  const builder = DATASETS[name];
  if (!builder) {
    throw new Error(`unknown dataset '${name}'; available: ${Object.keys(DATASETS).sort().join(", ")}`);
  }
  return builder(options);
}
