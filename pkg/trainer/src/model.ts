/**
 * Build a trainable tf.js model from an architecture descriptor.
 *
 * Layer conventions match the engine's analytic cost model so the trainable
 * parameter counts agree exactly:
 *   - every conv/depthwise-conv is bias-free and followed by batch norm
 *     (2 trainable values per channel);
 *   - squeeze-excite uses two biased 1x1 convs sized from the block INPUT
 *     channels: se = max(1, trunc(in_c * se_ratio));
 *   - the head is 1x1 conv + BN + global average pool + biased dense.
 */

import * as tf from "@tensorflow/tfjs";

import { ArchDescriptor, HEAD, MBCONV, STEM, StageSpec } from "./arch";

export function seChannels(blockInputChannels: number, seRatio: number): number {
  return Math.max(1, Math.trunc(blockInputChannels * seRatio));
}

let nameCounter = 0;

function uniq(prefix: string): string {
  nameCounter += 1;
  return `${prefix}_${nameCounter}`;
}

// Toy datasets mean very few optimizer steps; the tf.js default momentum of
// 0.99 would leave the moving statistics unconverged and wreck eval-mode
// accuracy, so batch norm here tracks statistics much more aggressively.
const BN_MOMENTUM = 0.8;

function batchNorm(): tf.layers.Layer {
  return tf.layers.batchNormalization({ momentum: BN_MOMENTUM, name: uniq("bn") });
}

function convBnRelu(
  x: tf.SymbolicTensor,
  filters: number,
  kernel: number,
  stride: number
): tf.SymbolicTensor {
  let y = tf.layers
    .conv2d({
      filters,
      kernelSize: kernel,
      strides: stride,
      padding: "same",
      useBias: false,
      name: uniq("conv"),
    })
    .apply(x) as tf.SymbolicTensor;
  y = batchNorm().apply(y) as tf.SymbolicTensor;
  return tf.layers.reLU({ name: uniq("relu") }).apply(y) as tf.SymbolicTensor;
}

function squeezeExcite(x: tf.SymbolicTensor, expanded: number, seC: number): tf.SymbolicTensor {
  let s = tf.layers.globalAveragePooling2d({ name: uniq("se_pool") }).apply(x) as tf.SymbolicTensor;
  s = tf.layers.reshape({ targetShape: [1, 1, expanded], name: uniq("se_reshape") }).apply(s) as tf.SymbolicTensor;
  s = tf.layers
    .conv2d({ filters: seC, kernelSize: 1, useBias: true, activation: "relu", name: uniq("se_squeeze") })
    .apply(s) as tf.SymbolicTensor;
  s = tf.layers
    .conv2d({ filters: expanded, kernelSize: 1, useBias: true, activation: "sigmoid", name: uniq("se_excite") })
    .apply(s) as tf.SymbolicTensor;
  return tf.layers.multiply({ name: uniq("se_scale") }).apply([x, s]) as tf.SymbolicTensor;
}

function mbconvBlock(
  x: tf.SymbolicTensor,
  inChannels: number,
  stage: StageSpec,
  stride: number
): tf.SymbolicTensor {
  const expanded = inChannels * stage.expansion;
  let y = x;
  if (stage.expansion !== 1) {
    y = convBnRelu(y, expanded, 1, 1);
  }
  y = tf.layers
    .depthwiseConv2d({
      kernelSize: stage.kernel,
      strides: stride,
      padding: "same",
      useBias: false,
      depthMultiplier: 1,
      name: uniq("dwconv"),
    })
    .apply(y) as tf.SymbolicTensor;
  y = batchNorm().apply(y) as tf.SymbolicTensor;
  y = tf.layers.reLU({ name: uniq("relu") }).apply(y) as tf.SymbolicTensor;
  if (stage.seRatio > 0) {
    y = squeezeExcite(y, expanded, seChannels(inChannels, stage.seRatio));
  }
  y = tf.layers
    .conv2d({ filters: stage.outChannels, kernelSize: 1, useBias: false, name: uniq("project") })
    .apply(y) as tf.SymbolicTensor;
  y = batchNorm().apply(y) as tf.SymbolicTensor;
  if (stride === 1 && inChannels === stage.outChannels) {
    y = tf.layers.add({ name: uniq("residual") }).apply([y, x]) as tf.SymbolicTensor;
  }
  return y;
}

export function hasHead(arch: ArchDescriptor): boolean {
  return arch.stages[arch.stages.length - 1].operatorKind === HEAD;
}

export function buildModel(arch: ArchDescriptor): tf.LayersModel {
  const side = arch.inputResolution;
  const input = tf.input({ shape: [side, side, 3], name: uniq("image") });
  let x = input;
  let channels = 3;
  for (const stage of arch.stages) {
    if (stage.operatorKind === STEM) {
      x = convBnRelu(x, stage.outChannels, stage.kernel, stage.stride);
      channels = stage.outChannels;
    } else if (stage.operatorKind === MBCONV) {
      for (let rep = 0; rep < stage.repeats; rep += 1) {
        x = mbconvBlock(x, channels, stage, rep === 0 ? stage.stride : 1);
        channels = stage.outChannels;
      }
    } else if (stage.operatorKind === HEAD) {
      // the pool + classifier belong to the head stage, matching the engine's
      // cost accounting; a head-less descriptor yields a feature extractor
      x = convBnRelu(x, stage.outChannels, stage.kernel, stage.stride);
      channels = stage.outChannels;
      x = tf.layers.globalAveragePooling2d({ name: uniq("head_pool") }).apply(x) as tf.SymbolicTensor;
      x = tf.layers
        .dense({ units: arch.numClasses, useBias: true, activation: "softmax", name: uniq("classifier") })
        .apply(x) as tf.SymbolicTensor;
    }
  }
  return tf.model({ inputs: input, outputs: x, name: arch.name.replace(/[^\w.-]/g, "_") });
}

export function trainableParamCount(model: tf.LayersModel): number {
  let total = 0;
  for (const weight of model.trainableWeights) {
    let count = 1;
    for (const dim of weight.shape) count *= dim ?? 1;
    total += count;
  }
  return total;
}
