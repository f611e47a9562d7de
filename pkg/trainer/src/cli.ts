#!/usr/bin/env node
/**
 * Trainer command line.
 *
 *   serve        answer NDJSON train requests on stdin until it closes
 *   param-count  print the trainable parameter count for a descriptor file
 */

import * as fs from "fs";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { parseDescriptor } from "./arch";
import { DATASETS, makeDataset } from "./dataset";
import { buildModel, trainableParamCount } from "./model";
import { describeError, serve } from "./protocol";
import { handleTrainRequest } from "./trainer";

async function cmdServe(argv: {
  dataset: string;
  seed: number;
  trainSize: number;
  evalSize: number;
  side: number;
  checkpointDir: string | undefined;
  learningRate: number;
}): Promise<number> {
  const dataset = makeDataset(argv.dataset, {
    seed: argv.seed,
    trainSize: argv.trainSize,
    evalSize: argv.evalSize,
    side: argv.side,
  });
  process.stderr.write(
    `trainer ready: dataset=${dataset.name} train=${argv.trainSize} eval=${argv.evalSize} side=${argv.side}\n`
  );
  await serve((request) =>
    handleTrainRequest(request, {
      dataset,
      checkpointDir: argv.checkpointDir ?? null,
      learningRate: argv.learningRate,
    })
  );
  return 0;
}

function cmdParamCount(archPath: string): number {
  const text = fs.readFileSync(archPath, "utf-8");
  const arch = parseDescriptor(JSON.parse(text));
  const model = buildModel(arch);
  try {
    const doc = { name: arch.name, params: trainableParamCount(model) };
    process.stdout.write(`${JSON.stringify(doc)}\n`);
  } finally {
    model.dispose();
  }
  return 0;
}

async function main(): Promise<void> {
  await yargs(hideBin(process.argv))
    .scriptName("ncs-trainer")
    .command(
      "serve",
      "answer NDJSON train requests on stdio",
      (y) =>
        y.options({
          dataset: {
            type: "string",
            default: "synthetic10",
            choices: Object.keys(DATASETS).sort(),
            describe: "procedural dataset to train on",
          },
          seed: { type: "number", default: 1, describe: "dataset generation seed" },
          "train-size": { type: "number", default: 200, describe: "training split size" },
          "eval-size": { type: "number", default: 100, describe: "evaluation split size" },
          side: { type: "number", default: 32, describe: "image side in pixels" },
          "checkpoint-dir": {
            type: "string",
            describe: "fallback weight checkpoint directory (requests may name their own)",
          },
          "learning-rate": { type: "number", default: 0.005 },
        }),
      async (argv) => {
        process.exitCode = await cmdServe({
          dataset: argv.dataset,
          seed: argv.seed,
          trainSize: argv["train-size"],
          evalSize: argv["eval-size"],
          side: argv.side,
          checkpointDir: argv["checkpoint-dir"],
          learningRate: argv["learning-rate"],
        });
      }
    )
    .command(
      "param-count",
      "trainable parameter count for a descriptor JSON file",
      (y) => y.options({ arch: { type: "string", demandOption: true, describe: "descriptor JSON file" } }),
      (argv) => {
        process.exitCode = cmdParamCount(argv.arch);
      }
    )
    .demandCommand(1, "pick a command: serve or param-count")
    .strict()
    .fail((msg, err) => {
      process.stderr.write(`error: ${msg ?? describeError(err)}\n`);
      process.exit(2);
    })
    .parseAsync();
}

main().catch((err) => {
  process.stderr.write(`error: ${describeError(err)}\n`);
  process.exit(2);
});
