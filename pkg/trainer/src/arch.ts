/**
 * Architecture descriptors: the JSON documents the search engine emits.
 *
 * The trainer re-validates every descriptor it receives; a malformed request
 * must turn into a protocol error frame, never a crash mid-training.
 */

export const STEM = "stem_conv";
export const MBCONV = "mbconv";
export const HEAD = "head";

export type OperatorKind = typeof STEM | typeof MBCONV | typeof HEAD;

export interface StageSpec {
  index: number;
  operatorKind: OperatorKind;
  kernel: number;
  expansion: number;
  stride: number;
  outChannels: number;
  repeats: number;
  seRatio: number;
}

export interface ArchDescriptor {
  name: string;
  inputResolution: number;
  numClasses: number;
  coeffs: { w: number; d: number; r: number };
  stages: StageSpec[];
}

const TOP_KEYS = ["name", "input_resolution", "num_classes", "coeffs", "stages"];
const STAGE_KEYS = [
  "index",
  "operator_kind",
  "kernel",
  "expansion",
  "stride",
  "out_channels",
  "repeats",
  "se_ratio",
];

function fail(message: string): never {
  throw new Error(`descriptor: ${message}`);
}

function asObject(value: unknown, where: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    fail(`${where} must be an object`);
  }
  return value as Record<string, unknown>;
}

function requireKeys(obj: Record<string, unknown>, expected: string[], where: string): void {
  for (const key of expected) {
    if (!(key in obj)) fail(`${where} missing field '${key}'`);
  }
  for (const key of Object.keys(obj)) {
    if (!expected.includes(key)) fail(`${where} has unknown field '${key}'`);
  }
}

function asInt(value: unknown, where: string): number {
  if (typeof value !== "number" || !Number.isInteger(value)) fail(`${where} must be an integer`);
  return value;
}

function asNumber(value: unknown, where: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) fail(`${where} must be a number`);
  return value;
}

export function parseDescriptor(data: unknown): ArchDescriptor {
  const top = asObject(data, "document");
  requireKeys(top, TOP_KEYS, "document");
  if (typeof top.name !== "string") fail("field 'name' must be a string");
  const coeffs = asObject(top.coeffs, "coeffs");
  requireKeys(coeffs, ["w", "d", "r"], "coeffs");
  const rawStages = top.stages;
  if (!Array.isArray(rawStages) || rawStages.length === 0) fail("'stages' must be a non-empty array");

  const stages: StageSpec[] = rawStages.map((raw, n) => {
    const where = `stages[${n}]`;
    const row = asObject(raw, where);
    requireKeys(row, STAGE_KEYS, where);
    const kind = row.operator_kind;
    if (kind !== STEM && kind !== MBCONV && kind !== HEAD) {
      fail(`${where} has unknown operator_kind '${String(kind)}'`);
    }
    return {
      index: asInt(row.index, `${where}.index`),
      operatorKind: kind,
      kernel: asInt(row.kernel, `${where}.kernel`),
      expansion: asInt(row.expansion, `${where}.expansion`),
      stride: asInt(row.stride, `${where}.stride`),
      outChannels: asInt(row.out_channels, `${where}.out_channels`),
      repeats: asInt(row.repeats, `${where}.repeats`),
      seRatio: asNumber(row.se_ratio, `${where}.se_ratio`),
    };
  });

  const arch: ArchDescriptor = {
    name: top.name,
    inputResolution: asInt(top.input_resolution, "input_resolution"),
    numClasses: asInt(top.num_classes, "num_classes"),
    coeffs: {
      w: asNumber(coeffs.w, "coeffs.w"),
      d: asNumber(coeffs.d, "coeffs.d"),
      r: asNumber(coeffs.r, "coeffs.r"),
    },
    stages,
  };
  validate(arch);
  return arch;
}

export function validate(arch: ArchDescriptor): void {
  if (arch.inputResolution < 1) fail(`input_resolution must be >= 1, got ${arch.inputResolution}`);
  if (arch.numClasses < 1) fail(`num_classes must be >= 1, got ${arch.numClasses}`);
  arch.stages.forEach((stage, n) => {
    const where = `stages[${n}]`;
    if (stage.index !== n + 1) fail(`${where} has index ${stage.index}, expected ${n + 1}`);
    if (stage.kernel < 1 || stage.kernel % 2 === 0) fail(`${where} kernel must be odd, got ${stage.kernel}`);
    if (stage.stride !== 1 && stage.stride !== 2) fail(`${where} stride must be 1 or 2, got ${stage.stride}`);
    if (stage.outChannels < 1) fail(`${where} out_channels must be >= 1`);
    if (stage.repeats < 1) fail(`${where} repeats must be >= 1`);
    if (stage.seRatio < 0 || stage.seRatio >= 1) fail(`${where} se_ratio must be in [0, 1)`);
    if (stage.operatorKind === MBCONV) {
      if (stage.expansion < 1) fail(`${where} mbconv expansion must be >= 1, got ${stage.expansion}`);
    } else {
      if (stage.expansion !== 0) fail(`${where} ${stage.operatorKind} expansion must be 0`);
      if (stage.repeats !== 1) fail(`${where} ${stage.operatorKind} repeats must be 1`);
    }
  });
  if (arch.stages[0].operatorKind !== STEM) fail("first stage must be the stem");
  const heads = arch.stages.filter((s) => s.operatorKind === HEAD);
  if (heads.length > 1) fail("more than one head stage");
  if (heads.length === 1 && arch.stages[arch.stages.length - 1].operatorKind !== HEAD) {
    fail("head stage must come last");
  }
  if (arch.stages.slice(1).some((s) => s.operatorKind === STEM)) fail("stem must be unique and first");
}
