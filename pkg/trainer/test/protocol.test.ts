import { describe, expect, it } from "vitest";

import { errorFrame, okFrame, parseRequest } from "../src/protocol";

const VALID = {
  candidate_id: "w1_d2_r3",
  arch: { name: "x" },
  from_epoch: 0,
  n_epochs: 10,
  hyperparams: { batch_size: 100, optimizer: "rmsprop", augmentation_policy_id: "none" },
  checkpoint_dir: "/tmp/ckpt",
};

describe("parseRequest", () => {
  it("round-trips a valid frame", () => {
    const req = parseRequest(JSON.stringify(VALID));
    expect(req.candidate_id).toBe("w1_d2_r3");
    expect(req.from_epoch).toBe(0);
    expect(req.n_epochs).toBe(10);
    expect(req.checkpoint_dir).toBe("/tmp/ckpt");
  });

  it("defaults checkpoint_dir to null", () => {
    const { checkpoint_dir: _omitted, ...rest } = VALID;
    expect(parseRequest(JSON.stringify(rest)).checkpoint_dir).toBeNull();
    expect(parseRequest(JSON.stringify({ ...VALID, checkpoint_dir: null })).checkpoint_dir).toBeNull();
  });

  it("rejects malformed JSON and non-objects", () => {
    expect(() => parseRequest("{nope")).toThrow(/not valid JSON/);
    expect(() => parseRequest("[1,2]")).toThrow(/JSON object/);
  });

  it("rejects missing and unknown fields", () => {
    const { n_epochs: _omitted, ...rest } = VALID;
    expect(() => parseRequest(JSON.stringify(rest))).toThrow(/missing field 'n_epochs'/);
    expect(() => parseRequest(JSON.stringify({ ...VALID, bonus: 1 }))).toThrow(/unknown field 'bonus'/);
  });

  it("rejects bad epoch windows", () => {
    expect(() => parseRequest(JSON.stringify({ ...VALID, from_epoch: -1 }))).toThrow(/from_epoch/);
    expect(() => parseRequest(JSON.stringify({ ...VALID, from_epoch: 1.5 }))).toThrow(/from_epoch/);
    expect(() => parseRequest(JSON.stringify({ ...VALID, n_epochs: 0 }))).toThrow(/n_epochs/);
  });

  it("rejects empty candidate ids", () => {
    expect(() => parseRequest(JSON.stringify({ ...VALID, candidate_id: "" }))).toThrow(/candidate_id/);
  });
});

describe("response frames", () => {
  it("are single NDJSON lines", () => {
    const ok = okFrame("c", [50.5, 60.25]);
    expect(ok.endsWith("\n")).toBe(true);
    expect(ok.slice(0, -1)).not.toContain("\n");
    expect(JSON.parse(ok)).toEqual({ candidate_id: "c", epoch_acc: [50.5, 60.25], status: "ok" });

    const err = errorFrame("c", "out of memory");
    expect(JSON.parse(err)).toEqual({
      candidate_id: "c",
      epoch_acc: [],
      status: "error",
      message: "out of memory",
    });
  });
});
