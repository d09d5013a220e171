import { execFileSync } from "node:child_process";
import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { afterAll, describe, expect, it } from "vitest";
import {
  ARCHITECTURE,
  ArchitectureMismatchError,
  FormatError,
  ModelWeights,
  TruncatedFileError,
  loadWeights,
  serializeWeights,
  zeroWeights,
} from "../src/caew.js";
import { expectSameBytes, expectSameFloats } from "./_helpers.js";

const tmpDir = fs.mkdtempSync(path.join(os.tmpdir(), "caew-test-"));
afterAll(() => fs.rmSync(tmpDir, { recursive: true, force: true }));

function randomizedWeights(): ModelWeights {
  const w = zeroWeights();
  let state = 12345;
  const next = () => {
    state = (state * 1103515245 + 12345) & 0x7fffffff;
    return state / 0x7fffffff - 0.5;
  };
  for (const tensor of w.tensors) {
    for (let i = 0; i < tensor.length; i++) tensor[i] = next();
  }
  for (const bias of w.biases) {
    for (let i = 0; i < bias.length; i++) bias[i] = next();
  }
  return w;
}

describe("weight container", () => {
  it("has the fixed 12-layer architecture", () => {
    expect(ARCHITECTURE).toHaveLength(12);
    expect(ARCHITECTURE[0]).toMatchObject({ kind: "conv", inChannels: 1, kernel: 8, padding: 3 });
    expect(ARCHITECTURE[11]).toMatchObject({
      kind: "transposed_conv",
      outChannels: 1,
      activation: "relu",
    });
    expect(ARCHITECTURE.every((s) => s.stride === 2 && s.outputPadding === 0)).toBe(true);
  });

  it("round-trips byte-exactly", () => {
    const w = randomizedWeights();
    const blob = serializeWeights(w);
    const back = loadWeights(blob);
    expect(back.leakySlope).toBeCloseTo(0.01, 9);
    back.tensors.forEach((t, i) => expectSameFloats(t, w.tensors[i]));
    back.biases.forEach((b, i) => expectSameFloats(b, w.biases[i]));
    expectSameBytes(serializeWeights(back), blob);
  });

  it("rejects bad magic, versions, truncation, and trailing bytes", () => {
    const blob = serializeWeights(zeroWeights());
    const badMagic = blob.slice();
    badMagic[0] = 0x58;
    expect(() => loadWeights(badMagic)).toThrow(FormatError);

    const badVersion = blob.slice();
    new DataView(badVersion.buffer).setUint32(4, 9, true);
    expect(() => loadWeights(badVersion)).toThrow(FormatError);

    expect(() => loadWeights(blob.slice(0, 8))).toThrow(TruncatedFileError);
    expect(() => loadWeights(blob.slice(0, blob.length - 5))).toThrow(TruncatedFileError);

    const trailing = new Uint8Array(blob.length + 1);
    trailing.set(blob);
    expect(() => loadWeights(trailing)).toThrow(/trailing/);
  });

  it("rejects architecture drift", () => {
    const blob = serializeWeights(zeroWeights());
    const wrongAct = blob.slice();
    // first layer activation byte: header(16) + layer header minus 1
    new DataView(wrongAct.buffer).setUint8(16 + 25, 1);
    expect(() => loadWeights(wrongAct)).toThrow(ArchitectureMismatchError);

    const wrongKind = blob.slice();
    new DataView(wrongKind.buffer).setUint8(16, 7);
    expect(() => loadWeights(wrongKind)).toThrow(FormatError);
  });

  it("matches the reference runtime byte for byte", () => {
    const ours = path.join(tmpDir, "ours.caew");
    const echoed = path.join(tmpDir, "echoed.caew");
    const theirs = path.join(tmpDir, "theirs.caew");
    fs.writeFileSync(ours, serializeWeights(randomizedWeights()));
    execFileSync("python3", [
      "-c",
      "import sys\n" +
        "from relaykit.cnn_runtime import load_weights_file, serialize, random_weights, save_weights_file\n" +
        "blob = serialize(load_weights_file(sys.argv[1]))\n" +
        "open(sys.argv[2], 'wb').write(blob)\n" +
        "save_weights_file(random_weights(seed=5), sys.argv[3])\n",
      ours,
      echoed,
      theirs,
    ]);
    expectSameBytes(new Uint8Array(fs.readFileSync(echoed)), new Uint8Array(fs.readFileSync(ours)));
    const imported = loadWeights(new Uint8Array(fs.readFileSync(theirs)));
    expectSameBytes(serializeWeights(imported), new Uint8Array(fs.readFileSync(theirs)));
  });
});
