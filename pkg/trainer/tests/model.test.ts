import * as tf from "@tensorflow/tfjs";
import { beforeAll, describe, expect, it } from "vitest";
import { ensureBackend } from "../src/backend.js";
import { zeroWeights } from "../src/caew.js";
import { Autoencoder } from "../src/model.js";
import { expectSameFloats } from "./_helpers.js";

beforeAll(async () => {
  await ensureBackend();
});

function randomImage(size: number, seed: number): Float32Array {
  let state = seed >>> 0;
  const out = new Float32Array(size * size);
  for (let i = 0; i < out.length; i++) {
    state = (Math.imul(state, 1664525) + 1013904223) >>> 0;
    out[i] = state / 0xffffffff;
  }
  return out;
}

describe("autoencoder model", () => {
  it("zero weights map any image to zero", () => {
    const model = Autoencoder.fromWeights(zeroWeights());
    const out = model.forwardImage(randomImage(128, 1), 128);
    expect(out).toHaveLength(128 * 128);
    expect(Math.max(...out)).toBe(0);
    model.dispose();
  });

  it("seeded init is deterministic and fan-in scaled", () => {
    const a = Autoencoder.init(3);
    const b = Autoencoder.init(3);
    const c = Autoencoder.init(4);
    const wa = a.kernels[0].dataSync() as Float32Array;
    const wb = b.kernels[0].dataSync() as Float32Array;
    const wc = c.kernels[0].dataSync() as Float32Array;
    expectSameFloats(wa, wb);
    expect(wa.some((v, i) => v !== wc[i])).toBe(true);
    // layer 0 fan-in is 1 * 8 * 8, so the std is sqrt(2 / 64) = 0.1768
    const std = Math.sqrt(wa.reduce((s, v) => s + v * v, 0) / wa.length);
    expect(std).toBeGreaterThan(0.12);
    expect(std).toBeLessThan(0.24);
    const biasMax = Math.max(...(a.biases[0].dataSync() as Float32Array));
    expect(biasMax).toBe(0);
    [a, b, c].forEach((m) => m.dispose());
  });

  it("weights survive the model layout round trip exactly", () => {
    const model = Autoencoder.init(1);
    const image = randomImage(128, 2);
    const direct = model.forwardImage(image, 128);
    const back = Autoencoder.fromWeights(model.toWeights());
    const replayed = back.forwardImage(image, 128);
    expectSameFloats(replayed, direct); // pure permutations, identical floats
    const again = back.toWeights();
    const first = model.toWeights();
    again.tensors.forEach((t, i) => expectSameFloats(t, first.tensors[i]));
    model.dispose();
    back.dispose();
  });

  it("keeps the input resolution and stays f32-finite", () => {
    const model = Autoencoder.init(2);
    const out = model.forwardImage(randomImage(128, 5), 128);
    expect(out).toHaveLength(128 * 128);
    expect(out.every((v) => Number.isFinite(v) && v >= 0)).toBe(true); // final relu
    model.dispose();
  });

  it("does not leak tensors across forward passes", () => {
    const model = Autoencoder.init(6);
    const before = tf.memory().numTensors;
    model.forwardImage(randomImage(128, 7), 128);
    model.forwardImage(randomImage(128, 8), 128);
    expect(tf.memory().numTensors).toBe(before);
    model.dispose();
  });
});
