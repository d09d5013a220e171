import { execFileSync } from "node:child_process";
import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { afterAll, describe, expect, it } from "vitest";
import { parseNpy } from "../src/npy.js";

const tmpDir = fs.mkdtempSync(path.join(os.tmpdir(), "npy-test-"));
afterAll(() => fs.rmSync(tmpDir, { recursive: true, force: true }));

describe("npy reader", () => {
  it("reads float32 arrays saved by the reference tools", () => {
    const file = path.join(tmpDir, "a.npy");
    execFileSync("python3", [
      "-c",
      "import numpy as np, sys\n" +
        "np.save(sys.argv[1], np.arange(12, dtype=np.float32).reshape(3, 4) / 8.0)\n",
      file,
    ]);
    const arr = parseNpy(new Uint8Array(fs.readFileSync(file)));
    expect(arr.shape).toEqual([3, 4]);
    expect(arr.data).toHaveLength(12);
    expect(arr.data[9]).toBeCloseTo(9 / 8, 7);
  });

  it("rejects other dtypes and non-npy bytes", () => {
    const file = path.join(tmpDir, "b.npy");
    execFileSync("python3", [
      "-c",
      "import numpy as np, sys\nnp.save(sys.argv[1], np.zeros(3, dtype=np.float64))\n",
      file,
    ]);
    expect(() => parseNpy(new Uint8Array(fs.readFileSync(file)))).toThrow(/dtype/);
    expect(() => parseNpy(new Uint8Array([1, 2, 3]))).toThrow(/npy/);
  });
});
