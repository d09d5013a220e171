import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { PNG } from "pngjs";
import { afterAll, describe, expect, it } from "vitest";
import { DatasetError, loadImage, readManifest, splitByIdHash } from "../src/data.js";

const fixtures = fileURLToPath(new URL("./fixtures", import.meta.url));
const dataset = path.join(fixtures, "dataset256");
const tmpDir = fs.mkdtempSync(path.join(os.tmpdir(), "data-test-"));
afterAll(() => fs.rmSync(tmpDir, { recursive: true, force: true }));

describe("manifest", () => {
  it("parses every record with the documented fields", () => {
    const records = readManifest(dataset);
    expect(records).toHaveLength(14);
    for (const record of records) {
      expect(record.resolution_px).toBe(256);
      expect(record.meters_per_pixel).toBeCloseTo(1.25, 9);
      expect(record.task_positions.length).toBeGreaterThanOrEqual(2);
      expect(record.lambda2).toBeGreaterThan(1e-8);
      expect(typeof record.input_image).toBe("string");
      expect(typeof record.target_image).toBe("string");
    }
    expect(new Set(records.map((r) => r.id)).size).toBe(records.length);
  });

  it("raises a dataset error when the manifest is missing or malformed", () => {
    expect(() => readManifest(tmpDir)).toThrow(DatasetError);
    const broken = path.join(tmpDir, "broken");
    fs.mkdirSync(broken, { recursive: true });
    fs.writeFileSync(path.join(broken, "manifest.jsonl"), '{"id": "x"}\n');
    expect(() => readManifest(broken)).toThrow(/missing field/);
  });
});

describe("image loading", () => {
  it("decodes grayscale PNGs to [0, 1] floats", () => {
    const records = readManifest(dataset);
    const { size, values } = loadImage(dataset, records[0].input_image);
    expect(size).toBe(256);
    expect(values).toHaveLength(256 * 256);
    let min = Infinity;
    let max = -Infinity;
    for (const v of values) {
      if (v < min) min = v;
      if (v > max) max = v;
    }
    expect(min).toBeGreaterThanOrEqual(0);
    expect(max).toBeLessThanOrEqual(1);
    expect(max).toBeGreaterThan(0.5); // rendered task kernels peak near 1
  });

  it("rejects non-square images", () => {
    const png = new PNG({ width: 4, height: 2 });
    fs.writeFileSync(path.join(tmpDir, "rect.png"), PNG.sync.write(png));
    expect(() => loadImage(tmpDir, "rect.png")).toThrow(/square/);
  });
});

describe("validation split", () => {
  const records = readManifest(dataset);

  it("is deterministic, disjoint, and covers the dataset", () => {
    const a = splitByIdHash(records, 0.25);
    const b = splitByIdHash(records, 0.25);
    expect(a.val.map((r) => r.id)).toEqual(b.val.map((r) => r.id));
    expect(a.train.length + a.val.length).toBe(records.length);
    const ids = new Set([...a.train, ...a.val].map((r) => r.id));
    expect(ids.size).toBe(records.length);
  });

  it("assigns by id, not by manifest position", () => {
    const reversed = [...records].reverse();
    const a = splitByIdHash(records, 0.25);
    const b = splitByIdHash(reversed, 0.25);
    expect(new Set(a.val.map((r) => r.id))).toEqual(new Set(b.val.map((r) => r.id)));
  });

  it("guarantees one validation sample for any positive fraction", () => {
    const { train, val } = splitByIdHash(records, 1e-6);
    expect(val.length).toBeGreaterThanOrEqual(1);
    expect(train.length).toBe(records.length - val.length);
    expect(splitByIdHash(records, 0).val).toHaveLength(0);
  });
});
