/**
 * Dataset access: a directory holding manifest.jsonl plus grayscale PNG
 * pairs (input task image, expert target image), one JSON record per line.
 */

import fs from "node:fs";
import path from "node:path";
import { PNG } from "pngjs";

export interface SampleRecord {
  id: string;
  seed: number;
  task_positions: number[][];
  expert_comm_positions: number[][];
  transmit_power_dbm: number;
  lambda2: number;
  input_image: string;
  target_image: string;
  meters_per_pixel: number;
  resolution_px: number;
}

export class DatasetError extends Error {}

const REQUIRED_FIELDS = [
  "id",
  "input_image",
  "target_image",
  "resolution_px",
] as const;

export function readManifest(datasetDir: string): SampleRecord[] {
  const manifestPath = path.join(datasetDir, "manifest.jsonl");
  if (!fs.existsSync(manifestPath)) {
    throw new DatasetError(`no manifest.jsonl in ${datasetDir}`);
  }
  const lines = fs.readFileSync(manifestPath, "utf8").split("\n");
  const records: SampleRecord[] = [];
  lines.forEach((line, idx) => {
    if (!line.trim()) return;
    let parsed: unknown;
    try {
      parsed = JSON.parse(line);
    } catch (err) {
      throw new DatasetError(`manifest line ${idx + 1} is not valid JSON: ${err}`);
    }
    const record = parsed as SampleRecord;
    for (const field of REQUIRED_FIELDS) {
      if (record[field] === undefined) {
        throw new DatasetError(`manifest line ${idx + 1} missing field '${field}'`);
      }
    }
    records.push(record);
  });
  if (records.length === 0) throw new DatasetError(`empty manifest in ${datasetDir}`);
  return records;
}

/** Decode a grayscale PNG to [0, 1] float32 values (v = byte / 255). */
export function loadImage(datasetDir: string, relPath: string): { size: number; values: Float32Array } {
  const buf = fs.readFileSync(path.join(datasetDir, relPath));
  const png = PNG.sync.read(buf);
  if (png.width !== png.height) {
    throw new DatasetError(`expected a square image, got ${png.width}x${png.height}`);
  }
  const n = png.width * png.height;
  const values = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    values[i] = png.data[4 * i] / 255; // decoded as RGBA; gray lives in R
  }
  return { size: png.width, values };
}

function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

/**
 * Deterministic train/validation split keyed on the sample id hash, so the
 * same sample always lands on the same side regardless of manifest order.
 * A non-zero fraction is guaranteed at least one validation sample.
 */
export function splitByIdHash(
  records: SampleRecord[],
  validationFraction: number,
): { train: SampleRecord[]; val: SampleRecord[] } {
  if (validationFraction <= 0) return { train: [...records], val: [] };
  const train: SampleRecord[] = [];
  const val: SampleRecord[] = [];
  for (const record of records) {
    const bucket = fnv1a(record.id) % 10000;
    (bucket < validationFraction * 10000 ? val : train).push(record);
  }
  if (val.length === 0) {
    let lowest = 0;
    for (let i = 1; i < train.length; i++) {
      if (fnv1a(train[i].id) < fnv1a(train[lowest].id)) lowest = i;
    }
    val.push(...train.splice(lowest, 1));
  }
  return { train, val };
}
