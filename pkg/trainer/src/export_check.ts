/**
 * Cross-implementation fidelity check: run the same weight file over probe
 * images here and through the reference command-line runtime, and compare
 * raw forward outputs pixel by pixel.
 */

import { execFileSync } from "node:child_process";
import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { Autoencoder } from "./model.js";
import { loadImage, readManifest } from "./data.js";
import { parseNpy } from "./npy.js";

export const EXPORT_CHECK_TOLERANCE = 1e-4;

export class ExportMismatchError extends Error {}

export interface ProbeResult {
  id: string;
  image: string;
  maxAbsDiff: number;
}

export interface ExportCheckReport {
  probes: ProbeResult[];
  maxAbsDiff: number;
  tolerance: number;
}

export interface ExportCheckOptions {
  /** Number of probe images taken from the dataset manifest head. */
  count?: number;
  /** Command prefix for the reference runtime CLI. */
  pythonCmd?: string[];
  tolerance?: number;
}

const DEFAULT_PYTHON_CMD = ["python3", "-m", "relaykit.cli"];

export function runExportCheck(
  weightsPath: string,
  datasetDir: string,
  options: ExportCheckOptions = {},
): ExportCheckReport {
  const count = options.count ?? 10;
  const pythonCmd = options.pythonCmd ?? DEFAULT_PYTHON_CMD;
  const tolerance = options.tolerance ?? EXPORT_CHECK_TOLERANCE;

  const records = readManifest(datasetDir).slice(0, count);
  if (records.length < count) {
    throw new ExportMismatchError(
      `need ${count} probe images, dataset has only ${records.length}`,
    );
  }
  const model = Autoencoder.loadFile(weightsPath);
  const tmpDir = fs.mkdtempSync(path.join(os.tmpdir(), "export-check-"));
  const probes: ProbeResult[] = [];
  try {
    for (const record of records) {
      const { size, values } = loadImage(datasetDir, record.input_image);
      const ours = model.forwardImage(values, size);

      const outPath = path.join(tmpDir, `${record.id}.npy`);
      const [cmd, ...argsHead] = pythonCmd;
      execFileSync(cmd, [
        ...argsHead,
        "forward",
        "--weights",
        weightsPath,
        "--input",
        path.join(datasetDir, record.input_image),
        "--output",
        outPath,
      ]);
      const reference = parseNpy(new Uint8Array(fs.readFileSync(outPath)));
      if (reference.data.length !== ours.length) {
        throw new ExportMismatchError(
          `output size mismatch: ${reference.data.length} vs ${ours.length}`,
        );
      }
      let maxAbsDiff = 0;
      for (let i = 0; i < ours.length; i++) {
        const diff = Math.abs(ours[i] - reference.data[i]);
        if (diff > maxAbsDiff) maxAbsDiff = diff;
      }
      probes.push({ id: record.id, image: record.input_image, maxAbsDiff });
    }
  } finally {
    model.dispose();
    fs.rmSync(tmpDir, { recursive: true, force: true });
  }
  const maxAbsDiff = Math.max(...probes.map((p) => p.maxAbsDiff));
  if (maxAbsDiff > tolerance) {
    throw new ExportMismatchError(
      `max |diff| ${maxAbsDiff} exceeds tolerance ${tolerance}`,
    );
  }
  return { probes, maxAbsDiff, tolerance };
}
