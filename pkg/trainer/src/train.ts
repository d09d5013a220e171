/**
 * Training loop: Adam on mean-squared-error over input -> target image
 * pairs, with a deterministic id-hash validation split and a per-epoch
 * metrics log.
 */

import fs from "node:fs";
import * as tf from "@tensorflow/tfjs";
import { Autoencoder } from "./model.js";
import { DatasetError, SampleRecord, loadImage, readManifest, splitByIdHash } from "./data.js";

export interface TrainConfig {
  learningRate: number;
  batchSize: number;
  epochs: number;
  seed: number;
  validationFraction: number;
}

export const DEFAULT_CONFIG: TrainConfig = {
  learningRate: 1e-4,
  batchSize: 4,
  epochs: 14,
  seed: 0,
  validationFraction: 0.05,
};

export interface EpochMetrics {
  epoch: number;
  trainMse: number;
  valMse: number;
}

export class TrainingDivergedError extends Error {}

export class ConfigError extends Error {}

function validateConfig(cfg: TrainConfig): void {
  if (!(cfg.batchSize >= 1) || !Number.isInteger(cfg.batchSize)) {
    throw new ConfigError(`batchSize must be an integer >= 1, got ${cfg.batchSize}`);
  }
  if (!(cfg.epochs >= 1) || !Number.isInteger(cfg.epochs)) {
    throw new ConfigError(`epochs must be an integer >= 1, got ${cfg.epochs}`);
  }
  if (!(cfg.learningRate > 0)) {
    throw new ConfigError(`learningRate must be positive, got ${cfg.learningRate}`);
  }
  if (!(cfg.validationFraction >= 0) || !(cfg.validationFraction < 1)) {
    throw new ConfigError(`validationFraction must be in [0, 1), got ${cfg.validationFraction}`);
  }
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function shuffled<T>(items: T[], seed: number): T[] {
  const rand = mulberry32(seed);
  const out = [...items];
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [out[i], out[j]] = [out[j], out[i]];
  }
  return out;
}

function loadBatch(
  datasetDir: string,
  records: SampleRecord[],
): { x: tf.Tensor4D; y: tf.Tensor4D; size: number } {
  const first = loadImage(datasetDir, records[0].input_image);
  const size = first.size;
  const n = records.length;
  const xs = new Float32Array(n * size * size);
  const ys = new Float32Array(n * size * size);
  records.forEach((record, i) => {
    const input = i === 0 ? first : loadImage(datasetDir, record.input_image);
    const target = loadImage(datasetDir, record.target_image);
    if (input.size !== size || target.size !== size) {
      throw new DatasetError(`sample ${record.id} resolution differs from the batch`);
    }
    xs.set(input.values, i * size * size);
    ys.set(target.values, i * size * size);
  });
  return {
    x: tf.tensor4d(xs, [n, size, size, 1]),
    y: tf.tensor4d(ys, [n, size, size, 1]),
    size,
  };
}

function* chunks<T>(items: T[], size: number): Generator<T[]> {
  for (let i = 0; i < items.length; i += size) yield items.slice(i, i + size);
}

/** Dataset-weighted mean squared error without gradient bookkeeping. */
export function evaluateMse(
  model: Autoencoder,
  datasetDir: string,
  records: SampleRecord[],
  batchSize: number,
): number {
  let sum = 0;
  let count = 0;
  for (const batch of chunks(records, batchSize)) {
    const { x, y } = loadBatch(datasetDir, batch);
    const mse = tf.tidy(() => tf.mean(tf.squaredDifference(model.forward(x), y)));
    sum += (mse.dataSync() as Float32Array)[0] * batch.length;
    count += batch.length;
    x.dispose();
    y.dispose();
    mse.dispose();
  }
  return count > 0 ? sum / count : NaN;
}

export interface TrainResult {
  metrics: EpochMetrics[];
  trainCount: number;
  valCount: number;
  backend: string;
}

export interface TrainOptions {
  /** Called after each optimizer step with the batch loss. */
  onStep?: (epoch: number, step: number, loss: number) => void;
}

export async function train(
  datasetDir: string,
  cfg: TrainConfig,
  weightsOut: string,
  metricsOut: string,
  options: TrainOptions = {},
): Promise<TrainResult> {
  validateConfig(cfg);
  const records = readManifest(datasetDir);
  const { train: trainSet, val: valSet } = splitByIdHash(records, cfg.validationFraction);

  const model = Autoencoder.init(cfg.seed);
  const optimizer = tf.train.adam(cfg.learningRate);
  const variables = model.trainableVariables();
  const metrics: EpochMetrics[] = [];

  try {
    for (let epoch = 1; epoch <= cfg.epochs; epoch++) {
      const order = shuffled(trainSet, (cfg.seed ^ (epoch * 0x9e3779b9)) >>> 0);
      let lossSum = 0;
      let seen = 0;
      let step = 0;
      for (const batch of chunks(order, cfg.batchSize)) {
        const { x, y } = loadBatch(datasetDir, batch);
        const cost = optimizer.minimize(
          () => tf.mean(tf.squaredDifference(model.forward(x), y)) as tf.Scalar,
          true,
          variables,
        )!;
        const loss = (cost.dataSync() as Float32Array)[0];
        x.dispose();
        y.dispose();
        cost.dispose();
        if (!Number.isFinite(loss)) {
          throw new TrainingDivergedError(
            `non-finite loss ${loss} at epoch ${epoch} step ${step}`,
          );
        }
        lossSum += loss * batch.length;
        seen += batch.length;
        step += 1;
        options.onStep?.(epoch, step, loss);
      }
      const trainMse = lossSum / seen;
      const valMse = valSet.length
        ? evaluateMse(model, datasetDir, valSet, cfg.batchSize)
        : NaN;
      metrics.push({ epoch, trainMse, valMse });
      writeMetrics(metricsOut, cfg, metrics);
    }
    model.saveFile(weightsOut);
  } finally {
    model.dispose();
    optimizer.dispose();
  }
  return {
    metrics,
    trainCount: trainSet.length,
    valCount: valSet.length,
    backend: tf.getBackend(),
  };
}

function writeMetrics(path: string, cfg: TrainConfig, metrics: EpochMetrics[]): void {
  const lines = [
    `# init=normal_fan_in optimizer=adam lr=${cfg.learningRate} batch=${cfg.batchSize} ` +
      `seed=${cfg.seed} val_fraction=${cfg.validationFraction}`,
    "epoch,train_mse,val_mse",
    ...metrics.map((m) => `${m.epoch},${m.trainMse},${m.valMse}`),
  ];
  fs.writeFileSync(path, lines.join("\n") + "\n");
}
