/**
 * The convolutional autoencoder as trainable tf.js variables.
 *
 * Layers run through custom-gradient wrappers around tf.conv2d and
 * tf.conv2dTranspose: the WASM backend ships fast forward kernels but no
 * filter-gradient kernel, so the filter gradient is composed here from
 * strided slices and matmuls (one per kernel tap), which the backend does
 * have. Spatial arithmetic uses 'same' padding; for the even feature-map
 * sizes this network produces, that equals the symmetric padding of the
 * inference runtime (3 for 8x8 kernels, 1 for 4x4), so outputs match the
 * portable forward pass exactly apart from float32 rounding.
 *
 * Weight layout: tf.js wants (k, k, in, out) for conv and (k, k, out, in)
 * for transposed conv; the weight container stores (out, in, k, k). The
 * conversions are pure permutations, so values survive bit-exactly.
 */

import fs from "node:fs";
import * as tf from "@tensorflow/tfjs";
import {
  ARCHITECTURE,
  DEFAULT_LEAKY_SLOPE,
  LayerSpec,
  ModelWeights,
  loadWeights,
  serializeWeights,
  validateWeights,
} from "./caew.js";

/** Gradient of a strided 'same' convolution with respect to its filter.
 *
 * x: (B, H, W, C) convolution input, g: (B, OH, OW, O) output gradient;
 * returns (k, k, C, O). With batch and channel axes swapped this is itself
 * a stride-1 convolution of x by g dilated by the forward stride, which
 * runs as one fast backend call; the tap-loop fallback covers geometries
 * whose implicit padding comes out asymmetric.
 */
export function convFilterGrad(
  x: tf.Tensor4D,
  g: tf.Tensor4D,
  kernel: number,
  stride: number,
): tf.Tensor4D {
  const [b, h, w, c] = x.shape;
  const [, oh, ow, o] = g.shape;
  const padAlongH = Math.max((oh - 1) * stride + kernel - h, 0);
  const padAlongW = Math.max((ow - 1) * stride + kernel - w, 0);
  if (padAlongH === padAlongW && padAlongH % 2 === 0) {
    return tf.tidy(() => {
      const xT = tf.transpose(x, [3, 1, 2, 0]); // channels play batch
      const fT = tf.transpose(g, [1, 2, 0, 3]); // output grad plays filter
      const dw = tf.conv2d(xT, fT as unknown as tf.Tensor4D, 1, padAlongH / 2, "NHWC", stride);
      return tf.transpose(dw, [1, 2, 0, 3]) as tf.Tensor4D;
    });
  }
  return tf.tidy(() => {
    const padTop = Math.floor(padAlongH / 2);
    const padLeft = Math.floor(padAlongW / 2);
    const xp = tf.pad(x, [
      [0, 0],
      [padTop, padAlongH - padTop],
      [padLeft, padAlongW - padLeft],
      [0, 0],
    ]);
    const g2 = tf.reshape(g, [b * oh * ow, o]);
    const taps: tf.Tensor2D[] = [];
    for (let i = 0; i < kernel; i++) {
      for (let j = 0; j < kernel; j++) {
        const window = tf.stridedSlice(
          xp,
          [0, i, j, 0],
          [b, i + stride * (oh - 1) + 1, j + stride * (ow - 1) + 1, c],
          [1, stride, stride, 1],
        );
        const w2 = tf.reshape(window, [b * oh * ow, c]);
        taps.push(tf.matMul(w2, g2, true, false));
      }
    }
    return tf.reshape(tf.stack(taps), [kernel, kernel, c, o]) as tf.Tensor4D;
  });
}

/** Strided 'same' convolution with a fully WASM-servable backward pass. */
export function conv2dOp(x: tf.Tensor4D, w: tf.Tensor4D, stride: number): tf.Tensor4D {
  const op = tf.customGrad((xi, wi, save) => {
    const value = tf.conv2d(xi as tf.Tensor4D, wi as tf.Tensor4D, stride, "same");
    (save as tf.GradSaveFunc)([xi as tf.Tensor, wi as tf.Tensor]);
    return {
      value,
      gradFunc: (dy: tf.Tensor4D, saved: tf.Tensor[]) => {
        const [xs, ws] = saved as [tf.Tensor4D, tf.Tensor4D];
        return [
          tf.conv2dTranspose(dy, ws, xs.shape, stride, "same"),
          convFilterGrad(xs, dy, ws.shape[0], stride),
        ];
      },
    };
  });
  return op(x, w) as tf.Tensor4D;
}

/** Strided 'same' transposed convolution (exact adjoint of conv2dOp). */
export function convTranspose2dOp(x: tf.Tensor4D, w: tf.Tensor4D, stride: number): tf.Tensor4D {
  const op = tf.customGrad((xi, wi, save) => {
    const [b, h, width] = (xi as tf.Tensor4D).shape;
    const outChannels = (wi as tf.Tensor4D).shape[2];
    const value = tf.conv2dTranspose(
      xi as tf.Tensor4D,
      wi as tf.Tensor4D,
      [b, h * stride, width * stride, outChannels],
      stride,
      "same",
    );
    (save as tf.GradSaveFunc)([xi as tf.Tensor, wi as tf.Tensor]);
    return {
      value,
      gradFunc: (dy: tf.Tensor4D, saved: tf.Tensor[]) => {
        const [xs, ws] = saved as [tf.Tensor4D, tf.Tensor4D];
        // the transposed conv is the conv adjoint, so its input gradient is
        // the forward conv and its filter gradient swaps the tensor roles
        return [
          tf.conv2d(dy, ws, stride, "same"),
          convFilterGrad(dy, xs, ws.shape[0], stride),
        ];
      },
    };
  });
  return op(x, w) as tf.Tensor4D;
}

function toTfLayout(spec: LayerSpec, flat: Float32Array): tf.Tensor4D {
  const oihw = tf.tensor4d(flat, [spec.outChannels, spec.inChannels, spec.kernel, spec.kernel]);
  const perm = spec.kind === "conv" ? [2, 3, 1, 0] : [2, 3, 0, 1];
  const out = tf.transpose(oihw, perm) as tf.Tensor4D;
  oihw.dispose();
  return out;
}

function fromTfLayout(spec: LayerSpec, t: tf.Tensor4D): Float32Array {
  const perm = spec.kind === "conv" ? [3, 2, 0, 1] : [2, 3, 0, 1];
  const oihw = tf.transpose(t, perm);
  const data = oihw.dataSync() as Float32Array;
  oihw.dispose();
  return new Float32Array(data);
}

export class Autoencoder {
  readonly specs: readonly LayerSpec[];
  readonly kernels: tf.Variable<tf.Rank.R4>[];
  readonly biases: tf.Variable<tf.Rank.R1>[];
  readonly leakySlope: number;

  private constructor(
    kernels: tf.Variable<tf.Rank.R4>[],
    biases: tf.Variable<tf.Rank.R1>[],
    leakySlope: number,
  ) {
    this.specs = ARCHITECTURE;
    this.kernels = kernels;
    this.biases = biases;
    this.leakySlope = leakySlope;
  }

  /** Fan-in scaled normal kernels (zero biases), deterministic per seed. */
  static init(seed: number, leakySlope: number = DEFAULT_LEAKY_SLOPE): Autoencoder {
    const kernels = ARCHITECTURE.map((spec, i) => {
      const fanIn = spec.inChannels * spec.kernel * spec.kernel;
      const std = Math.sqrt(2.0 / fanIn);
      const shape: [number, number, number, number] =
        spec.kind === "conv"
          ? [spec.kernel, spec.kernel, spec.inChannels, spec.outChannels]
          : [spec.kernel, spec.kernel, spec.outChannels, spec.inChannels];
      // no explicit names: the engine requires global uniqueness and several
      // model instances may be alive at once
      return tf.variable(
        tf.randomNormal(shape, 0, std, "float32", seed * 1000003 + i),
        true,
      ) as tf.Variable<tf.Rank.R4>;
    });
    const biases = ARCHITECTURE.map(
      (spec) =>
        tf.variable(tf.zeros([spec.outChannels]), true) as tf.Variable<tf.Rank.R1>,
    );
    return new Autoencoder(kernels, biases, leakySlope);
  }

  static fromWeights(w: ModelWeights): Autoencoder {
    validateWeights(w);
    const kernels = w.layers.map(
      (spec, i) =>
        tf.variable(toTfLayout(spec, w.tensors[i]), true) as tf.Variable<tf.Rank.R4>,
    );
    const biases = w.layers.map(
      (_, i) => tf.variable(tf.tensor1d(w.biases[i]), true) as tf.Variable<tf.Rank.R1>,
    );
    return new Autoencoder(kernels, biases, w.leakySlope);
  }

  static loadFile(path: string): Autoencoder {
    return Autoencoder.fromWeights(loadWeights(new Uint8Array(fs.readFileSync(path))));
  }

  toWeights(): ModelWeights {
    return {
      layers: this.specs.map((s) => ({ ...s })),
      tensors: this.specs.map((spec, i) => fromTfLayout(spec, this.kernels[i])),
      biases: this.specs.map((_, i) => new Float32Array(this.biases[i].dataSync())),
      leakySlope: this.leakySlope,
    };
  }

  saveFile(path: string): void {
    fs.writeFileSync(path, serializeWeights(this.toWeights()));
  }

  trainableVariables(): tf.Variable[] {
    return [...this.kernels, ...this.biases];
  }

  /** Full 12-layer pass; caller owns the returned tensor. */
  forward(x: tf.Tensor4D): tf.Tensor4D {
    return tf.tidy(() => {
      let h = x;
      this.specs.forEach((spec, i) => {
        h =
          spec.kind === "conv"
            ? conv2dOp(h, this.kernels[i], spec.stride)
            : convTranspose2dOp(h, this.kernels[i], spec.stride);
        h = tf.add(h, this.biases[i]);
        h = spec.activation === "relu" ? tf.relu(h) : tf.leakyRelu(h, this.leakySlope);
      });
      return h;
    });
  }

  /** Forward a single square grayscale image given as flat row-major values. */
  forwardImage(values: Float32Array, size: number): Float32Array {
    const out = tf.tidy(() => {
      const x = tf.tensor4d(values, [1, size, size, 1]);
      return this.forward(x);
    });
    const data = new Float32Array(out.dataSync());
    out.dispose();
    return data;
  }

  dispose(): void {
    this.kernels.forEach((v) => v.dispose());
    this.biases.forEach((v) => v.dispose());
  }
}
