/**
 * Binary weight container shared with the inference runtime (magic "CAEW").
 *
 * Layout, all little-endian and unpadded:
 *   file header:  magic (4 bytes) | version u32 | leaky slope f32 | layer count u32
 *   per layer:    kind u8 | in u32 | out u32 | kernel u32 | stride u32 |
 *                 padding u32 | output_padding u32 | activation u8
 *                 then raw float32 weights shaped (out, in, k, k) in C order,
 *                 then raw float32 biases shaped (out,)
 *
 * Tensors round-trip bit-exactly; the slope travels as float32.
 */

export const MAGIC = "CAEW";
export const FORMAT_VERSION = 1;
export const DEFAULT_LEAKY_SLOPE = 0.01;

export type LayerKind = "conv" | "transposed_conv";
export type Activation = "leaky_relu" | "relu";

const KIND_CODES: Record<LayerKind, number> = { conv: 0, transposed_conv: 1 };
const ACT_CODES: Record<Activation, number> = { leaky_relu: 0, relu: 1 };
const KIND_NAMES: LayerKind[] = ["conv", "transposed_conv"];
const ACT_NAMES: Activation[] = ["leaky_relu", "relu"];

const HEADER_SIZE = 16;
const LAYER_HEADER_SIZE = 26;

export interface LayerSpec {
  kind: LayerKind;
  inChannels: number;
  outChannels: number;
  kernel: number;
  stride: number;
  padding: number;
  outputPadding: number;
  activation: Activation;
}

export class WeightFileError extends Error {}
export class FormatError extends WeightFileError {}
export class ArchitectureMismatchError extends WeightFileError {}
export class TruncatedFileError extends WeightFileError {}

/** The fixed 12-layer autoencoder: 6 stride-2 convs down, 6 mirrored up. */
function buildArchitecture(): LayerSpec[] {
  const layers: LayerSpec[] = [];
  const conv = (cin: number, cout: number, k: number) =>
    layers.push({
      kind: "conv",
      inChannels: cin,
      outChannels: cout,
      kernel: k,
      stride: 2,
      padding: k === 8 ? 3 : 1,
      outputPadding: 0,
      activation: "leaky_relu",
    });
  const tconv = (cin: number, cout: number, k: number) =>
    layers.push({
      kind: "transposed_conv",
      inChannels: cin,
      outChannels: cout,
      kernel: k,
      stride: 2,
      padding: k === 8 ? 3 : 1,
      outputPadding: 0,
      activation: "relu",
    });

  conv(1, 128, 8);
  conv(128, 128, 8);
  for (let i = 0; i < 4; i++) conv(128, 128, 4);
  for (let i = 0; i < 4; i++) tconv(128, 128, 4);
  tconv(128, 128, 8);
  tconv(128, 1, 8);
  return layers;
}

export const ARCHITECTURE: readonly LayerSpec[] = Object.freeze(buildArchitecture());

export interface ModelWeights {
  layers: LayerSpec[];
  /** Per layer, float32 values in (out, in, k, k) C order. */
  tensors: Float32Array[];
  /** Per layer, float32 values shaped (out,). */
  biases: Float32Array[];
  leakySlope: number;
}

function sameSpec(a: LayerSpec, b: LayerSpec): boolean {
  return (
    a.kind === b.kind &&
    a.inChannels === b.inChannels &&
    a.outChannels === b.outChannels &&
    a.kernel === b.kernel &&
    a.stride === b.stride &&
    a.padding === b.padding &&
    a.outputPadding === b.outputPadding &&
    a.activation === b.activation
  );
}

export function validateWeights(w: ModelWeights): void {
  if (
    w.layers.length !== ARCHITECTURE.length ||
    !w.layers.every((s, i) => sameSpec(s, ARCHITECTURE[i]))
  ) {
    throw new ArchitectureMismatchError(
      `layer list does not match the fixed ${ARCHITECTURE.length}-layer architecture`,
    );
  }
  w.layers.forEach((s, i) => {
    const wCount = s.outChannels * s.inChannels * s.kernel * s.kernel;
    if (w.tensors[i]?.length !== wCount) {
      throw new ArchitectureMismatchError(
        `layer ${i} weight tensor has ${w.tensors[i]?.length} values, expected ${wCount}`,
      );
    }
    if (w.biases[i]?.length !== s.outChannels) {
      throw new ArchitectureMismatchError(`layer ${i} bias does not match layer spec`);
    }
  });
}

export function zeroWeights(): ModelWeights {
  return {
    layers: ARCHITECTURE.map((s) => ({ ...s })),
    tensors: ARCHITECTURE.map(
      (s) => new Float32Array(s.outChannels * s.inChannels * s.kernel * s.kernel),
    ),
    biases: ARCHITECTURE.map((s) => new Float32Array(s.outChannels)),
    leakySlope: DEFAULT_LEAKY_SLOPE,
  };
}

const LITTLE_ENDIAN_HOST = new Uint8Array(new Uint16Array([1]).buffer)[0] === 1;

function writeF32(out: Uint8Array, offset: number, values: Float32Array): number {
  if (LITTLE_ENDIAN_HOST) {
    out.set(new Uint8Array(values.buffer, values.byteOffset, values.byteLength), offset);
  } else {
    const view = new DataView(out.buffer, out.byteOffset);
    for (let i = 0; i < values.length; i++) view.setFloat32(offset + 4 * i, values[i], true);
  }
  return offset + values.byteLength;
}

function readF32(data: Uint8Array, offset: number, count: number): Float32Array {
  // slice() realigns the bytes so the Float32Array view is legal at any offset
  const chunk = data.slice(offset, offset + 4 * count);
  if (LITTLE_ENDIAN_HOST) return new Float32Array(chunk.buffer, 0, count);
  const view = new DataView(chunk.buffer);
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) out[i] = view.getFloat32(4 * i, true);
  return out;
}

export function serializeWeights(w: ModelWeights): Uint8Array {
  validateWeights(w);
  let total = HEADER_SIZE;
  for (let i = 0; i < w.layers.length; i++) {
    total += LAYER_HEADER_SIZE + 4 * (w.tensors[i].length + w.biases[i].length);
  }
  const out = new Uint8Array(total);
  const view = new DataView(out.buffer);
  for (let i = 0; i < 4; i++) out[i] = MAGIC.charCodeAt(i);
  view.setUint32(4, FORMAT_VERSION, true);
  view.setFloat32(8, w.leakySlope, true);
  view.setUint32(12, w.layers.length, true);
  let offset = HEADER_SIZE;
  w.layers.forEach((s, i) => {
    view.setUint8(offset, KIND_CODES[s.kind]);
    view.setUint32(offset + 1, s.inChannels, true);
    view.setUint32(offset + 5, s.outChannels, true);
    view.setUint32(offset + 9, s.kernel, true);
    view.setUint32(offset + 13, s.stride, true);
    view.setUint32(offset + 17, s.padding, true);
    view.setUint32(offset + 21, s.outputPadding, true);
    view.setUint8(offset + 25, ACT_CODES[s.activation]);
    offset += LAYER_HEADER_SIZE;
    offset = writeF32(out, offset, w.tensors[i]);
    offset = writeF32(out, offset, w.biases[i]);
  });
  return out;
}

export function loadWeights(data: Uint8Array): ModelWeights {
  if (data.length < HEADER_SIZE) throw new TruncatedFileError("file shorter than the header");
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const magic = String.fromCharCode(data[0], data[1], data[2], data[3]);
  if (magic !== MAGIC) throw new FormatError(`bad magic ${JSON.stringify(magic)}`);
  const version = view.getUint32(4, true);
  if (version !== FORMAT_VERSION) throw new FormatError(`unsupported format version ${version}`);
  const leakySlope = view.getFloat32(8, true);
  const layerCount = view.getUint32(12, true);

  const layers: LayerSpec[] = [];
  const tensors: Float32Array[] = [];
  const biases: Float32Array[] = [];
  let offset = HEADER_SIZE;
  for (let i = 0; i < layerCount; i++) {
    if (offset + LAYER_HEADER_SIZE > data.length) {
      throw new TruncatedFileError("file ends inside a layer header");
    }
    const kindCode = view.getUint8(offset);
    const cin = view.getUint32(offset + 1, true);
    const cout = view.getUint32(offset + 5, true);
    const kernel = view.getUint32(offset + 9, true);
    const stride = view.getUint32(offset + 13, true);
    const padding = view.getUint32(offset + 17, true);
    const outPad = view.getUint32(offset + 21, true);
    const actCode = view.getUint8(offset + 25);
    offset += LAYER_HEADER_SIZE;
    if (kindCode >= KIND_NAMES.length || actCode >= ACT_NAMES.length) {
      throw new FormatError(`unknown layer kind/activation codes (${kindCode}, ${actCode})`);
    }
    const wCount = cout * cin * kernel * kernel;
    if (offset + 4 * (wCount + cout) > data.length) {
      throw new TruncatedFileError("file ends inside a tensor");
    }
    tensors.push(readF32(data, offset, wCount));
    offset += 4 * wCount;
    biases.push(readF32(data, offset, cout));
    offset += 4 * cout;
    layers.push({
      kind: KIND_NAMES[kindCode],
      inChannels: cin,
      outChannels: cout,
      kernel,
      stride,
      padding,
      outputPadding: outPad,
      activation: ACT_NAMES[actCode],
    });
  }
  if (offset !== data.length) {
    throw new FormatError(`${data.length - offset} trailing bytes after the last tensor`);
  }
  const weights = { layers, tensors, biases, leakySlope };
  validateWeights(weights);
  return weights;
}
