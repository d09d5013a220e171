"""Portable forward-pass inference for the convolutional autoencoder.

The network is a fixed 12-layer stack: an encoder of stride-2 convolutions
(two 8x8, four 4x4, LeakyReLU) that shrinks a 256x256 image to a 4x4x128
bottleneck, and a mirrored decoder of stride-2 transposed convolutions
(four 4x4, two 8x8, ReLU) that restores the input resolution.  Weights
travel in a little-endian binary container (magic "CAEW") shared with the
trainer, so inference needs nothing beyond numpy.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams
from .imaging import GridSpec, IntensityImage, extract_config, render

MAGIC = b"CAEW"
FORMAT_VERSION = 1
DEFAULT_LEAKY_SLOPE = 0.01

CONV = "conv"
TRANSPOSED_CONV = "transposed_conv"
LEAKY_RELU = "leaky_relu"
RELU = "relu"

_KIND_CODES = {CONV: 0, TRANSPOSED_CONV: 1}
_ACT_CODES = {LEAKY_RELU: 0, RELU: 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}

_HEADER = struct.Struct("<4sIfI")
_LAYER_HEADER = struct.Struct("<BIIIIIIB")


class WeightFileError(ValueError):
    """Base class for weight-file problems."""


class FormatError(WeightFileError):
    """Bad magic bytes or unsupported format version."""


class ArchitectureMismatchError(WeightFileError):
    """The layer list differs from the fixed autoencoder architecture."""


class TruncatedFileError(WeightFileError):
    """The byte stream ends before all declared tensors are read."""


class IncompatibleResolutionError(ValueError):
    """Input resolution does not pass cleanly through the strided layers."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int
    out_channels: int
    kernel: int
    stride: int
    padding: int
    output_padding: int
    activation: str


def _architecture() -> list[LayerSpec]:
    """The fixed layer stack; padding is forced by the exact halve/double rule."""
    layers = []

    def conv(cin, cout, k):
        layers.append(LayerSpec(CONV, cin, cout, k, 2, 3 if k == 8 else 1, 0, LEAKY_RELU))

    def tconv(cin, cout, k):
        layers.append(
            LayerSpec(TRANSPOSED_CONV, cin, cout, k, 2, 3 if k == 8 else 1, 0, RELU)
        )

    conv(1, 128, 8)
    conv(128, 128, 8)
    for _ in range(4):
        conv(128, 128, 4)
    for _ in range(4):
        tconv(128, 128, 4)
    tconv(128, 128, 8)
    tconv(128, 1, 8)
    return layers


ARCHITECTURE = tuple(_architecture())


@dataclass(frozen=True)
class ModelWeights:
    """Ordered layer specs with their weight and bias tensors."""

    layers: tuple[LayerSpec, ...]
    tensors: tuple[np.ndarray, ...]  # per layer, float32 (out, in, k, k)
    biases: tuple[np.ndarray, ...]  # per layer, float32 (out,)
    leaky_slope: float = DEFAULT_LEAKY_SLOPE

    def __post_init__(self):
        if tuple(self.layers) != ARCHITECTURE:
            raise ArchitectureMismatchError(
                f"layer list does not match the fixed {len(ARCHITECTURE)}-layer architecture"
            )
        for spec, w, b in zip(self.layers, self.tensors, self.biases):
            expect = (spec.out_channels, spec.in_channels, spec.kernel, spec.kernel)
            if w.shape != expect or w.dtype != np.float32:
                raise ArchitectureMismatchError(
                    f"weight tensor shape {w.shape}/{w.dtype} does not match {expect} float32"
                )
            if b.shape != (spec.out_channels,) or b.dtype != np.float32:
                raise ArchitectureMismatchError("bias tensor does not match layer spec")


def zero_weights() -> ModelWeights:
    tensors = tuple(
        np.zeros((s.out_channels, s.in_channels, s.kernel, s.kernel), dtype=np.float32)
        for s in ARCHITECTURE
    )
    biases = tuple(np.zeros(s.out_channels, dtype=np.float32) for s in ARCHITECTURE)
    return ModelWeights(layers=ARCHITECTURE, tensors=tensors, biases=biases)


def random_weights(seed: int = 0, scale: float | None = None) -> ModelWeights:
    """Fan-in scaled random weights; good enough for timing and plumbing tests."""
    rng = np.random.default_rng(seed)
    tensors = []
    biases = []
    for s in ARCHITECTURE:
        fan_in = s.in_channels * s.kernel * s.kernel
        std = scale if scale is not None else np.sqrt(2.0 / fan_in)
        tensors.append(
            rng.normal(0.0, std, (s.out_channels, s.in_channels, s.kernel, s.kernel)).astype(
                np.float32
            )
        )
        biases.append(np.zeros(s.out_channels, dtype=np.float32))
    return ModelWeights(layers=ARCHITECTURE, tensors=tuple(tensors), biases=tuple(biases))


def serialize(w: ModelWeights) -> bytes:
    """Encode weights in the shared little-endian container."""
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, w.leaky_slope, len(w.layers))]
    for spec, tensor, bias in zip(w.layers, w.tensors, w.biases):
        parts.append(
            _LAYER_HEADER.pack(
                _KIND_CODES[spec.kind],
                spec.in_channels,
                spec.out_channels,
                spec.kernel,
                spec.stride,
                spec.padding,
                spec.output_padding,
                _ACT_CODES[spec.activation],
            )
        )
        parts.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(bias, dtype="<f4").tobytes())
    return b"".join(parts)


def load_weights(data: bytes) -> ModelWeights:
    """Decode and validate a weight container (bit-exact tensor round-trip)."""
    if len(data) < _HEADER.size:
        raise TruncatedFileError("file shorter than the header")
    magic, version, leaky_slope, layer_count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    offset = _HEADER.size

    layers = []
    tensors = []
    biases = []
    for _ in range(layer_count):
        if offset + _LAYER_HEADER.size > len(data):
            raise TruncatedFileError("file ends inside a layer header")
        kind, cin, cout, kernel, stride, padding, out_pad, act = _LAYER_HEADER.unpack_from(
            data, offset
        )
        offset += _LAYER_HEADER.size
        if kind not in _KIND_NAMES or act not in _ACT_NAMES:
            raise FormatError(f"unknown layer kind/activation codes ({kind}, {act})")
        spec = LayerSpec(
            _KIND_NAMES[kind], cin, cout, kernel, stride, padding, out_pad, _ACT_NAMES[act]
        )
        w_count = cout * cin * kernel * kernel
        w_end = offset + 4 * w_count
        b_end = w_end + 4 * cout
        if b_end > len(data):
            raise TruncatedFileError("file ends inside a tensor")
        tensor = np.frombuffer(data[offset:w_end], dtype="<f4").reshape(
            cout, cin, kernel, kernel
        )
        bias = np.frombuffer(data[w_end:b_end], dtype="<f4")
        offset = b_end
        layers.append(spec)
        tensors.append(tensor.copy())
        biases.append(bias.copy())
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after the last tensor")
    return ModelWeights(
        layers=tuple(layers),
        tensors=tuple(tensors),
        biases=tuple(biases),
        leaky_slope=leaky_slope,
    )


def load_weights_file(path) -> ModelWeights:
    with open(path, "rb") as handle:
        return load_weights(handle.read())


def save_weights_file(w: ModelWeights, path) -> None:
    with open(path, "wb") as handle:
        handle.write(serialize(w))


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, padding: int) -> np.ndarray:
    """Strided 2-D convolution (cross-correlation), channels-first.

    x: (C, H, W), w: (O, C, k, k), returns (O, H', W') with
    H' = (H + 2p - k) // s + 1.
    """
    c, h, width = x.shape
    o, _, k, _ = w.shape
    out_h = (h + 2 * padding - k) // stride + 1
    out_w = (width + 2 * padding - k) // stride + 1
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    out = np.zeros((o, out_h, out_w), dtype=np.float32)
    for dy in range(k):
        for dx in range(k):
            window = xp[:, dy : dy + stride * out_h : stride, dx : dx + stride * out_w : stride]
            out += np.tensordot(w[:, :, dy, dx], window, axes=(1, 0))
    return out + b[:, None, None]


def conv_transpose2d(
    x: np.ndarray,
    w: np.ndarray,
    b: np.ndarray,
    stride: int,
    padding: int,
    output_padding: int = 0,
) -> np.ndarray:
    """Strided 2-D transposed convolution, channels-first.

    x: (C, H, W), w: (O, C, k, k); each input pixel scatters a k x k stamp
    at stride offsets, then the padding border is cropped.  Output side is
    (H - 1) * s - 2p + k + output_padding.
    """
    c, h, width = x.shape
    o, _, k, _ = w.shape
    full_h = (h - 1) * stride + k
    full_w = (width - 1) * stride + k
    buf = np.zeros((o, full_h, full_w), dtype=np.float32)
    for dy in range(k):
        for dx in range(k):
            contrib = np.tensordot(w[:, :, dy, dx], x, axes=(1, 0))
            buf[:, dy : dy + stride * (h - 1) + 1 : stride, dx : dx + stride * (width - 1) + 1 : stride] += contrib
    out_h = full_h - 2 * padding + output_padding
    out_w = full_w - 2 * padding + output_padding
    out = np.zeros((o, out_h, out_w), dtype=np.float32)
    crop = buf[:, padding : padding + out_h, padding : padding + out_w]
    out[:, : crop.shape[1], : crop.shape[2]] = crop
    return out + b[:, None, None]


def _activate(x: np.ndarray, activation: str, leaky_slope: float) -> np.ndarray:
    if activation == RELU:
        return np.maximum(x, 0.0)
    return np.where(x > 0.0, x, np.float32(leaky_slope) * x)


def admissible_resolution(resolution_px: int) -> bool:
    """True when the resolution passes cleanly through the six stride-2 stages."""
    return resolution_px % 64 == 0 and resolution_px >= 256


def forward(
    img: IntensityImage, w: ModelWeights, trace: list | None = None
) -> IntensityImage:
    """Run the autoencoder on an intensity image.

    The output has the same resolution as the input and carries the raw
    (unclamped) network values; extraction clamps them later.  ``trace``
    collects per-layer output shapes when provided.
    """
    r = img.grid.resolution_px
    if not admissible_resolution(r):
        raise IncompatibleResolutionError(
            f"resolution {r} is not 64*(N+4) for integer N >= 0"
        )
    x = img.values.astype(np.float32)[None, :, :]
    for spec, tensor, bias in zip(w.layers, w.tensors, w.biases):
        if spec.kind == CONV:
            x = conv2d(x, tensor, bias, spec.stride, spec.padding)
        else:
            x = conv_transpose2d(
                x, tensor, bias, spec.stride, spec.padding, spec.output_padding
            )
        x = _activate(x, spec.activation, w.leaky_slope)
        if trace is not None:
            trace.append(x.shape)
    return IntensityImage(grid=img.grid, values=x[0].astype(float))


def plan_inference(
    task_positions,
    w: ModelWeights,
    grid: GridSpec,
    params: ChannelParams,
    p_max: float,
) -> tuple[np.ndarray, float | None]:
    """End-to-end image planner: render tasks, infer, extract relays."""
    img = render(task_positions, grid)
    out = forward(img, w)
    return extract_config(out, task_positions, params, p_max)
