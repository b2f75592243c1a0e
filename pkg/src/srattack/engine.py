"""Forward-inference engine for EDSR-style residual super-resolution networks.

The topology is fixed: a 3x3 head conv (3 -> n_feats), n_resblocks residual
blocks (two 3x3 convs with a ReLU between, branch scaled by res_scale), a
body-end conv plus global skip, a sub-pixel upsampler (conv + pixel shuffle
per x2/x3 stage), and a final conv back to RGB.  There is no normalization
anywhere; the only data-dependent preprocessing is subtracting the model's
RGB mean on the [0, 255] scale.

Weights live in the SRW1 binary format (little-endian):

    magic "SRW1" | u32 version=1 | u32 scale | u32 n_feats | u32 n_resblocks
    | f32 res_scale | f32[3] rgb_mean | u32 layer_count
    then per layer: u32 out | u32 in | u32 kh | u32 kw
                    | f32 weights (out*in*kh*kw) | f32 biases (out)

Tensors are (channels, height, width) float32; conv accumulation happens in
float64 so results are stable across platforms, with storage back in float32.
Everything is pure and an SrModel is immutable after load, so models can be
shared across threads.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .resample import check_scale

__all__ = [
    "ConvLayer",
    "SrModel",
    "WeightFormatError",
    "conv2d",
    "relu",
    "residual_block",
    "pixel_shuffle",
    "forward",
    "load_weights",
    "write_weights",
    "image_to_tensor",
    "tensor_to_image",
]

SRW1_MAGIC = b"SRW1"
SRW1_VERSION = 1
KERNEL = 3


class WeightFormatError(ValueError):
    """Malformed SRW1 weight file (bad magic, truncation, shape-chain violation...)."""


@dataclass(frozen=True)
class ConvLayer:
    """One 3x3 convolution: weight (out, in, 3, 3) float32, bias (out,) float32."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float32)
        b = np.asarray(self.bias, dtype=np.float32)
        if w.ndim != 4 or w.shape[2] != KERNEL or w.shape[3] != KERNEL:
            raise ValueError(f"conv weight must be (out, in, 3, 3), got {w.shape}")
        if b.shape != (w.shape[0],):
            raise ValueError(f"bias shape {b.shape} does not match {w.shape[0]} outputs")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValueError("non-finite conv parameters")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]


def upsample_stages(scale: int) -> list[int]:
    """Pixel-shuffle factors per stage: x2/x3 use one stage, x4 two x2 stages."""
    return [2, 2] if scale == 4 else [scale]


def expected_layer_shapes(scale: int, n_feats: int, n_resblocks: int) -> list[tuple[int, int]]:
    """(out_channels, in_channels) chain for the fixed topology."""
    chain = [(n_feats, 3)]
    chain += [(n_feats, n_feats)] * (2 * n_resblocks)
    chain += [(n_feats, n_feats)]  # body-end conv
    chain += [(n_feats * r * r, n_feats) for r in upsample_stages(scale)]
    chain += [(3, n_feats)]
    return chain


@dataclass(frozen=True)
class SrModel:
    scale: int
    n_feats: int
    n_resblocks: int
    res_scale: float
    rgb_mean: np.ndarray  # (3,) float32, [0, 255] scale
    layers: list[ConvLayer] = field(default_factory=list)

    def __post_init__(self):
        check_scale(self.scale)
        if self.n_feats < 1 or self.n_resblocks < 0:
            raise ValueError("n_feats must be >= 1 and n_resblocks >= 0")
        mean = np.asarray(self.rgb_mean, dtype=np.float32)
        if mean.shape != (3,) or not np.isfinite(mean).all():
            raise ValueError("rgb_mean must be 3 finite values")
        object.__setattr__(self, "rgb_mean", mean)
        expected = expected_layer_shapes(self.scale, self.n_feats, self.n_resblocks)
        if len(self.layers) != len(expected):
            raise ValueError(
                f"expected {len(expected)} layers for this topology, got {len(self.layers)}"
            )
        for i, (layer, (out_c, in_c)) in enumerate(zip(self.layers, expected)):
            if (layer.out_channels, layer.in_channels) != (out_c, in_c):
                raise ValueError(
                    f"layer {i}: expected {out_c}<-{in_c} channels, "
                    f"got {layer.out_channels}<-{layer.in_channels}"
                )

    # Layer-list slices per topology position.
    @property
    def head(self) -> ConvLayer:
        return self.layers[0]

    def resblock_layers(self, i: int) -> tuple[ConvLayer, ConvLayer]:
        return self.layers[1 + 2 * i], self.layers[2 + 2 * i]

    @property
    def body_end(self) -> ConvLayer:
        return self.layers[1 + 2 * self.n_resblocks]

    @property
    def upsample_convs(self) -> list[ConvLayer]:
        start = 2 + 2 * self.n_resblocks
        return self.layers[start : start + len(upsample_stages(self.scale))]

    @property
    def final(self) -> ConvLayer:
        return self.layers[-1]


def conv2d(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """3x3 convolution with zero padding 1; spatial dims preserved.

    out(o, y, x) = bias(o) + sum_{i,dy,dx} w(o, i, dy, dx) * in(i, y+dy-1, x+dx-1)
    with out-of-range input treated as zero.
    """
    x = np.asarray(x)
    if x.ndim != 3:
        raise ValueError(f"expected (c, h, w) tensor, got shape {x.shape}")
    if x.shape[0] != layer.in_channels:
        raise ValueError(f"tensor has {x.shape[0]} channels, layer wants {layer.in_channels}")
    padded = np.pad(x.astype(np.float64), ((0, 0), (1, 1), (1, 1)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (KERNEL, KERNEL), axis=(1, 2))
    # windows: (in, h, w, 3, 3); contract in/dy/dx against the weight tensor
    out = np.tensordot(layer.weight.astype(np.float64), windows, axes=([1, 2, 3], [0, 3, 4]))
    out += layer.bias.astype(np.float64)[:, None, None]
    return out.astype(np.float32)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def residual_block(x: np.ndarray, conv1: ConvLayer, conv2: ConvLayer, res_scale: float) -> np.ndarray:
    """x + res_scale * conv2(relu(conv1(x)))."""
    branch = conv2d(relu(conv2d(x, conv1)), conv2)
    return (x + np.float32(res_scale) * branch).astype(np.float32)


def pixel_shuffle(x: np.ndarray, r: int) -> np.ndarray:
    """Rearrange (c*r^2, h, w) into (c, h*r, w*r).

    out(c, y*r+dy, x*r+dx) = in(c*r^2 + dy*r + dx, y, x)
    """
    x = np.asarray(x)
    c, h, w = x.shape
    if r < 1:
        raise ValueError(f"shuffle factor must be >= 1, got {r}")
    if c % (r * r):
        raise ValueError(f"{c} channels not divisible by {r}^2")
    out = x.reshape(c // (r * r), r, r, h, w)
    out = out.transpose(0, 3, 1, 4, 2)
    return np.ascontiguousarray(out.reshape(c // (r * r), h * r, w * r))


def image_to_tensor(img: np.ndarray) -> np.ndarray:
    """(h, w, 3) image -> (3, h, w) float32 tensor."""
    return np.ascontiguousarray(np.asarray(img, dtype=np.float32).transpose(2, 0, 1))


def tensor_to_image(t: np.ndarray) -> np.ndarray:
    """(3, h, w) tensor -> (h, w, 3) float64 image."""
    return np.ascontiguousarray(t.transpose(1, 2, 0).astype(np.float64))


def forward(model: SrModel, img: np.ndarray) -> np.ndarray:
    """Run the network on an (h, w, 3) image; returns (h*scale, w*scale, 3).

    The output is intentionally not clamped to [0, 255]; quantization happens
    once, downstream.
    """
    t = image_to_tensor(img)
    t = t - model.rgb_mean[:, None, None]
    head_out = conv2d(t, model.head)
    body = head_out
    for i in range(model.n_resblocks):
        c1, c2 = model.resblock_layers(i)
        body = residual_block(body, c1, c2, model.res_scale)
    body = conv2d(body, model.body_end)
    body = body + head_out  # global skip
    up = body
    for conv, r in zip(model.upsample_convs, upsample_stages(model.scale)):
        up = pixel_shuffle(conv2d(up, conv), r)
    out = conv2d(up, model.final)
    out = out + model.rgb_mean[:, None, None]
    return tensor_to_image(out)


def write_weights(model: SrModel, path) -> None:
    """Serialize a model to the SRW1 binary format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(SRW1_MAGIC)
        f.write(struct.pack("<IIII", SRW1_VERSION, model.scale, model.n_feats, model.n_resblocks))
        f.write(struct.pack("<f", model.res_scale))
        f.write(model.rgb_mean.astype("<f4").tobytes())
        f.write(struct.pack("<I", len(model.layers)))
        for layer in model.layers:
            f.write(struct.pack("<IIII", layer.out_channels, layer.in_channels, KERNEL, KERNEL))
            f.write(layer.weight.astype("<f4").tobytes())
            f.write(layer.bias.astype("<f4").tobytes())


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise WeightFormatError(f"truncated weight file: {self.path}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f32s(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * n), dtype="<f4").copy()


def load_weights(path) -> SrModel:
    """Load and invariant-check an SRW1 weight file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such weight file: {path}")
    r = _Reader(path.read_bytes(), path)
    if r.take(4) != SRW1_MAGIC:
        raise WeightFormatError(f"bad magic; not an SRW1 file: {path}")
    version = r.u32()
    if version != SRW1_VERSION:
        raise WeightFormatError(f"unsupported SRW1 version {version} in {path}")
    scale, n_feats, n_resblocks = r.u32(), r.u32(), r.u32()
    res_scale = struct.unpack("<f", r.take(4))[0]
    rgb_mean = r.f32s(3)
    layer_count = r.u32()
    expected = expected_layer_shapes(scale, n_feats, n_resblocks) if scale in (2, 3, 4) else None
    if expected is None:
        raise WeightFormatError(f"unsupported scale {scale} in {path}")
    if layer_count != len(expected):
        raise WeightFormatError(
            f"{path}: header declares {layer_count} layers, topology needs {len(expected)}"
        )
    layers = []
    for i, (out_c, in_c) in enumerate(expected):
        got = (r.u32(), r.u32(), r.u32(), r.u32())
        if got != (out_c, in_c, KERNEL, KERNEL):
            raise WeightFormatError(
                f"{path}: layer {i} header {got} violates the shape chain "
                f"(expected ({out_c}, {in_c}, {KERNEL}, {KERNEL}))"
            )
        w = r.f32s(out_c * in_c * KERNEL * KERNEL).reshape(out_c, in_c, KERNEL, KERNEL)
        b = r.f32s(out_c)
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise WeightFormatError(f"{path}: non-finite weight in layer {i}")
        layers.append(ConvLayer(w, b))
    if r.pos != len(r.data):
        raise WeightFormatError(f"{path}: {len(r.data) - r.pos} trailing bytes after payload")
    if not np.isfinite(res_scale) or not np.isfinite(rgb_mean).all():
        raise WeightFormatError(f"{path}: non-finite header values")
    try:
        return SrModel(
            scale=scale,
            n_feats=n_feats,
            n_resblocks=n_resblocks,
            res_scale=float(res_scale),
            rgb_mean=rgb_mean,
            layers=layers,
        )
    except ValueError as exc:
        raise WeightFormatError(f"{path}: {exc}") from exc
