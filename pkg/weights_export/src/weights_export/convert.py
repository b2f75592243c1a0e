"""EDSR checkpoint -> SRW1 converter and verifier.

Reads a pretrained EDSR state dict (the reference PyTorch layout: head.0,
body.{i}.body.{0,2}, body.{N}, tail.0.{0,2}, tail.1, plus the fixed
sub_mean/add_mean shift convs) and writes the SRW1 binary weight format:

    magic "SRW1" | u32 version=1 | u32 scale | u32 n_feats | u32 n_resblocks
    | f32 res_scale | f32[3] rgb_mean | u32 layer_count
    then per layer: u32 out | u32 in | u32 kh | u32 kw
                    | f32 weights (out*in*kh*kw) | f32 biases (out)

Architecture fields are inferred from tensor shapes; weight values are copied
exactly (stored single precision, no requantization).  Verification re-reads
the SRW1 file and compares every stored value tensor-for-tensor against the
checkpoint.
"""

import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

SRW1_MAGIC = b"SRW1"
SRW1_VERSION = 1
KERNEL = 3

# DIV2K training means on the [0, 255] scale, used when the checkpoint
# carries no add_mean layer to read them from.
DEFAULT_RGB_MEAN = (0.4488 * 255.0, 0.4371 * 255.0, 0.4040 * 255.0)

# MeanShift convs encode rgb_mean in the header instead of becoming layers.
MEAN_SHIFT_PREFIXES = ("sub_mean.", "add_mean.")


class ConversionError(ValueError):
    """Checkpoint cannot be mapped onto the SRW1 topology."""


@dataclass
class CheckpointDescriptor:
    source: str
    scale: int
    n_feats: int
    n_resblocks: int
    res_scale: float
    rgb_mean: tuple[float, float, float]
    layer_names: list[str]  # checkpoint base names in SRW1 layer order


def load_state_dict(path) -> dict[str, torch.Tensor]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such checkpoint: {path}")
    state = torch.load(path, map_location="cpu", weights_only=True)
    for key in ("state_dict", "model"):
        if isinstance(state, dict) and key in state and isinstance(state[key], dict):
            state = state[key]
    if not isinstance(state, dict) or not state:
        raise ConversionError(f"{path}: not a parameter dictionary")
    return {k: v for k, v in state.items()}


def _require(state, base: str, shape: tuple) -> None:
    for suffix in ("weight", "bias"):
        key = f"{base}.{suffix}"
        if key not in state:
            raise ConversionError(f"checkpoint is missing the {key!r} slot")
    got = tuple(state[f"{base}.weight"].shape)
    if got != shape:
        raise ConversionError(
            f"shape-chain violation at {base!r}: weight is {got}, expected {shape}"
        )
    out_c = shape[0]
    if tuple(state[f"{base}.bias"].shape) != (out_c,):
        raise ConversionError(f"shape-chain violation at {base!r}: bias length != {out_c}")


def build_checkpoint_descriptor(
    state: dict[str, torch.Tensor],
    source: str = "<memory>",
    res_scale: float | None = None,
) -> CheckpointDescriptor:
    """Infer the EDSR architecture from tensor names/shapes and fix the
    checkpoint-to-SRW1 layer order."""
    if "head.0.weight" not in state:
        raise ConversionError("checkpoint is missing the 'head.0.weight' slot")
    n_feats = int(state["head.0.weight"].shape[0])

    block_ids = set()
    for name in state:
        m = re.match(r"body\.(\d+)\.body\.0\.weight$", name)
        if m:
            block_ids.add(int(m.group(1)))
    n_resblocks = (max(block_ids) + 1) if block_ids else 0
    if n_resblocks == 0:
        raise ConversionError("checkpoint has no residual-block tensors under 'body.*'")

    if "tail.0.2.weight" in state:
        scale = 4
        tail_convs = ["tail.0.0", "tail.0.2"]
    elif "tail.0.0.weight" in state:
        ratio = int(state["tail.0.0.weight"].shape[0]) // n_feats
        if ratio == 4:
            scale = 2
        elif ratio == 9:
            scale = 3
        else:
            raise ConversionError(f"unsupported upsampler channel ratio {ratio} (scale?)")
        tail_convs = ["tail.0.0"]
    else:
        raise ConversionError("checkpoint is missing the 'tail.0.0.weight' slot")

    order = ["head.0"]
    shapes = [(n_feats, 3, KERNEL, KERNEL)]
    for i in range(n_resblocks):
        order += [f"body.{i}.body.0", f"body.{i}.body.2"]
        shapes += [(n_feats, n_feats, KERNEL, KERNEL)] * 2
    order.append(f"body.{n_resblocks}")
    shapes.append((n_feats, n_feats, KERNEL, KERNEL))
    for conv in tail_convs:
        order.append(conv)
        r = 2 if scale in (2, 4) else 3
        shapes.append((n_feats * r * r, n_feats, KERNEL, KERNEL))
    order.append("tail.1")
    shapes.append((3, n_feats, KERNEL, KERNEL))

    for base, shape in zip(order, shapes):
        _require(state, base, shape)

    mapped = {f"{base}.{s}" for base in order for s in ("weight", "bias")}
    leftovers = [
        k for k in state
        if k not in mapped and not k.startswith(MEAN_SHIFT_PREFIXES)
    ]
    if leftovers:
        raise ConversionError(f"unknown parameter names: {sorted(leftovers)[:5]}")

    if "add_mean.bias" in state:
        rgb_mean = tuple(float(v) for v in state["add_mean.bias"].reshape(-1)[:3])
    else:
        rgb_mean = DEFAULT_RGB_MEAN
    if res_scale is None:
        # the published baseline uses 1.0; the 256-feature variant trains with 0.1
        res_scale = 0.1 if n_feats >= 256 else 1.0

    return CheckpointDescriptor(
        source=str(source),
        scale=scale,
        n_feats=n_feats,
        n_resblocks=n_resblocks,
        res_scale=float(res_scale),
        rgb_mean=rgb_mean,
        layer_names=order,
    )


def _tensor_f32(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().numpy().astype("<f4", copy=False)


def export_checkpoint(src, dst, res_scale: float | None = None) -> dict:
    """Write the SRW1 rendition of a checkpoint; returns a summary dict."""
    state = load_state_dict(src)
    desc = build_checkpoint_descriptor(state, source=src, res_scale=res_scale)
    dst = Path(dst)
    dst.parent.mkdir(parents=True, exist_ok=True)
    layer_count = len(desc.layer_names)
    with open(dst, "wb") as f:
        f.write(SRW1_MAGIC)
        f.write(struct.pack("<IIII", SRW1_VERSION, desc.scale, desc.n_feats, desc.n_resblocks))
        f.write(struct.pack("<f", desc.res_scale))
        f.write(np.asarray(desc.rgb_mean, dtype="<f4").tobytes())
        f.write(struct.pack("<I", layer_count))
        for base in desc.layer_names:
            w = _tensor_f32(state[f"{base}.weight"])
            b = _tensor_f32(state[f"{base}.bias"])
            f.write(struct.pack("<IIII", w.shape[0], w.shape[1], w.shape[2], w.shape[3]))
            f.write(np.ascontiguousarray(w).tobytes())
            f.write(np.ascontiguousarray(b).tobytes())
    return {
        "source": str(src),
        "destination": str(dst),
        "scale": desc.scale,
        "n_feats": desc.n_feats,
        "n_resblocks": desc.n_resblocks,
        "res_scale": desc.res_scale,
        "rgb_mean": list(desc.rgb_mean),
        "layer_count": layer_count,
        "bytes_written": dst.stat().st_size,
    }


def read_srw1(path):
    """Minimal SRW1 reader: (header dict, list of (weight, bias) arrays)."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != SRW1_MAGIC:
        raise ConversionError(f"{path}: bad magic, not an SRW1 file")
    pos = 4
    version, scale, n_feats, n_resblocks = struct.unpack_from("<IIII", data, pos)
    pos += 16
    if version != SRW1_VERSION:
        raise ConversionError(f"{path}: unsupported SRW1 version {version}")
    (res_scale,) = struct.unpack_from("<f", data, pos)
    pos += 4
    rgb_mean = np.frombuffer(data, dtype="<f4", count=3, offset=pos).copy()
    pos += 12
    (layer_count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    layers = []
    for _ in range(layer_count):
        out_c, in_c, kh, kw = struct.unpack_from("<IIII", data, pos)
        pos += 16
        n_w = out_c * in_c * kh * kw
        if pos + 4 * (n_w + out_c) > len(data):
            raise ConversionError(f"{path}: truncated payload")
        w = np.frombuffer(data, dtype="<f4", count=n_w, offset=pos).reshape(out_c, in_c, kh, kw)
        pos += 4 * n_w
        b = np.frombuffer(data, dtype="<f4", count=out_c, offset=pos)
        pos += 4 * out_c
        layers.append((w, b))
    if pos != len(data):
        raise ConversionError(f"{path}: trailing bytes after payload")
    header = {
        "scale": scale,
        "n_feats": n_feats,
        "n_resblocks": n_resblocks,
        "res_scale": res_scale,
        "rgb_mean": rgb_mean,
        "layer_count": layer_count,
    }
    return header, layers


def verify_export(src, dst, res_scale: float | None = None) -> dict:
    """Compare an SRW1 file against its source checkpoint, value for value.

    Returns {"status": "pass"} or {"status": "fail", "mismatches": [...]}
    where each mismatch names the layer and the first differing flat index.
    """
    state = load_state_dict(src)
    desc = build_checkpoint_descriptor(state, source=src, res_scale=res_scale)
    header, layers = read_srw1(dst)
    mismatches = []

    for field in ("scale", "n_feats", "n_resblocks"):
        if header[field] != getattr(desc, field):
            mismatches.append(
                {"layer": "<header>", "field": field,
                 "expected": getattr(desc, field), "got": header[field]}
            )
    want_mean = np.asarray(desc.rgb_mean, dtype="<f4")
    if not np.array_equal(header["rgb_mean"], want_mean):
        mismatches.append({"layer": "<header>", "field": "rgb_mean",
                           "expected": want_mean.tolist(),
                           "got": header["rgb_mean"].tolist()})
    if header["layer_count"] != len(desc.layer_names):
        mismatches.append({"layer": "<header>", "field": "layer_count",
                           "expected": len(desc.layer_names), "got": header["layer_count"]})

    for i, base in enumerate(desc.layer_names):
        if i >= len(layers):
            break
        got_w, got_b = layers[i]
        for kind, got in (("weight", got_w), ("bias", got_b)):
            want = _tensor_f32(state[f"{base}.{kind}"])
            if got.shape != want.shape:
                mismatches.append({"layer": base, "tensor": kind, "field": "shape",
                                   "expected": list(want.shape), "got": list(got.shape)})
                continue
            equal = got.reshape(-1) == want.reshape(-1)
            if not equal.all():
                first = int(np.argmax(~equal))
                mismatches.append({"layer": base, "tensor": kind, "index": first,
                                   "expected": float(want.reshape(-1)[first]),
                                   "got": float(got.reshape(-1)[first])})

    if mismatches:
        return {"status": "fail", "mismatches": mismatches}
    return {"status": "pass", "layers_compared": len(desc.layer_names)}
