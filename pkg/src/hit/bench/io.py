"""File formats: PPM frame directories and trajectory CSVs, plus the HITW0001 weight container.

Weight file layout::

    b"HITW0001"                      8-byte magic
    uint64 little-endian             manifest length in bytes
    manifest (UTF-8 text)            key=value header lines, then one line per
                                     tensor: "<name> dtype=f32 shape=a,b,..."
    blobs                            raw little-endian float32 data, one per
                                     tensor, concatenated in manifest order
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from hit.ablation import AblationSpec
from hit.backbone import ModelConfig
from hit.errors import WeightFormatError
from hit.tracker import BBox

MAGIC = b"HITW0001"
_F32 = np.dtype("<f4")


# -- frames ------------------------------------------------------------------

def write_ppm(path, frame: np.ndarray) -> None:
    data = np.clip(np.round(np.asarray(frame, dtype=np.float64) * 255), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path, format="PPM")


def read_ppm(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.format != "PPM" or im.mode != "RGB":
            raise ValueError(f"{path}: expected an 8-bit binary RGB PPM, got {im.format}/{im.mode}")
        return (np.asarray(im, dtype=np.float32) / 255).astype(np.float32)


def list_frames(directory) -> list[Path]:
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() == ".ppm")
    if not paths:
        raise FileNotFoundError(f"no .ppm frames in {directory}")
    return paths


def read_frames(directory):
    for p in list_frames(directory):
        yield read_ppm(p)


def write_frames(directory, frames) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, f in enumerate(frames):
        p = d / f"frame_{i:05d}.ppm"
        write_ppm(p, f)
        paths.append(p)
    return paths


# -- trajectories ---------------------------------------------------------------

def write_trajectory(path, boxes) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "x", "y", "w", "h"])
        for i, b in enumerate(boxes):
            w.writerow([i, repr(float(b.x)), repr(float(b.y)), repr(float(b.w)), repr(float(b.h))])


def read_trajectory(path) -> list[BBox]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["frame", "x", "y", "w", "h"]:
            raise ValueError(f"{path}: expected header frame,x,y,w,h, got {reader.fieldnames}")
        rows = sorted(reader, key=lambda r: int(r["frame"]))
    return [BBox(float(r["x"]), float(r["y"]), float(r["w"]), float(r["h"])) for r in rows]


# -- weights ---------------------------------------------------------------------

def _header(cfg: ModelConfig, spec: AblationSpec) -> list[str]:
    bridge = ",".join(n for n, on in zip(("max", "mid", "min"), (spec.bridge.use_max, spec.bridge.use_mid, spec.bridge.use_min)) if on)
    return [
        f"variant={cfg.variant}",
        f"bridge={bridge}",
        f"pos={spec.pos_enc.value}",
        f"downsample={spec.downsample}",
        f"g={'on' if spec.use_g else 'off'}",
    ]


def save_weights(model, path) -> None:
    lines = _header(model.cfg, model.spec)
    for name, arr in model.state.items():
        lines.append(f"{name} dtype=f32 shape={','.join(map(str, arr.shape))}")
    manifest = ("\n".join(lines) + "\n").encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(manifest)))
        fh.write(manifest)
        for arr in model.state.values():
            fh.write(np.ascontiguousarray(arr, dtype=_F32).tobytes())


def read_weight_file(path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise WeightFormatError(f"{path}: bad magic {raw[:8]!r}, expected {MAGIC!r}")
    if len(raw) < 16:
        raise WeightFormatError(f"{path}: truncated header")
    (mlen,) = struct.unpack("<Q", raw[8:16])
    if 16 + mlen > len(raw):
        raise WeightFormatError(f"{path}: manifest of {mlen} bytes runs past end of file")
    header, entries = {}, []
    for line in raw[16 : 16 + mlen].decode("utf-8").splitlines():
        if not line.strip():
            continue
        if " " not in line:
            key, _, value = line.partition("=")
            header[key] = value
            continue
        name, *fields = line.split()
        attrs = dict(f.split("=", 1) for f in fields)
        if attrs.get("dtype") != "f32":
            raise WeightFormatError(f"{name}: unsupported dtype {attrs.get('dtype')!r}")
        shape = tuple(int(s) for s in attrs["shape"].split(",")) if attrs.get("shape") else ()
        entries.append((name, shape))
    tensors = {}
    offset = 16 + mlen
    for name, shape in entries:
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4
        if offset + nbytes > len(raw):
            raise WeightFormatError(
                f"{path}: blob for {name} needs {nbytes} bytes at offset {offset}, file has {len(raw)}"
            )
        tensors[name] = np.frombuffer(raw, dtype=_F32, count=nbytes // 4, offset=offset).reshape(shape).astype(np.float32)
        offset += nbytes
    if offset != len(raw):
        raise WeightFormatError(f"{path}: {len(raw) - offset} trailing bytes after the last blob")
    return header, tensors


def load_weights(path):
    from hit.model import HiT, param_shapes

    header, tensors = read_weight_file(path)
    cfg = ModelConfig.named(header.get("variant", "base"))
    spec = AblationSpec.parse([f"{k}={header[k]}" for k in ("bridge", "pos", "downsample", "g") if k in header])
    expected = param_shapes(cfg, spec)
    unknown = [n for n in tensors if n not in expected]
    if unknown:
        raise WeightFormatError(f"unknown tensor name(s) in manifest: {unknown[:5]}")
    missing = [n for n in expected if n not in tensors]
    if missing:
        raise WeightFormatError(f"manifest lacks tensor(s): {missing[:5]}")
    for n, shape in expected.items():
        if tensors[n].shape != tuple(shape):
            raise WeightFormatError(f"{n}: shape {tensors[n].shape} in file, model expects {tuple(shape)}")
    return HiT(cfg, {n: tensors[n] for n in expected}, spec)
