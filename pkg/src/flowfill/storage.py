"""On-disk formats: mel blobs, corpus manifests, model checkpoints.

Mel blob: magic "MELF", u32 version, u32 N, u32 F, then N*F little-endian
float32, row-major.

Manifest: one utterance per line, tab-separated:
    id  speaker  text  mel_path  comma-separated-durations  filter_state
with mel paths relative to the manifest's directory.

Checkpoint: magic "FFCK", u32 version, u32 header length, JSON header
(kind, config, seed), u32 parameter count, then per parameter a name,
ndim and dims, then all parameter data as little-endian float32 in
manifest order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .autodiff import ModelParams
from .corpus import SynthSpec, UtteranceRecord
from .errors import DataError

MEL_MAGIC = b"MELF"
MEL_VERSION = 1
CKPT_MAGIC = b"FFCK"
CKPT_VERSION = 1

__all__ = [
    "write_mel",
    "read_mel",
    "write_manifest",
    "read_manifest",
    "save_checkpoint",
    "load_checkpoint",
]


def write_mel(path, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("mel blob expects a 2-D frame matrix")
    n, f = x.shape
    payload = struct.pack("<4sIII", MEL_MAGIC, MEL_VERSION, n, f)
    payload += x.astype("<f4").tobytes(order="C")
    Path(path).write_bytes(payload)


def read_mel(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise DataError(f"{path}: truncated mel blob")
    magic, version, n, f = struct.unpack("<4sIII", raw[:16])
    if magic != MEL_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != MEL_VERSION:
        raise DataError(f"{path}: unsupported mel version {version}")
    body = np.frombuffer(raw[16:], dtype="<f4")
    if body.size != n * f:
        raise DataError(f"{path}: expected {n * f} floats, found {body.size}")
    return body.reshape(n, f).astype(np.float64)


def write_manifest(records, spec: SynthSpec, out_dir, name: str = "manifest.tsv") -> Path:
    """Write manifest plus one mel blob per record under out_dir/mels/."""
    out_dir = Path(out_dir)
    mel_dir = out_dir / "mels"
    mel_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for rec in records:
        rel = f"mels/{rec.utt_id}.mel"
        write_mel(out_dir / rel, rec.x)
        durs = ",".join(str(int(d)) for d in rec.durations)
        text = spec.ids_to_text(rec.y)
        lines.append(f"{rec.utt_id}\t{rec.speaker_id}\t{text}\t{rel}\t{durs}\t{rec.filter_state}")
    path = out_dir / name
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(path, spec: SynthSpec) -> list:
    """Load records (including frames) from a manifest written by write_manifest."""
    path = Path(path)
    base = path.parent
    records = []
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise DataError(f"{path}:{ln}: expected 6 fields, got {len(parts)}")
        utt_id, speaker_id, text, rel, durs, state = parts
        y = spec.text_to_ids(text)
        durations = np.array([int(d) for d in durs.split(",")], dtype=np.int64)
        x = read_mel(base / rel)
        records.append(UtteranceRecord(utt_id, speaker_id, y, durations, x, state))
    return records


def save_checkpoint(path, kind: str, config: dict, seed: int, params: ModelParams,
                    extra: dict | None = None):
    header = json.dumps({"kind": kind, "config": config, "seed": seed,
                         "extra": extra or {}}, sort_keys=True).encode()
    chunks = [struct.pack("<4sII", CKPT_MAGIC, CKPT_VERSION, len(header)), header]
    items = list(params.items())
    chunks.append(struct.pack("<I", len(items)))
    for name, tensor in items:
        nb = name.encode()
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<B", tensor.data.ndim))
        chunks.append(struct.pack(f"<{tensor.data.ndim}I", *tensor.data.shape))
    for _, tensor in items:
        chunks.append(tensor.data.astype("<f4").tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path, want_extra: bool = False):
    """Returns (kind, config dict, seed, ordered name -> float64 array);
    with want_extra, appends the header's extra dict."""
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise DataError(f"{path}: truncated checkpoint")
    magic, version, hlen = struct.unpack("<4sII", raw[:12])
    if magic != CKPT_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != CKPT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    pos = 12
    header = json.loads(raw[pos:pos + hlen].decode())
    pos += hlen
    (count,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    manifest = []
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        name = raw[pos:pos + nlen].decode()
        pos += nlen
        (ndim,) = struct.unpack_from("<B", raw, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, pos)
        pos += 4 * ndim
        manifest.append((name, shape))
    arrays = {}
    for name, shape in manifest:
        n = int(np.prod(shape)) if shape else 1
        vals = np.frombuffer(raw, dtype="<f4", count=n, offset=pos)
        pos += 4 * n
        arrays[name] = vals.reshape(shape).astype(np.float64)
    if pos != len(raw):
        raise DataError(f"{path}: {len(raw) - pos} trailing bytes")
    out = (header["kind"], header["config"], header["seed"], arrays)
    if want_extra:
        return (*out, header.get("extra", {}))
    return out


def restore_params(params: ModelParams, arrays: dict, path="checkpoint"):
    """Overwrite a freshly initialized ModelParams with checkpoint arrays."""
    names = params.names()
    if names != list(arrays):
        raise DataError(f"{path}: parameter manifest does not match the config")
    for name in names:
        t = params[name]
        if arrays[name].shape != t.data.shape:
            raise DataError(f"{path}: shape mismatch for {name}")
        t.data[...] = arrays[name]
    return params
