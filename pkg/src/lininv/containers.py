"""INVT tensor container I/O.

Layout (all integers little-endian):

    magic   4 bytes  b"INVT"
    version u32      currently 1
    dtype   u32      1 = float32 (the only defined code)
    rank    u32
    dims    rank x u64
    data    prod(dims) float32, row-major

Checkpoints are a directory holding one container per named parameter plus a
JSON description; see :func:`write_checkpoint`.
"""

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"INVT"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 1


def write_tensor(path, array):
    """Serialize ``array`` as float32 into an INVT container at ``path``."""
    arr = np.ascontiguousarray(array, dtype=np.float32)
    header = MAGIC + struct.pack("<III", FORMAT_VERSION, DTYPE_FLOAT32, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(dims)
        fh.write(arr.astype("<f4", copy=False).tobytes())
    return path


def read_tensor(path):
    """Read an INVT container back into a float32 ndarray."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: not an INVT container (bad magic {blob[:4]!r})")
    version, dtype_code, rank = struct.unpack_from("<III", blob, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    if dtype_code != DTYPE_FLOAT32:
        raise ValueError(f"{path}: unsupported dtype code {dtype_code}")
    offset = 16
    dims = struct.unpack_from(f"<{rank}Q", blob, offset) if rank else ()
    offset += 8 * rank
    count = int(np.prod(dims)) if rank else 1
    data = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
    expected_end = offset + 4 * count
    if len(blob) != expected_end:
        raise ValueError(f"{path}: trailing or missing bytes (expected {expected_end}, got {len(blob)})")
    return data.reshape(dims).copy()


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(obj):
    """Stable sha256 of a JSON-serializable config."""
    canonical = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_json(path, obj):
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_checkpoint(ckpt_dir, params, meta):
    """Write named parameter tensors plus a JSON description.

    ``params`` maps parameter path (e.g. ``"block0.attn.wq"``) to an ndarray.
    Tensors are stored as float32 containers under ``<dir>/params/``.
    """
    ckpt_dir = Path(ckpt_dir)
    param_dir = ckpt_dir / "params"
    param_dir.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name in sorted(params):
        fname = name.replace(".", "_") + ".invt"
        fpath = write_tensor(param_dir / fname, params[name])
        entries[name] = {
            "file": f"params/{fname}",
            "shape": list(np.asarray(params[name]).shape),
            "sha256": sha256_file(fpath),
        }
    doc = dict(meta)
    doc["parameters"] = entries
    write_json(ckpt_dir / "checkpoint.json", doc)
    return ckpt_dir


def read_checkpoint(ckpt_dir):
    """Load a checkpoint directory; returns (params dict, meta dict)."""
    ckpt_dir = Path(ckpt_dir)
    doc = read_json(ckpt_dir / "checkpoint.json")
    params = {}
    for name, entry in doc["parameters"].items():
        params[name] = read_tensor(ckpt_dir / entry["file"])
    meta = {k: v for k, v in doc.items() if k != "parameters"}
    return params, meta


def checkpoint_element_count(ckpt_dir):
    """Total number of serialized parameter elements in a checkpoint."""
    params, _ = read_checkpoint(ckpt_dir)
    return sum(int(np.prod(p.shape)) if p.ndim else 1 for p in params.values())
