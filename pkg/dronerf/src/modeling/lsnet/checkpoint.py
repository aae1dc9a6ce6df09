"""
Checkpoint container.

    bytes 0..7    magic b"LSNETCKP"
    bytes 8..15   header length, unsigned little-endian
    header        UTF-8 JSON: format version, LSNetConfig, build seed, and for
                  every tensor its name, kind, shape, original dtype, byte
                  offset and byte length inside the payload
    payload       concatenated little-endian float32 arrays

Parameters and buffers (batch-norm running statistics) are both stored.
Integer buffers are written as float32 and cast back on load.
"""

import json
import struct
from pathlib import Path

import numpy as np
import torch

from dronerf.src.errors import ValidationError
from dronerf.src.modeling.lsnet.config import LSNetConfig
from dronerf.src.modeling.lsnet.network import build_lsnet


MAGIC = b"LSNETCKP"
FORMAT_VERSION = 1
PAYLOAD_DTYPE = "<f4"


def encode_checkpoint(model, extra=None):
    """
    Serialize a model to bytes.

    Args:
        model (LSNet): model to store
        extra (dict): JSON-serializable metadata kept in the header

    Returns:
        bytes
    """
    parameter_names = {name for name, _ in model.named_parameters()}
    entries = []
    chunks = []
    offset = 0
    for name, tensor in model.state_dict().items():
        array = tensor.detach().cpu().numpy().astype(PAYLOAD_DTYPE)
        raw = array.tobytes(order="C")
        entries.append({
            "name": name,
            "kind": "parameter" if name in parameter_names else "buffer",
            "shape": list(tensor.shape),
            "dtype": str(tensor.dtype).replace("torch.", ""),
            "offset": offset,
            "nbytes": len(raw),
        })
        chunks.append(raw)
        offset += len(raw)

    header = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "seed": getattr(model, "build_seed", None),
        "payload_dtype": "float32-le",
        "tensors": entries,
        "extra": extra or {},
    }
    header_bytes = json.dumps(header, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(header_bytes)) + header_bytes + b"".join(chunks)


def decode_header(blob):
    """Split a checkpoint blob into (header dict, payload bytes)."""
    if len(blob) < 16 or blob[:8] != MAGIC:
        raise ValidationError("Not an LSNet checkpoint (bad magic)")
    (length,) = struct.unpack("<Q", blob[8:16])
    if 16 + length > len(blob):
        raise ValidationError("Truncated checkpoint header")
    header = json.loads(blob[16:16 + length].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise ValidationError(f"Unsupported checkpoint version {header.get('format_version')}")
    return header, blob[16 + length:]


def decode_checkpoint(blob):
    """
    Rebuild a model from bytes.

    Returns:
        tuple: (LSNet, header dict)

    Raises:
        ValidationError: bad magic, truncated data or tensor mismatch
    """
    header, payload = decode_header(blob)
    config = LSNetConfig.from_dict(header["config"])
    model = build_lsnet(config, seed=header.get("seed") or 0)
    if header.get("seed") is not None:
        model.build_seed = int(header["seed"])

    expected = model.state_dict()
    names = [entry["name"] for entry in header["tensors"]]
    if names != list(expected):
        raise ValidationError("Checkpoint tensors do not match the model layout")

    state = {}
    for entry in header["tensors"]:
        start, stop = entry["offset"], entry["offset"] + entry["nbytes"]
        if stop > len(payload):
            raise ValidationError(f"Truncated payload for {entry['name']}")
        array = np.frombuffer(payload[start:stop], dtype=PAYLOAD_DTYPE).reshape(entry["shape"])
        target = expected[entry["name"]]
        if tuple(array.shape) != tuple(target.shape):
            raise ValidationError(f"Shape mismatch for {entry['name']}")
        state[entry["name"]] = torch.from_numpy(array.astype(np.float32)).to(getattr(torch, entry["dtype"]))

    model.load_state_dict(state)
    return model, header


def save_checkpoint(model, path, extra=None):
    """Write a checkpoint file; returns its size in bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = encode_checkpoint(model, extra)
    path.write_bytes(blob)
    return len(blob)


def load_checkpoint(path):
    """Read a checkpoint file; returns (LSNet, header)."""
    return decode_checkpoint(Path(path).read_bytes())
