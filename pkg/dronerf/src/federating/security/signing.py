"""
Signed model updates.

A client serializes its full parameter set canonically (sorted names,
little-endian arrays), hashes it together with the round index, server nonce,
client id and sample count, and signs the digest with its Ed25519 key.
"""

import hashlib
import struct
from collections import OrderedDict
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

from dronerf.src.errors import ValidationError, VerificationError
from dronerf.src.federating.config.config import SIGNATURE_SCHEME, STREAM_KEYS
from dronerf.src.utils.seeding import rng_for


@dataclass(frozen=True)
class SignedUpdate:
    client_id: int
    round_index: int
    nonce: str
    parameters: OrderedDict     # name -> np.ndarray
    sample_count: int
    digest: bytes
    signature: bytes

    def with_parameters(self, parameters):
        """Copy with different parameters and the old digest/signature."""
        return replace(self, parameters=parameters)


def _little_endian(array):
    array = np.ascontiguousarray(array)
    return array.astype(array.dtype.newbyteorder("<"), copy=False)


def canonical_bytes(parameters):
    """
    Canonical serialization of a parameter set.

    Each entry, in sorted name order: name, dtype, shape, raw little-endian data.
    """
    chunks = []
    for name in sorted(parameters):
        array = _little_endian(parameters[name])
        header = f"{name}|{array.dtype.str}|{','.join(str(s) for s in array.shape)}|".encode("utf-8")
        chunks.append(struct.pack("<I", len(header)) + header)
        chunks.append(struct.pack("<Q", array.nbytes) + array.tobytes(order="C"))
    return b"".join(chunks)


def compute_digest(parameters, client_id, round_index, nonce, sample_count):
    """SHA-256 over the bound metadata followed by the canonical parameters."""
    h = hashlib.sha256()
    h.update(f"dronerf-update|client={int(client_id)}|round={int(round_index)}|"
             f"nonce={nonce}|samples={int(sample_count)}|".encode("utf-8"))
    h.update(canonical_bytes(parameters))
    return h.digest()


def generate_keypair(seed, client_id):
    """Deterministic Ed25519 key for a client, derived from the federation seed."""
    secret = rng_for(seed, STREAM_KEYS, client_id).bytes(32)
    return Ed25519PrivateKey.from_private_bytes(secret)


def public_bytes(key):
    if isinstance(key, Ed25519PrivateKey):
        key = key.public_key()
    return key.public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)


def sign_update(parameters, client_id, round_index, nonce, sample_count, private_key):
    """
    Build a SignedUpdate.

    Args:
        parameters (OrderedDict): full local model state
        client_id (int): submitting client
        round_index (int): round the update belongs to
        nonce (str): server nonce for the round (hex)
        sample_count (int): local training samples
        private_key (Ed25519PrivateKey): client key

    Returns:
        SignedUpdate
    """
    digest = compute_digest(parameters, client_id, round_index, nonce, sample_count)
    return SignedUpdate(
        client_id=int(client_id),
        round_index=int(round_index),
        nonce=str(nonce),
        parameters=parameters,
        sample_count=int(sample_count),
        digest=digest,
        signature=private_key.sign(digest),
    )


class KeyRegistry:
    """Server-side map of client id to registered public key."""

    def __init__(self):
        self._keys = {}

    def __contains__(self, client_id):
        return int(client_id) in self._keys

    def __len__(self):
        return len(self._keys)

    def register(self, client_id, public_key):
        if isinstance(public_key, Ed25519PrivateKey):
            public_key = public_key.public_key()
        if not isinstance(public_key, Ed25519PublicKey):
            raise ValidationError(f"Client {client_id}: only {SIGNATURE_SCHEME} keys are supported")
        self._keys[int(client_id)] = public_key

    def public_key(self, client_id):
        try:
            return self._keys[int(client_id)]
        except KeyError as e:
            raise VerificationError(f"Client {client_id} is not registered") from e

    def to_records(self):
        return [
            {"client_id": cid, "public_key": public_bytes(key).hex(), "scheme": SIGNATURE_SCHEME}
            for cid, key in sorted(self._keys.items())
        ]

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump({"clients": self.to_records()}, f, sort_keys=False)
        return path

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
        registry = cls()
        for record in data.get("clients", []):
            if record.get("scheme") != SIGNATURE_SCHEME:
                raise ValidationError(f"Unsupported key scheme {record.get('scheme')!r}")
            registry.register(
                record["client_id"],
                Ed25519PublicKey.from_public_bytes(bytes.fromhex(record["public_key"])),
            )
        return registry
