import hashlib
import json
import zlib

import numpy as np

EPS_UNIT = 1e-10


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"substream keys must be non-negative, got {key}")
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


def substream(master_seed: int, *keys) -> np.random.Generator:
    """Counter-based generator for one (path, step, purpose) draw.

    The stream depends only on the seed and the keys, never on the order in
    which jobs happen to run.
    """
    seq = np.random.SeedSequence(
        int(master_seed), spawn_key=tuple(_key_to_int(k) for k in keys)
    )
    return np.random.Generator(np.random.Philox(seq))


def as_generator(seed, *keys) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return substream(seed, *keys)


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)


def config_hash(payload) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def content_id(path) -> str:
    """Git-style blob id of a file."""
    with open(path, "rb") as fh:
        data = fh.read()
    header = f"blob {len(data)}\0".encode("ascii")
    return hashlib.sha1(header + data).hexdigest()


def clamp_unit(u, eps=EPS_UNIT):
    return np.clip(u, eps, 1.0 - eps)


def equal_long(d: int) -> np.ndarray:
    return np.full(d, 1.0 / d)


def equal_short(d: int) -> np.ndarray:
    return np.full(d, -1.0 / d)


def safe_cosine(a, b) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))
