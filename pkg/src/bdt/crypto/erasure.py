"""Systematic (k, n) MDS erasure code over GF(256).

Generator matrix G = V . inv(V[:k]) where V is an n x k Vandermonde
matrix with distinct evaluation points: the top k rows of G are the
identity (systematic), and any k rows remain invertible, so any k of the
n fragments reconstruct the payload.

The original byte length travels in a 4-byte big-endian prefix inside the
padded payload, so decode recovers the exact input.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import BadParams, InsufficientFragments
from . import gf256

_matrix_cache: dict[tuple[int, int], np.ndarray] = {}


def _generator(k: int, n: int) -> np.ndarray:
    key = (k, n)
    g = _matrix_cache.get(key)
    if g is None:
        v = gf256.vandermonde(n, k)
        g = gf256.gf_matmul_numpy(v, gf256.gf_mat_inv(v[:k]))
        _matrix_cache[key] = g
    return g


def encode(k: int, n: int, data: bytes) -> list[bytes]:
    """Split `data` into n fragments, any k of which reconstruct it."""
    if not (1 <= k <= n) or n > 255:
        raise BadParams(f"bad erasure params k={k} n={n}")
    payload = struct.pack(">I", len(data)) + data
    stripe = (len(payload) + k - 1) // k
    stripe = max(stripe, 1)
    payload = payload.ljust(k * stripe, b"\x00")
    d = np.frombuffer(payload, dtype=np.uint8).reshape(k, stripe)
    if k == n:
        frags = d
    else:
        frags = gf256.gf_matmul(_generator(k, n), np.ascontiguousarray(d))
    return [frags[i].tobytes() for i in range(n)]


def decode(k: int, n: int, fragments: list[tuple[int, bytes]]) -> bytes:
    """Reconstruct the payload from >= k (index, fragment) pairs.

    Indices are 0-based fragment positions.  Inputs are trusted; callers
    detect corruption via the Merkle commitment over the fragments.
    """
    if not (1 <= k <= n) or n > 255:
        raise BadParams(f"bad erasure params k={k} n={n}")
    seen: dict[int, bytes] = {}
    for idx, frag in fragments:
        if 0 <= idx < n and idx not in seen:
            seen[idx] = frag
    if len(seen) < k:
        raise InsufficientFragments(f"need {k} fragments, have {len(seen)}")
    idxs = sorted(seen)[:k]
    stripe = len(seen[idxs[0]])
    f = np.zeros((k, stripe), dtype=np.uint8)
    for row, idx in enumerate(idxs):
        if len(seen[idx]) != stripe:
            raise InsufficientFragments("fragment length mismatch")
        f[row] = np.frombuffer(seen[idx], dtype=np.uint8)
    if idxs == list(range(k)):
        d = f  # systematic fast path
    else:
        sub = _generator(k, n)[idxs]
        d = gf256.gf_matmul(gf256.gf_mat_inv(sub), np.ascontiguousarray(f))
    payload = d.tobytes()
    (length,) = struct.unpack(">I", payload[:4])
    if length > len(payload) - 4:
        raise InsufficientFragments("corrupt length prefix")
    return payload[4 : 4 + length]
