"""Merkle commitments with leaf/node domain separation.

leaf digest  = sha256(0x00 || leaf)
inner digest = sha256(0x01 || left || right)

Leaf count is padded to the next power of two by repeating the last leaf
digest.  A single leaf yields root = leaf digest and an empty branch.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from ..errors import EmptyTree

DIGEST_LEN = 32


def hash_data(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _leaf(data: bytes) -> bytes:
    return hashlib.sha256(b"\x00" + data).digest()


def _inner(left: bytes, right: bytes) -> bytes:
    return hashlib.sha256(b"\x01" + left + right).digest()


@dataclass(frozen=True)
class MerkleProof:
    root: bytes
    leaf_index: int
    branch: tuple[bytes, ...]  # sibling digests, leaf-to-root order


def build(leaves: list[bytes]) -> tuple[bytes, list[MerkleProof]]:
    """Return (root, one proof per input leaf)."""
    if not leaves:
        raise EmptyTree("merkle tree over empty leaf list")
    width = 1
    while width < len(leaves):
        width *= 2
    level = [_leaf(x) for x in leaves]
    level += [level[-1]] * (width - len(level))
    # tree[1] is the root; leaves occupy tree[width:2*width]
    tree = [b""] * width + level
    for i in range(width - 1, 0, -1):
        tree[i] = _inner(tree[2 * i], tree[2 * i + 1])
    root = tree[1]
    proofs = []
    for idx in range(len(leaves)):
        branch = []
        t = width + idx
        while t > 1:
            branch.append(tree[t ^ 1])
            t //= 2
        proofs.append(MerkleProof(root, idx, tuple(branch)))
    return root, proofs


def verify(root: bytes, leaf: bytes, proof: MerkleProof) -> bool:
    if len(root) != DIGEST_LEN or proof.leaf_index < 0:
        return False
    acc = _leaf(leaf)
    idx = proof.leaf_index
    for sib in proof.branch:
        if len(sib) != DIGEST_LEN:
            return False
        acc = _inner(sib, acc) if idx & 1 else _inner(acc, sib)
        idx >>= 1
    if idx != 0:  # branch shorter than the leaf index requires
        return False
    return acc == root
