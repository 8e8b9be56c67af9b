"""Block/proof types and byte-exact message encodings.

All protocol payloads are real byte strings so the per-message byte
metrics are exact and stable.  Integers in fastlane messages are 8-byte
big-endian; agreement messages use (round: u32, value: u64).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .crypto.merkle import MerkleProof
from .crypto.tsig import SHARE_LEN, CombinedSig, SigShare

# message kinds (1-byte wire discriminators)
PROPOSAL = "P"
VOTE = "V"
VAL = "v"
ECHO = "e"
READY = "r"
DONE = "d"
PACESYNC = "S"
BVAL = "B"
AUX = "A"
COINSHARE = "C"
DEC = "D"
HELP_REQ = "q"
HELP_RESP = "h"
VALUE = "U"  # black-box agreement input dispersal


class Cursor:
    __slots__ = ("buf", "off")

    def __init__(self, buf: bytes):
        self.buf = buf
        self.off = 0

    def u64(self) -> int:
        (v,) = struct.unpack_from(">Q", self.buf, self.off)
        self.off += 8
        return v

    def u32(self) -> int:
        (v,) = struct.unpack_from(">I", self.buf, self.off)
        self.off += 4
        return v

    def u16(self) -> int:
        (v,) = struct.unpack_from(">H", self.buf, self.off)
        self.off += 2
        return v

    def take(self, nbytes: int) -> bytes:
        out = self.buf[self.off : self.off + nbytes]
        self.off += nbytes
        return out

    def blob(self) -> bytes:
        return self.take(self.u32())


def u64(v: int) -> bytes:
    return struct.pack(">Q", v)


def u32(v: int) -> bytes:
    return struct.pack(">I", v)


def u16(v: int) -> bytes:
    return struct.pack(">H", v)


def blob(b: bytes) -> bytes:
    return u32(len(b)) + b


def encode_txs(txs: tuple[bytes, ...]) -> bytes:
    return u64(len(txs)) + b"".join(blob(t) for t in txs)


def decode_txs(cur: Cursor) -> tuple[bytes, ...]:
    count = cur.u64()
    return tuple(cur.blob() for _ in range(count))


@dataclass(frozen=True)
class QuorumProof:
    digest: bytes
    sig: CombinedSig

    def encode(self) -> bytes:
        return blob(self.digest) + blob(self.sig.encode())

    @classmethod
    def decode(cls, cur: Cursor) -> "QuorumProof":
        return cls(cur.blob(), CombinedSig.decode(cur.blob()))


@dataclass(frozen=True)
class Block:
    epoch: int
    slot: int
    txs: tuple[bytes, ...]
    proof: QuorumProof | None

    def encode(self) -> bytes:
        head = u64(self.epoch) + u64(self.slot) + encode_txs(self.txs)
        if self.proof is None:
            return head + b"\x00"
        return head + b"\x01" + self.proof.encode()

    @classmethod
    def decode(cls, cur: Cursor) -> "Block":
        epoch = cur.u64()
        slot = cur.u64()
        txs = decode_txs(cur)
        proof = None
        if cur.take(1) == b"\x01":
            proof = QuorumProof.decode(cur)
        return cls(epoch, slot, txs, proof)


def encode_blocks(blocks: list[Block]) -> bytes:
    return u32(len(blocks)) + b"".join(blob(b.encode()) for b in blocks)


def decode_blocks(raw: bytes) -> list[Block]:
    cur = Cursor(raw)
    count = cur.u32()
    return [Block.decode(Cursor(cur.blob())) for _ in range(count)]


# --- signed-message tags (domain separation; parsed by the monitor) ---

HS_VOTE_TAG = b"HV"
PRBC_DONE_TAG = b"PD"


def hs_vote_msg(epoch: int, slot: int, digest: bytes) -> bytes:
    return HS_VOTE_TAG + u64(epoch) + u64(slot) + digest


def prbc_done_msg(epoch: int, slot: int) -> bytes:
    return PRBC_DONE_TAG + u64(epoch) + u64(slot)


def parse_signed_tag(msg: bytes):
    """-> ("hs"|"prbc", epoch, slot, digest|None) or None for other messages."""
    if msg[:2] == HS_VOTE_TAG:
        return ("hs", struct.unpack_from(">Q", msg, 2)[0],
                struct.unpack_from(">Q", msg, 10)[0], msg[18:])
    if msg[:2] == PRBC_DONE_TAG:
        return ("prbc", struct.unpack_from(">Q", msg, 2)[0],
                struct.unpack_from(">Q", msg, 10)[0], None)
    return None


def instance_bytes(instance: tuple) -> bytes:
    """Canonical encoding of an instance tag (also used for coin ids)."""
    parts = []
    for item in instance:
        if isinstance(item, int):
            parts.append(b"i" + u64(item))
        else:
            raw = item.encode()
            parts.append(b"s" + u16(len(raw)) + raw)
    return b"".join(parts)


def instance_str(instance: tuple) -> str:
    return ":".join(str(x) for x in instance)


# --- merkle branch helpers ---

def encode_branch(proof: MerkleProof) -> bytes:
    return u16(len(proof.branch)) + b"".join(proof.branch)


def decode_branch(cur: Cursor, root: bytes, leaf_index: int) -> MerkleProof:
    count = cur.u16()
    return MerkleProof(root, leaf_index, tuple(cur.take(32) for _ in range(count)))


def encode_share(share: SigShare) -> bytes:
    return share.encode()


def decode_share(cur: Cursor) -> SigShare:
    return SigShare.decode(cur.take(2 + SHARE_LEN))
