"""Dealer setup bundling all key material for one simulated system.

`CryptoSuite.setup(n, f, seed)` derives, deterministically from the seed:
  * per-party Ed25519 keys for the (2f+1, n) quorum signatures,
  * the (f+1, n) threshold-encryption shares,
  * the coin oracle's PRF key (held by the simulator only).

Each party's secret material serializes to a byte blob so scenario
replays are bit-stable.  Blob layout (little-endian u32 lengths):

    magic "BDK1" | u16 n | u16 f | u16 party |
    u32 len | tsig signing key seed |
    u32 len | tpke share |
"""

from __future__ import annotations

import hashlib
import struct

from ..errors import BadParams
from .coin import CoinOracle
from .tpke import TpkeSetup
from .tsig import CombinedSig, SigShare, TsigSetup

MAGIC = b"BDK1"


def _derive(seed: int, label: str) -> bytes:
    return hashlib.sha256(
        b"bdt-seed" + struct.pack(">q", seed) + label.encode()
    ).digest()


class CryptoSuite:
    def __init__(self, n: int, f: int, seed: int):
        if n < 1 or f < 0:
            raise BadParams(f"bad suite params n={n} f={f}")
        self.n = n
        self.f = f
        self.seed = seed
        self.tsig = TsigSetup(2 * f + 1, n, _derive(seed, "tsig"))
        self.tpke = TpkeSetup(f + 1, n, _derive(seed, "tpke"))
        self.coin = CoinOracle(n, f, _derive(seed, "coin"), self.tsig)

    def party(self, i: int) -> "PartyCrypto":
        if not (1 <= i <= self.n):
            raise BadParams(f"party {i} out of range 1..{self.n}")
        return PartyCrypto(self, i)

    # quorum-proof helpers shared by every verifier
    def verify_share(self, msg: bytes, share: SigShare) -> bool:
        return self.tsig.verify_share(msg, share)

    def combine(self, msg: bytes, shares: list[SigShare]) -> CombinedSig:
        return self.tsig.combine(msg, shares)

    def verify(self, msg: bytes, sig: CombinedSig) -> bool:
        return self.tsig.verify(msg, sig)

    def party_blob(self, i: int) -> bytes:
        sk = self.tsig.sk_bytes[i - 1]
        share = self.tpke.shares[i - 1]
        return b"".join(
            [
                MAGIC,
                struct.pack("<HHH", self.n, self.f, i),
                struct.pack("<I", len(sk)),
                sk,
                struct.pack("<I", len(share)),
                share,
            ]
        )

    @staticmethod
    def parse_blob(blob: bytes) -> dict:
        if blob[:4] != MAGIC:
            raise BadParams("bad key blob magic")
        n, f, party = struct.unpack_from("<HHH", blob, 4)
        off = 10
        (lsk,) = struct.unpack_from("<I", blob, off)
        sk = blob[off + 4 : off + 4 + lsk]
        off += 4 + lsk
        (lsh,) = struct.unpack_from("<I", blob, off)
        share = blob[off + 4 : off + 4 + lsh]
        return {"n": n, "f": f, "party": party, "tsig_sk": sk, "tpke_share": share}


class PartyCrypto:
    """Party i's capability view: can sign with its own key only."""

    def __init__(self, suite: CryptoSuite, i: int):
        self.suite = suite
        self.pid = i

    def sign_share(self, msg: bytes) -> SigShare:
        return self.suite.tsig.sign_share(self.pid, msg)

    def verify_share(self, msg: bytes, share: SigShare) -> bool:
        return self.suite.verify_share(msg, share)

    def combine(self, msg: bytes, shares: list[SigShare]) -> CombinedSig:
        return self.suite.combine(msg, shares)

    def verify(self, msg: bytes, sig: CombinedSig) -> bool:
        return self.suite.verify(msg, sig)

    def coin_share(self, coin_id: bytes) -> SigShare:
        return self.suite.coin.share(self.pid, coin_id)

    def tpke_dec_share(self, ciphertext: bytes):
        return self.suite.tpke.dec_share(self.pid, ciphertext)
