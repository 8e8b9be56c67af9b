"""(t, n) threshold signatures realized as transparent multi-signatures.

A combined signature is simply a set of t share signatures from distinct
signers; verification checks each member share.  This keeps robustness
(any t valid shares combine), non-interactivity, and structural
unforgeability (a verifying set needs t distinct parties' keys) without
pairing crypto.  Sizes are O(t*64) bytes, which the byte metrics label
explicitly.

Shares are Ed25519 signatures under per-party keys from a seeded dealer;
signing is deterministic (RFC 8032), so runs replay bit-identically.
Sign and verify results are memoized per setup: in one simulated run the
same share is verified by many parties.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from ..errors import BadParams, BadShareSet

SHARE_LEN = 64


@dataclass(frozen=True)
class SigShare:
    signer: int  # 1..n
    payload: bytes

    def encode(self) -> bytes:
        return self.signer.to_bytes(2, "big") + self.payload

    @classmethod
    def decode(cls, raw: bytes) -> "SigShare":
        return cls(int.from_bytes(raw[:2], "big"), raw[2:])


@dataclass(frozen=True)
class CombinedSig:
    shares: tuple[SigShare, ...]

    def encode(self) -> bytes:
        out = [len(self.shares).to_bytes(2, "big")]
        for sh in self.shares:
            out.append(sh.signer.to_bytes(2, "big"))
            out.append(sh.payload)
        return b"".join(out)

    @classmethod
    def decode(cls, raw: bytes) -> "CombinedSig":
        count = int.from_bytes(raw[:2], "big")
        shares = []
        off = 2
        for _ in range(count):
            signer = int.from_bytes(raw[off : off + 2], "big")
            shares.append(SigShare(signer, raw[off + 2 : off + 2 + SHARE_LEN]))
            off += 2 + SHARE_LEN
        return cls(tuple(shares))


class TsigSetup:
    """Dealer-generated key material for n parties with threshold t."""

    def __init__(self, t: int, n: int, seed: bytes):
        if not (1 <= t <= n):
            raise BadParams(f"bad tsig params t={t} n={n}")
        self.t = t
        self.n = n
        self._sks: list[Ed25519PrivateKey] = []
        self._pks: list[Ed25519PublicKey] = []
        self.sk_bytes: list[bytes] = []
        self.vk_bytes: list[bytes] = []
        for i in range(1, n + 1):
            material = hashlib.sha256(b"tsig-sk" + seed + i.to_bytes(4, "big")).digest()
            sk = Ed25519PrivateKey.from_private_bytes(material)
            self._sks.append(sk)
            self.sk_bytes.append(material)
            pk = sk.public_key()
            self._pks.append(pk)
            self.vk_bytes.append(pk.public_bytes(Encoding.Raw, PublicFormat.Raw))
        self._sign_cache: dict[tuple[int, bytes], bytes] = {}
        self._verify_cache: dict[tuple[int, bytes, bytes], bool] = {}
        # set by the simulator to observe share creation (safety monitors)
        self.observer = None

    def sign_share(self, party: int, msg: bytes) -> SigShare:
        key = (party, msg)
        sig = self._sign_cache.get(key)
        if sig is None:
            sig = self._sks[party - 1].sign(msg)
            self._sign_cache[key] = sig
            if self.observer is not None:
                self.observer.on_share(party, msg)
        return SigShare(party, sig)

    def verify_share(self, msg: bytes, share: SigShare) -> bool:
        if not (1 <= share.signer <= self.n) or len(share.payload) != SHARE_LEN:
            return False
        key = (share.signer, msg, share.payload)
        ok = self._verify_cache.get(key)
        if ok is None:
            try:
                self._pks[share.signer - 1].verify(share.payload, msg)
                ok = True
            except InvalidSignature:
                ok = False
            self._verify_cache[key] = ok
        return ok

    def combine(self, msg: bytes, shares: list[SigShare]) -> CombinedSig:
        seen: dict[int, SigShare] = {}
        for sh in shares:
            if sh.signer in seen:
                raise BadShareSet(f"duplicate signer {sh.signer}")
            if not self.verify_share(msg, sh):
                raise BadShareSet(f"invalid share from {sh.signer}")
            seen[sh.signer] = sh
        if len(seen) < self.t:
            raise BadShareSet(f"need {self.t} shares, got {len(seen)}")
        picked = tuple(seen[i] for i in sorted(seen)[: self.t])
        return CombinedSig(picked)

    def verify(self, msg: bytes, sig: CombinedSig) -> bool:
        signers = {sh.signer for sh in sig.shares}
        if len(signers) < self.t or len(sig.shares) < self.t:
            return False
        return all(self.verify_share(msg, sh) for sh in sig.shares)
