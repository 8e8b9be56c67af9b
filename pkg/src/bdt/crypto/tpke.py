"""(f+1, n) threshold encryption: hybrid cipher over a dealer-shared secret.

The dealer's 32-byte master secret is Shamir-shared bytewise over GF(256)
with threshold t.  Encryption derives a per-ciphertext session key from
(master, nonce) and appends an integrity tag.  Decryption shares are the
Shamir shares blinded by a hash of the ciphertext, with per-party share
commitments published at setup, so:

  * shares released for ciphertext c are useless against c' != c
    (unblinding with the wrong digest fails the commitment check);
  * garbage shares from Byzantine parties are rejected, keeping
    robustness with any t honest shares.

CCA security is explicitly a non-goal; this targets contract-level
behaviour for deterministic desk-scale runs.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from ..errors import BadParams, InsufficientShares, MalformedCiphertext
from .gf256 import EXP, LOG, gf_inv, gf_mul

KEY_LEN = 32
NONCE_LEN = 16
TAG_LEN = 16


def _keystream(key: bytes, length: int) -> bytes:
    out = []
    counter = 0
    while length > 0:
        block = hashlib.sha256(key + counter.to_bytes(8, "big")).digest()
        out.append(block[:length])
        length -= len(block[:length])
        counter += 1
    return b"".join(out)


def _commitment(party: int, share: bytes) -> bytes:
    return hashlib.sha256(b"tpke-com" + party.to_bytes(2, "big") + share).digest()


def _blinder(c_digest: bytes, party: int) -> bytes:
    return _keystream(b"tpke-blind" + c_digest + party.to_bytes(2, "big"), KEY_LEN)


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


@dataclass(frozen=True)
class DecShare:
    party: int
    payload: bytes  # blinded Shamir share, KEY_LEN bytes

    def encode(self) -> bytes:
        return self.party.to_bytes(2, "big") + self.payload

    @classmethod
    def decode(cls, raw: bytes) -> "DecShare":
        return cls(int.from_bytes(raw[:2], "big"), raw[2:])


class TpkeSetup:
    def __init__(self, t: int, n: int, seed: bytes):
        if not (1 <= t <= n) or n > 255:
            raise BadParams(f"bad tpke params t={t} n={n}")
        self.t = t
        self.n = n
        rng = random.Random(int.from_bytes(hashlib.sha256(b"tpke" + seed).digest(), "big"))
        self.master = bytes(rng.randrange(256) for _ in range(KEY_LEN))
        # bytewise Shamir: per byte position, a degree t-1 polynomial
        coeffs = [
            [rng.randrange(256) for _ in range(t - 1)] for _ in range(KEY_LEN)
        ]
        self.shares: list[bytes] = []
        for x in range(1, n + 1):
            share = bytearray(KEY_LEN)
            for b in range(KEY_LEN):
                acc = self.master[b]
                xp = 1
                for c in coeffs[b]:
                    xp = gf_mul(xp, x)
                    acc ^= gf_mul(c, xp)
                share[b] = acc
            self.shares.append(bytes(share))
        self.commitments = [
            _commitment(i + 1, self.shares[i]) for i in range(n)
        ]

    def encrypt(self, plaintext: bytes, rng: random.Random) -> bytes:
        nonce = bytes(rng.randrange(256) for _ in range(NONCE_LEN))
        session = hashlib.sha256(b"tpke-key" + self.master + nonce).digest()
        body = _xor(plaintext, _keystream(session, len(plaintext)))
        tag = hashlib.sha256(b"tpke-tag" + session + body).digest()[:TAG_LEN]
        return nonce + body + tag

    def dec_share(self, party: int, ciphertext: bytes) -> DecShare | None:
        """Returns None for structurally ill-formed ciphertexts."""
        if len(ciphertext) < NONCE_LEN + TAG_LEN:
            return None
        digest = hashlib.sha256(ciphertext).digest()
        blinded = _xor(self.shares[party - 1], _blinder(digest, party))
        return DecShare(party, blinded)

    def decrypt(self, ciphertext: bytes, shares: list[DecShare]) -> bytes:
        if len(ciphertext) < NONCE_LEN + TAG_LEN:
            raise MalformedCiphertext("ciphertext too short")
        digest = hashlib.sha256(ciphertext).digest()
        valid: dict[int, bytes] = {}
        for sh in shares:
            if not (1 <= sh.party <= self.n) or len(sh.payload) != KEY_LEN:
                continue
            if sh.party in valid:
                continue
            candidate = _xor(sh.payload, _blinder(digest, sh.party))
            if _commitment(sh.party, candidate) == self.commitments[sh.party - 1]:
                valid[sh.party] = candidate
        if len(valid) < self.t:
            raise InsufficientShares(f"need {self.t} valid shares, have {len(valid)}")
        xs = sorted(valid)[: self.t]
        # Lagrange interpolation at 0, bytewise over GF(256)
        master = bytearray(KEY_LEN)
        for xi in xs:
            lam = 1
            for xj in xs:
                if xj != xi:
                    lam = gf_mul(lam, gf_mul(xj, gf_inv(xj ^ xi)))
            share = valid[xi]
            if lam == 0:
                continue
            llog = int(LOG[lam])
            for b in range(KEY_LEN):
                sb = share[b]
                if sb:
                    master[b] ^= EXP[llog + LOG[sb]]
        session = hashlib.sha256(b"tpke-key" + bytes(master) + ciphertext[:NONCE_LEN]).digest()
        body = ciphertext[NONCE_LEN:-TAG_LEN]
        tag = hashlib.sha256(b"tpke-tag" + session + body).digest()[:TAG_LEN]
        if tag != ciphertext[-TAG_LEN:]:
            raise MalformedCiphertext("integrity tag mismatch")
        return _xor(body, _keystream(session, len(body)))
