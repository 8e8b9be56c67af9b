"""Common-coin oracle for the simulator.

The coin value for an id is the low bit of a keyed PRF whose key only the
simulator holds; scripted adversaries and node code never read it.  The
oracle reveals a value only once f+1 distinct parties have released a
valid share (an ordinary signature over the coin id), which preserves
agreement and unpredictability against scheduled adversaries.
"""

from __future__ import annotations

import hashlib
import hmac

from .tsig import SigShare, TsigSetup

PENDING = None


class CoinOracle:
    def __init__(self, n: int, f: int, key: bytes, tsig: TsigSetup):
        self.n = n
        self.f = f
        self._key = key
        self._tsig = tsig
        self._released: dict[bytes, set[int]] = {}

    def share(self, party: int, coin_id: bytes) -> SigShare:
        return self._tsig.sign_share(party, b"coin" + coin_id)

    def release(self, coin_id: bytes, share: SigShare) -> bool:
        """Register a released share; returns validity."""
        if not self._tsig.verify_share(b"coin" + coin_id, share):
            return False
        self._released.setdefault(coin_id, set()).add(share.signer)
        return True

    def query(self, coin_id: bytes) -> int | None:
        """The coin bit, or None while fewer than f+1 shares are out."""
        if len(self._released.get(coin_id, ())) < self.f + 1:
            return PENDING
        return hmac.new(self._key, coin_id, hashlib.sha256).digest()[0] & 1

    def value_unsafe(self, coin_id: bytes) -> int:
        """Bypass the gate; test/monitor use only."""
        return hmac.new(self._key, coin_id, hashlib.sha256).digest()[0] & 1
