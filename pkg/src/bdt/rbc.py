"""Erasure-coded reliable broadcast with an optional completion proof.

VAL/ECHO/READY with (n-2f, n) coding and Merkle commitments; delivery
re-encodes the decoded payload and re-checks the root, which is what
gives agreement under a Byzantine sender.  With `prove=True` a fourth
DONE round collects 2f+1 signature shares over the instance id into a
stateless-checkable completion proof (the provable-broadcast variant the
fastlane driver needs); plain mode is what the common-subset reduction
uses.

Thresholds: READY on 2f+1 matching ECHO or f+1 READY; deliver on 2f+1
READY plus n-2f fragments.
"""

from __future__ import annotations

from collections import defaultdict

from . import wire
from .crypto import erasure, merkle
from .crypto.tsig import CombinedSig, SigShare
from .wire import DONE, ECHO, READY, VAL, Cursor, u16


def done_msg(instance: tuple) -> bytes:
    e, s = instance[1], instance[2]
    return wire.prbc_done_msg(e, s)


class RbcInstance:
    def __init__(
        self,
        rt,
        crypto,
        instance: tuple,
        n: int,
        f: int,
        sender: int,
        prove: bool = False,
        on_deliver=None,
        on_finalize=None,
        done_gate=None,
    ):
        self.rt = rt
        self.crypto = crypto
        self.instance = instance
        self.n = n
        self.f = f
        self.k = n - 2 * f
        self.sender = sender
        self.prove = prove
        self.on_deliver = on_deliver
        self.on_finalize = on_finalize
        self.done_gate = done_gate
        self.val_root: bytes | None = None
        self.fragments: dict[bytes, dict[int, bytes]] = defaultdict(dict)
        self.echo_senders: set[int] = set()
        self.ready: dict[bytes, set[int]] = defaultdict(set)
        self.ready_sent = False
        self.payload: bytes | None = None
        self.delivered_root: bytes | None = None
        self.done_sent = False
        self.done_shares: dict[int, SigShare] = {}
        self.proof: CombinedSig | None = None
        self.finalized = False
        self.poisoned = False
        self.abandoned = False

    # --- sender side ---

    def broadcast(self, payload: bytes):
        frags = erasure.encode(self.k, self.n, payload)
        root, proofs = merkle.build(frags)
        for dst in range(1, self.n + 1):
            body = root + u16(dst - 1) + wire.blob(frags[dst - 1]) + wire.encode_branch(proofs[dst - 1])
            self.rt.send(dst, self.instance, VAL, body)

    # --- receiver side ---

    def on_message(self, env):
        if self.abandoned:
            return
        if env.kind == VAL:
            self._on_val(env)
        elif env.kind == ECHO:
            self._on_echo(env)
        elif env.kind == READY:
            self._on_ready(env)
        elif env.kind == DONE and self.prove:
            self._on_done(env)

    def _parse_frag(self, env):
        cur = Cursor(env.payload)
        root = cur.take(32)
        idx = cur.u16()
        frag = cur.blob()
        branch = wire.decode_branch(cur, root, idx)
        return root, idx, frag, branch

    def _on_val(self, env):
        if env.src != self.sender or self.val_root is not None:
            return
        root, idx, frag, branch = self._parse_frag(env)
        if idx != self.rt.pid - 1 or not merkle.verify(root, frag, branch):
            return
        self.val_root = root
        body = root + u16(idx) + wire.blob(frag) + wire.encode_branch(branch)
        self.rt.multicast(self.instance, ECHO, body)
        self._check_progress(root)

    def _on_echo(self, env):
        if env.src in self.echo_senders:
            return
        root, idx, frag, branch = self._parse_frag(env)
        if idx != env.src - 1 or not merkle.verify(root, frag, branch):
            return
        self.echo_senders.add(env.src)
        self.fragments[root][idx] = frag
        self._check_progress(root)

    def _on_ready(self, env):
        cur = Cursor(env.payload)
        root = cur.take(32)
        if env.src in self.ready[root]:
            return
        self.ready[root].add(env.src)
        self._check_progress(root)

    def _send_ready(self, root: bytes):
        if not self.ready_sent:
            self.ready_sent = True
            self.rt.multicast(self.instance, READY, root)

    def _check_progress(self, root: bytes):
        if len(self.fragments[root]) >= 2 * self.f + 1:
            self._send_ready(root)
        if len(self.ready[root]) >= self.f + 1:
            self._send_ready(root)
        if (
            self.payload is None
            and not self.poisoned
            and len(self.ready[root]) >= 2 * self.f + 1
            and len(self.fragments[root]) >= self.k
        ):
            self._decode(root)
        self.maybe_send_done()
        self._maybe_finalize()

    def _decode(self, root: bytes):
        pairs = sorted(self.fragments[root].items())[: self.k]
        payload = erasure.decode(self.k, self.n, pairs)
        refrags = erasure.encode(self.k, self.n, payload)
        reroot, _ = merkle.build(refrags)
        if reroot != root:
            # only a Byzantine sender can reach this; never deliver
            self.poisoned = True
            mon = self.rt.monitor
            if mon is not None:
                mon.on_byz_evidence(self.rt.pid, self.instance, "root-mismatch")
            return
        self.payload = payload
        self.delivered_root = root
        if self.on_deliver is not None:
            self.on_deliver(payload)

    def maybe_send_done(self):
        if (
            self.prove
            and not self.done_sent
            and self.payload is not None
            and (self.done_gate is None or self.done_gate())
        ):
            self.done_sent = True
            share = self.crypto.sign_share(done_msg(self.instance))
            self.rt.multicast(self.instance, DONE, wire.encode_share(share))

    def _on_done(self, env):
        share = wire.decode_share(Cursor(env.payload))
        if share.signer != env.src or share.signer in self.done_shares:
            return
        if not self.crypto.verify_share(done_msg(self.instance), share):
            return
        self.done_shares[share.signer] = share
        self._maybe_finalize()

    def _maybe_finalize(self):
        if (
            self.prove
            and not self.finalized
            and self.payload is not None
            and len(self.done_shares) >= 2 * self.f + 1
        ):
            self.finalized = True
            self.proof = self.crypto.combine(
                done_msg(self.instance), list(self.done_shares.values())
            )
            if self.on_finalize is not None:
                self.on_finalize(self.payload, self.proof)

    def abandon(self):
        self.abandoned = True


def prbc_verify(crypto, epoch: int, slot: int, sig: CombinedSig) -> bool:
    """Stateless completion-proof check."""
    return crypto.verify(wire.prbc_done_msg(epoch, slot), sig)
