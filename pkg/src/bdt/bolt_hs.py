"""Stable-leader pipelined-multicast fastlane.

Slot protocol: the leader multicasts (proposal, e, s, TXs_s, sig_{s-1});
every party (the leader included, via loopback) votes by sending its
2f+1-threshold share over <e, s, H(TXs_s)> back to the leader, and for
s > 1 delivers the previous slot's block carrying the just-verified
combined signature.  The leader combines 2f+1 distinct valid votes on
slot s into sig_s and pipelines the next proposal.

Votes travel only to the leader, so a committed block costs exactly
2(n-1) network messages.  Followers accept one proposal per slot, process
slots consecutively (buffering ahead-of-sequence proposals), and ignore
everything after abandon.
"""

from __future__ import annotations

import hashlib

from . import wire
from .crypto.tsig import CombinedSig, SigShare
from .wire import PROPOSAL, VOTE, Block, Cursor, QuorumProof, u64


def txs_digest(txs: tuple[bytes, ...]) -> bytes:
    return hashlib.sha256(wire.encode_txs(txs)).digest()


def hs_verify(crypto, epoch: int, slot: int, proof: QuorumProof) -> bool:
    return crypto.verify(wire.hs_vote_msg(epoch, slot, proof.digest), proof.sig)


class BoltHs:
    def __init__(self, rt, crypto, epoch, leader, n, f, esize, batch_fn, on_deliver):
        self.rt = rt
        self.crypto = crypto
        self.epoch = epoch
        self.leader = leader
        self.n = n
        self.f = f
        self.esize = esize
        self.batch_fn = batch_fn          # slot -> tuple of txs (leader only)
        self.on_deliver = on_deliver      # Block -> None
        self.is_leader = rt.pid == leader
        self.abandoned = False
        # follower side
        self.next_slot = 1                # next proposal slot to process
        self.seen: dict[int, tuple[tuple[bytes, ...], bytes]] = {}  # slot -> (txs, digest)
        self.future: dict[int, object] = {}
        # leader side
        self.proposed: dict[int, bytes] = {}          # slot -> digest
        self.votes: dict[int, dict[int, SigShare]] = {}
        self.combined: dict[int, CombinedSig] = {}

    def start(self):
        if self.is_leader:
            self._propose(1, None)

    def abandon(self):
        self.abandoned = True

    # --- leader ---

    def _propose(self, slot: int, prev_sig: CombinedSig | None):
        txs = self.batch_fn(slot)
        digest = txs_digest(txs)
        self.proposed[slot] = digest
        self.votes.setdefault(slot, {})
        body = u64(self.epoch) + u64(slot) + wire.encode_txs(txs)
        if prev_sig is None:
            body += b"\x00"
        else:
            body += b"\x01" + wire.blob(prev_sig.encode())
        # per-slot instance tags keep the per-block message metrics exact
        self.rt.multicast(("hs", self.epoch, slot), PROPOSAL, body)

    def _on_vote(self, env):
        cur = Cursor(env.payload)
        epoch, slot = cur.u64(), cur.u64()
        share = wire.decode_share(cur)
        if epoch != self.epoch or share.signer != env.src:
            return
        digest = self.proposed.get(slot)
        if digest is None or slot in self.combined:
            return
        msg = wire.hs_vote_msg(epoch, slot, digest)
        if not self.crypto.verify_share(msg, share):
            return
        pool = self.votes.setdefault(slot, {})
        if share.signer in pool:
            return
        pool[share.signer] = share
        if len(pool) == 2 * self.f + 1:
            sig = self.crypto.combine(msg, list(pool.values()))
            self.combined[slot] = sig
            # one closing proposal past Esize lets followers deliver slot Esize
            if slot + 1 <= self.esize + 1:
                self._propose(slot + 1, sig)

    # --- every party (leader handles its own proposals via loopback) ---

    def _on_proposal(self, env):
        if env.src != self.leader:
            return
        cur = Cursor(env.payload)
        epoch, slot = cur.u64(), cur.u64()
        txs = wire.decode_txs(cur)
        prev_sig = None
        if cur.take(1) == b"\x01":
            prev_sig = CombinedSig.decode(cur.blob())
        if epoch != self.epoch or slot < self.next_slot:
            return
        if slot > self.next_slot:
            self.future.setdefault(slot, (txs, prev_sig))
            return
        self._process(slot, txs, prev_sig)
        while self.next_slot in self.future:
            txs, prev_sig = self.future.pop(self.next_slot)
            if self.abandoned:
                return
            self._process(self.next_slot, txs, prev_sig)

    def _process(self, slot: int, txs, prev_sig):
        if slot > 1:
            prev_txs, prev_digest = self.seen[slot - 1]
            if prev_sig is None or not self.crypto.verify(
                wire.hs_vote_msg(self.epoch, slot - 1, prev_digest), prev_sig
            ):
                return
            block = Block(
                self.epoch, slot - 1, prev_txs, QuorumProof(prev_digest, prev_sig)
            )
            self.on_deliver(block)
            if self.abandoned:
                return  # delivering slot Esize interrupts the epoch
        digest = txs_digest(txs)
        self.seen[slot] = (txs, digest)
        share = self.crypto.sign_share(wire.hs_vote_msg(self.epoch, slot, digest))
        self.rt.send(
            self.leader, ("hs", self.epoch, slot), VOTE,
            u64(self.epoch) + u64(slot) + wire.encode_share(share),
        )
        self.next_slot = slot + 1

    def on_message(self, env):
        if self.abandoned:
            return
        if env.kind == PROPOSAL:
            self._on_proposal(env)
        elif env.kind == VOTE and self.is_leader:
            self._on_vote(env)
