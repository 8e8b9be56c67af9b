"""Fastlane from sequential provable reliable broadcasts.

The leader disperses batch s through PRBC[(e, s)] and starts slot s+1
only once its own instance s carries a completion proof; every party
emits its completion share for slot s only after delivering both s and
s-1, which is what makes a slot-s proof attest that f+1 honest parties
hold slot s-1.  Blocks surface to the epoch layer in slot order.
"""

from __future__ import annotations

from .rbc import RbcInstance
from .wire import Block, QuorumProof, decode_txs, encode_txs, Cursor
from .crypto.merkle import hash_data


class BoltRbc:
    def __init__(self, rt, crypto, epoch, leader, n, f, esize, batch_fn, on_deliver):
        self.rt = rt
        self.crypto = crypto
        self.epoch = epoch
        self.leader = leader
        self.n = n
        self.f = f
        self.esize = esize
        self.batch_fn = batch_fn
        self.on_deliver = on_deliver
        self.is_leader = rt.pid == leader
        self.abandoned = False
        self.instances: dict[int, RbcInstance] = {}
        self.finalized: dict[int, tuple[bytes, object]] = {}
        self.next_deliver = 1
        self.leader_slot = 1

    def _instance(self, slot: int) -> RbcInstance:
        inst = self.instances.get(slot)
        if inst is None:
            inst = RbcInstance(
                self.rt,
                self.crypto,
                ("prbc", self.epoch, slot),
                self.n,
                self.f,
                sender=self.leader,
                prove=True,
                on_deliver=lambda payload, s=slot: self._on_rbc_deliver(s),
                on_finalize=lambda payload, proof, s=slot: self._on_finalize(s, payload, proof),
                done_gate=lambda s=slot: self._done_gate(s),
            )
            self.instances[slot] = inst
        return inst

    def _done_gate(self, slot: int) -> bool:
        if slot == 1:
            return True
        prev = self.instances.get(slot - 1)
        return prev is not None and prev.payload is not None

    def _on_rbc_deliver(self, slot: int):
        # slot s delivering may unblock the completion share for slot s+1
        nxt = self.instances.get(slot + 1)
        if nxt is not None:
            nxt.maybe_send_done()

    def _on_finalize(self, slot: int, payload: bytes, proof):
        self.finalized[slot] = (payload, proof)
        if self.is_leader and slot == self.leader_slot:
            self.leader_slot += 1
            if self.leader_slot <= self.esize and not self.abandoned:
                self._instance(self.leader_slot).broadcast(
                    encode_txs(self.batch_fn(self.leader_slot))
                )
        while self.next_deliver in self.finalized and not self.abandoned:
            pay, prf = self.finalized[self.next_deliver]
            txs = decode_txs(Cursor(pay))
            block = Block(
                self.epoch, self.next_deliver, txs, QuorumProof(hash_data(pay), prf)
            )
            self.next_deliver += 1
            self.on_deliver(block)

    def start(self):
        if self.is_leader:
            self._instance(1).broadcast(encode_txs(self.batch_fn(1)))

    def abandon(self):
        self.abandoned = True
        for inst in self.instances.values():
            inst.abandon()

    def on_message(self, env):
        if self.abandoned:
            return
        slot = env.instance[2]
        if 1 <= slot <= self.esize:
            self._instance(slot).on_message(env)
