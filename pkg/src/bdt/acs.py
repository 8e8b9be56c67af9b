"""Asynchronous common subset: n reliable broadcasts + n binary agreements.

Party i disperses its input through RBC_i; delivery of RBC_j casts input
1 into agreement j (if none cast yet), and once n-f agreements have
decided 1 every remaining agreement gets input 0.  When all n have
decided, the output is the canonically ordered set of payloads for the
1-decided slots, waiting on totality for any still-missing RBC delivery.
"""

from __future__ import annotations

from .rbc import RbcInstance
from .tcvba import TcvInstance


class AcsInstance:
    def __init__(self, rt, crypto, tag: tuple, n: int, f: int, on_output=None):
        self.rt = rt
        self.n = n
        self.f = f
        self.on_output = on_output
        self.tag = tag  # e.g. ("acs", epoch) or ("acs", epoch, round)
        self.rbc_out: dict[int, bytes] = {}
        self.aba_in: dict[int, int] = {}
        self.aba_out: dict[int, int] = {}
        self.output = None
        self.rbcs = {
            j: RbcInstance(
                rt, crypto, ("acsrbc",) + tag[1:] + (j,), n, f, sender=j,
                on_deliver=lambda payload, jj=j: self._on_rbc(jj, payload),
            )
            for j in range(1, n + 1)
        }
        self.abas = {
            j: TcvInstance(
                rt, crypto, ("acsaba",) + tag[1:] + (j,), n, f,
                on_decide=lambda bit, jj=j: self._on_aba(jj, bit),
            )
            for j in range(1, n + 1)
        }

    def input(self, payload: bytes):
        self.rbcs[self.rt.pid].broadcast(payload)

    def on_message(self, env):
        inst = env.instance
        j = inst[-1]
        if inst[0] == "acsrbc" and j in self.rbcs:
            self.rbcs[j].on_message(env)
        elif inst[0] == "acsaba" and j in self.abas:
            self.abas[j].on_message(env)

    def _cast(self, j: int, bit: int):
        if j not in self.aba_in:
            self.aba_in[j] = bit
            self.abas[j].input(bit)

    def _on_rbc(self, j: int, payload: bytes):
        self.rbc_out[j] = payload
        self._cast(j, 1)
        self._maybe_output()

    def _on_aba(self, j: int, bit: int):
        self.aba_out[j] = bit
        if bit == 1 and sum(1 for b in self.aba_out.values() if b == 1) >= self.n - self.f:
            for k in range(1, self.n + 1):
                self._cast(k, 0)
        self._maybe_output()

    def _maybe_output(self):
        if self.output is not None or len(self.aba_out) < self.n:
            return
        chosen = sorted(j for j, b in self.aba_out.items() if b == 1)
        if any(j not in self.rbc_out for j in chosen):
            return  # totality will deliver the stragglers
        self.output = [(j, self.rbc_out[j]) for j in chosen]
        if self.on_output is not None:
            self.on_output(self.output)
