"""Byzantine agreement over two consecutive integer inputs.

Round structure (binary agreement with a common coin, generalized to
integer values):

  * BVAL amplification: relay a value once f+1 distinct parties sent it,
    admit it to bin_values on 2f+1;
  * on the first nonempty bin_values, multicast AUX for one such value;
  * once n-f AUX messages carry values inside bin_values, fix S_r as that
    value set, release a coin share and query the round coin s;
  * S_r = {v}:  if v and s have equal parity, decide v (or halt if a
    previous round already decided); est stays v.
    S_r = {v1, v2}: est becomes the element whose parity equals s.

Restricted to {0, 1} this is a standard asynchronous binary agreement
(the round coin simply picks the estimate), which the common-subset
module reuses.  A decided instance keeps participating until the next
parity-matching single-valued round, then halts; parents act on the first
decision, so a straggling background instance never blocks the caller.

A black-box alternative (input dispersal + one binary agreement) is
provided for differential testing.
"""

from __future__ import annotations

from collections import defaultdict

from . import wire
from .wire import AUX, BVAL, COINSHARE, VALUE, Cursor, u32, u64


class _Round:
    __slots__ = (
        "bval_recv", "bval_sent", "bin_values", "aux_sent",
        "aux_arrivals", "aux_seen", "s_set", "coin_released", "closed",
    )

    def __init__(self):
        self.bval_recv: dict[int, set[int]] = defaultdict(set)
        self.bval_sent: set[int] = set()
        self.bin_values: set[int] = set()
        self.aux_sent = False
        self.aux_arrivals: list[tuple[int, int]] = []  # (sender, value)
        self.aux_seen: set[int] = set()
        self.s_set: frozenset[int] | None = None
        self.coin_released = False
        self.closed = False


class TcvInstance:
    """One agreement instance for one party."""

    def __init__(self, rt, crypto, instance: tuple, n: int, f: int, on_decide=None):
        self.rt = rt
        self.crypto = crypto
        self.instance = instance
        self.n = n
        self.f = f
        self.on_decide = on_decide
        self.round = 0          # 0 = not started
        self.est = None
        self.decided = None
        self.decide_round = None
        self.halted = False
        self.halt_round = None
        self.rounds: dict[int, _Round] = defaultdict(_Round)

    # --- wire ---

    def _coin_id(self, r: int) -> bytes:
        return wire.instance_bytes(self.instance) + u32(r)

    def _send_bval(self, r: int, v: int):
        st = self.rounds[r]
        if v in st.bval_sent:
            return
        st.bval_sent.add(v)
        self.rt.multicast(self.instance, BVAL, u32(r) + u64(v))

    def input(self, v: int):
        self.est = v
        self.round = 1
        self._send_bval(1, v)
        self._progress()

    def on_message(self, env):
        if self.halted:
            return
        cur = Cursor(env.payload)
        if env.kind == BVAL:
            r, v = cur.u32(), cur.u64()
            st = self.rounds[r]
            st.bval_recv[v].add(env.src)
            # amplification keeps stragglers live even for rounds we passed
            if len(st.bval_recv[v]) >= self.f + 1:
                self._send_bval(r, v)
            if len(st.bval_recv[v]) >= 2 * self.f + 1:
                st.bin_values.add(v)
        elif env.kind == AUX:
            r, v = cur.u32(), cur.u64()
            st = self.rounds[r]
            if env.src not in st.aux_seen:
                st.aux_seen.add(env.src)
                st.aux_arrivals.append((env.src, v))
        elif env.kind == COINSHARE:
            pass  # a release elsewhere may have opened the gate; just re-check
        self._progress()

    # --- round engine ---

    def _progress(self):
        while not self.halted and self.round >= 1:
            r = self.round
            st = self.rounds[r]
            if not st.aux_sent and st.bin_values:
                st.aux_sent = True
                w = min(st.bin_values)
                self.rt.multicast(self.instance, AUX, u32(r) + u64(w))
            if st.s_set is None and st.aux_sent:
                qualified = [
                    (src, v) for (src, v) in st.aux_arrivals if v in st.bin_values
                ]
                if len(qualified) >= self.n - self.f:
                    st.s_set = frozenset(v for _, v in qualified[: self.n - self.f])
                    mon = self.rt.monitor
                    if mon is not None:
                        mon.on_s_formed(self.instance, r, st.s_set)
            if st.s_set is None:
                return
            if not st.coin_released:
                st.coin_released = True
                cid = self._coin_id(r)
                share = self.crypto.coin_share(cid)
                self.crypto.suite.coin.release(cid, share)
                self.rt.multicast(
                    self.instance, COINSHARE, u32(r) + wire.encode_share(share)
                )
            s = self.crypto.suite.coin.query(self._coin_id(r))
            if s is None:
                return  # fewer than f+1 shares released yet
            if st.closed:
                return
            st.closed = True
            values = sorted(st.s_set)
            if len(values) == 1:
                v = values[0]
                if v % 2 == s % 2:
                    if self.decided is None:
                        self.decided = v
                        self.decide_round = r
                        if self.on_decide is not None:
                            self.on_decide(v)
                    else:
                        self.halted = True
                        self.halt_round = r
                        return
                self.est = v
            else:
                v1, v2 = values[0], values[-1]
                self.est = v1 if v1 % 2 == s % 2 else v2
            self.round = r + 1
            self._send_bval(self.round, self.est)
            # loop: buffered messages may already complete the new round


class TcvBlackbox:
    """Alternative construction: disperse inputs, agree on the parity bit."""

    def __init__(self, rt, crypto, instance: tuple, n: int, f: int, on_decide=None):
        self.rt = rt
        self.instance = instance
        self.n = n
        self.f = f
        self.on_decide = on_decide
        self.values: dict[int, set[int]] = defaultdict(set)  # value -> senders
        self.aba = TcvInstance(
            rt, crypto, instance + ("aba",), n, f, on_decide=self._on_bit
        )
        self.aba_input_cast = False
        self.bit = None
        self.decided = None

    def input(self, v: int):
        self.rt.multicast(self.instance, VALUE, u64(v))
        self._progress()

    def on_message(self, env):
        if env.instance == self.instance and env.kind == VALUE:
            v = Cursor(env.payload).u64()
            self.values[v].add(env.src)
            self._progress()
        elif env.instance[: len(self.instance)] == self.instance:
            self.aba.on_message(env)

    def _on_bit(self, bit: int):
        self.bit = bit
        self._progress()

    def _progress(self):
        if not self.aba_input_cast:
            for v, senders in sorted(self.values.items()):
                if len(senders) >= self.f + 1:
                    self.aba_input_cast = True
                    self.aba.input(v % 2)
                    break
        if self.bit is not None and self.decided is None:
            for v, senders in sorted(self.values.items()):
                if v % 2 == self.bit and len(senders) >= self.f + 1:
                    self.decided = v
                    if self.on_decide is not None:
                        self.on_decide(v)
                    break
