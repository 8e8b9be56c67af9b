"""Deterministic discrete-event simulation of n parties on adversarial links.

One priority queue keyed by (delivery_time, lane, tiebreak, seq) drives the
whole run; the tiebreak is a seeded hash of the envelope, so identical
configurations replay bit-identically while jitter still reorders
adversarially.  Local "time" at each party is the count of its own
delivered tick messages; ticks traverse the network like any message, and
timers count delivered ticks.

The simulator stamps envelope senders (Byzantine parties cannot spoof
honest ones) and never drops or modifies honest-to-honest traffic, only
delays and reorders it.  Causal round numbers are assigned so that a
message sent after the sender reached depth d carries round d+1.
"""

from __future__ import annotations

import hashlib
import heapq
import random
import struct
from dataclasses import dataclass, field

from .errors import ConfigError
from .wire import instance_str

LANE_LOCAL = 0   # loopback self-delivery: same logical time, before network
LANE_NET = 1

HORIZON_DEFAULT = 1_000_000


def derive_rng(seed: int, label: str) -> random.Random:
    digest = hashlib.sha256(
        b"bdt-rng" + struct.pack(">q", seed) + label.encode()
    ).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


class Envelope:
    __slots__ = ("src", "dst", "instance", "kind", "payload", "send_time", "round")

    def __init__(self, src, dst, instance, kind, payload, send_time, round_):
        self.src = src
        self.dst = dst
        self.instance = instance
        self.kind = kind
        self.payload = payload
        self.send_time = send_time
        self.round = round_

    @property
    def size(self) -> int:
        return len(self.payload)


@dataclass
class DelayModel:
    kind: str = "uniform"  # uniform | jitter
    d: int = 10
    lo: int = 5
    hi: int = 15

    def draw(self, rng: random.Random) -> int:
        if self.kind == "uniform":
            return self.d
        return rng.randint(self.lo, self.hi)


@dataclass
class TargetedRule:
    """Overrides delivery delay for matching envelopes."""

    src: int | None = None
    dst: int | None = None
    proto: str | None = None      # instance[0] match
    t_from: int = 0
    t_until: int | None = None
    delay: int | None = None      # absolute override
    add: int = 0                  # additive penalty

    def matches(self, env: Envelope, now: int) -> bool:
        if self.src is not None and env.src != self.src:
            return False
        if self.dst is not None and env.dst != self.dst:
            return False
        if self.proto is not None and env.instance[0] != self.proto:
            return False
        if now < self.t_from:
            return False
        if self.t_until is not None and now > self.t_until:
            return False
        return True


class Timer:
    __slots__ = ("duration", "remaining")

    def __init__(self, duration: int):
        self.duration = duration
        self.remaining = duration


class PartyRuntime:
    """Per-party shell: tick clock, timers, causal depth, fault state."""

    def __init__(self, sim: "Sim", pid: int):
        self.sim = sim
        self.pid = pid
        self.node = None            # protocol state machine, set by the runner
        self.behavior = None        # set by the runner; None behaves honest
        self.local_time = 0         # delivered tick count
        self.timers: dict[str, Timer] = {}
        self.depth = 0              # causal round depth
        self.crashed = False
        self.halted = False

    # --- API used by protocol nodes (the "ctx" surface) ---

    def send(self, dst: int, instance: tuple, kind: str, payload: bytes):
        self.sim.post_message(self.pid, dst, instance, kind, payload)

    def multicast(self, instance: tuple, kind: str, payload: bytes):
        """n-1 network envelopes plus immediate local self-delivery."""
        for dst in range(1, self.sim.n + 1):
            self.sim.post_message(self.pid, dst, instance, kind, payload)

    def start_timer(self, name: str, ticks: int):
        self.timers[name] = Timer(ticks)

    def restart_timer(self, name: str):
        t = self.timers.get(name)
        if t is not None:
            t.remaining = t.duration

    def stop_timer(self, name: str):
        self.timers.pop(name, None)

    def rng(self, label: str) -> random.Random:
        return derive_rng(self.sim.seed, f"party{self.pid}:{label}")

    @property
    def now(self) -> int:
        return self.sim.time

    @property
    def monitor(self):
        return self.sim.monitor

    def halt(self):
        self.halted = True

    # --- driven by the simulator ---

    def deliver_message(self, env: Envelope):
        if self.behavior is not None:
            self.behavior.pre_event(self)
        if self.crashed or self.halted:
            return
        self.depth = max(self.depth, env.round)
        if self.behavior is not None:
            if not self.behavior.deliver(self, env):
                return
        if self.node is not None:
            self.node.on_message(env)

    def deliver_tick(self):
        if self.behavior is not None:
            self.behavior.pre_event(self)
        if self.crashed or self.halted:
            return
        self.local_time += 1
        self.sim.post_tick(self.pid)  # keep the self-addressed clock running
        fired = [name for name, t in self.timers.items() if t.remaining == 1]
        for name, t in list(self.timers.items()):
            t.remaining -= 1
        for name in fired:
            self.timers.pop(name, None)
        if self.node is not None:
            for name in fired:
                self.node.on_timer(name)
            self.node.on_tick()

    def deliver_inject(self, tx: bytes):
        if self.behavior is not None:
            self.behavior.pre_event(self)
        if self.crashed or self.halted:
            return
        if self.node is not None:
            self.node.on_inject(tx)


class Sim:
    def __init__(
        self,
        n: int,
        f: int,
        seed: int,
        delay: DelayModel | None = None,
        rules: list[TargetedRule] | None = None,
        horizon: int = HORIZON_DEFAULT,
        tracing: bool = False,
    ):
        if n < 3 * f + 1:
            raise ConfigError(f"resilience bound violated: n={n} < 3f+1={3*f+1}")
        self.n = n
        self.f = f
        self.seed = seed
        self.delay = delay or DelayModel()
        self.rules = rules or []
        self.horizon = horizon
        self.tracing = tracing
        self.time = 0
        self.queue: list = []
        self._seq = 0
        self._net_rng = derive_rng(seed, "net")
        self._tb_seed = hashlib.sha256(b"bdt-tb" + struct.pack(">q", seed)).digest()
        self.parties = {i: PartyRuntime(self, i) for i in range(1, n + 1)}
        self.monitor = None
        self.trace: list[tuple] = []
        self.delivered = 0
        self.timed_out = False
        # per-instance network message counters: tag -> [count, bytes]
        self.msg_stats: dict[tuple, list] = {}

    # --- event posting ---

    def _push(self, when: int, lane: int, tiebreak: int, item):
        self._seq += 1
        heapq.heappush(self.queue, (when, lane, tiebreak, self._seq, item))

    def _tiebreak(self, env: Envelope) -> int:
        h = hashlib.blake2b(
            self._tb_seed
            + struct.pack(">HHq", env.src, env.dst, self._seq)
            + env.kind.encode(),
            digest_size=8,
        )
        return int.from_bytes(h.digest(), "big")

    def post_message(self, src: int, dst: int, instance: tuple, kind: str, payload: bytes):
        rt = self.parties[src]
        if rt.crashed or rt.halted:
            return
        env = Envelope(src, dst, instance, kind, payload, self.time, rt.depth + 1)
        if rt.behavior is not None:
            env = rt.behavior.outgoing(rt, env)
            if env is None:
                return
        if dst == src:
            self._push(self.time, LANE_LOCAL, 0, env)
            return
        stats = self.msg_stats.setdefault(instance, [0, 0])
        stats[0] += 1
        stats[1] += env.size
        base = self.delay.draw(self._net_rng)
        for rule in self.rules:
            if rule.matches(env, self.time):
                base = rule.delay if rule.delay is not None else base + rule.add
        self._push(self.time + max(1, base), LANE_NET, self._tiebreak(env), env)

    def post_tick(self, pid: int):
        rt = self.parties[pid]
        if rt.crashed or rt.halted:
            return
        delay = self.delay.draw(self._net_rng)
        env = Envelope(pid, pid, ("tick",), "t", b"", self.time, rt.depth + 1)
        self._push(self.time + max(1, delay), LANE_NET, self._tiebreak(env), env)

    def post_inject(self, when: int, tx: bytes):
        self._push(when, LANE_LOCAL, 0, ("inject", tx))

    # --- main loop ---

    def start(self):
        for pid in range(1, self.n + 1):
            self.post_tick(pid)
        for rt in self.parties.values():
            if rt.node is not None and not rt.crashed:
                rt.node.on_start()

    def run(self) -> None:
        events = 0
        while self.queue:
            events += 1
            if events > self.horizon:
                self.timed_out = True
                break
            when, lane, _tb, _seq, item = heapq.heappop(self.queue)
            self.time = when
            if isinstance(item, tuple) and item[0] == "inject":
                for rt in self.parties.values():
                    rt.deliver_inject(item[1])
                continue
            env: Envelope = item
            rt = self.parties[env.dst]
            self.delivered += 1
            if self.tracing:
                self.trace.append(
                    (self.time, env.round, env.src, env.dst,
                     instance_str(env.instance), env.kind, env.size)
                )
            if env.instance[0] == "tick":
                rt.deliver_tick()
            else:
                rt.deliver_message(env)

    def trace_lines(self) -> list[str]:
        return [
            f"{t}\t{r}\t{src}\t{dst}\t{inst}\t{kind}\t{size}"
            for (t, r, src, dst, inst, kind, size) in self.trace
        ]
