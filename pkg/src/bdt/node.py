"""Per-party epoch state machine: fastlane supervision with notarized
registers and timers, pace-sync quorum collection, the pace agreement,
the pessimistic one-shot batch with threshold encryption, and the
state-transfer help service.

Epoch flow: run the fastlane behind two notarized registers (a block
commits once two consecutive successors exist); on timeout / epoch-full /
suspected censorship, abandon the fastlane and multicast the highest
1-notarized slot with its proof; on 2f+1 such messages agree on a common
pace via two-consecutive-value agreement; sync the log up to pace-1
(pulling missing blocks from f+1 honest holders via erasure-coded help
responses), or run the encrypted common-subset batch when the pace is 0;
then start the next epoch.
"""

from __future__ import annotations

from collections import OrderedDict, defaultdict

from . import wire
from .acs import AcsInstance
from .bolt_hs import BoltHs, hs_verify
from .bolt_rbc import BoltRbc
from .crypto import erasure, merkle
from .crypto.tpke import DecShare
from .rbc import prbc_verify
from .tcvba import TcvInstance
from .wire import (
    DEC,
    HELP_REQ,
    HELP_RESP,
    PACESYNC,
    Block,
    Cursor,
    QuorumProof,
    u16,
    u64,
)


class BoltTimeout:
    """Degenerate fastlane: waits for the timeout, never outputs."""

    def __init__(self):
        self.abandoned = False

    def start(self):
        pass

    def abandon(self):
        self.abandoned = True

    def on_message(self, env):
        pass


class BdtNode:
    def __init__(self, rt, crypto, cfg):
        self.rt = rt
        self.crypto = crypto
        self.cfg = cfg
        self.n = cfg.n
        self.f = cfg.f
        self.log: list[Block] = []
        self.log_by_epoch: dict[int, list[Block]] = defaultdict(list)
        self.buf: OrderedDict[bytes, int] = OrderedDict()
        self.committed: set[bytes] = set()
        self.epoch = 0
        self.phase = "idle"
        self.fastlane = None
        self.one_not: Block | None = None
        self.two_not: Block | None = None
        self.reg_txs: set[bytes] = set()
        self.S: dict[int, int] = {}
        self.sent_pacesync = False
        self.own_pace = 0
        self.maxpace = 0
        self.pace = 0
        self.proposed: set[bytes] = set()
        self.tcv = None
        self.old_tcv: dict[int, TcvInstance] = {}
        self.acs = None
        self.old_acs: dict[tuple, AcsInstance] = {}
        self.dumbo_round = 0
        self.acs_set = None
        self.dec_store: dict[tuple, dict[int, DecShare]] = defaultdict(dict)
        self.resolved: dict[int, tuple | None] = {}
        self.callhelp = None
        self.pending_help: list[tuple] = []
        self.future: dict[int, list] = defaultdict(list)
        self.stash: dict[tuple, list] = defaultdict(list)
        self.censor_head: bytes | None = None

    # ------------------------------------------------------------------
    # lifecycle
    # ------------------------------------------------------------------

    def on_start(self):
        self._enter_epoch(1)

    def _enter_epoch(self, e: int):
        if e > self.cfg.max_epochs:
            self.phase = "halted"
            self.rt.halt()
            return
        self.epoch = e
        self.phase = "bolt"
        self.S = {}
        self.sent_pacesync = False
        self.one_not = None
        self.two_not = None
        self.reg_txs = set()
        self.proposed = set()
        self.own_pace = 0
        self.tcv = None
        self.acs = None
        self.acs_set = None
        self.dumbo_round = 0
        self.resolved = {}
        self.callhelp = None
        leader = self.leader_of(e)
        if self.cfg.fastlane == "hs":
            self.fastlane = BoltHs(
                self.rt, self.crypto, e, leader, self.n, self.f,
                self.cfg.esize, self._batch, self._on_fastlane_block,
            )
        elif self.cfg.fastlane == "rbc":
            self.fastlane = BoltRbc(
                self.rt, self.crypto, e, leader, self.n, self.f,
                self.cfg.esize, self._batch, self._on_fastlane_block,
            )
        else:
            self.fastlane = BoltTimeout()
        mon = self.rt.monitor
        if mon is not None:
            mon.on_epoch(self.rt.pid, e)
        self.rt.start_timer("tau", self.cfg.tau)
        self._arm_censor()
        self.fastlane.start()
        for env in self.future.pop(e, ()):
            self.on_message(env)

    def leader_of(self, e: int) -> int:
        return ((e - 1) % self.n) + 1

    # ------------------------------------------------------------------
    # transaction buffer
    # ------------------------------------------------------------------

    def on_inject(self, tx: bytes):
        if tx in self.committed or tx in self.buf:
            return
        if len(self.buf) >= self.cfg.buf_cap:
            return  # a full buffer blocks the client
        self.buf[tx] = self.rt.now
        self._arm_censor()

    def _arm_censor(self):
        if self.cfg.censor_t <= 0 or not self.buf:
            return
        head = next(iter(self.buf))
        if head != self.censor_head or "censor" not in self.rt.timers:
            self.censor_head = head
            self.rt.start_timer("censor", self.cfg.censor_t)

    def _batch(self, slot: int) -> tuple[bytes, ...]:
        if slot > self.cfg.esize:
            return ()
        if self.cfg.empty_tail and slot >= self.cfg.esize - 1:
            return ()
        out = []
        for tx in self.buf:
            if tx in self.proposed:
                continue
            out.append(tx)
            if len(out) >= self.cfg.batch:
                break
        self.proposed.update(out)
        return tuple(out)

    # ------------------------------------------------------------------
    # fastlane phase
    # ------------------------------------------------------------------

    def _on_fastlane_block(self, block: Block):
        if self.phase != "bolt":
            return
        mon = self.rt.monitor
        if mon is not None:
            mon.on_fastlane_deliver(self.rt.pid, block.epoch, block.slot)
        fresh = any(
            tx not in self.committed and tx not in self.reg_txs for tx in block.txs
        )
        if fresh:
            self.rt.restart_timer("tau")
        if fresh or self.cfg.dup_block_mode == "shift":
            if self.two_not is not None:
                self._append(self.two_not, via="bolt")
            self.two_not = self.one_not
            self.one_not = block
            self.reg_txs = set()
            for reg in (self.one_not, self.two_not):
                if reg is not None:
                    self.reg_txs.update(reg.txs)
        if block.slot >= self.cfg.esize:
            self._interrupt("epoch_full")

    def on_timer(self, name: str):
        if name == "tau":
            if self.phase == "bolt":
                self._interrupt("timeout")
        elif name == "censor":
            if self.phase == "bolt":
                self._interrupt("censorship")
            elif self.phase not in ("idle", "halted") and self.buf:
                self.rt.start_timer("censor", self.cfg.censor_t)

    def on_tick(self):
        pass

    def _interrupt(self, reason: str):
        if self.phase != "bolt" or self.sent_pacesync:
            return
        self.sent_pacesync = True
        self.fastlane.abandon()
        self.rt.stop_timer("tau")
        mon = self.rt.monitor
        if mon is not None:
            mon.on_abandon(self.rt.pid, self.epoch, reason)
        if self.one_not is not None:
            self.own_pace = self.one_not.slot
            body = (
                u64(self.epoch) + u64(self.own_pace) + b"\x01"
                + self.one_not.proof.encode()
            )
        else:
            self.own_pace = 0
            body = u64(self.epoch) + u64(0) + b"\x00"
        self.rt.multicast(("ps", self.epoch), PACESYNC, body)
        self._check_pacesync_quorum()

    def _verify_pace_proof(self, e: int, p: int, proof: QuorumProof | None) -> bool:
        if p == 0:
            return proof is None
        if proof is None:
            return False
        if self.cfg.fastlane == "hs":
            return hs_verify(self.crypto, e, p, proof)
        if self.cfg.fastlane == "rbc":
            return prbc_verify(self.crypto, e, p, proof.sig)
        return False  # the timeout fastlane never notarizes anything

    def _on_pacesync(self, env):
        cur = Cursor(env.payload)
        e, p = cur.u64(), cur.u64()
        proof = None
        if cur.take(1) == b"\x01":
            proof = QuorumProof.decode(cur)
        if e != self.epoch or env.src in self.S:
            return
        if not self._verify_pace_proof(e, p, proof):
            return
        self.S[env.src] = p
        self._check_pacesync_quorum()

    def _check_pacesync_quorum(self):
        if self.phase != "bolt" or len(self.S) < 2 * self.f + 1:
            return
        if not self.sent_pacesync:
            self._interrupt("quorum")
        self.maxpace = max(self.S.values())
        self.phase = "tcv"
        mon = self.rt.monitor
        if mon is not None:
            mon.on_transformer_entry(self.rt.pid, self.epoch, self.maxpace)
        self.tcv = TcvInstance(
            self.rt, self.crypto, ("tcv", self.epoch), self.n, self.f,
            on_decide=self._on_pace_decided,
        )
        self.old_tcv[self.epoch] = self.tcv
        stashed = self.stash.pop(("tcv", self.epoch), ())
        for env in stashed:
            self.tcv.on_message(env)
        self.tcv.input(self.maxpace)

    # ------------------------------------------------------------------
    # transformer
    # ------------------------------------------------------------------

    def _on_pace_decided(self, p: int):
        if self.phase != "tcv" or self.epoch not in self.old_tcv:
            return
        if self.old_tcv[self.epoch] is not self.tcv or self.tcv.decided != p:
            return
        self.pace = max(p - 1, 0)
        mon = self.rt.monitor
        if mon is not None:
            mon.on_pace(self.rt.pid, self.epoch, p, self.pace)
        if self.pace == 0:
            self._start_dumbo()
            return
        have = len(self.log_by_epoch[self.epoch])
        for reg in (self.two_not, self.one_not):
            if reg is not None and reg.slot <= self.pace and reg.slot == have + 1:
                self._append(reg, via="sync")
                have += 1
        self.one_not = None
        self.two_not = None
        self.reg_txs = set()
        if self.cfg.gap_formula == "figure":
            gap = self.pace - 2 - self.own_pace
        else:
            gap = self.pace - have
        if gap > 0:
            self._start_callhelp(have, gap)
        else:
            self._finish_epoch()

    def _finish_epoch(self):
        self._enter_epoch(self.epoch + 1)

    # ------------------------------------------------------------------
    # help service / state transfer
    # ------------------------------------------------------------------

    def _start_callhelp(self, tip: int, gap: int):
        self.phase = "callhelp"
        self.callhelp = {
            "tip": tip,
            "gap": gap,
            "groups": defaultdict(dict),
            "done": False,
        }
        body = u64(self.epoch) + u64(tip) + u64(gap)
        self.rt.multicast(("chreq", self.epoch), HELP_REQ, body)

    def _serve_help(self, src: int, e: int, tip: int, gap: int) -> bool:
        log_e = self.log_by_epoch.get(e, [])
        if tip + gap > len(log_e):
            return False
        blocks = log_e[tip : tip + gap]
        if any(b.proof is None for b in blocks):
            return True  # fallback blocks are not individually provable; drop
        m = wire.encode_blocks(blocks)
        frags = erasure.encode(self.n - 2 * self.f, self.n, m)
        root, proofs = merkle.build(frags)
        idx = self.rt.pid - 1
        body = (
            u64(e) + u64(tip) + u64(gap) + root
            + wire.blob(frags[idx]) + wire.encode_branch(proofs[idx])
        )
        self.rt.send(src, ("chresp", e), HELP_RESP, body)
        return True

    def _on_help_req(self, env):
        cur = Cursor(env.payload)
        e, tip, gap = cur.u64(), cur.u64(), cur.u64()
        if not (1 <= gap <= self.cfg.esize):
            return
        if not self._serve_help(env.src, e, tip, gap):
            self.pending_help.append((env.src, e, tip, gap))

    def _drain_pending_help(self):
        if not self.pending_help:
            return
        rest = []
        for item in self.pending_help:
            if not self._serve_help(*item):
                rest.append(item)
        self.pending_help = rest

    def _on_help_resp(self, env):
        ch = self.callhelp
        if self.phase != "callhelp" or ch is None or ch["done"]:
            return
        cur = Cursor(env.payload)
        e, tip, gap = cur.u64(), cur.u64(), cur.u64()
        root = cur.take(32)
        frag = cur.blob()
        branch = wire.decode_branch(cur, root, env.src - 1)
        if e != self.epoch or tip != ch["tip"] or gap != ch["gap"]:
            return
        if not merkle.verify(root, frag, branch):
            return
        group = ch["groups"][root]
        if env.src in group:
            return
        group[env.src] = frag
        if len(group) < self.n - 2 * self.f:
            return
        try:
            m = erasure.decode(
                self.n - 2 * self.f, self.n,
                [(src - 1, fr) for src, fr in group.items()],
            )
            blocks = wire.decode_blocks(m)
        except Exception:
            blocks = None
        if blocks is None or not self._callhelp_valid(blocks, tip, gap):
            del ch["groups"][root]  # poisoned root group; keep collecting
            mon = self.rt.monitor
            if mon is not None:
                mon.on_byz_evidence(self.rt.pid, ("chresp", e), "bad-help-group")
            return
        ch["done"] = True
        for b in blocks:
            self._append(b, via="callhelp")
        self._finish_epoch()

    def _callhelp_valid(self, blocks, tip, gap) -> bool:
        if len(blocks) != gap:
            return False
        for i, b in enumerate(blocks):
            if b.epoch != self.epoch or b.slot != tip + i + 1:
                return False
            if b.proof is None or not self._verify_pace_proof(b.epoch, b.slot, b.proof):
                return False
        return True

    # ------------------------------------------------------------------
    # pessimistic phase
    # ------------------------------------------------------------------

    def _start_dumbo(self):
        self.phase = "dumbo"
        self.dumbo_round += 1
        r = self.dumbo_round
        mon = self.rt.monitor
        if mon is not None:
            mon.on_dumbo_start(self.rt.pid, self.epoch, r)
        head = list(self.buf)[: self.cfg.batch]
        if self.cfg.dumbo_select == "bytes":
            count = self.cfg.batch // max(1, self.n * self.cfg.tx_size)
        else:
            count = self.cfg.batch // self.n
        count = min(max(count, 1), len(head)) if head else 0
        rng = self.rt.rng(f"dumbo:{self.epoch}:{r}")
        sample = rng.sample(head, count) if count else []
        plaintext = wire.encode_txs(tuple(sample))
        cipher = self.crypto.suite.tpke.encrypt(plaintext, rng)
        self.acs_set = None
        self.resolved = {}
        self.acs = AcsInstance(
            self.rt, self.crypto, ("acs", self.epoch, r), self.n, self.f,
            on_output=self._on_acs_output,
        )
        self.old_acs[(self.epoch, r)] = self.acs
        for env in self.stash.pop(("acs", self.epoch, r), ()):
            self.acs.on_message(env)
        self.acs.input(cipher)
        for env in self.stash.pop(("dec", self.epoch, r), ()):
            self._on_dec(env)

    def _on_acs_output(self, output):
        if self.phase != "dumbo" or self.acs_set is not None:
            return
        self.acs_set = dict(output)
        mon = self.rt.monitor
        if mon is not None:
            mon.on_acs_output(self.rt.pid, self.epoch, sorted(self.acs_set))
        r = self.dumbo_round
        for j, cipher in sorted(self.acs_set.items()):
            share = self.crypto.tpke_dec_share(cipher)
            if share is None:
                self.resolved[j] = None  # structurally bad ciphertext
                continue
            self.dec_store[(self.epoch, r, j)].setdefault(self.rt.pid, share)
            self.rt.multicast(
                ("dec", self.epoch, r), DEC, u16(j) + share.encode()
            )
            self._try_resolve(j)
        self._maybe_close_dumbo()

    def _on_dec(self, env):
        cur = Cursor(env.payload)
        j = cur.u16()
        share = DecShare.decode(cur.buf[cur.off :])
        if share.party != env.src:
            return
        r = env.instance[2]
        self.dec_store[(self.epoch, r, j)].setdefault(env.src, share)
        if self.phase == "dumbo" and r == self.dumbo_round:
            self._try_resolve(j)
            self._maybe_close_dumbo()

    def _try_resolve(self, j: int):
        if self.acs_set is None or j not in self.acs_set or j in self.resolved:
            return
        shares = self.dec_store[(self.epoch, self.dumbo_round, j)]
        if len(shares) < self.f + 1:
            return
        try:
            plain = self.crypto.suite.tpke.decrypt(
                self.acs_set[j], list(shares.values())
            )
            self.resolved[j] = wire.decode_txs(Cursor(plain))
        except Exception as exc:
            from .errors import InsufficientShares

            if isinstance(exc, InsufficientShares):
                return  # some shares were garbage; wait for more honest ones
            self.resolved[j] = None  # undecryptable Byzantine ciphertext
            mon = self.rt.monitor
            if mon is not None:
                mon.on_byz_evidence(self.rt.pid, ("dec", self.epoch, j), "bad-ciphertext")

    def _maybe_close_dumbo(self):
        if self.acs_set is None or self.phase != "dumbo":
            return
        if any(j not in self.resolved for j in self.acs_set):
            return
        seen = set()
        txs = []
        for j in sorted(self.acs_set):
            batch = self.resolved[j]
            if not batch:
                continue
            for tx in batch:
                if tx not in seen:
                    seen.add(tx)
                    txs.append(tx)
        block = Block(self.epoch, self.dumbo_round, tuple(txs), None)
        self._append(block, via="dumbo")
        if self.dumbo_round < self.cfg.dumbo_blocks:
            self._start_dumbo()
        else:
            self._finish_epoch()

    # ------------------------------------------------------------------
    # log
    # ------------------------------------------------------------------

    def _append(self, block: Block, via: str):
        log_e = self.log_by_epoch[block.epoch]
        assert block.slot == len(log_e) + 1, (
            f"non-consecutive append {block.epoch}/{block.slot} at {len(log_e)}"
        )
        self.log.append(block)
        log_e.append(block)
        head = next(iter(self.buf)) if self.buf else None
        for tx in block.txs:
            self.committed.add(tx)
            self.buf.pop(tx, None)
            self.proposed.discard(tx)
        mon = self.rt.monitor
        if mon is not None:
            mon.on_append(self.rt.pid, block, via, self.rt.now, self.rt.depth)
        if head is not None and head in self.committed:
            if self.buf:
                self._arm_censor()
            else:
                self.rt.stop_timer("censor")
                self.censor_head = None
        self._drain_pending_help()

    # ------------------------------------------------------------------
    # routing
    # ------------------------------------------------------------------

    def on_message(self, env):
        proto = env.instance[0]
        if proto in ("chreq", "chresp"):
            if proto == "chreq":
                self._on_help_req(env)
            else:
                self._on_help_resp(env)
            return
        e = env.instance[1]
        if e > self.epoch:
            self.future[e].append(env)
            return
        if proto in ("hs", "prbc"):
            if e == self.epoch and self.fastlane is not None:
                self.fastlane.on_message(env)
        elif proto == "ps":
            if e == self.epoch:
                self._on_pacesync(env)
        elif proto == "tcv":
            inst = self.old_tcv.get(e)
            if inst is not None:
                inst.on_message(env)
            elif e == self.epoch:
                self.stash[("tcv", e)].append(env)
        elif proto in ("acsrbc", "acsaba"):
            r = env.instance[2]
            inst = self.old_acs.get((e, r))
            if inst is not None:
                inst.on_message(env)
            elif e == self.epoch:
                self.stash[("acs", e, r)].append(env)
        elif proto == "dec":
            r = env.instance[2]
            if (e, r) in self.old_acs or e < self.epoch:
                self._on_dec(env)
            elif e == self.epoch:
                self.stash[("dec", e, r)].append(env)
