"""Discrete-time erasure network simulator with relay recoding.

One time step is one network use: every node sends one packet on each of its
outgoing links, transmissions are computed from the state at the start of the
step, and surviving packets are delivered at its end.  Relays recode from all
buffered packets of a scheduled generation.  Each sink feeds its own decoder
and a shadow rank tracker that measures N''.
"""

from __future__ import annotations

import enum
import io
import math
import os
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .codes import (
    Code,
    CodedPacket,
    Encoder,
    parity_residual,
    random_nonzero_vector,
    random_sources,
)
from .decoders import make_decoder
from .decoders.base import EchelonBasis, precode_rows
from .gf import MUL, FieldId, OpCounter


class TopologyError(ValueError):
    pass


# -- topology -------------------------------------------------------------------

@dataclass(frozen=True)
class Link:
    src: str
    dst: str
    pe: float


@dataclass
class Topology:
    nodes: list
    links: list
    name: str = "custom"

    def __post_init__(self):
        seen = set()
        for n in self.nodes:
            if n in seen:
                raise TopologyError(f"duplicate node {n!r}")
            seen.add(n)
        for ln in self.links:
            if ln.src not in seen or ln.dst not in seen:
                raise TopologyError(f"link {ln.src}->{ln.dst} uses an undeclared node")
            if ln.src == ln.dst:
                raise TopologyError(f"self loop at {ln.src!r}")
            if not 0.0 <= ln.pe < 1.0:
                raise TopologyError(f"erasure probability {ln.pe} outside [0, 1)")
        g = self.graph()
        if not nx.is_directed_acyclic_graph(g):
            raise TopologyError("topology must be acyclic")
        srcs = self.sources
        if len(srcs) != 1:
            raise TopologyError(f"need exactly one source node, found {srcs}")
        if not self.sinks:
            raise TopologyError("no destination node")
        for t in self.sinks:
            if not nx.has_path(g, srcs[0], t):
                raise TopologyError(f"destination {t!r} unreachable from the source")

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        for ln in self.links:
            if g.has_edge(ln.src, ln.dst):
                g[ln.src][ln.dst]["capacity"] += 1.0 - ln.pe
            else:
                g.add_edge(ln.src, ln.dst, capacity=1.0 - ln.pe)
        return g

    @property
    def sources(self) -> list:
        has_in = {ln.dst for ln in self.links}
        return [n for n in self.nodes if n not in has_in]

    @property
    def source(self) -> str:
        return self.sources[0]

    @property
    def sinks(self) -> list:
        has_out = {ln.src for ln in self.links}
        return [n for n in self.nodes if n not in has_out]

    @property
    def relays(self) -> list:
        ends = set(self.sinks) | {self.source}
        return [n for n in self.nodes if n not in ends]

    def out_links(self, node: str) -> list:
        return [ln for ln in self.links if ln.src == node]

    def in_links(self, node: str) -> list:
        return [ln for ln in self.links if ln.dst == node]

    def min_cut(self, sink: str | None = None) -> float:
        """Max-flow value (expected packets per network use) to one or all sinks."""
        g = self.graph()
        sinks = self.sinks if sink is None else [sink]
        return min(nx.maximum_flow_value(g, self.source, t) for t in sinks)

    def to_text(self) -> str:
        lines = [f"node {n}" for n in self.nodes]
        lines += [f"link {ln.src} {ln.dst} {ln.pe:g}" for ln in self.links]
        return "\n".join(lines) + "\n"


def parse_topology(text: str, name: str = "custom") -> Topology:
    """Parse ``node <name>`` / ``link <from> <to> <p_e>`` lines ('#' comments)."""
    nodes, links = [], []
    for lineno, raw in enumerate(io.StringIO(text), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "node" and len(parts) == 2:
            nodes.append(parts[1])
        elif parts[0] == "link" and len(parts) == 4:
            try:
                pe = float(parts[3])
            except ValueError:
                raise TopologyError(f"line {lineno}: bad erasure probability {parts[3]!r}") from None
            if not math.isfinite(pe):
                raise TopologyError(f"line {lineno}: bad erasure probability {parts[3]!r}")
            links.append(Link(parts[1], parts[2], pe))
        else:
            raise TopologyError(f"line {lineno}: cannot parse {line!r}")
    return Topology(nodes, links, name)


def build_butterfly(pe: float = 0.1) -> Topology:
    nodes = ["S", "A", "B", "C", "D", "T1", "T2"]
    edges = [("S", "A"), ("S", "B"), ("A", "T1"), ("A", "C"), ("B", "T2"), ("B", "C"),
             ("C", "D"), ("D", "T1"), ("D", "T2")]
    return Topology(nodes, [Link(a, b, pe) for a, b in edges], "butterfly")


def build_point_to_point(pe: float = 0.0) -> Topology:
    return Topology(["S", "T"], [Link("S", "T", pe)], "p2p")


PRESETS = {"butterfly": build_butterfly, "p2p": build_point_to_point}


def load_topology(spec: str, pe: float = 0.1) -> Topology:
    """A preset name or a path to a topology description file."""
    if spec in PRESETS:
        return PRESETS[spec](pe)
    if not os.path.exists(spec):
        raise TopologyError(f"no preset or file named {spec!r}")
    with open(spec) as fh:
        return parse_topology(fh.read(), name=os.path.basename(spec))


# -- relays ---------------------------------------------------------------------

class SchedulerKind(enum.Enum):
    Random = "random"
    LeastScheduled = "least"


@dataclass(frozen=True)
class Scheduler:
    strategy: SchedulerKind = SchedulerKind.Random
    recode_field: FieldId = FieldId.Binary

    @property
    def note(self) -> str:
        if self.strategy is SchedulerKind.LeastScheduled:
            return "MaLPI approximation: max(received - sent on link)"
        return ""


class RelayBuffer:
    """Per-generation verbatim store of received (GEV, payload) packets."""

    def __init__(self, n_gens: int):
        self.gevs = [[] for _ in range(n_gens)]
        self.payloads = [[] for _ in range(n_gens)]
        self.received = np.zeros(n_gens, dtype=np.int64)
        self.scheduled = {}  # per outgoing link: recoded packets sent per generation
        self.n_gens = n_gens
        self._nonempty: list = []

    def add(self, pkt: CodedPacket) -> None:
        l = pkt.gen_id
        if not self.gevs[l]:
            self._nonempty.append(l)
        self.gevs[l].append(np.asarray(pkt.gev, dtype=np.uint8))
        self.payloads[l].append(np.asarray(pkt.payload, dtype=np.uint8))
        self.received[l] += 1

    @property
    def nonempty(self) -> list:
        return self._nonempty

    def __len__(self) -> int:
        return int(self.received.sum())


def _gf_combine(coeffs: np.ndarray, rows: np.ndarray) -> np.ndarray:
    if np.all(coeffs <= 1):
        return np.bitwise_xor.reduce(rows[coeffs == 1], axis=0)
    return np.bitwise_xor.reduce(MUL[coeffs[:, None], rows], axis=0)


def pick_generation(buf: RelayBuffer, scheduler: Scheduler, rng: np.random.Generator,
                    link=None) -> int | None:
    """Choose the generation to recode for one transmission on ``link``.

    LeastScheduled maximizes local potential innovativeness towards the
    receiving neighbour: packets received of the generation minus packets of
    it already sent on this link.  Ties are broken uniformly.
    """
    cand = buf.nonempty
    if not cand:
        return None
    sent = buf.scheduled.setdefault(link, np.zeros(buf.n_gens, dtype=np.int64))
    if scheduler.strategy is SchedulerKind.LeastScheduled:
        cand = np.asarray(cand)
        score = sent[cand] - buf.received[cand]
        cand = cand[score == score.min()]
    l = int(cand[int(rng.integers(0, len(cand)))])
    sent[l] += 1
    return l


def relay_recode(buf: RelayBuffer, scheduler: Scheduler, rng: np.random.Generator,
                 counter: OpCounter | None = None, link=None) -> CodedPacket | None:
    l = pick_generation(buf, scheduler, rng, link)
    if l is None:
        return None
    gevs = np.array(buf.gevs[l])
    pays = np.array(buf.payloads[l])
    coeffs = random_nonzero_vector(rng, len(gevs), scheduler.recode_field)
    if counter is not None:
        counter.add(len(gevs) * (gevs.shape[1] + pays.shape[1]))
    return CodedPacket(l, _gf_combine(coeffs, gevs), _gf_combine(coeffs, pays))


# -- sessions ---------------------------------------------------------------------

@dataclass
class OverheadReport:
    M: int
    K: int
    N_prime: int
    N_doubleprime: int
    N: int
    ops_total: int
    steps: int
    M_I: int | None = None
    sink: str = ""
    timed_out: bool = False
    correct: bool = True

    @property
    def eps_c(self) -> float:
        return (self.N_prime - self.M) / self.M

    @property
    def eps_cn(self) -> float:
        return (self.N_doubleprime - self.M) / self.M

    @property
    def eps_d(self) -> float:
        return (self.N - self.N_doubleprime) / self.M

    @property
    def eps(self) -> float:
        return (self.N - self.M) / self.M

    @property
    def ops_per_symbol(self) -> float:
        return self.ops_total / (self.M * self.K)


class RankTracker:
    """Cheap rank-only echelon basis over the intermediate columns."""

    def __init__(self, code: Code):
        self.code = code
        self.n = code.spec.n_intermediate
        self.basis = EchelonBasis(self.n, OpCounter())
        for row in precode_rows(code):
            self.basis.insert(row.copy())

    @property
    def full(self) -> bool:
        return self.basis.rank >= self.n

    def add(self, pkt: CodedPacket) -> bool:
        ev = self.code.gmap.expand(pkt.gen_id, np.asarray(pkt.gev, np.uint8), width=self.n)
        return self.basis.insert(ev) >= 0


def split_seed(seed: int, n: int) -> list:
    """Independent child seeds: ``SeedSequence(seed).spawn(n)``."""
    return np.random.SeedSequence(seed).spawn(n)


def measure_code_overhead(code: Code, seed, limit: int | None = None) -> int:
    """N': packets a lossless single-link receiver needs to reach full rank."""
    rng = np.random.default_rng(seed)
    K = 1
    src = random_sources(code.spec.M, K, rng)
    enc = Encoder(code, src, rng)
    rt = RankTracker(code)
    limit = limit or 100 * code.spec.M
    for i in range(1, limit + 1):
        rt.add(next(enc))
        if rt.full:
            return i
    return limit


class _Sink:
    def __init__(self, name, code, decoder_kind, K):
        self.name = name
        self.dec = make_decoder(decoder_kind, code, K=K)
        self.rank = RankTracker(code)
        self.N = 0
        self.N2 = None
        self.done = False
        self.out = None

    def deliver(self, pkt):
        if self.done:
            return
        self.N += 1
        if self.N2 is None:
            self.rank.add(pkt)
            if self.rank.full:
                self.N2 = self.N
        out = self.dec.receive(pkt)
        if out.decoded:
            self.done = True
            self.out = out


def run_session(topology: Topology, code: Code, scheduler: Scheduler | None = None,
                decoder_kind: str = "oa", seed: int = 0, *, K: int | None = None,
                step_limit: int | None = None, n_prime: int | None = None) -> list:
    """Simulate one multicast session; returns one :class:`OverheadReport` per sink.

    Seeds: child 0 draws sources and source packets, child 1 the erasures,
    child 2 the relay choices, child 3 the lossless N' run.
    """
    scheduler = scheduler or Scheduler()
    spec = code.spec
    K = spec.K if K is None else K
    s_src, s_loss, s_relay, s_np = split_seed(seed, 4)
    rng_src = np.random.default_rng(s_src)
    rng_loss = np.random.default_rng(s_loss)
    rng_relay = np.random.default_rng(s_relay)
    sources = random_sources(spec.M, K, rng_src)
    enc = Encoder(code, sources, rng_src)
    step_limit = step_limit or 100 * spec.M
    if n_prime is None:
        n_prime = measure_code_overhead(code, s_np)

    src_node = topology.source
    buffers = {r: RelayBuffer(spec.L) for r in topology.relays}
    sinks = {t: _Sink(t, code, decoder_kind, K) for t in topology.sinks}
    relay_ops = OpCounter()
    links = topology.links
    steps = 0
    while steps < step_limit and not all(s.done for s in sinks.values()):
        steps += 1
        sent = []
        for ln in links:
            if ln.src == src_node:
                pkt = next(enc)
            else:
                pkt = relay_recode(buffers[ln.src], scheduler, rng_relay, relay_ops, ln)
            sent.append(pkt)
        lost = rng_loss.random(len(links)) < np.array([ln.pe for ln in links])
        for ln, pkt, gone in zip(links, sent, lost):
            if pkt is None or gone:
                continue
            if ln.dst in buffers:
                buffers[ln.dst].add(pkt)
            else:
                sinks[ln.dst].deliver(pkt)

    reports = []
    for name, s in sinks.items():
        ok = True
        if s.done:
            ok = bool(np.array_equal(s.out.recovered, sources))
            if ok and code.precode is not None:
                ok = not parity_residual(code.precode, s.out.intermediates).any()
        reports.append(OverheadReport(
            M=spec.M, K=K, N_prime=n_prime,
            N_doubleprime=s.N2 if s.N2 is not None else s.N, N=s.N,
            ops_total=s.dec.counter.ops, steps=steps, M_I=s.dec.M_I, sink=name,
            timed_out=not s.done, correct=ok,
        ))
    return reports
