"""Generation-by-generation (G-by-G) decoder.

Each generation keeps an echelon basis over its own columns.  Once a column
is decoded its unit equation is fed into every other generation containing
it, which is exactly "subtracting the decoded packet" from their buffered
packets.  A generation is solved when its basis reaches full local rank.

For precoded codes every parity-check equation is handled as an extra
pseudo-generation holding one zero-payload row.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .base import Decoder, DecodeOutcome, EchelonBasis, Status, precode_rows


class GbGDecoder(Decoder):
    name = "gbg"

    def __init__(self, code, K=None, trace=None):
        super().__init__(code, K, trace)
        n = self.n
        groups = [np.asarray(ix, dtype=np.int64) for ix in code.gmap.indices]
        self.n_gens = len(groups)
        H = precode_rows(code)
        for row in H:
            groups.append(np.flatnonzero(row).astype(np.int64))
        self.groups = groups
        self.bases = [EchelonBasis(len(ix), self.counter, self.store) for ix in groups]
        self.solved = [False] * len(groups)
        self.col_groups = [[] for _ in range(n)]
        self.local_pos = []
        for g, ix in enumerate(groups):
            pos = {}
            for k, c in enumerate(ix.tolist()):
                if c < n:
                    self.col_groups[c].append(g)
                pos[c] = k
            self.local_pos.append(pos)
        self.known = -np.ones(n, dtype=np.int64)  # payload id of decoded columns
        self.n_known = 0
        self._queue = deque()
        # padding positions are known zeros
        for g, ix in enumerate(groups[: self.n_gens]):
            for k in np.flatnonzero(ix >= n):
                e = np.zeros(len(ix), dtype=np.uint8)
                e[k] = 1
                self.bases[g].insert(e, self.store.add())
        for j, row in enumerate(H):
            g = self.n_gens + j
            self.bases[g].insert(row[groups[g]].copy(), self.store.add())
        for g in range(len(groups)):
            self._check(g)
        self._drain()

    def _check(self, g: int) -> None:
        if not self.solved[g] and self.bases[g].rank == len(self.groups[g]):
            self.solved[g] = True
            self._queue.append(g)

    def _learn(self, c: int, pid: int, skip: int) -> None:
        self.known[c] = pid
        self.n_known += 1
        for g in self.col_groups[c]:
            if g == skip or self.solved[g]:
                continue
            e = np.zeros(len(self.groups[g]), dtype=np.uint8)
            e[self.local_pos[g][c]] = 1
            q = self.store.add()
            self.store.copy(q, pid)
            self.bases[g].insert(e, q)
            self._check(g)

    def _drain(self) -> None:
        while self._queue:
            g = self._queue.popleft()
            basis = self.bases[g]
            basis.back_substitute()
            for k, c in enumerate(self.groups[g].tolist()):
                if c < self.n and self.known[c] < 0:
                    self._learn(c, int(basis.pid[basis.pivot_of_col[k]]), g)

    def _receive(self, pkt) -> DecodeOutcome:
        l = pkt.gen_id
        if not self.solved[l]:
            pid = self.store.add(pkt.payload)
            self.bases[l].insert(self.local_gev(pkt), pid)
            self._check(l)
            self._drain()
        if self.n_known < self.n:
            self._emit(self.n_known, "collect")
            return DecodeOutcome(Status.NeedMorePackets)
        self._emit(self.n_known, "decoded")
        return self._finish(self.known)


def gbg_receive(state: GbGDecoder, pkt) -> DecodeOutcome:
    return state.receive(pkt)
