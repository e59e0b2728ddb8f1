"""Machinery shared by the decoders.

Decoders work symbolically on coefficient rows and log every payload row
operation into a :class:`PayloadStore`; the log is replayed in one kernel call
when the payloads are actually needed.  Operation counts are charged when an
operation is logged, so costs do not depend on when payloads are materialised.
"""

from __future__ import annotations

import enum
from array import array
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..gf import INV, FieldId, OpCounter


class Status(enum.Enum):
    NeedMorePackets = "need_more_packets"
    Decoded = "decoded"


class IntegrityError(RuntimeError):
    """The received equations contradict each other (corrupted input)."""


@dataclass
class DecodeOutcome:
    status: Status
    recovered: np.ndarray | None = None
    packets: int = 0
    ops: int = 0
    M_I: int | None = None
    intermediates: np.ndarray | None = None  # all M+S decoded rows

    @property
    def decoded(self) -> bool:
        return self.status is Status.Decoded


class PayloadStore:
    """Growable payload matrix plus a deferred row-operation log."""

    def __init__(self, K: int, counter: OpCounter, capacity: int = 64):
        self.K = K
        self.counter = counter
        self.rows = np.zeros((max(capacity, 1), K), dtype=np.uint8)
        self.n = 0
        self._log = array("q")

    def _grow(self) -> None:
        bigger = np.zeros((self.rows.shape[0] * 2, self.K), dtype=np.uint8)
        bigger[: self.n] = self.rows[: self.n]
        self.rows = bigger

    def add(self, payload: np.ndarray | None = None) -> int:
        if self.n == self.rows.shape[0]:
            self.flush()
            self._grow()
        pid = self.n
        if payload is not None:
            self.rows[pid] = payload
        self.n += 1
        return pid

    def axpy(self, dst: int, src: int, coeff: int) -> None:
        self._log.extend((dst, src, coeff))
        self.counter.add(self.K)

    def scale(self, dst: int, coeff: int) -> None:
        if coeff != 1:
            self._log.extend((dst, -1, coeff))
        self.counter.add(self.K)

    def copy(self, dst: int, src: int) -> None:
        self._log.extend((dst, src, 0))

    def extend(self, ops: np.ndarray, pid_of_row: np.ndarray) -> None:
        """Log ``(dst_row, src_row, coeff)`` ops expressed in basis-row numbers."""
        if len(ops) == 0:
            return
        mapped = np.empty_like(ops)
        mapped[:, 0] = pid_of_row[ops[:, 0]]
        mapped[:, 1] = pid_of_row[ops[:, 1]]
        mapped[:, 2] = ops[:, 2]
        self._log.extend(mapped.reshape(-1).tolist())
        self.counter.add(self.K * len(ops))

    def extend_raw(self, ops: np.ndarray) -> None:
        """Log ops already expressed in payload ids; charges K per axpy/scale."""
        if len(ops) == 0:
            return
        self._log.extend(np.asarray(ops, dtype=np.int64).reshape(-1).tolist())
        n_charged = int(np.count_nonzero(ops[:, 2]))
        self.counter.add(self.K * n_charged)

    @property
    def pending(self) -> int:
        return len(self._log) // 3

    def flush(self) -> None:
        if not self._log:
            return
        ops = np.frombuffer(self._log, dtype=np.int64).reshape(-1, 3)
        kernels.replay(self.rows, ops)
        self._log = array("q")

    def get(self, pids) -> np.ndarray:
        self.flush()
        return self.rows[np.asarray(pids, dtype=np.int64)].copy()


class EchelonBasis:
    """Incremental row-echelon basis over ``n`` columns with normalized pivots.

    With a ``store`` every row carries a payload id and payload operations are
    logged; without one the basis only tracks rank (shadow rank tracking).
    """

    def __init__(self, n: int, counter: OpCounter, store: PayloadStore | None = None,
                 capacity: int | None = None):
        self.n = n
        self.counter = counter
        self.store = store
        cap = n if capacity is None else capacity
        self.mat = np.zeros((max(cap, 1), max(n, 1)), dtype=np.uint8)
        self.pivot_of_col = -np.ones(max(n, 1), dtype=np.int64)
        self.pid = -np.ones(max(cap, 1), dtype=np.int64)
        self.order = np.zeros(max(cap, 1), dtype=np.int64)  # insertion sequence
        self.rank = 0
        self._free: list = []
        self._next_row = 0
        self._seq = 0
        self._ops = np.zeros((max(n, 1), 2), dtype=np.int64)

    def _take_row(self) -> int:
        if self._free:
            return self._free.pop()
        r = self._next_row
        if r == self.mat.shape[0]:
            grow = self.mat.shape[0]
            self.mat = np.vstack([self.mat, np.zeros((grow, self.mat.shape[1]), np.uint8)])
            self.pid = np.concatenate([self.pid, -np.ones(grow, np.int64)])
            self.order = np.concatenate([self.order, np.zeros(grow, np.int64)])
        self._next_row += 1
        return r

    def reduce(self, vec: np.ndarray, pid: int = -1) -> int:
        """Forward-reduce ``vec`` in place; returns its free lead column or -1."""
        n_ops, coef_ops, lead = kernels.echelon_reduce(vec, self.mat, self.pivot_of_col, self._ops)
        self.counter.add(coef_ops)
        if self.store is not None and n_ops:
            ops = np.empty((n_ops, 3), dtype=np.int64)
            ops[:, 0] = pid
            ops[:, 1] = self.pid[self._ops[:n_ops, 0]]
            ops[:, 2] = self._ops[:n_ops, 1]
            self.store.extend_raw(ops)
        return lead

    def place(self, vec: np.ndarray, lead: int, pid: int = -1) -> int:
        """Normalize an already reduced row and store it as the pivot of ``lead``."""
        c = int(vec[lead])
        if c != 1:
            inv = int(INV[c])
            self.counter.add(1 + int(np.count_nonzero(vec)))
            kernels.scale(vec, inv)
            if self.store is not None:
                self.store.scale(pid, inv)
        r = self._take_row()
        self.mat[r] = vec
        self.pivot_of_col[lead] = r
        self.pid[r] = pid
        self.order[r] = self._seq
        self._seq += 1
        self.rank += 1
        return r

    def insert(self, vec: np.ndarray, pid: int = -1) -> int:
        """Reduce and, if innovative, store.  Returns the lead column or -1."""
        lead = self.reduce(vec, pid)
        if lead >= 0:
            self.place(vec, lead, pid)
        return lead

    def remove(self, col: int) -> tuple[np.ndarray, int]:
        """Detach the row pivoted at ``col``; returns (row, payload id)."""
        r = int(self.pivot_of_col[col])
        row = self.mat[r].copy()
        pid = int(self.pid[r])
        self.mat[r] = 0
        self.pid[r] = -1
        self.pivot_of_col[col] = -1
        self._free.append(r)
        self.rank -= 1
        return row, pid

    def back_substitute(self) -> None:
        """Clear entries above every pivot (reduced echelon form)."""
        ops, coef_ops = kernels.back_substitute(self.mat, self.pivot_of_col)
        self.counter.add(coef_ops)
        if self.store is not None and len(ops):
            self.store.extend(ops, self.pid)

    def pivot_rows(self):
        """(column, row) pairs in ascending column order."""
        cols = np.flatnonzero(self.pivot_of_col >= 0)
        return [(int(c), int(self.pivot_of_col[c])) for c in cols]


@dataclass
class TraceRecord:
    packets_received: int
    rank: int
    phase: str
    M_I: int | None = None

    def line(self) -> str:
        mi = "-" if self.M_I is None else str(self.M_I)
        return f"packets={self.packets_received} rank={self.rank} phase={self.phase} M_I={mi}"


class Decoder:
    """Common session bookkeeping; subclasses implement :meth:`_receive`."""

    name = "base"

    def __init__(self, code, K: int | None = None, trace=None):
        self.code = code
        self.spec = code.spec
        self.K = self.spec.K if K is None else K
        self.n = self.spec.n_intermediate
        self.counter = OpCounter()
        self.store = PayloadStore(self.K, self.counter, capacity=self.n + 16)
        self.received = 0
        self.trace = trace
        self.result: DecodeOutcome | None = None
        self.M_I: int | None = None

    def _emit(self, rank: int, phase: str) -> None:
        if self.trace is None:
            return
        rec = TraceRecord(self.received, rank, phase, self.M_I)
        if callable(self.trace):
            self.trace(rec)
        else:
            self.trace.write(rec.line() + "\n")

    def local_gev(self, pkt) -> np.ndarray:
        """Packet GEV with padding positions cleared (their packets are zero)."""
        gev = np.array(pkt.gev, dtype=np.uint8)
        ix = self.code.gmap[pkt.gen_id]
        gev[ix >= self.n] = 0
        return gev

    def receive(self, pkt) -> DecodeOutcome:
        if self.result is not None and self.result.decoded:
            return self.result
        self.received += 1
        out = self._receive(pkt)
        out.packets = self.received
        out.ops = self.counter.ops
        if out.decoded:
            self.result = out
        return out

    def _receive(self, pkt) -> DecodeOutcome:  # pragma: no cover - abstract
        raise NotImplementedError

    def _finish(self, x_pids) -> DecodeOutcome:
        """Materialise the recovered intermediates from their payload ids."""
        values = self.store.get(x_pids)
        return DecodeOutcome(Status.Decoded, recovered=values[: self.spec.M], M_I=self.M_I,
                             intermediates=values)


def precode_rows(code) -> np.ndarray:
    """Parity-check rows [W | I] over the unknown columns (empty when S=0)."""
    if code.precode is None:
        return np.zeros((0, code.spec.n_intermediate), dtype=np.uint8)
    return code.precode.parity_matrix()


def field_of(code) -> FieldId:
    return code.spec.field
