"""Straightforward overhead-optimal decoder: one dense GE over expanded EVs."""

from __future__ import annotations

from .base import Decoder, DecodeOutcome, EchelonBasis, Status, precode_rows


class NaiveDecoder(Decoder):
    name = "naive"

    def __init__(self, code, K=None, trace=None):
        super().__init__(code, K, trace)
        self.basis = EchelonBasis(self.n, self.counter, self.store)
        for row in precode_rows(code):
            pid = self.store.add()  # parity equations have all-zero right-hand sides
            self.basis.insert(row.copy(), pid)

    @property
    def rank(self) -> int:
        return self.basis.rank

    def _receive(self, pkt) -> DecodeOutcome:
        gev = self.local_gev(pkt)
        ev = self.code.gmap.expand(pkt.gen_id, gev, width=self.n)
        pid = self.store.add(pkt.payload)
        self.basis.insert(ev, pid)
        if self.basis.rank < self.n:
            self._emit(self.basis.rank, "forward")
            return DecodeOutcome(Status.NeedMorePackets)
        self.basis.back_substitute()
        self._emit(self.basis.rank, "decoded")
        rows = self.basis.pivot_of_col[: self.n]
        return self._finish(self.basis.pid[rows])


def naive_receive(state: NaiveDecoder, pkt) -> DecodeOutcome:
    return state.receive(pkt)


__all__ = ["NaiveDecoder", "naive_receive"]
