"""Overlap-aware (OA) decoder.

Packets are first reduced inside their own generation's local decoding
matrix (LDM).  Once M innovative GEVs are held the decoder is *OA ready*: the
LDMs are partially diagonalized, expanded into the global matrix together with
the precode's parity-check rows, and solved with inactivation pivoting
followed by Zlatev pivoting on the dense inactive block.

If some innovative GEVs were not innovative EVs, the inactive block is left
with empty pivots; later packets are reduced through the solved active part
and fill those pivots one by one.
"""

from __future__ import annotations

import numpy as np

from ..gf import INV
from .. import kernels
from .base import (
    Decoder,
    DecodeOutcome,
    EchelonBasis,
    IntegrityError,
    Status,
    precode_rows,
)
from .pivoting import inactivation_pivot, upper_back_substitute, zlatev_forward


class OADecoder(Decoder):
    name = "oa"

    def __init__(self, code, K=None, trace=None, pivot_rule: str = "global"):
        super().__init__(code, K, trace)
        self.pivot_rule = pivot_rule
        self.ldms = [
            EchelonBasis(len(ix), self.counter, self.store) for ix in code.gmap.indices
        ]
        self.innovative = 0
        self.ready = False
        # populated by oa_solve
        self.gpid = None  # payload id of each global row
        self.U = None
        self.T = None
        self.t_rows = None
        self.t_pivots = None
        self.missing = None
        self.active = None
        self.inactive = None

    # -- phase 1 ---------------------------------------------------------

    def _receive(self, pkt) -> DecodeOutcome:
        l = pkt.gen_id
        gev = self.local_gev(pkt)
        pid = self.store.add(pkt.payload)
        lead = self.ldms[l].insert(gev, pid)
        if lead < 0:
            return DecodeOutcome(Status.NeedMorePackets, M_I=self.M_I)
        self.innovative += 1
        if self.ready:
            return self._late_row(l, gev, pid)
        if self.innovative < self.spec.M:
            self._emit(self.innovative, "local")
            return DecodeOutcome(Status.NeedMorePackets)
        self.ready = True
        return self.oa_solve()

    # -- phase 2 ---------------------------------------------------------

    def assemble(self):
        """Partially diagonalize every LDM and build A_eff with payload ids."""
        rows, gpid = [], []
        for l, ldm in enumerate(self.ldms):
            if ldm.rank == 0:
                continue
            ldm.back_substitute()
            piv = ldm.pivot_rows()
            piv.sort(key=lambda cr: ldm.order[cr[1]])
            for _, r in piv:
                rows.append(self.code.gmap.expand(l, ldm.mat[r], width=self.n))
                g = self.store.add()
                self.store.copy(g, int(ldm.pid[r]))
                gpid.append(g)
        for prow in precode_rows(self.code):
            rows.append(prow.copy())
            gpid.append(self.store.add())
        A = np.array(rows, dtype=np.uint8).reshape(-1, self.n)
        return A, np.array(gpid, dtype=np.int64)

    def oa_solve(self) -> DecodeOutcome:
        A, self.gpid = self.assemble()
        piv = inactivation_pivot(A, self.pivot_rule)
        self.M_I = piv.M_I
        self.active = piv.pivots
        self.inactive = np.array(piv.inactive, dtype=np.int64)
        self._emit(self.innovative, "inactivated")

        # diagonalize the lower-triangular active part; fill lands in U only
        ops = []
        n_axpy = n_scale = 0
        for r, c in piv.pivots:
            a = int(A[r, c])
            if a != 1:
                ops.append((r, -1, int(INV[a])))
                n_scale += 1
            for r2 in piv.col_rows[c]:
                if r2 != r:
                    ops.append((r2, r, int(A[r2, c])))
                    n_axpy += 1
        ops = np.array(ops, dtype=np.int64).reshape(-1, 3)
        U = np.ascontiguousarray(A[:, self.inactive])
        touched = kernels.replay(U, ops, True)
        # +1 per op for the active-column entry itself, +1 divide per scale
        self.counter.add(touched + n_axpy + 2 * n_scale)
        self._log_rows(ops)
        self.U = U

        self.t_rows = np.array(piv.rest_rows, dtype=np.int64)
        self.T = U[self.t_rows].copy()
        st = zlatev_forward(self.T)
        self.counter.add(st.coef_ops)
        self._log_rows(st.ops, self.t_rows)
        self.t_pivots = st.pivots
        self.missing = list(st.missing)
        if self.missing:
            self._emit(self.innovative, "await_fill")
            return DecodeOutcome(Status.NeedMorePackets, M_I=self.M_I)
        return self._complete()

    def _log_rows(self, ops, local_rows=None):
        """Forward global/local row ops to the payload log."""
        ops = np.asarray(ops, dtype=np.int64).reshape(-1, 3)
        if not len(ops):
            return
        rowmap = self.gpid if local_rows is None else self.gpid[local_rows]
        out = ops.copy()
        out[:, 0] = rowmap[ops[:, 0]]
        src = ops[:, 1]
        out[:, 1] = np.where(src >= 0, rowmap[np.maximum(src, 0)], -1)
        self.store.extend_raw(out)
        # divides for the scales are charged on the coefficient side

    def _complete(self) -> DecodeOutcome:
        T = self.T
        ops, coef = upper_back_substitute(T, self.t_pivots)
        self.counter.add(coef)
        self._log_rows(ops, self.t_rows)
        # global row holding each inactive unknown
        sol_row = np.empty(len(self.inactive), dtype=np.int64)
        for i, j in self.t_pivots:
            sol_row[j] = self.t_rows[i]
        # clear U_I from the active rows with the solved inactive packets
        act_rows = np.array([r for r, _ in self.active], dtype=np.int64)
        if len(act_rows) and len(self.inactive):
            rr, jj = np.nonzero(self.U[act_rows])
            if rr.size:
                ops = np.empty((rr.size, 3), dtype=np.int64)
                ops[:, 0] = self.gpid[act_rows[rr]]
                ops[:, 1] = self.gpid[sol_row[jj]]
                ops[:, 2] = self.U[act_rows[rr], jj]
                self.counter.add(int(rr.size))
                self.store.extend_raw(ops)
        x_pid = np.empty(self.n, dtype=np.int64)
        for r, c in self.active:
            x_pid[c] = self.gpid[r]
        x_pid[self.inactive] = self.gpid[sol_row]
        self._emit(self.innovative, "decoded")
        return self._finish(x_pid)

    # -- rank-deficient tail ---------------------------------------------

    def _late_row(self, l: int, gev: np.ndarray, pid: int) -> DecodeOutcome:
        """Route an innovative GEV received after OA-ready into T_I."""
        ev = self.code.gmap.expand(l, gev, width=self.n)
        g = self.store.add()
        self.store.copy(g, pid)
        v = ev[self.inactive].copy()
        ops = []
        for r, c in self.active:
            a = int(ev[c])
            if a:
                kernels.mul_add(v, self.U[r], a)
                self.counter.add(1 + int(np.count_nonzero(self.U[r])))
                ops.append((g, int(self.gpid[r]), a))
        for i, j in self.t_pivots:
            a = int(v[j])
            if a:
                kernels.mul_add(v, self.T[i], a)
                self.counter.add(int(np.count_nonzero(self.T[i])))
                ops.append((g, int(self.gpid[self.t_rows[i]]), a))
        if ops:
            self.store.extend_raw(np.array(ops, dtype=np.int64))
        hit = [j for j in self.missing if v[j]]
        if not hit:
            # innovative within its generation but dependent globally
            self._emit(self.innovative, "await_fill")
            return DecodeOutcome(Status.NeedMorePackets, M_I=self.M_I)
        lead = hit[0]
        a = int(v[lead])
        if a != 1:
            inv = int(INV[a])
            self.counter.add(1 + int(np.count_nonzero(v)))
            kernels.scale(v, inv)
            self.store.scale(g, inv)
        self.gpid = np.append(self.gpid, g)
        self.t_rows = np.append(self.t_rows, len(self.gpid) - 1)
        self.T = np.vstack([self.T, v[None, :]])
        self.t_pivots.append((self.T.shape[0] - 1, lead))
        self.missing.remove(lead)
        if self.missing:
            self._emit(self.innovative, "await_fill")
            return DecodeOutcome(Status.NeedMorePackets, M_I=self.M_I)
        return self._complete()


def oa_receive(state: OADecoder, pkt) -> DecodeOutcome:
    return state.receive(pkt)


def oa_solve(state: OADecoder) -> DecodeOutcome:
    if not state.ready:
        raise IntegrityError("oa_solve called before the decoder is OA ready")
    return state.oa_solve()
