"""Two pivoting rounds for sparse decoding matrices.

First round: greedy inactivation.  Rows are peeled in lower-triangular order
whenever a row with exactly one active nonzero exists; otherwise the active
column with the most nonzeros is moved to the dense inactive block.

Second round: Zlatev's restricted Markowitz search on the dense inactive
block.  Only the three lightest rows are examined per pivot.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from ..gf import INV, MUL


@dataclass
class InactivationResult:
    pivots: list  # (row, col) in diagonal order
    inactive: list  # inactivated columns, in the order they were inactivated
    rest_rows: list  # rows left for the inactive block (T_I)
    col_rows: list = field(repr=False, default_factory=list)

    @property
    def M_I(self) -> int:
        return len(self.inactive)

    @property
    def row_perm(self) -> list:
        return [r for r, _ in self.pivots] + list(self.rest_rows)

    @property
    def col_perm(self) -> list:
        return [c for _, c in self.pivots] + list(self.inactive)


def _sparse_structure(A: np.ndarray):
    n_rows, n_cols = A.shape
    rr, cc = np.nonzero(A)
    row_starts = np.searchsorted(rr, np.arange(n_rows + 1))
    row_cols = [cc[row_starts[r] : row_starts[r + 1]].tolist() for r in range(n_rows)]
    order = np.argsort(cc, kind="stable")
    cs, rs = cc[order], rr[order]
    col_starts = np.searchsorted(cs, np.arange(n_cols + 1))
    col_rows = [rs[col_starts[c] : col_starts[c + 1]].tolist() for c in range(n_cols)]
    return row_cols, col_rows


def inactivation_pivot(A: np.ndarray, rule: str = "global") -> InactivationResult:
    """Greedy peeling of ``A`` into the lower-triangular/inactive layout.

    With ``rule="global"`` the inactivated column is the active column of
    maximal degree; with ``rule="minset"`` it is the maximal-degree column
    among those touched by rows of minimal residual degree.  Ties among
    degree-one rows go to the lowest row index; ties among columns go to the
    lowest column index.
    """
    if rule not in ("global", "minset"):
        raise ValueError(f"unknown inactivation rule {rule!r}")
    n_rows, n_cols = A.shape
    row_cols, col_rows = _sparse_structure(A)
    row_deg = [len(x) for x in row_cols]
    col_deg = [len(x) for x in col_rows]
    row_done = [False] * n_rows
    col_state = [0] * n_cols  # 0 active, 1 pivoted, 2 inactive

    pivots, inactive, rest = [], [], []
    live_rows = 0
    deg1 = []
    for r in range(n_rows):
        if row_deg[r] == 0:
            row_done[r] = True
            rest.append(r)
        else:
            live_rows += 1
            if row_deg[r] == 1:
                deg1.append(r)
    heapq.heapify(deg1)
    colheap = [(-d, c) for c, d in enumerate(col_deg) if d > 0]
    heapq.heapify(colheap)

    def drop_column(c):
        nonlocal live_rows
        for r2 in col_rows[c]:
            if row_done[r2]:
                continue
            d = row_deg[r2] - 1
            row_deg[r2] = d
            if d == 1:
                heapq.heappush(deg1, r2)
            elif d == 0:
                row_done[r2] = True
                rest.append(r2)
                live_rows -= 1

    while live_rows:
        while deg1 and (row_done[deg1[0]] or row_deg[deg1[0]] != 1):
            heapq.heappop(deg1)
        if deg1:
            r = heapq.heappop(deg1)
            c = next(c for c in row_cols[r] if col_state[c] == 0)
            pivots.append((r, c))
            row_done[r] = True
            live_rows -= 1
            col_state[c] = 1
            for c2 in row_cols[r]:
                if col_state[c2] == 0:
                    col_deg[c2] -= 1
                    heapq.heappush(colheap, (-col_deg[c2], c2))
            drop_column(c)
        elif rule == "minset":
            dmin = min(row_deg[r] for r in range(n_rows) if not row_done[r])
            cands = {c for r in range(n_rows) if not row_done[r] and row_deg[r] == dmin
                     for c in row_cols[r] if col_state[c] == 0}
            c = max(cands, key=lambda c: (col_deg[c], -c))
            col_state[c] = 2
            inactive.append(c)
            drop_column(c)
        else:
            while True:
                negd, c = heapq.heappop(colheap)
                if col_state[c] == 0 and -negd == col_deg[c]:
                    break
            col_state[c] = 2
            inactive.append(c)
            drop_column(c)

    # columns untouched by any remaining row can only be solved from T_I
    inactive.extend(c for c in range(n_cols) if col_state[c] == 0)
    return InactivationResult(pivots, inactive, rest, col_rows)


@dataclass
class ZlatevState:
    """Forward-eliminated dense block with its pivot sequence."""

    pivots: list  # (row, col), local indices, in elimination order
    missing: list  # columns without a pivot (rank deficiency)
    ops: list  # (dst_row, src_row, coeff); src_row == -1 scales dst
    coef_ops: int


def _axpy_rows(T, rows, src_row, coefs):
    if np.all(coefs == 1):
        T[rows] ^= src_row
    else:
        T[rows] ^= MUL[coefs[:, None], src_row[None, :]]


def zlatev_forward(T: np.ndarray, search_rows: int = 3) -> ZlatevState:
    """Forward-eliminate ``T`` in place with Zlatev pivot selection.

    Afterwards each pivot row has a unit at its pivot and zeros at the pivot
    columns of every earlier step (upper triangular in pivot order).
    """
    m, n = T.shape
    row_alive = np.ones(m, dtype=bool)
    col_alive = np.ones(n, dtype=bool)
    pivots, ops = [], []
    coef_ops = 0
    nz = T != 0
    row_cnt = nz.sum(axis=1)
    col_cnt = nz.sum(axis=0)
    while True:
        cand_pool = np.flatnonzero(row_alive & (row_cnt > 0))
        if cand_pool.size == 0:
            break
        pick = np.lexsort((cand_pool, row_cnt[cand_pool]))[:search_rows]
        best = None
        for i in cand_pool[pick]:
            cols = np.flatnonzero((T[i] != 0) & col_alive)
            mc = (row_cnt[i] - 1) * (col_cnt[cols] - 1)
            k = np.lexsort((cols, mc))[0]
            key = (int(mc[k]), int(cols[k]), int(i))
            if best is None or key < best:
                best = key
        _, j, i = best
        a = int(T[i, j])
        w = int(np.count_nonzero(T[i]))
        if a != 1:
            inv = int(INV[a])
            T[i] = MUL[inv][T[i]]
            ops.append((i, -1, inv))
            coef_ops += 1 + w
        row_alive[i] = False
        col_alive[j] = False
        pivots.append((i, j))
        hits = np.flatnonzero(row_alive & (T[:, j] != 0))
        if hits.size:
            coefs = T[hits, j].copy()
            src = T[i].copy()
            old = T[hits] != 0
            _axpy_rows(T, hits, src, coefs)
            new = T[hits] != 0
            coef_ops += w * hits.size
            ops.extend((int(r), i, int(c)) for r, c in zip(hits, coefs))
            # incremental count maintenance over the live submatrix
            delta = new.astype(np.int64) - old.astype(np.int64)
            col_cnt += delta.sum(axis=0)
            row_cnt[hits] = (new & col_alive).sum(axis=1)
        # retire pivot row and column from the live counts
        col_cnt -= (T[i] != 0)
        row_cnt -= (T[:, j] != 0)
        row_cnt[i] = 0
    missing = np.flatnonzero(col_alive).tolist()
    return ZlatevState(pivots, missing, ops, coef_ops)


def upper_back_substitute(T: np.ndarray, pivots: list):
    """Reduce the forward-eliminated block to identity on its pivots.

    Returns ``(ops, coef_ops)``.
    """
    ops = []
    coef_ops = 0
    prow = np.array([i for i, _ in pivots], dtype=np.int64)
    for k in range(len(pivots) - 1, 0, -1):
        i, j = pivots[k]
        earlier = prow[:k]
        hits = earlier[T[earlier, j] != 0]
        if hits.size == 0:
            continue
        coefs = T[hits, j].copy()
        _axpy_rows(T, hits, T[i].copy(), coefs)
        coef_ops += int(np.count_nonzero(T[i])) * hits.size
        ops.extend((int(r), int(i), int(c)) for r, c in zip(hits, coefs))
    return ops, coef_ops


def zlatev_pivot(T: np.ndarray, search_rows: int = 3):
    """Pivot order chosen by the second round, without touching ``T``.

    Returns ``(row_perm, col_perm)``; structurally empty rows and columns
    left without a pivot come last.
    """
    st = zlatev_forward(np.array(T, dtype=np.uint8, copy=True), search_rows)
    used_r = [i for i, _ in st.pivots]
    used_c = [j for _, j in st.pivots]
    m, n = T.shape
    row_perm = used_r + [r for r in range(m) if r not in set(used_r)]
    col_perm = used_c + st.missing
    return row_perm, col_perm
