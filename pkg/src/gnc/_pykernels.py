"""Pure-Python/numpy implementations of the elimination kernels.

These define the reference behaviour; ``_ckernels`` must match them exactly.
All coefficient matrices are ``uint8`` with one field element per byte
(GF(2) rows simply hold 0/1), and a row stored in an echelon basis always
has a leading coefficient of 1.
"""

from __future__ import annotations

import numpy as np

from .gf import MUL

BACKEND = "python"


def mul_add(dst: np.ndarray, src: np.ndarray, c: int) -> None:
    """dst ^= c * src over GF(256), in place."""
    if c == 1:
        np.bitwise_xor(dst, src, out=dst)
    else:
        np.bitwise_xor(dst, MUL[c][src], out=dst)


def scale(dst: np.ndarray, c: int) -> None:
    if c != 1:
        dst[:] = MUL[c][dst]


def echelon_reduce(row, basis, pivot_of_col, ops):
    """Forward-reduce ``row`` against an echelon ``basis``.

    Scans columns left to right; each nonzero at a pivot column is cancelled
    with that pivot's row.  Stops at the first nonzero column that has no
    pivot.  ``ops[i] = (basis_row, coeff)`` records the i-th row operation.

    Returns ``(n_ops, coef_ops, lead)`` where ``lead`` is -1 when the row was
    reduced to zero.  ``coef_ops`` sums the nonzeros of every source row used.
    """
    n = row.shape[0]
    n_ops = 0
    coef_ops = 0
    c = 0
    while c < n:
        nz = np.flatnonzero(row[c:])
        if nz.size == 0:
            return n_ops, coef_ops, -1
        c += int(nz[0])
        p = int(pivot_of_col[c])
        if p < 0:
            return n_ops, coef_ops, c
        coeff = int(row[c])
        src = basis[p]
        coef_ops += int(np.count_nonzero(src))
        mul_add(row, src, coeff)
        ops[n_ops, 0] = p
        ops[n_ops, 1] = coeff
        n_ops += 1
        c += 1
    return n_ops, coef_ops, -1


def back_substitute(basis, pivot_of_col):
    """Clear every entry above each pivot, working right to left.

    Returns ``(ops, coef_ops)`` where ``ops`` is an ``(n, 3)`` int64 array of
    ``(dst_row, src_row, coeff)`` in execution order.
    """
    log = []
    coef_ops = 0
    cols = np.flatnonzero(pivot_of_col >= 0)
    for c in cols[::-1]:
        p = int(pivot_of_col[c])
        src = basis[p]
        w = None
        for q in np.flatnonzero(basis[:, c]):
            q = int(q)
            if q == p:
                continue
            coeff = int(basis[q, c])
            if w is None:
                w = int(np.count_nonzero(src))
            coef_ops += w
            mul_add(basis[q], src, coeff)
            log.append((q, p, coeff))
    ops = np.array(log, dtype=np.int64).reshape(-1, 3)
    return ops, coef_ops


def replay(mat, ops, count_nnz=False):
    """Apply a row-operation log to ``mat`` in order.

    Each op is ``(dst, src, coeff)``; ``src < 0`` means "scale dst by coeff"
    and ``coeff == 0`` means "copy src into dst" (never counted).  When
    ``count_nnz`` is set, returns the summed nonzero counts of the source rows
    at the moment each op ran (scales count the nonzeros of dst).
    """
    total = 0
    for d, s, c in ops:
        d = int(d)
        s = int(s)
        c = int(c)
        if s < 0:
            if count_nnz:
                total += int(np.count_nonzero(mat[d]))
            scale(mat[d], c)
        elif c == 0:
            mat[d] = mat[s]
        else:
            if count_nnz:
                total += int(np.count_nonzero(mat[s]))
            mul_add(mat[d], mat[s], c)
    return total
