# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled elimination kernels; behaviour mirrors ``gnc._pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint8_t, int64_t
from libcpp.vector cimport vector

from .gf import MUL as _MUL

cnp.import_array()

BACKEND = "cython"

cdef uint8_t[:, ::1] MUL = np.ascontiguousarray(_MUL)


cdef inline void _mul_add(uint8_t* dst, const uint8_t* src, Py_ssize_t n, int c) noexcept nogil:
    cdef Py_ssize_t i
    cdef const uint8_t* m
    if c == 1:
        for i in range(n):
            dst[i] ^= src[i]
    else:
        m = &MUL[c, 0]
        for i in range(n):
            dst[i] ^= m[src[i]]


cdef inline Py_ssize_t _nnz(const uint8_t* row, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, k = 0
    for i in range(n):
        if row[i]:
            k += 1
    return k


def mul_add(uint8_t[::1] dst, const uint8_t[::1] src, int c):
    if dst.shape[0] != src.shape[0]:
        raise ValueError("length mismatch")
    _mul_add(&dst[0], &src[0], dst.shape[0], c)


def scale(uint8_t[::1] dst, int c):
    cdef Py_ssize_t i
    cdef uint8_t* m
    if c == 1:
        return
    m = &MUL[c, 0]
    for i in range(dst.shape[0]):
        dst[i] = m[dst[i]]


def echelon_reduce(uint8_t[::1] row, uint8_t[:, ::1] basis, const int64_t[::1] pivot_of_col,
                   int64_t[:, ::1] ops):
    cdef Py_ssize_t n = row.shape[0]
    cdef Py_ssize_t c = 0, n_ops = 0, coef_ops = 0
    cdef int64_t p
    cdef int coeff
    with nogil:
        while c < n:
            if row[c] == 0:
                c += 1
                continue
            p = pivot_of_col[c]
            if p < 0:
                break
            coeff = row[c]
            # basis rows are zero left of their pivot
            coef_ops += _nnz(&basis[p, c], n - c)
            _mul_add(&row[c], &basis[p, c], n - c, coeff)
            ops[n_ops, 0] = p
            ops[n_ops, 1] = coeff
            n_ops += 1
            c += 1
    if c >= n:
        return n_ops, coef_ops, -1
    return n_ops, coef_ops, c


def back_substitute(uint8_t[:, ::1] basis, const int64_t[::1] pivot_of_col):
    cdef Py_ssize_t nrows = basis.shape[0], n = basis.shape[1]
    cdef Py_ssize_t c, q, w
    cdef int64_t p
    cdef int coeff
    cdef Py_ssize_t coef_ops = 0
    cdef vector[int64_t] log
    with nogil:
        c = n - 1
        while c >= 0:
            p = pivot_of_col[c]
            if p >= 0:
                w = -1
                for q in range(nrows):
                    if q == p or basis[q, c] == 0:
                        continue
                    coeff = basis[q, c]
                    if w < 0:
                        w = _nnz(&basis[p, c], n - c)
                    coef_ops += w
                    _mul_add(&basis[q, c], &basis[p, c], n - c, coeff)
                    log.push_back(q)
                    log.push_back(p)
                    log.push_back(coeff)
            c -= 1
    out = np.empty((log.size() // 3, 3), dtype=np.int64)
    cdef int64_t[:, ::1] ov = out
    cdef Py_ssize_t i
    for i in range(<Py_ssize_t>(log.size() // 3)):
        ov[i, 0] = log[3 * i]
        ov[i, 1] = log[3 * i + 1]
        ov[i, 2] = log[3 * i + 2]
    return out, coef_ops


def replay(uint8_t[:, ::1] mat, const int64_t[:, ::1] ops, bint count_nnz=False):
    cdef Py_ssize_t i, j, n = mat.shape[1]
    cdef int64_t d, s
    cdef int c
    cdef Py_ssize_t total = 0
    cdef uint8_t* m
    cdef uint8_t* row
    with nogil:
        for i in range(ops.shape[0]):
            d = ops[i, 0]
            s = ops[i, 1]
            c = <int>ops[i, 2]
            if s < 0:
                row = &mat[d, 0]
                if count_nnz:
                    total += _nnz(row, n)
                if c != 1:
                    m = &MUL[c, 0]
                    for j in range(n):
                        row[j] = m[row[j]]
            elif c == 0:
                for j in range(n):
                    mat[d, j] = mat[s, j]
            else:
                if count_nnz:
                    total += _nnz(&mat[s, 0], n)
                _mul_add(&mat[d, 0], &mat[s, 0], n, c)
    return total
