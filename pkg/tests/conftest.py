import numpy as np
import pytest

from gnc.codes import Encoder, random_sources
from gnc.gf import INV, MUL


def gf_rank(rows) -> int:
    """Dense GF(256) rank by textbook elimination (independent of the kernels)."""
    A = [list(map(int, r)) for r in np.asarray(rows, dtype=np.uint8)]
    if not A:
        return 0
    n_cols = len(A[0])
    rank = 0
    for c in range(n_cols):
        p = next((i for i in range(rank, len(A)) if A[i][c]), None)
        if p is None:
            continue
        A[rank], A[p] = A[p], A[rank]
        inv = int(INV[A[rank][c]])
        A[rank] = [int(MUL[inv][x]) for x in A[rank]]
        for i in range(len(A)):
            if i != rank and A[i][c]:
                f = A[i][c]
                A[i] = [x ^ int(MUL[f][y]) for x, y in zip(A[i], A[rank])]
        rank += 1
    return rank


def packet_stream(code, seed, n):
    rng = np.random.default_rng(seed)
    src = random_sources(code.spec.M, code.spec.K, rng)
    enc = Encoder(code, src, rng)
    return src, enc, [next(enc) for _ in range(n)]


@pytest.fixture
def rank_oracle():
    return gf_rank


# -- acceptance reporting ----------------------------------------------------------

ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """record(n, ok, detail): one verdict line per criterion, printed at the end."""

    def record(n, ok, detail):
        ACCEPTANCE[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
