"""Finite-field arithmetic over GF(2) and GF(2**8) on packed symbol rows.

GF(2**8) uses the primitive polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D)
with generator 2.  Every multiply-and-add and every divide is charged to an
:class:`OpCounter`, one unit per field element touched.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

PRIMITIVE_POLY = 0x11D


class FieldId(enum.Enum):
    Binary = 2
    Byte256 = 256

    @property
    def order(self) -> int:
        return self.value

    @classmethod
    def from_order(cls, q: int) -> "FieldId":
        try:
            return cls(int(q))
        except ValueError:
            raise ValueError(f"unsupported field size {q!r}; expected 2 or 256") from None


def ref_mul(a: int, b: int) -> int:
    """Table-free GF(256) multiply (shift-and-add, reduced by 0x11D)."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= PRIMITIVE_POLY
    return r


def _build_tables():
    exp = np.zeros(512, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int32)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x = ref_mul(x, 2)
    exp[255:510] = exp[0:255]
    # full product table: MUL[c] is the row used to scale a whole symbol row by c
    mul = np.zeros((256, 256), dtype=np.uint8)
    nz = np.arange(1, 256)
    for c in range(1, 256):
        mul[c, 1:] = exp[(log[c] + log[nz]) % 255]
    inv = np.zeros(256, dtype=np.uint8)
    inv[1:] = exp[(255 - log[nz]) % 255]
    return exp, log, mul, inv


EXP, LOG, MUL, INV = _build_tables()


def gf_mul(a: int, b: int) -> int:
    return int(MUL[a, b])


class FieldError(ArithmeticError):
    """Raised for arithmetic that is undefined in the field (e.g. inverting 0)."""


def field_inverse(x: int, field: FieldId) -> int:
    if x == 0:
        raise FieldError("zero has no multiplicative inverse")
    if field is FieldId.Binary:
        if x != 1:
            raise ValueError(f"{x} is not an element of GF(2)")
        return 1
    if not 0 < x < 256:
        raise ValueError(f"{x} is not an element of GF(256)")
    return int(INV[x])


@dataclass
class OpCounter:
    """Running count of field operations for one decoding session."""

    ops: int = 0

    def add(self, n: int) -> None:
        if n < 0:
            raise ValueError("operation counts only grow")
        self.ops += n


_WORD = 64


class SymbolRow:
    """A fixed-length row of field symbols.

    Binary rows pack 64 symbols per ``uint64`` word; GF(256) rows hold one
    byte per symbol.
    """

    __slots__ = ("field", "length", "data")

    def __init__(self, field: FieldId, length: int, data: np.ndarray | None = None):
        self.field = field
        self.length = int(length)
        if field is FieldId.Binary:
            nwords = (self.length + _WORD - 1) // _WORD
            self.data = np.zeros(nwords, dtype=np.uint64) if data is None else data
        else:
            self.data = np.zeros(self.length, dtype=np.uint8) if data is None else data

    @classmethod
    def from_symbols(cls, field: FieldId, symbols) -> "SymbolRow":
        sym = np.asarray(symbols, dtype=np.uint8)
        row = cls(field, sym.size)
        if field is FieldId.Binary:
            if np.any(sym > 1):
                raise ValueError("binary row symbols must be 0 or 1")
            bits = np.zeros(row.data.size * _WORD, dtype=np.uint8)
            bits[: sym.size] = sym
            # little-endian bit order inside each word: symbol i -> bit i % 64
            packed = np.packbits(bits.reshape(-1, 8), axis=1, bitorder="little").reshape(-1)
            row.data = packed.view(np.uint64).copy()
        else:
            row.data = sym.copy()
        return row

    def symbols(self) -> np.ndarray:
        if self.field is FieldId.Binary:
            bits = np.unpackbits(self.data.view(np.uint8), bitorder="little")
            return bits[: self.length].astype(np.uint8)
        return self.data.copy()

    def copy(self) -> "SymbolRow":
        return SymbolRow(self.field, self.length, self.data.copy())

    def __len__(self) -> int:
        return self.length

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymbolRow):
            return NotImplemented
        return (
            self.field is other.field
            and self.length == other.length
            and np.array_equal(self.symbols(), other.symbols())
        )

    def __repr__(self) -> str:
        return f"SymbolRow({self.field.name}, {self.symbols().tolist()})"


def _check_coeff(coeff: int, field: FieldId) -> None:
    if coeff == 0:
        raise ValueError("coefficient must be nonzero")
    if not 0 < coeff < field.order:
        raise ValueError(f"coefficient {coeff} outside {field.name}")


def row_axpy(dst: SymbolRow, src: SymbolRow, coeff: int, counter: OpCounter) -> SymbolRow:
    """dst += coeff * src, in place; charges ``dst.length`` operations."""
    if dst.field is not src.field:
        raise ValueError("field mismatch between rows")
    if dst.length != src.length:
        raise ValueError("length mismatch between rows")
    _check_coeff(coeff, dst.field)
    if dst.field is FieldId.Binary or coeff == 1:
        np.bitwise_xor(dst.data, src.data, out=dst.data)
    else:
        np.bitwise_xor(dst.data, MUL[coeff][src.data], out=dst.data)
    counter.add(dst.length)
    return dst


def row_scale(dst: SymbolRow, coeff: int, counter: OpCounter) -> SymbolRow:
    """dst *= coeff, in place.  Scaling a binary row by 1 costs nothing."""
    _check_coeff(coeff, dst.field)
    if dst.field is FieldId.Binary:
        return dst
    if coeff != 1:
        dst.data[:] = MUL[coeff][dst.data]
    counter.add(dst.length)
    return dst
