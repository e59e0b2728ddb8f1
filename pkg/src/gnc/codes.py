"""Generation structures, code parameters and the source encoder."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .gf import MUL, FieldId


class CodeKind(enum.Enum):
    RAC = "RAC"
    PB_RAC = "PB_RAC"
    H2T = "H2T"
    Windowed = "Windowed"
    Banded = "Banded"


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class CodeSpec:
    kind: CodeKind
    M: int
    K: int
    field: FieldId
    B: int
    G: int
    S: int
    L: int  # number of generations actually formed
    sched_probs: tuple
    seed: int = 0

    @property
    def H(self) -> int:
        return self.G - self.B

    @property
    def theta(self) -> float:
        return self.S / self.M

    @property
    def n_intermediate(self) -> int:
        """Unknowns the decoder solves for: sources plus parities."""
        return self.M + self.S

    @property
    def Lprime(self) -> int:
        return math.ceil((self.M + self.S) / self.B)

    @property
    def n_total(self) -> int:
        """Intermediate positions including all-zero padding."""
        if self.kind in (CodeKind.RAC, CodeKind.PB_RAC):
            return self.Lprime * self.B
        return self.M

    @property
    def n_pad(self) -> int:
        return self.n_total - self.n_intermediate


@dataclass(frozen=True)
class GenerationMap:
    """Per-generation ordered index sets into the intermediate packets."""

    indices: tuple  # of int64 arrays
    n_total: int

    def __len__(self) -> int:
        return len(self.indices)

    def __getitem__(self, l):
        return self.indices[l]

    def sizes(self) -> list:
        return [len(ix) for ix in self.indices]

    def expand(self, l: int, gev: np.ndarray, width: int | None = None) -> np.ndarray:
        """GEV -> full-length encoding vector (zeros outside the generation)."""
        ev = np.zeros(self.n_total if width is None else width, dtype=np.uint8)
        ix = self.indices[l]
        keep = ix < ev.size
        ev[ix[keep]] = gev[keep]
        return ev

    def restrict(self, l: int, ev: np.ndarray) -> np.ndarray:
        return ev[self.indices[l]].copy()


@dataclass(frozen=True)
class Precode:
    """Systematic parity-check matrix H = [W | I] over the code field."""

    W: np.ndarray  # S x M, uint8
    field: FieldId = FieldId.Binary

    @property
    def S(self) -> int:
        return self.W.shape[0]

    @property
    def M(self) -> int:
        return self.W.shape[1]

    def parity_matrix(self) -> np.ndarray:
        S, M = self.W.shape
        H = np.zeros((S, M + S), dtype=np.uint8)
        H[:, :M] = self.W
        H[np.arange(S), M + np.arange(S)] = 1
        return H

    def parities(self, sources: np.ndarray) -> np.ndarray:
        """c_i = sum_j w_ij s_j for every parity row (ground truth for the encoder)."""
        S, M = self.W.shape
        out = np.zeros((S, sources.shape[1]), dtype=np.uint8)
        for i in range(S):
            for j in np.flatnonzero(self.W[i]):
                w = int(self.W[i, j])
                out[i] ^= sources[j] if w == 1 else MUL[w][sources[j]]
        return out


def parity_residual(precode: Precode, intermediates: np.ndarray) -> np.ndarray:
    """H x over the M+S intermediate rows; all zero when every check holds."""
    S, M = precode.W.shape
    return precode.parities(intermediates[:M]) ^ intermediates[M : M + S]


@dataclass(frozen=True)
class Code:
    """A constructed code: parameters, generation map and optional precode."""

    spec: CodeSpec
    gmap: GenerationMap
    precode: Precode | None = None
    label: str = field(default="", compare=False)


# -- parameter rules ---------------------------------------------------------


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def compute_precode_size(M: int) -> int:
    """Smallest prime >= ceil(0.01 M) + X, X the least integer with X(X-1) >= 2M."""
    if M < 1:
        raise ParameterError("M must be positive")
    X = 1
    while X * (X - 1) < 2 * M:
        X += 1
    # ceil(0.01*M) without float rounding
    s = -(-M // 100) + X
    while not is_prime(s):
        s += 1
    return s


def poisson_sf(tau: float, g: int) -> float:
    """Pr{Y > g} for Y ~ Poisson(tau), summing the pmf by term recurrence."""
    if tau <= 0:
        return 0.0
    # start in log space so exp(-tau) cannot underflow for large tau
    term = math.exp(-tau)
    if term == 0.0:
        log_term = -tau
        cdf = 0.0
        for y in range(0, g + 1):
            if y:
                log_term += math.log(tau / y)
            cdf += math.exp(log_term)
        return max(0.0, 1.0 - cdf)
    cdf = term
    for y in range(1, g + 1):
        term *= tau / y
        cdf += term
    return max(0.0, 1.0 - cdf)


def compute_gmin(M: int, S: int, B: int) -> int:
    """Least G >= B with Pr{Poisson(M/L') > G} < 1/L'."""
    Lp = math.ceil((M + S) / B)
    if Lp < 1:
        raise ParameterError("need at least one generation")
    tau = M / Lp
    G = B
    while poisson_sf(tau, G) >= 1.0 / Lp:
        G += 1
    return G


# -- generation structures ---------------------------------------------------


def floyd_sample(rng: np.random.Generator, n: int, k: int) -> list:
    """Uniform k-subset of range(n) without replacement (Floyd's algorithm)."""
    chosen = set()
    for j in range(n - k, n):
        t = int(rng.integers(0, j + 1))
        chosen.add(j if t in chosen else t)
    return sorted(chosen)


def _annexed_generations(n_real: int, B: int, H: int, rng: np.random.Generator):
    L = math.ceil(n_real / B)
    gens = []
    for l in range(L):
        base = np.arange(l * B, (l + 1) * B, dtype=np.int64)
        # annex drawn from the real intermediates outside this base part
        lo, hi = l * B, min((l + 1) * B, n_real)
        pool = n_real - (hi - lo)
        pick = floyd_sample(rng, pool, H)
        annex = [p if p < lo else p + (hi - lo) for p in pick]
        gens.append(np.concatenate([base, np.asarray(annex, dtype=np.int64)]))
    return gens


def build_rac(M: int, B: int, H: int, seed: int = 0, *, K: int = 1600,
              field: FieldId = FieldId.Binary) -> tuple[CodeSpec, GenerationMap]:
    if M < 1 or B < 1:
        raise ParameterError("M and B must be positive")
    if B > M:
        raise ParameterError("base size exceeds M")
    if H < 0 or H > M - B:
        raise ParameterError(f"annex size H={H} must lie in [0, M-B={M - B}]")
    rng = np.random.default_rng([seed, 0])
    gens = _annexed_generations(M, B, H, rng)
    L = len(gens)
    spec = CodeSpec(CodeKind.RAC, M, K, field, B, B + H, 0, L, (1.0 / L,) * L, seed)
    return spec, GenerationMap(tuple(gens), spec.n_total)


def build_precode(M: int, S: int, seed: int = 0, field: FieldId = FieldId.Binary) -> Precode:
    """Systematic LDPC precode with 3 circulant-placed nonzeros per source column."""
    if S < 1:
        raise ParameterError("precode needs S >= 1")
    W = np.zeros((S, M), dtype=np.uint8)
    if S < 2:
        W[0, :] = 1
    else:
        for j in range(M):
            a = j % S
            b = 1 + (j // S) % (S - 1)
            for r in {a, (a + b) % S, (a + 2 * b) % S}:
                W[r, j] = 1
    if field is FieldId.Byte256:
        rng = np.random.default_rng([seed, 1])
        nz = W != 0
        W[nz] = rng.integers(1, 256, int(nz.sum()), dtype=np.uint8)
    return Precode(W, field)


def build_pb_rac(M: int, B: int, seed: int = 0, *, K: int = 1600, S: int | None = None,
                 G: int | None = None, field: FieldId = FieldId.Binary):
    """Precoded RAC.  Binary by default; ``field=Byte256`` gives P256-RAC."""
    if M < B:
        raise ParameterError("need M >= B")
    S = compute_precode_size(M) if S is None else S
    G = compute_gmin(M, S, B) if G is None else G
    n_real = M + S
    H = G - B
    if H < 0 or H > n_real - B:
        raise ParameterError(f"annex size H={H} must lie in [0, {n_real - B}]")
    rng = np.random.default_rng([seed, 0])
    gens = _annexed_generations(n_real, B, H, rng)
    L = len(gens)
    kind = CodeKind.PB_RAC if S > 0 else CodeKind.RAC
    spec = CodeSpec(kind, M, K, field, B, G, S, L, (1.0 / L,) * L, seed)
    precode = build_precode(M, S, seed, field) if S > 0 else None
    return spec, GenerationMap(tuple(gens), spec.n_total), precode


def banded_probs(M: int, G: int) -> tuple:
    # weight of band l = number of sources whose leftmost covering band is l
    n = M - G + 1
    w = np.ones(n)
    w[0] = G
    return tuple((w / w.sum()).tolist())


def build_baseline(kind: CodeKind, M: int, B: int, G: int, seed: int = 0, *, K: int = 1600,
                   field: FieldId = FieldId.Binary) -> tuple[CodeSpec, GenerationMap]:
    if not 1 <= G <= M:
        raise ParameterError("need 1 <= G <= M")
    if kind is CodeKind.H2T:
        if not 1 <= B <= G:
            raise ParameterError("need 1 <= B <= G")
        L = math.ceil(M / B)
        gens = [(l * B + np.arange(G, dtype=np.int64)) % M for l in range(L)]
        probs = (1.0 / L,) * L
    elif kind is CodeKind.Windowed:
        B = 1
        gens = [(l + np.arange(G, dtype=np.int64)) % M for l in range(M)]
        probs = (1.0 / M,) * M
    elif kind is CodeKind.Banded:
        B = 1
        gens = [l + np.arange(G, dtype=np.int64) for l in range(M - G + 1)]
        probs = banded_probs(M, G)
    else:
        raise ParameterError(f"{kind} is not a baseline code")
    spec = CodeSpec(kind, M, K, field, B, G, 0, len(gens), probs, seed)
    return spec, GenerationMap(tuple(gens), M)


def build_code(kind: CodeKind | str, M: int, B: int, G: int | None = None, S: int | None = None,
               seed: int = 0, K: int = 1600, field: FieldId = FieldId.Binary) -> Code:
    """One entry point for every code family (used by the manifest and CLI)."""
    kind = CodeKind(kind) if isinstance(kind, str) else kind
    if kind is CodeKind.PB_RAC:
        spec, gmap, pc = build_pb_rac(M, B, seed, K=K, S=S, G=G, field=field)
        return Code(spec, gmap, pc)
    if kind is CodeKind.RAC:
        if S:
            spec, gmap, pc = build_pb_rac(M, B, seed, K=K, S=S, G=G, field=field)
            return Code(spec, gmap, pc)
        G = B if G is None else G
        spec, gmap = build_rac(M, B, G - B, seed, K=K, field=field)
        return Code(spec, gmap, None)
    if G is None:
        raise ParameterError(f"{kind.value} needs an explicit G")
    spec, gmap = build_baseline(kind, M, B, G, seed, K=K, field=field)
    return Code(spec, gmap, None)


# -- encoding ------------------------------------------------------------------


@dataclass
class CodedPacket:
    gen_id: int
    gev: np.ndarray  # uint8, one coefficient per generation member
    payload: np.ndarray  # uint8, K symbols


def random_sources(M: int, K: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 256, (M, K), dtype=np.uint8)


def make_intermediates(code: Code, sources: np.ndarray) -> np.ndarray:
    """Sources, then parities, then all-zero padding: one row per position."""
    spec = code.spec
    inter = np.zeros((spec.n_total, sources.shape[1]), dtype=np.uint8)
    inter[: spec.M] = sources
    if code.precode is not None:
        inter[spec.M : spec.M + spec.S] = code.precode.parities(sources)
    return inter


def combine(rows: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """sum_i coeffs[i] * rows[i] over GF(256)."""
    out = np.zeros(rows.shape[1], dtype=np.uint8)
    for i in np.flatnonzero(coeffs):
        c = int(coeffs[i])
        out ^= rows[i] if c == 1 else MUL[c][rows[i]]
    return out


def random_nonzero_vector(rng: np.random.Generator, n: int, field: FieldId) -> np.ndarray:
    while True:
        v = rng.integers(0, field.order, n, dtype=np.uint8) if field is FieldId.Byte256 \
            else rng.integers(0, 2, n, dtype=np.uint8)
        if v.any():
            return v


def choose_generation(code: Code, rng: np.random.Generator) -> int:
    spec = code.spec
    if spec.kind is CodeKind.Banded:
        return int(rng.choice(spec.L, p=spec.sched_probs))
    return int(rng.integers(0, spec.L))


def encode_packet(code: Code, intermediates: np.ndarray, rng: np.random.Generator) -> CodedPacket:
    l = choose_generation(code, rng)
    ix = code.gmap[l]
    gev = random_nonzero_vector(rng, len(ix), code.spec.field)
    return CodedPacket(l, gev, combine(intermediates[ix], gev))


class Encoder:
    """Rateless source: an endless stream of coded packets for one session."""

    def __init__(self, code: Code, sources: np.ndarray, rng: np.random.Generator):
        self.code = code
        self.sources = sources
        self.intermediates = make_intermediates(code, sources)
        self.rng = rng

    def __iter__(self):
        return self

    def __next__(self) -> CodedPacket:
        return encode_packet(self.code, self.intermediates, self.rng)


def code_from_generations(M: int, generations, *, K: int = 16, field: FieldId = FieldId.Binary,
                          precode: Precode | None = None) -> Code:
    """Wrap explicit index sets into a :class:`Code` (uniform scheduling)."""
    gens = tuple(np.asarray(g, dtype=np.int64) for g in generations)
    S = 0 if precode is None else precode.S
    n = M + S
    for g in gens:
        if g.size == 0 or g.min() < 0 or g.max() >= n or len(set(g.tolist())) != g.size:
            raise ParameterError("generation indices must be distinct and within range")
    G = max(len(g) for g in gens)
    B = min(len(g) for g in gens)
    L = len(gens)
    spec = CodeSpec(CodeKind.RAC if S == 0 else CodeKind.PB_RAC, M, K, field, B, G, S, L,
                    (1.0 / L,) * L)
    return Code(spec, GenerationMap(gens, n), precode, label="custom")
