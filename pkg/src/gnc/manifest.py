"""Text manifest for a code: enough parameters (and the seed) to rebuild it.

Format, one ``key = value`` pair per line, ``#`` comments allowed::

    format = gnc-code/1
    kind = PB_RAC
    M = 1024
    B = 32
    G = 41
    S = 59
    K = 1600
    field = 2
    seed = 7
    L = 34
    digest = 3f1c...

``L`` and ``digest`` (sha256 of the generation index sets) are derived and are
checked on load, so a receiver that rebuilt a different map notices.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .codes import Code, CodeKind, ParameterError, build_code
from .gf import FieldId

FORMAT = "gnc-code/1"
_INT_KEYS = ("M", "B", "G", "S", "K", "field", "seed", "L")


class ManifestError(ValueError):
    pass


def map_digest(code: Code) -> str:
    h = hashlib.sha256()
    for ix in code.gmap.indices:
        h.update(np.asarray(ix, dtype="<i8").tobytes())
        h.update(b"|")
    if code.precode is not None:
        h.update(code.precode.W.tobytes())
    return h.hexdigest()


def dumps(code: Code) -> str:
    s = code.spec
    pairs = [
        ("format", FORMAT),
        ("kind", s.kind.value),
        ("M", s.M),
        ("B", s.B),
        ("G", s.G),
        ("S", s.S),
        ("K", s.K),
        ("field", s.field.order),
        ("seed", s.seed),
        ("L", s.L),
        ("digest", map_digest(code)),
    ]
    return "".join(f"{k} = {v}\n" for k, v in pairs)


def parse(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ManifestError(f"line {lineno}: expected 'key = value'")
        k, v = (x.strip() for x in line.split("=", 1))
        if k in out:
            raise ManifestError(f"line {lineno}: duplicate key {k!r}")
        out[k] = v
    return out


def loads(text: str) -> Code:
    kv = parse(text)
    if kv.get("format") != FORMAT:
        raise ManifestError(f"unsupported format {kv.get('format')!r}")
    missing = [k for k in ("kind", "M", "B", "G", "S", "K", "field", "seed") if k not in kv]
    if missing:
        raise ManifestError(f"missing keys: {', '.join(missing)}")
    try:
        ints = {k: int(kv[k]) for k in _INT_KEYS if k in kv}
        kind = CodeKind(kv["kind"])
        field = FieldId.from_order(ints["field"])
    except (ValueError, KeyError) as exc:
        raise ManifestError(str(exc)) from None
    try:
        code = build_code(kind, ints["M"], ints["B"], ints["G"], ints["S"], ints["seed"],
                          ints["K"], field)
    except ParameterError as exc:
        raise ManifestError(f"invalid parameters: {exc}") from None
    if "L" in ints and ints["L"] != code.spec.L:
        raise ManifestError(f"L mismatch: manifest {ints['L']}, rebuilt {code.spec.L}")
    if "digest" in kv and kv["digest"] != map_digest(code):
        raise ManifestError("generation map digest mismatch")
    return code


def save(code: Code, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(code))


def load(path: str) -> Code:
    with open(path) as fh:
        return loads(fh.read())
