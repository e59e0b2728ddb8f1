"""Experiment batteries behind the ``gnc-bench`` command.

Every experiment expands into an ordered list of tasks (one per parameter
point and trial).  Tasks are plain dicts so they can be shipped to worker
processes; results come back in task order whatever the completion order.

CSV rows always start with :data:`COLUMNS`; a few experiments append extra
columns after them (``code``, ``sink``, or the p_k series of fig2-pk).
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .analysis import AnalyticModel, alpha_star, pk_bounds, pk_exact
from .codes import (
    Code,
    Encoder,
    ParameterError,
    build_code,
    compute_gmin,
    compute_precode_size,
    parity_residual,
    random_sources,
)
from .decoders import make_decoder
from .decoders.base import EchelonBasis
from .gf import FieldId, OpCounter
from .netsim import RankTracker, Scheduler, SchedulerKind, load_topology, run_session

SCHEMA_VERSION = 1
COLUMNS = ["experiment", "M", "B", "G", "S", "field", "pe", "scheduler", "decoder", "trial",
           "eps_c", "eps_cn", "eps_d", "eps", "ops_per_symbol", "M_I", "steps", "seed"]
EXPERIMENTS = ("fig3", "fig4", "table1", "table2-sweep", "fig2-pk", "fig6-inactivation",
               "fig7-butterfly", "fig8-scheduling", "custom")


class IntegrityError(RuntimeError):
    """A decoder produced wrong payloads or OA and naive disagreed."""


@dataclass
class ExperimentConfig:
    experiment: str
    M: list | None = None
    B: int | None = None
    G: list | None = None
    S: int | None = None
    field: int | None = None
    pe: float | None = None
    trials: int = 100
    seed: int = 0
    workers: int = 1
    K: int | None = None
    topology: str | None = None
    scheduler: str | None = None
    decoder: str | None = None
    code: str | None = None

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ParameterError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")
        if self.field is not None:
            FieldId.from_order(self.field)
        if self.pe is not None and not 0.0 <= self.pe < 1.0:
            raise ParameterError("pe must lie in [0, 1)")
        if self.scheduler not in (None, "random", "least"):
            raise ParameterError("scheduler must be 'random' or 'least'")
        if self.decoder not in (None, "gbg", "naive", "oa"):
            raise ParameterError("decoder must be gbg, naive or oa")
        if self.K is not None and self.K < 1:
            raise ParameterError("K must be >= 1")


def trial_seed(master: int, experiment: str, key: str, trial: int) -> int:
    """Seed of one trial: independent of every other experiment and point."""
    ss = np.random.SeedSequence([master, zlib.crc32(experiment.encode()),
                                 zlib.crc32(key.encode()), trial])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


# -- single trials ----------------------------------------------------------------

def _code(t: dict, seed: int) -> Code:
    return build_code(t["code"], t["M"], t["B"], t["G"], t["S"], seed, t["K"],
                      FieldId.from_order(t["field"]))


def _blank_row(t: dict, seed: int) -> dict:
    row = {c: "" for c in COLUMNS}
    for c in ("experiment", "M", "B", "G", "S", "field", "pe", "scheduler", "decoder", "trial"):
        row[c] = t.get(c, "")
    row["seed"] = seed
    for c in t.get("extra_cols", ()):
        row[c] = t.get(c, "")
    return row


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def run_p2p(t: dict) -> list:
    """Paired decoders on one lossless source stream (erasures are not counted)."""
    seed = t["seed"]
    code = _code(t, seed)
    spec = code.spec
    rng = np.random.default_rng([seed, 1])
    src = random_sources(spec.M, spec.K, rng)
    enc = Encoder(code, src, rng)
    kinds = t["decoders"]
    decs = {k: make_decoder(k, code) for k in kinds}
    tracker = RankTracker(code)
    n2 = None
    done = {}
    limit = 100 * spec.M
    n = 0
    while len(done) < len(decs) and n < limit:
        p = next(enc)
        n += 1
        if n2 is None:
            tracker.add(p)
            if tracker.full:
                n2 = n
        for k, d in decs.items():
            if k not in done:
                out = d.receive(p)
                if out.decoded:
                    done[k] = out
    failures = []
    for k, out in done.items():
        if not np.array_equal(out.recovered, src):
            failures.append(f"{k}: recovered payloads differ from sources")
        elif code.precode is not None and parity_residual(code.precode, out.intermediates).any():
            failures.append(f"{k}: parity check failed")
    if "oa" in done and "naive" in done and done["oa"].packets != done["naive"].packets:
        failures.append(f"OA decoded at {done['oa'].packets}, naive at {done['naive'].packets}")
    n2 = n2 if n2 is not None else n
    rows = []
    for k in kinds:
        row = _blank_row({**t, "decoder": k}, seed)
        out = done.get(k)
        N = out.packets if out else None
        row.update(eps_c=(n2 - spec.M) / spec.M, eps_cn=(n2 - spec.M) / spec.M,
                   steps=n)
        if out is not None:
            row.update(eps_d=(N - n2) / spec.M, eps=(N - spec.M) / spec.M,
                       ops_per_symbol=out.ops / (spec.M * spec.K), M_I=out.M_I)
        rows.append(row)
    return [rows, failures]


def run_net(t: dict) -> list:
    seed = t["seed"]
    code = _code(t, seed)
    topo = load_topology(t["topology"], t["pe"])
    sched = Scheduler(SchedulerKind(t["scheduler"]), FieldId.from_order(t["recode_field"]))
    reports = run_session(topo, code, sched, t["decoder"], seed)
    rows, failures = [], []
    for r in reports:
        if not r.correct:
            failures.append(f"sink {r.sink}: recovered payloads differ from sources")
        row = _blank_row({**t, "sink": r.sink}, seed)
        row.update(eps_c=r.eps_c, eps_cn=r.eps_cn, steps=r.steps)
        if not r.timed_out:
            row.update(eps_d=r.eps_d, eps=r.eps, ops_per_symbol=r.ops_per_symbol, M_I=r.M_I)
        rows.append(row)
    return [rows, failures]


def pk_monte_carlo(M: int, B: int, S: int, G: int, streams: int, seed: int,
                   k_max: int | None = None) -> np.ndarray:
    """Empirical p_k, k = 0..k_max-1: is packet k+1 innovative given the first k.

    F_256 coefficients.  Only received EVs count towards the rank, so the
    precode's structure plays no part here.
    """
    k_max = k_max or M + S
    hits = np.zeros(k_max)
    rng = np.random.default_rng(seed)
    for _ in range(streams):
        code = build_code("PB_RAC" if S else "RAC", M, B, G, S, int(rng.integers(2**31)), 1,
                          FieldId.Byte256)
        n = code.spec.n_intermediate
        basis = EchelonBasis(n, OpCounter())
        enc = Encoder(code, np.zeros((M, 1), np.uint8), rng)
        for k in range(k_max):
            p = next(enc)
            gev = np.array(p.gev, np.uint8)
            gev[code.gmap[p.gen_id] >= n] = 0
            hits[k] += basis.insert(code.gmap.expand(p.gen_id, gev, width=n)) >= 0
    return hits / streams


def run_pk(t: dict) -> list:
    M, B, S, G = t["M"], t["B"], t["S"], t["G"]
    ks = list(range(t["k_lo"], t["k_hi"]))
    mc = pk_monte_carlo(M, B, S, G, t["streams"], t["seed"], k_max=t["k_hi"])
    model = AnalyticModel(M, S, B, G)
    rows = []
    for k in ks:
        lo, hi = pk_bounds(model, k)
        row = _blank_row({**t, "k": k, "pk_analytic": pk_exact(model, k), "pk_upper": hi,
                          "pk_mc": mc[k]}, t["seed"])
        row["trial"] = ""
        rows.append(row)
    return [rows, []]


def run_analysis(t: dict) -> list:
    M, B, S, G = t["M"], t["B"], t["S"], t["G"]
    res = alpha_star(M, S, B, G)
    row = _blank_row(t, t["seed"])
    row["trial"] = ""
    row["M_I"] = "" if not res.converged else round(res.predicted_MI(M), 1)
    return [[row], []]


RUNNERS = {"p2p": run_p2p, "net": run_net, "pk": run_pk, "analysis": run_analysis}


def run_task(t: dict) -> list:
    return RUNNERS[t["runner"]](t)


# -- experiment expansion ---------------------------------------------------------

def _one(x, default):
    if x is None:
        return default
    return x[0] if isinstance(x, (list, tuple)) else x


def _many(x, default):
    if x is None:
        return list(default)
    return list(x) if isinstance(x, (list, tuple)) else [x]


def _points(cfg: ExperimentConfig) -> list:
    """Parameter points (dicts without trial/seed) for an experiment."""
    e = cfg.experiment
    K = cfg.K
    pts = []
    if e == "fig3":
        M = _one(cfg.M, 1024)
        B = cfg.B or 32
        for G in _many(cfg.G, range(32, 65, 4)):
            pts.append(dict(runner="p2p", code="RAC", M=M, B=B, G=G, S=0, field=cfg.field or 2,
                            pe=0.0, K=K or 1600, decoders=["gbg", "naive", "oa"]))
    elif e == "fig4":
        M = _one(cfg.M, 1024)
        B = cfg.B or 32
        S = compute_precode_size(M) if cfg.S is None else cfg.S
        for G in _many(cfg.G, range(36, 65, 4)):
            for code, dec, s in (("H2T", "naive", 0), ("Windowed", "naive", 0),
                                 ("Banded", "naive", 0), ("RAC", "oa", 0), ("PB_RAC", "oa", S)):
                pts.append(dict(runner="p2p", code=code, M=M, B=B, G=G, S=s, field=cfg.field or 2,
                                pe=0.0, K=K or 1600, decoders=[dec], extra_cols=("code",)))
    elif e == "table1":
        M = _one(cfg.M, 1024)
        B = cfg.B or 32
        rows = [(0, 58), (59, 41), (101, 39), (149, 37)]
        if cfg.S is not None or cfg.G is not None:
            S = cfg.S if cfg.S is not None else compute_precode_size(M)
            rows = [(S, g) for g in _many(cfg.G, [compute_gmin(M, S, B)])]
        for S, G in rows:
            pts.append(dict(runner="p2p", code="PB_RAC" if S else "RAC", M=M, B=B, G=G, S=S,
                            field=cfg.field or 2, pe=0.0, K=K or 1600,
                            decoders=[cfg.decoder or "oa"]))
    elif e == "table2-sweep":
        B = cfg.B or 32
        for M in _many(cfg.M, (1024, 4096, 7168, 10240)):
            S = compute_precode_size(M)
            pts.append(dict(runner="analysis", M=M, B=B, G=compute_gmin(M, S, B), S=S,
                            field=256, pe="", decoder="analysis"))
    elif e == "fig2-pk":
        M = _one(cfg.M, 64)
        B = cfg.B or 16
        cases = [(0, B), (16, B), (32, B), (16, 20)]
        if cfg.S is not None or cfg.G is not None:
            cases = [(cfg.S or 0, g) for g in _many(cfg.G, [B])]
        for S, G in cases:
            pts.append(dict(runner="pk", M=M, B=B, G=G, S=S, field=256, pe="", decoder="",
                            k_lo=min(30, M - 1), k_hi=M, streams=cfg.trials,
                            extra_cols=("k", "pk_analytic", "pk_upper", "pk_mc")))
    elif e == "fig6-inactivation":
        B = cfg.B or 32
        for M in _many(cfg.M, (1024, 2048, 4096)):
            S = compute_precode_size(M) if cfg.S is None else cfg.S
            G = _one(cfg.G, compute_gmin(M, S, B))
            fields = [cfg.field] if cfg.field else [2, 256]
            for q in fields:
                pts.append(dict(runner="p2p", code="PB_RAC", M=M, B=B, G=G, S=S, field=q,
                                pe=0.0, K=K or 16, decoders=["oa"]))
            pts.append(dict(runner="analysis", M=M, B=B, G=G, S=S, field=256, pe="",
                            decoder="analysis"))
    elif e == "fig7-butterfly":
        B = cfg.B or 32
        pe = 0.1 if cfg.pe is None else cfg.pe
        for M in _many(cfg.M, (1024,)):
            S = compute_precode_size(M)
            g_band = _one(cfg.G, 2 * math.isqrt(M) if math.isqrt(M) ** 2 == M
                          else math.ceil(2 * math.sqrt(M)))
            for code, dec, s, G in (("H2T", "naive", 0, g_band), ("Windowed", "naive", 0, g_band),
                                    ("Banded", "naive", 0, g_band),
                                    ("PB_RAC", "oa", S, compute_gmin(M, S, B))):
                pts.append(dict(runner="net", code=code, M=M, B=B, G=G, S=s, field=2, pe=pe,
                                K=K or 1600, topology=cfg.topology or "butterfly",
                                scheduler="random", recode_field=2, decoder=dec,
                                extra_cols=("code", "sink")))
    elif e == "fig8-scheduling":
        B = cfg.B or 32
        pe = 0.1 if cfg.pe is None else cfg.pe
        for M in _many(cfg.M, (1024,)):
            S = compute_precode_size(M) if cfg.S is None else cfg.S
            G = _one(cfg.G, compute_gmin(M, S, B))
            for sched, q in (("random", 2), ("least", 2), ("least", 256)):
                pts.append(dict(runner="net", code="PB_RAC", M=M, B=B, G=G, S=S, field=q, pe=pe,
                                K=K or 1600, topology=cfg.topology or "butterfly",
                                scheduler=sched, recode_field=q, decoder=cfg.decoder or "oa",
                                extra_cols=("sink",)))
    elif e == "custom":
        M = _one(cfg.M, 256)
        B = cfg.B or 16
        S = cfg.S or 0
        G = _one(cfg.G, B)
        code = cfg.code or ("PB_RAC" if S else "RAC")
        q = cfg.field or 2
        if cfg.topology:
            pts.append(dict(runner="net", code=code, M=M, B=B, G=G, S=S, field=q,
                            pe=0.1 if cfg.pe is None else cfg.pe, K=K or 16,
                            topology=cfg.topology, scheduler=cfg.scheduler or "random",
                            recode_field=q, decoder=cfg.decoder or "oa", extra_cols=("sink",)))
        else:
            pts.append(dict(runner="p2p", code=code, M=M, B=B, G=G, S=S, field=q,
                            pe=cfg.pe or 0.0, K=K or 16, decoders=[cfg.decoder or "oa"]))
    for p in pts:
        p.setdefault("scheduler", "")
        p["experiment"] = e
    return pts


def _point_key(p: dict) -> str:
    return json.dumps({k: v for k, v in sorted(p.items()) if k not in ("streams",)},
                      sort_keys=True, default=str)


def expand(cfg: ExperimentConfig) -> list:
    cfg.validate()
    tasks = []
    for p in _points(cfg):
        if p["runner"] in ("p2p", "net"):
            # reject bad parameters before any run
            _code(p, 0)
        if p["runner"] == "net":
            load_topology(p["topology"], p["pe"])
        key = _point_key(p)
        n = 1 if p["runner"] in ("pk", "analysis") else cfg.trials
        for trial in range(n):
            t = dict(p)
            t["trial"] = trial
            t["seed"] = trial_seed(cfg.seed, cfg.experiment, key, trial)
            if p["runner"] == "p2p":
                t["decoder"] = ""
            tasks.append(t)
    return tasks


# -- running and output -----------------------------------------------------------

@dataclass
class RunResult:
    rows: list
    failures: list
    extra_cols: list


def run_experiment(cfg: ExperimentConfig, progress=None) -> RunResult:
    tasks = expand(cfg)
    extra = []
    for t in tasks:
        for c in t.get("extra_cols", ()):
            if c not in extra:
                extra.append(c)
    rows, failures = [], []
    total = len(tasks)

    def note(i):
        if progress is not None:
            progress(f"[{cfg.experiment}] {i}/{total} tasks done")

    if cfg.workers > 1 and total > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            for i, (r, f) in enumerate(ex.map(run_task, tasks), 1):
                rows.extend(r)
                failures.extend(f)
                note(i)
    else:
        for i, t in enumerate(tasks, 1):
            r, f = run_task(t)
            rows.extend(r)
            failures.extend(f)
            note(i)
    return RunResult(rows, failures, extra)


def write_csv(result: RunResult, fh) -> None:
    cols = COLUMNS + result.extra_cols
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for r in result.rows:
        w.writerow([_fmt(r.get(c, "")) for c in cols])


def to_csv(result: RunResult) -> str:
    buf = io.StringIO()
    write_csv(result, buf)
    return buf.getvalue()


METRICS = ("eps_c", "eps_cn", "eps_d", "eps", "ops_per_symbol", "M_I", "steps")
_NON_GROUP = {"trial", "seed", "sink", "k", "pk_analytic", "pk_upper", "pk_mc", *METRICS}


def aggregate(result: RunResult) -> list:
    """Mean, sample stddev and count per parameter point (trials pooled)."""
    groups = {}
    for r in result.rows:
        key = tuple((c, r.get(c, "")) for c in COLUMNS + result.extra_cols if c not in _NON_GROUP)
        groups.setdefault(key, []).append(r)
    out = []
    for key, rs in groups.items():
        agg = dict(key)
        agg["n"] = len(rs)
        for m in METRICS:
            vals = [float(r[m]) for r in rs if r.get(m, "") not in ("", None)]
            agg[m] = statistics.fmean(vals) if vals else None
            agg[m + "_sd"] = statistics.stdev(vals) if len(vals) > 1 else (0.0 if vals else None)
            agg[m + "_n"] = len(vals)
        out.append(agg)
    return out


def summary_table(aggs: list) -> str:
    head = f"{'experiment':<18}{'code/dec':<16}{'M':>6}{'G':>4}{'S':>5}{'q':>5}{'sched':>7}" \
           f"{'n':>5}{'eps':>9}{'ops/sym':>10}{'M_I':>9}"
    lines = [head, "-" * len(head)]

    def f(x, w, p):
        return f"{'-':>{w}}" if x is None else f"{x:>{w}.{p}f}"

    for a in aggs:
        label = a.get("code") or a.get("decoder") or ""
        if a.get("code") and a.get("decoder"):
            label = f"{a['code']}/{a['decoder']}"
        lines.append(f"{a['experiment']:<18}{label:<16}{a['M']:>6}{a['G']:>4}{a['S']:>5}"
                     f"{a['field']:>5}{a['scheduler'] or '-':>7}{a['n']:>5}"
                     f"{f(a['eps'], 9, 4)}{f(a['ops_per_symbol'], 10, 2)}{f(a['M_I'], 9, 1)}")
    return "\n".join(lines)


def summary_json(cfg: ExperimentConfig, result: RunResult) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, "experiment": cfg.experiment,
                       "seed": cfg.seed, "trials": cfg.trials,
                       "scheduler_note": Scheduler(SchedulerKind.LeastScheduled).note,
                       "failures": result.failures, "aggregates": aggregate(result)},
                      indent=2, default=str)


def compare_decoders(cfg: ExperimentConfig, progress=None) -> RunResult:
    """Three decoders on identical streams; aborts if OA and naive disagree."""
    cfg = replace(cfg, experiment="fig3")
    res = run_experiment(cfg, progress)
    if res.failures:
        raise IntegrityError("; ".join(res.failures[:5]))
    return res


def log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)
