"""Time-To-Solution comparison of the classical chain and the quantum walk."""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import classical
from .problems import ProblemSpec, make_problem
from .rng import substream
from .statevector import DEFAULT_QUBIT_LIMIT, CapacityError
from .walk import AnnealingSchedule, WalkConfig, evolve, layout_for

log = logging.getLogger(__name__)

CSV_COLUMNS = ("problem", "n", "P", "Q", "algorithm", "schedule", "beta0", "t", "p", "tts", "delta", "seed")
DEFAULT_DELTA = 0.9
INF = math.inf


@dataclass(frozen=True)
class TTSRecord:
    algorithm: str
    t: int
    p: float
    tts: float
    problem: str = ""
    n: int = 0
    P: int = 0
    Q: int = 0
    schedule: str = "constant"
    beta0: float = 0.0
    delta: float = DEFAULT_DELTA
    seed: int = 0

    def row(self) -> list[str]:
        return [
            self.problem,
            str(self.n),
            str(self.P),
            str(self.Q),
            self.algorithm,
            self.schedule,
            _fmt(self.beta0),
            str(self.t),
            _fmt(self.p),
            _fmt(self.tts),
            _fmt(self.delta),
            str(self.seed),
        ]


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else repr(float(x))


@dataclass(frozen=True)
class MinTTS:
    t: int | None
    tts: float
    records: list[TTSRecord]

    @property
    def solved(self) -> bool:
        return self.t is not None


@dataclass(frozen=True)
class ExponentFit:
    exponent: float
    intercept: float
    residual_norm: float
    n_points: int

    @property
    def advantage(self) -> bool:
        return self.exponent < 1


def compute_tts(t: int, p: float, delta: float = DEFAULT_DELTA) -> float:
    """t * max(1, log(1 - delta) / log(1 - p)); inf when p == 0."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if t < 1:
        raise ValueError("t must be >= 1")
    if p == 0:
        return INF
    if p == 1:
        return float(t)
    return t * max(1.0, math.log1p(-delta) / math.log1p(-p))


def min_tts_curve(p_curve: Sequence[float], delta: float = DEFAULT_DELTA, **record_fields) -> MinTTS:
    """TTS for each entry (``p_curve[k]`` is p at t = k + 1) and the first minimizer."""
    if len(p_curve) == 0:
        raise ValueError("p-curve is empty")
    algorithm = record_fields.pop("algorithm", "")
    records = []
    best_t, best = None, INF
    for k, p in enumerate(p_curve):
        t = k + 1
        # round-off from long products can push p a hair outside [0, 1]
        p = min(1.0, max(0.0, float(p)))
        tts = compute_tts(t, p, delta)
        records.append(TTSRecord(algorithm, t, p, tts, delta=delta, **record_fields))
        if tts < best:
            best_t, best = t, tts
    return MinTTS(best_t, best, records)


def fit_exponent(points: Iterable[tuple[float, float]]) -> ExponentFit:
    """Least-squares slope of log(quantum TTS) against log(classical TTS)."""
    pts = list(points)
    if len(pts) < 2:
        raise ValueError("need at least 2 points to fit an exponent")
    for i, (x, y) in enumerate(pts):
        if not (math.isfinite(x) and math.isfinite(y) and x > 0 and y > 0):
            raise ValueError(f"point {i} ({x}, {y}) is not finite and positive")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.linalg.norm(A @ [slope, intercept] - ly))
    return ExponentFit(float(slope), float(intercept), resid, len(pts))


@dataclass
class CompareResult:
    records: list[TTSRecord] = field(default_factory=list)
    pairs: list[dict] = field(default_factory=list)
    fit: ExponentFit | None = None
    warnings: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow(r.row())
        return buf.getvalue()


def _run_size(problem, n, schedule, delta, t_max, quantum, seed, chains, limit):
    spec = make_problem(problem, n)
    common = dict(
        problem=problem,
        n=n,
        P=spec.P,
        Q=spec.Q,
        schedule=schedule.describe(),
        beta0=schedule.beta0,
        seed=seed,
    )
    out = {"n": n, "records": [], "warnings": [], "pair": {"n": n}}
    if spec.n_bits > limit:
        out["warnings"].append(f"size n={n} skipped: {spec.n_bits} state bits exceed limit {limit}")
        return out
    if spec.n_bits <= classical.TRANSITION_LIMIT:
        p_c = classical.exact_success_probability(spec, schedule, t_max)
    else:
        est = classical.run_chains(spec, schedule, t_max, chains, substream(seed, "compare", problem, n))
        p_c = est.p
    cmin = min_tts_curve(p_c[1:], delta, algorithm="classical", **common)
    out["records"] += cmin.records
    out["pair"].update(classical_t=cmin.t, classical_tts=cmin.tts)
    if quantum:
        layout = layout_for(spec)
        if layout.total > limit:
            out["warnings"].append(f"size n={n}: quantum skipped, {layout.total} qubits exceed limit {limit}")
        else:
            cfg = WalkConfig(schedule=schedule, steps=t_max)
            p_q = [r.ground_probability for r in evolve(cfg, spec, limit)]
            qmin = min_tts_curve(p_q[1:], delta, algorithm="quantum", **common)
            out["records"] += qmin.records
            out["pair"].update(quantum_t=qmin.t, quantum_tts=qmin.tts)
    return out


def compare(
    problem: str,
    sizes: Sequence[int],
    schedule: AnnealingSchedule,
    delta: float = DEFAULT_DELTA,
    t_max: int = 40,
    quantum: bool = True,
    seed: int = 0,
    chains: int = 10_000,
    threads: int = 1,
    limit: int = DEFAULT_QUBIT_LIMIT,
) -> CompareResult:
    """Classical and quantum min-TTS per size plus the scaling-exponent fit."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    args = [(problem, n, schedule, delta, t_max, quantum, seed, chains, limit) for n in sizes]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        outs = list(pool.map(lambda a: _run_size(*a), args))
    result = CompareResult()
    for out in sorted(outs, key=lambda o: o["n"]):
        result.records += out["records"]
        result.warnings += out["warnings"]
        if out["records"]:
            result.pairs.append(out["pair"])
    for w in result.warnings:
        log.warning(w)
    result.records.sort(key=lambda r: (r.n, r.t, r.algorithm))
    if quantum:
        pts = [
            (pr["classical_tts"], pr["quantum_tts"])
            for pr in result.pairs
            if math.isfinite(pr.get("classical_tts", INF)) and math.isfinite(pr.get("quantum_tts", INF))
        ]
        if len(pts) >= 2:
            result.fit = fit_exponent(pts)
    return result


def read_tts_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def pairs_from_rows(rows: list[dict]) -> list[tuple[float, float]]:
    """(classical min-TTS, quantum min-TTS) per problem size.

    Accepts either the full record schema or a two-column file with
    ``classical_tts`` and ``quantum_tts`` headers.
    """
    if rows and "classical_tts" in rows[0]:
        return [(float(r["classical_tts"]), float(r["quantum_tts"])) for r in rows]
    best: dict[tuple, dict[str, float]] = {}
    for r in rows:
        key = (r["problem"], int(r["n"]), int(r["P"]), int(r["Q"]))
        d = best.setdefault(key, {})
        d[r["algorithm"]] = min(d.get(r["algorithm"], INF), float(r["tts"]))
    return [(d["classical"], d["quantum"]) for _, d in sorted(best.items()) if "classical" in d and "quantum" in d]
