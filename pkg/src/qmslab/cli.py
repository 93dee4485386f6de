"""Command-line entry point.

Every run resolves a :class:`RunConfig` from (config file, then flags),
writes its outputs, and drops a ``<output>.meta.json`` sidecar holding the
resolved config. ``qmslab replay <sidecar>`` re-runs it.

Exit status: 0 success, 2 config error, 3 capacity error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import __version__
from . import statevector as sv
from .problems import decode, make_problem
from .qbird import GaussianToy, Prior, QBirdConfig, run_inference
from .rng import RNG_ALGORITHM, substream
from .statevector import DEFAULT_QUBIT_LIMIT, CapacityError
from .tts import DEFAULT_DELTA, compare, fit_exponent, pairs_from_rows, read_tts_csv
from .walk import AnnealingSchedule, WalkConfig, evolve_state, layout_for

OUTPUT_DIR_ENV = "QMSLAB_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY = 0, 2, 3

log = logging.getLogger("qmslab")


class PriorSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lower: float
    upper: float
    shape: Literal["uniform", "gaussian"] = "uniform"
    mean: Optional[float] = None
    sigma: Optional[float] = None


class RunConfig(BaseModel):
    """Flat run description; flag ``--t-max`` maps to key ``t_max`` and so on."""

    model_config = ConfigDict(extra="forbid")

    subcommand: Literal["solve", "compare", "qbird", "exponent", "grover-check"]
    problem: Literal["nqueens", "ising", "gaussian"] = "ising"
    n: int = Field(4, ge=1)
    sizes: list[int] = Field(default_factory=lambda: [3, 4, 5])
    schedule: Literal["constant", "linear", "geometric", "exponential"] = "constant"
    beta: Optional[float] = Field(None, ge=0)
    schedule_param: float = 0.0
    steps: Optional[int] = Field(None, ge=0)
    acceptance_qubits: int = Field(0, ge=0)
    reflection_target: Literal["move+coin", "state+coin"] = "move+coin"
    delta: float = Field(DEFAULT_DELTA, gt=0, lt=1)
    t_max: int = Field(40, ge=1)
    shots: int = Field(1024, ge=1)
    chains: int = Field(10_000, ge=1)
    quantum: bool = True
    seed: int = 0
    threads: int = Field(1, ge=1)
    qubit_limit: int = Field(DEFAULT_QUBIT_LIMIT, ge=1)
    # qbird
    priors: list[PriorSpec] = Field(default_factory=lambda: [PriorSpec(lower=0.0, upper=16.0)])
    truth: list[float] = Field(default_factory=lambda: [8.3])
    widths: list[float] = Field(default_factory=lambda: [2.0])
    q0: int = Field(4, ge=1)
    outer_iterations: int = Field(3, ge=0)
    k: float = Field(2.0, gt=0)
    # grover-check
    marked: int = Field(1, ge=0)
    iterations: int = Field(1, ge=0)
    # i/o
    out: Optional[str] = None
    summary: Optional[str] = None
    input: Optional[str] = None

    @field_validator("widths")
    @classmethod
    def _positive_widths(cls, v):
        if any(w <= 0 for w in v):
            raise ValueError("widths must be positive")
        return v

    def annealing(self) -> AnnealingSchedule:
        beta = 1.0 if self.beta is None else self.beta
        return AnnealingSchedule(self.schedule, beta, self.schedule_param)


def _csv_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _csv_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _bounds(text: str) -> list[dict]:
    vals = _csv_floats(text)
    if len(vals) % 2:
        raise argparse.ArgumentTypeError("bounds need lower,upper pairs")
    return [{"lower": vals[i], "upper": vals[i + 1]} for i in range(0, len(vals), 2)]


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON config file or metadata sidecar")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--out", default=S)
    p.add_argument("--threads", type=int, default=S)
    p.add_argument("--qubit-limit", dest="qubit_limit", type=int, default=S)


def _add_walk(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--schedule", default=S)
    p.add_argument("--beta", type=float, default=S)
    p.add_argument("--schedule-param", dest="schedule_param", type=float, default=S)
    p.add_argument("--acceptance-qubits", dest="acceptance_qubits", type=int, default=S)
    p.add_argument("--reflection-target", dest="reflection_target", default=S)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="qmslab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qmslab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("solve", help="run the walk and sample the state register")
    _add_common(p)
    _add_walk(p)
    p.add_argument("--problem", default=S)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--steps", type=int, default=S)
    p.add_argument("--shots", type=int, default=S)

    p = sub.add_parser("compare", help="classical vs quantum min-TTS over problem sizes")
    _add_common(p)
    _add_walk(p)
    p.add_argument("--problem", default=S)
    p.add_argument("--sizes", type=_csv_ints, default=S)
    p.add_argument("--delta", type=float, default=S)
    p.add_argument("--t-max", dest="t_max", type=int, default=S)
    p.add_argument("--chains", type=int, default=S)
    p.add_argument("--classical-only", dest="quantum", action="store_false", default=S)

    p = sub.add_parser("qbird", help="renormalization/downsampling inference on the Gaussian toy")
    _add_common(p)
    _add_walk(p)
    p.add_argument("--bounds", dest="priors", type=_bounds, default=S, help="lo,hi[,lo,hi...]")
    p.add_argument("--truth", type=_csv_floats, default=S)
    p.add_argument("--widths", type=_csv_floats, default=S)
    p.add_argument("--q0", type=int, default=S)
    p.add_argument("--steps", type=int, default=S)
    p.add_argument("--outer-iterations", dest="outer_iterations", type=int, default=S)
    p.add_argument("--shots", type=int, default=S)
    p.add_argument("--k", type=float, default=S)
    p.add_argument("--summary", default=S)

    p = sub.add_parser("exponent", help="fit the scaling exponent of a TTS CSV")
    p.add_argument("--config", default=S)
    p.add_argument("--in", dest="input", default=S)

    p = sub.add_parser("grover-check", help="Grover success probability vs closed form")
    p.add_argument("--config", default=S)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--marked", type=int, default=S)
    p.add_argument("--iterations", type=int, default=S)

    p = sub.add_parser("replay", help="re-run from a metadata sidecar")
    p.add_argument("config")
    p.add_argument("--out", default=S)
    p.add_argument("--summary", default=S)
    return parser


# (beta, steps) when not given
SUBCOMMAND_DEFAULTS = {"solve": (1.0, 8), "compare": (1.0, 8), "qbird": (4.0, 4)}


def load_config_file(path: str) -> dict:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    # metadata sidecars wrap the resolved config
    if "config" in data and "tool_version" in data:
        data = data["config"]
    return data


def resolve_config(args: argparse.Namespace) -> RunConfig:
    flags = {k: v for k, v in vars(args).items() if k not in ("config", "verbose")}
    data: dict = {}
    if getattr(args, "config", None):
        data = load_config_file(args.config)
    if flags.get("subcommand") == "replay":
        flags.pop("subcommand")
    data.update(flags)
    cfg = RunConfig.model_validate(data)
    beta, steps = SUBCOMMAND_DEFAULTS.get(cfg.subcommand, (1.0, 8))
    fill = {}
    if cfg.beta is None:
        fill["beta"] = beta
    if cfg.steps is None:
        fill["steps"] = steps
    return cfg.model_copy(update=fill)


def _resolve_path(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def write_metadata(path: Path, cfg: RunConfig, extra: dict | None = None) -> Path:
    meta = {
        "tool_version": __version__,
        "rng_algorithm": RNG_ALGORITHM,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "capacity": {"qubit_limit": cfg.qubit_limit},
        "config": cfg.model_dump(mode="json"),
    }
    if extra:
        meta.update(extra)
    side = path.with_name(path.name + ".meta.json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return side


def cmd_solve(cfg: RunConfig) -> int:
    spec = make_problem(cfg.problem, cfg.n)
    layout = layout_for(spec, cfg.acceptance_qubits)
    if layout.total > cfg.qubit_limit:
        raise CapacityError(layout.total, cfg.qubit_limit)
    wcfg = WalkConfig(cfg.annealing(), cfg.steps, cfg.acceptance_qubits, cfg.reflection_target)
    reports, psi = evolve_state(wcfg, spec, cfg.qubit_limit)
    draws = sv.sample(psi, list(layout.state), cfg.shots, substream(cfg.seed, "solve", "shots"))
    idx, counts = np.unique(draws, return_counts=True)
    costs = spec.cost_table[idx]
    best = int(idx[np.lexsort((-counts, costs))[0]])
    values = decode(best, spec).tolist()
    print(f"best state: {values} (index {best}) cost {spec.cost_table[best]:g}")
    print(f"ground-state probability after {cfg.steps} steps: {reports[-1].ground_probability:.6f}")
    out = _resolve_path(cfg.out)
    if out:
        lines = ["index,values,cost,count"]
        for i, c in zip(idx, counts):
            v = " ".join(str(x) for x in decode(int(i), spec))
            lines.append(f"{int(i)},{v},{spec.cost_table[i]!r},{int(c)}")
        out.write_text("\n".join(lines) + "\n")
        write_metadata(out, cfg)
    return EXIT_OK


def cmd_compare(cfg: RunConfig) -> int:
    result = compare(
        cfg.problem,
        cfg.sizes,
        cfg.annealing(),
        cfg.delta,
        cfg.t_max,
        quantum=cfg.quantum,
        seed=cfg.seed,
        chains=cfg.chains,
        threads=cfg.threads,
        limit=cfg.qubit_limit,
    )
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for pr in result.pairs:
        print(
            f"n={pr['n']}: classical min-TTS {pr.get('classical_tts', math.inf):.4g}"
            + (f", quantum min-TTS {pr['quantum_tts']:.4g}" if "quantum_tts" in pr else "")
        )
    if result.fit:
        print(f"exponent {result.fit.exponent:.6g} (intercept {result.fit.intercept:.4g})")
    out = _resolve_path(cfg.out or "tts.csv")
    out.write_text(result.to_csv())
    extra = {"warnings": result.warnings}
    if result.fit:
        extra["fit"] = {"exponent": result.fit.exponent, "intercept": result.fit.intercept}
    write_metadata(out, cfg, extra)
    return EXIT_OK


def cmd_qbird(cfg: RunConfig) -> int:
    priors = tuple(Prior(p.lower, p.upper, p.shape, p.mean, p.sigma) for p in cfg.priors)
    if not len(priors) == len(cfg.truth) == len(cfg.widths):
        raise ValueError("priors, truth and widths need one entry per parameter")
    qcfg = QBirdConfig(
        priors, cfg.q0, cfg.steps, cfg.outer_iterations, cfg.shots, cfg.k, cfg.annealing(), cfg.seed
    )
    total = len(priors) * cfg.q0 + layout_overhead(len(priors))
    if total > cfg.qubit_limit:
        raise CapacityError(total, cfg.qubit_limit)
    result = run_inference(qcfg, GaussianToy(tuple(cfg.truth), tuple(cfg.widths)))
    for k, (m, mo) in enumerate(zip(result.means(), result.modes())):
        print(f"param {k}: posterior mean {m:.4f}, mode {mo:.4f}, truth {cfg.truth[k]:g}")
    print(f"converged: {result.converged}")
    out = _resolve_path(cfg.out or "corner.csv")
    out.write_text(result.corner_csv())
    summary = _resolve_path(cfg.summary or str(out.with_suffix("")) + ".summary.json")
    summary.write_text(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
    write_metadata(out, cfg, {"iteration_weighting": "equal per outer iteration"})
    return EXIT_OK


def layout_overhead(P: int) -> int:
    return (math.ceil(math.log2(P)) if P > 1 else 0) + 2


def cmd_exponent(cfg: RunConfig) -> int:
    if not cfg.input:
        raise ValueError("exponent needs --in")
    pairs = pairs_from_rows(read_tts_csv(Path(cfg.input).read_text()))
    fit = fit_exponent(pairs)
    print(f"{fit.exponent:.6g}")
    return EXIT_OK


def cmd_grover(cfg: RunConfig) -> int:
    n = cfg.n
    if n > cfg.qubit_limit:
        raise CapacityError(n, cfg.qubit_limit)
    if cfg.marked >= 2**n:
        raise ValueError(f"marked must be < {2**n}")
    got = sv.grover_search(n, cfg.marked, cfg.iterations)
    want = math.sin((2 * cfg.iterations + 1) * math.asin(1 / math.sqrt(2**n))) ** 2
    print(f"simulated {got:.12f} closed form {want:.12f}")
    return EXIT_OK if abs(got - want) < 1e-9 else 1


COMMANDS = {
    "solve": cmd_solve,
    "compare": cmd_compare,
    "qbird": cmd_qbird,
    "exponent": cmd_exponent,
    "grover-check": cmd_grover,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = resolve_config(args)
    except ValidationError as e:
        fields = ", ".join(".".join(str(x) for x in err["loc"]) for err in e.errors())
        print(f"config error in field(s) {fields}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except CapacityError as e:
        print(f"capacity error: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
