"""Renormalization-and-downsampling Bayesian inference on the Gaussian toy.

Each outer iteration runs the walk on a 2**Q0 grid per parameter, samples
the state register, drops one qubit per parameter and repeats down to one
qubit per parameter. The finest-stage samples give per-parameter mean and
standard deviation, which set the next search interval.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import statevector as sv
from .problems import ProblemSpec, decode, gaussian_loglike_cost, grid_values
from .rng import substream
from .walk import AnnealingSchedule, WalkConfig, evolve_state, layout_for


@dataclass(frozen=True)
class Prior:
    lower: float
    upper: float
    shape: str = "uniform"
    mean: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"prior needs lower < upper, got [{self.lower}, {self.upper}]")
        if self.shape not in ("uniform", "gaussian"):
            raise ValueError("prior shape must be 'uniform' or 'gaussian'")
        if self.shape == "gaussian" and (self.sigma is None or self.sigma <= 0):
            raise ValueError("gaussian prior needs sigma > 0")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def with_bounds(self, lower: float, upper: float) -> "Prior":
        return Prior(lower, upper, self.shape, self.mean, self.sigma)

    def center(self) -> float:
        return self.mean if self.shape == "gaussian" and self.mean is not None else 0.5 * (self.lower + self.upper)

    def neg_log_density(self, theta):
        if self.shape == "uniform":
            return np.zeros_like(np.asarray(theta, dtype=float))
        return 0.5 * ((np.asarray(theta, dtype=float) - self.center()) / self.sigma) ** 2


@dataclass(frozen=True)
class GaussianToy:
    """Injected truth and per-parameter likelihood widths."""

    truth: tuple[float, ...]
    widths: tuple[float, ...]


@dataclass(frozen=True)
class QBirdConfig:
    priors: tuple[Prior, ...]
    q0: int = 4
    steps: int = 4
    outer_iterations: int = 3
    shots: int = 2048
    k: float = 2.0
    schedule: AnnealingSchedule = field(default_factory=lambda: AnnealingSchedule("constant", 4.0))
    seed: int = 0

    def __post_init__(self):
        if self.q0 < 1:
            raise ValueError("q0 must be >= 1")
        if self.k <= 0:
            raise ValueError("k must be > 0")
        if not 1 <= self.steps <= 16:
            raise ValueError("steps must lie in [1, 16]")
        if self.shots < 1 or self.outer_iterations < 0:
            raise ValueError("shots must be >= 1 and outer_iterations >= 0")

    @property
    def P(self) -> int:
        return len(self.priors)


@dataclass
class Stage:
    q: int
    marginal: np.ndarray  # shape (2**q,) * P
    samples: np.ndarray  # (shots, P) grid indices
    reduced: np.ndarray | None = None  # coarse-grained marginal handed to the next stage


@dataclass
class IterationRecord:
    intervals: list[tuple[float, float]]
    mean: np.ndarray
    std: np.ndarray
    stage_modes: list[list[int]]


@dataclass
class PosteriorResult:
    grids: list[np.ndarray]
    edges: list[np.ndarray]
    histograms: list[np.ndarray]
    pair_histograms: dict[tuple[int, int], np.ndarray]
    iterations: list[IterationRecord]
    converged: bool
    start_values: np.ndarray

    def modes(self) -> list[float]:
        return [float(g[np.argmax(h)]) for g, h in zip(self.grids, self.histograms)]

    def means(self) -> list[float]:
        return [float(np.dot(g, h)) for g, h in zip(self.grids, self.histograms)]

    def summary(self) -> dict:
        return {
            "converged": self.converged,
            "iteration_weighting": "equal per outer iteration",
            "iterations": [
                {
                    "intervals": [list(iv) for iv in it.intervals],
                    "mean": it.mean.tolist(),
                    "std": it.std.tolist(),
                    "stage_modes": it.stage_modes,
                }
                for it in self.iterations
            ],
            "final_grids": [g.tolist() for g in self.grids],
            "posterior_mean": self.means(),
            "posterior_mode": self.modes(),
        }

    def corner_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param_i", "param_j", "bin_i", "bin_j", "probability"])
        for i, h in enumerate(self.histograms):
            for b, p in enumerate(h):
                w.writerow([i, "", b, "", repr(float(p))])
        for (i, j), h in sorted(self.pair_histograms.items()):
            for bi in range(h.shape[0]):
                for bj in range(h.shape[1]):
                    w.writerow([i, j, bi, bj, repr(float(h[bi, bj]))])
        return buf.getvalue()


def toy_problem(intervals, q: int, toy: GaussianToy, priors) -> ProblemSpec:
    """Cost = -log(likelihood * prior) on the midpoint grid of ``intervals``."""
    grids = [grid_values(lo, hi, q) for lo, hi in intervals]

    def cost(idx):
        idx = np.asarray(idx, dtype=np.int64)
        theta = np.stack([grids[k][idx[..., k]] for k in range(len(grids))], axis=-1)
        c = gaussian_loglike_cost(theta, toy.truth, toy.widths)
        for k, prior in enumerate(priors):
            c = c + prior.neg_log_density(theta[..., k])
        return c

    return ProblemSpec(len(grids), q, cost, label="gaussian", params={"intervals": [list(iv) for iv in intervals]})


def value_to_index(value, lower: float, upper: float, q: int):
    cells = 2**q
    idx = np.floor((np.asarray(value, dtype=float) - lower) / (upper - lower) * cells).astype(np.int64)
    return np.clip(idx, 0, cells - 1)


def initialize_parameters(config: QBirdConfig, rng: np.random.Generator):
    """Prior intervals mapped onto midpoint grids, plus ``shots`` draws from each prior."""
    grids = [grid_values(p.lower, p.upper, config.q0) for p in config.priors]
    draws = np.empty((config.shots, config.P))
    for k, prior in enumerate(config.priors):
        if prior.shape == "uniform":
            draws[:, k] = rng.uniform(prior.lower, prior.upper, config.shots)
        else:
            x = rng.normal(prior.center(), prior.sigma, config.shots)
            bad = (x < prior.lower) | (x >= prior.upper)
            while bad.any():
                x[bad] = rng.normal(prior.center(), prior.sigma, bad.sum())
                bad = (x < prior.lower) | (x >= prior.upper)
            draws[:, k] = x
    return grids, draws


def coarse_grain(dist: np.ndarray) -> np.ndarray:
    """Merge cell pairs (2b, 2b+1) along every parameter axis."""
    out = np.asarray(dist, dtype=float)
    for axis in range(out.ndim):
        if out.shape[axis] < 2:
            raise ValueError("cannot coarse-grain a single-cell axis")
        shape = out.shape[:axis] + (out.shape[axis] // 2, 2) + out.shape[axis + 1 :]
        out = out.reshape(shape).sum(axis=axis + 1)
    return out


def _register_marginal(psi, layout, P: int, q: int) -> np.ndarray:
    flat = sv.marginal_distribution(psi, list(layout.state))
    # variable 0 sits in the low bits, so reverse axes to index as [v0, v1, ...]
    return flat.reshape((2**q,) * P).transpose(tuple(range(P - 1, -1, -1)))


def renormalize_downsample(intervals, q: int, toy: GaussianToy, config: QBirdConfig, rng) -> list[Stage]:
    """Walk, sample, drop one qubit per parameter; repeat until one qubit remains."""
    if q < 1:
        raise ValueError("q must be >= 1")
    stages = []
    while True:
        spec = toy_problem(intervals, q, toy, config.priors)
        wcfg = WalkConfig(schedule=config.schedule, steps=config.steps)
        _, psi = evolve_state(wcfg, spec, ground=set())
        layout = layout_for(spec)
        marg = _register_marginal(psi, layout, spec.P, q)
        flat = sv.sample(psi, list(layout.state), config.shots, rng)
        stage = Stage(q, marg, decode(flat, spec))
        stages.append(stage)
        if q == 1:
            return stages
        stage.reduced = coarse_grain(marg)
        q -= 1


def mean_std(samples) -> tuple[np.ndarray, np.ndarray]:
    """Per-parameter mean and population standard deviation of ``(n, P)`` samples."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise ValueError("mean_std needs at least one sample")
    return x.mean(axis=0), x.std(axis=0)


def new_intervals(mean: float, std: float, k: float, previous: Prior, cell_width: float | None = None) -> Prior:
    """[mean - k*std, mean + k*std] intersected with the previous interval, never empty."""
    if k <= 0:
        raise ValueError("k must be > 0")
    if std > 0:
        lo, hi = mean - k * std, mean + k * std
    else:
        half = 0.5 * (cell_width if cell_width else previous.width / 2)
        lo, hi = mean - half, mean + half
    lo, hi = max(lo, previous.lower), min(hi, previous.upper)
    if not lo < hi:
        # candidate missed the previous interval: keep the nearest edge cell
        w = cell_width if cell_width else previous.width / 2
        lo = min(max(mean - w / 2, previous.lower), previous.upper - w)
        hi = lo + w
    return previous.with_bounds(lo, hi)


def _overlap_matrix(final_edges: np.ndarray, lo: float, hi: float, cells: int) -> np.ndarray:
    """``W[f, c]``: fraction of source cell ``c`` that falls in final bin ``f``."""
    src = np.linspace(lo, hi, cells + 1)
    left = np.maximum(final_edges[:-1, None], src[None, :-1])
    right = np.minimum(final_edges[1:, None], src[None, 1:])
    return np.clip(right - left, 0, None) / (src[1:] - src[:-1])[None, :]


def run_inference(config: QBirdConfig, toy: GaussianToy) -> PosteriorResult:
    P = config.P
    if len(toy.truth) != P or len(toy.widths) != P:
        raise ValueError("toy truth/widths need one entry per prior")
    layout_total = layout_for(toy_problem([(p.lower, p.upper) for p in config.priors], config.q0, toy, config.priors)).total
    if layout_total > sv.DEFAULT_QUBIT_LIMIT:
        raise sv.CapacityError(layout_total, sv.DEFAULT_QUBIT_LIMIT)

    _, start = initialize_parameters(config, substream(config.seed, "qbird", "init"))
    priors = list(config.priors)
    cells = 2**config.q0
    # per iteration: intervals used and the (shots, P) sample cells
    history: list[tuple[list[tuple[float, float]], np.ndarray]] = []
    records: list[IterationRecord] = []
    converged = config.outer_iterations > 0

    for it in range(config.outer_iterations):
        intervals = [(p.lower, p.upper) for p in priors]
        rng = substream(config.seed, "qbird", "iteration", it)
        stages = renormalize_downsample(intervals, config.q0, toy, config, rng)
        idx = stages[0].samples
        grids = [grid_values(lo, hi, config.q0) for lo, hi in intervals]
        values = np.stack([grids[k][idx[:, k]] for k in range(P)], axis=1)
        mu, sd = mean_std(values)
        modes = [list(np.unravel_index(np.argmax(s.marginal), s.marginal.shape)) for s in stages]
        records.append(IterationRecord(intervals, mu, sd, [[int(m) for m in md] for md in modes]))
        history.append((intervals, idx))
        # converged once the mean stops moving by more than one cell of the previous grid
        if len(records) > 1:
            width = np.array([hi - lo for lo, hi in records[-2].intervals]) / cells
            if np.any(np.abs(mu - records[-2].mean) > width):
                converged = False
        priors = [
            new_intervals(mu[k], sd[k], config.k, priors[k], priors[k].width / cells) for k in range(P)
        ]

    if history:
        final_intervals = history[-1][0]
    else:
        final_intervals = [(p.lower, p.upper) for p in config.priors]
    edges = [np.linspace(lo, hi, cells + 1) for lo, hi in final_intervals]
    grids = [grid_values(lo, hi, config.q0) for lo, hi in final_intervals]

    if not history:
        idx = np.stack(
            [value_to_index(start[:, k], *final_intervals[k], config.q0) for k in range(P)], axis=1
        )
        history_for_hist = [(final_intervals, idx)]
    else:
        history_for_hist = history

    hists = [np.zeros(cells) for _ in range(P)]
    pairs = {(i, j): np.zeros((cells, cells)) for i in range(P) for j in range(i + 1, P)}
    used = 0
    for intervals, idx in history_for_hist:
        W = [_overlap_matrix(edges[k], *intervals[k], cells) for k in range(P)]
        one_d = []
        for k in range(P):
            counts = np.bincount(idx[:, k], minlength=cells) / len(idx)
            one_d.append(W[k] @ counts)
        mass = min(h.sum() for h in one_d)
        if mass <= 0:
            continue
        used += 1
        for k in range(P):
            hists[k] += one_d[k] / one_d[k].sum()
        for i, j in pairs:
            joint = np.zeros((cells, cells))
            np.add.at(joint, (idx[:, i], idx[:, j]), 1.0 / len(idx))
            h2 = W[i] @ joint @ W[j].T
            if h2.sum() > 0:
                pairs[i, j] += h2 / h2.sum()
    hists = [h / h.sum() if h.sum() > 0 else np.full(cells, 1 / cells) for h in hists]
    pairs = {key: h / h.sum() if h.sum() > 0 else np.full_like(h, 1 / h.size) for key, h in pairs.items()}
    if used == 0:
        converged = False
    return PosteriorResult(grids, edges, hists, pairs, records, converged, start)


def exact_grid_posterior(intervals, q: int, toy: GaussianToy, priors) -> np.ndarray:
    """Posterior over the midpoint grid by exhaustive evaluation, indexed ``[v0, v1, ...]``."""
    spec = toy_problem(intervals, q, toy, priors)
    c = spec.cost_table
    w = np.exp(-(c - c.min()))
    w /= w.sum()
    P = spec.P
    return w.reshape((2**q,) * P).transpose(tuple(range(P - 1, -1, -1)))


def mode_within_cells(result: PosteriorResult, truth, tolerance_cells: int = 1) -> bool:
    """True when every 1-D posterior mode is within ``tolerance_cells`` bins of the truth's bin."""
    for k, (h, e) in enumerate(zip(result.histograms, result.edges)):
        if not e[0] <= truth[k] <= e[-1]:
            return False
        cells = len(h)
        tb = min(cells - 1, int(math.floor((truth[k] - e[0]) / (e[-1] - e[0]) * cells)))
        if abs(int(np.argmax(h)) - tb) > tolerance_cells:
            return False
    return True
