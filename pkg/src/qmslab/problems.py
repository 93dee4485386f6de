"""Discrete optimization problems: P variables of Q bits each plus a cost.

Variable ``i`` occupies bits ``[i*Q, (i+1)*Q)`` of the basis index. Moves add
or subtract 1 (mod 2**Q) from a single variable, so there are exactly 2P
moves and the proposal distribution is symmetric.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .statevector import DEFAULT_QUBIT_LIMIT, CapacityError

CostFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Move:
    variable_index: int
    direction: int

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")

    @property
    def inverse(self) -> "Move":
        return Move(self.variable_index, -self.direction)

    @property
    def value_bit(self) -> int:
        """Move-value register encoding: 0 for +1, 1 for -1."""
        return 0 if self.direction == 1 else 1


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """``cost`` maps an integer array of shape ``(..., P)`` to costs of shape ``(...)``."""

    P: int
    Q: int
    cost: CostFn
    label: str = "problem"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.P < 1 or self.Q < 1:
            raise ValueError("need P >= 1 and Q >= 1")

    @property
    def n_bits(self) -> int:
        return self.P * self.Q

    @property
    def n_states(self) -> int:
        return 2**self.n_bits

    def moves(self) -> list[Move]:
        return [Move(i, d) for i in range(self.P) for d in (1, -1)]

    def evaluate(self, values) -> float:
        return float(self.cost(np.asarray(values, dtype=np.int64)[None, :])[0])

    def _require_table(self, limit: int = DEFAULT_QUBIT_LIMIT):
        if self.n_bits > limit:
            raise CapacityError(self.n_bits, limit, "state bits")

    @cached_property
    def all_values(self) -> np.ndarray:
        self._require_table()
        return decode(np.arange(self.n_states), self)

    @cached_property
    def cost_table(self) -> np.ndarray:
        """Cost of every basis state, indexed by encoded state."""
        return np.asarray(self.cost(self.all_values), dtype=float)

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """``table[s, k]`` is the state reached from ``s`` by ``moves()[k]``."""
        vals = self.all_values
        cols = []
        for mv in self.moves():
            cols.append(encode(apply_move(vals, mv, self), self))
        return np.stack(cols, axis=1)


def encode(values, spec: ProblemSpec):
    """Pack variable values into a basis index (array inputs broadcast over leading axes)."""
    values = np.asarray(values, dtype=np.int64)
    if values.shape[-1] != spec.P:
        raise ValueError(f"expected {spec.P} values, got {values.shape[-1]}")
    if np.any(values < 0) or np.any(values >= 2**spec.Q):
        raise ValueError(f"variable value outside [0, {2**spec.Q})")
    shifts = np.arange(spec.P, dtype=np.int64) * spec.Q
    out = np.sum(values << shifts, axis=-1)
    return int(out) if out.ndim == 0 else out


def decode(index, spec: ProblemSpec) -> np.ndarray:
    index = np.asarray(index, dtype=np.int64)
    if np.any(index < 0) or np.any(index >= spec.n_states):
        raise ValueError("basis index outside state space")
    shifts = np.arange(spec.P, dtype=np.int64) * spec.Q
    return (index[..., None] >> shifts) & (2**spec.Q - 1)


def apply_move(values, move: Move, spec: ProblemSpec) -> np.ndarray:
    values = np.array(values, dtype=np.int64, copy=True)
    i = move.variable_index
    values[..., i] = (values[..., i] + move.direction) % (2**spec.Q)
    return values


def acceptance(delta_cost, beta: float):
    """Metropolis acceptance min(1, exp(-beta * delta_cost)).

    Shared by the classical chain and the quantum coin rotation.
    """
    dc = np.asarray(delta_cost, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        a = np.where(dc <= 0, 1.0, np.exp(-beta * np.where(dc > 0, dc, 0.0)))
    if beta == 0:
        a = np.ones_like(dc)
    return a if a.ndim else float(a)


# --- cost functions --------------------------------------------------------


def nqueens_cost(columns, n: int | None = None):
    """Attacking pairs for one queen per row, plus ``n`` per off-board queen.

    ``columns[..., r]`` is the column of the queen in row ``r``.
    """
    cols = np.asarray(columns, dtype=np.int64)
    n = cols.shape[-1] if n is None else n
    attacks = np.zeros(cols.shape[:-1], dtype=float)
    for i in range(n):
        for j in range(i + 1, n):
            d = np.abs(cols[..., i] - cols[..., j])
            attacks += (d == 0) | (d == j - i)
    off_board = np.sum(cols >= n, axis=-1)
    return attacks + n * off_board


def ising_cost(bits):
    """Open-chain unit-coupling energy with spins s = 2b - 1."""
    s = 2 * np.asarray(bits, dtype=np.int64) - 1
    return -np.sum(s[..., :-1] * s[..., 1:], axis=-1).astype(float)


def gaussian_loglike_cost(theta, truth, widths):
    """Half the squared standardized distance from ``truth``: -log of a separable Gaussian."""
    theta = np.asarray(theta, dtype=float)
    z = (theta - np.asarray(truth, dtype=float)) / np.asarray(widths, dtype=float)
    return 0.5 * np.sum(z**2, axis=-1)


def grid_values(lower: float, upper: float, q: int) -> np.ndarray:
    """Cell midpoints of ``[lower, upper)`` split into ``2**q`` cells."""
    cells = 2**q
    return lower + (np.arange(cells) + 0.5) * (upper - lower) / cells


# --- problem factories -----------------------------------------------------


def nqueens_problem(n: int) -> ProblemSpec:
    if n < 1:
        raise ValueError("n must be >= 1")
    q = max(1, math.ceil(math.log2(n)))
    return ProblemSpec(n, q, lambda v: nqueens_cost(v, n), label="nqueens", params={"n": n})


def ising_problem(n: int) -> ProblemSpec:
    if n < 2:
        raise ValueError("Ising chain needs n >= 2")
    return ProblemSpec(n, 1, ising_cost, label="ising", params={"n": n})


def gaussian_problem(bounds, q: int, truth, widths) -> ProblemSpec:
    """Gaussian toy likelihood over the midpoint grid of each ``(lower, upper)`` interval."""
    bounds = [(float(lo), float(hi)) for lo, hi in bounds]
    truth = np.asarray(truth, dtype=float)
    widths = np.asarray(widths, dtype=float)
    if np.any(widths <= 0):
        raise ValueError("widths must be positive")
    if len(bounds) != len(truth) or len(truth) != len(widths):
        raise ValueError("bounds, truth and widths must have one entry per parameter")
    grids = [grid_values(lo, hi, q) for lo, hi in bounds]

    def cost(idx):
        idx = np.asarray(idx, dtype=np.int64)
        theta = np.stack([grids[k][idx[..., k]] for k in range(len(grids))], axis=-1)
        return gaussian_loglike_cost(theta, truth, widths)

    return ProblemSpec(
        len(bounds),
        q,
        cost,
        label="gaussian",
        params={"bounds": bounds, "truth": truth.tolist(), "widths": widths.tolist()},
    )


def two_state_problem(costs=(0.0, 1.0)) -> ProblemSpec:
    table = np.asarray(costs, dtype=float)
    return ProblemSpec(1, 1, lambda v: table[np.asarray(v)[..., 0]], label="two-state")


def make_problem(name: str, n: int, **kw) -> ProblemSpec:
    if name == "nqueens":
        return nqueens_problem(n)
    if name == "ising":
        return ising_problem(n)
    if name == "gaussian":
        q = kw.get("q", 4)
        truth = kw.get("truth", [0.0] * n)
        widths = kw.get("widths", [1.0] * n)
        bounds = kw.get("bounds", [(-4.0, 4.0)] * n)
        return gaussian_problem(bounds, q, truth, widths)
    raise ValueError(f"unknown problem {name!r}")


# --- exact oracles ---------------------------------------------------------


def brute_force_ground(spec: ProblemSpec, limit: int = DEFAULT_QUBIT_LIMIT) -> tuple[float, set[int]]:
    """Minimum cost and every state attaining it, by exhaustive scan."""
    spec._require_table(limit)
    table = spec.cost_table
    best = float(table.min())
    tol = 1e-12 * max(1.0, abs(best))
    return best, {int(i) for i in np.flatnonzero(table <= best + tol)}


@dataclass(frozen=True, eq=False)
class BoltzmannTable:
    beta: float
    probabilities: np.ndarray


def boltzmann(spec: ProblemSpec, beta: float, limit: int = DEFAULT_QUBIT_LIMIT) -> BoltzmannTable:
    spec._require_table(limit)
    c = spec.cost_table
    w = np.exp(-beta * (c - c.min())) if beta else np.ones_like(c)
    return BoltzmannTable(beta, w / w.sum())
