"""Coin-based quantum Metropolis-Hastings walk.

One walk step is ``U = R V^dag B^dag F B V`` (V acts first). Operators are
kept as gate programs over :class:`~qmslab.statevector.GateOp` and are only
turned into dense matrices on request.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import statevector as sv
from .problems import ProblemSpec, acceptance, brute_force_ground
from .statevector import DEFAULT_QUBIT_LIMIT, GateOp, RegisterLayout, Statevector

SCHEDULE_KINDS = ("constant", "linear", "geometric", "exponential")
REFLECTION_TARGETS = ("move+coin", "state+coin")


@dataclass(frozen=True)
class AnnealingSchedule:
    """Inverse temperature as a function of completed steps ``t``.

    ``parameter`` is the per-step slope (linear), ratio (geometric) or rate
    (exponential, ``beta0 * exp(rate * t)``). Values are clamped at 0.
    """

    kind: str = "constant"
    beta0: float = 1.0
    parameter: float = 0.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"schedule kind must be one of {SCHEDULE_KINDS}")
        if self.beta0 < 0:
            raise ValueError("beta0 must be >= 0")
        if self.kind == "geometric" and self.parameter <= 0:
            raise ValueError("geometric ratio must be > 0")

    def beta(self, t: int) -> float:
        if self.kind == "constant":
            b = self.beta0
        elif self.kind == "linear":
            b = self.beta0 + self.parameter * t
        elif self.kind == "geometric":
            b = self.beta0 * self.parameter**t
        else:
            b = self.beta0 * math.exp(self.parameter * t)
        return max(0.0, b)

    def describe(self) -> str:
        if self.kind == "constant":
            return "constant"
        return f"{self.kind}:{self.parameter:g}"


@dataclass(frozen=True)
class WalkConfig:
    schedule: AnnealingSchedule = field(default_factory=AnnealingSchedule)
    steps: int = 1
    acceptance_qubits: int = 0
    reflection_target: str = "move+coin"
    initial_state: str | int = "uniform"

    def __post_init__(self):
        if self.steps < 0 or self.acceptance_qubits < 0:
            raise ValueError("steps and acceptance_qubits must be >= 0")
        if self.reflection_target not in REFLECTION_TARGETS:
            raise ValueError(f"reflection_target must be one of {REFLECTION_TARGETS}")


@dataclass(frozen=True)
class WalkStepReport:
    t: int
    beta: float
    ground_probability: float


class Operator:
    """An ordered gate program; ``gates[0]`` is applied first."""

    def __init__(self, n_qubits: int, gates: Sequence[GateOp], name: str = ""):
        self.n_qubits = n_qubits
        self.gates = list(gates)
        self.name = name
        for g in self.gates:
            g.validate(n_qubits)

    def __len__(self):
        return len(self.gates)

    def then(self, other: "Operator") -> "Operator":
        """Apply ``self`` first, then ``other``."""
        return Operator(self.n_qubits, self.gates + other.gates, f"{other.name}*{self.name}")

    def adjoint(self) -> "Operator":
        return Operator(self.n_qubits, [g.adjoint() for g in reversed(self.gates)], f"{self.name}^dag")

    def apply(self, psi: Statevector) -> Statevector:
        sv.apply_gates(psi.amplitudes, self.gates)
        return psi

    def apply_array(self, amps: np.ndarray) -> np.ndarray:
        return sv.apply_gates(amps, self.gates)

    def dense(self, block: int = 512) -> np.ndarray:
        dim = 2**self.n_qubits
        out = np.empty((dim, dim), dtype=np.complex128)
        for start in range(0, dim, block):
            stop = min(dim, start + block)
            cols = np.zeros((dim, stop - start), dtype=np.complex128)
            cols[np.arange(start, stop), np.arange(stop - start)] = 1.0
            out[:, start:stop] = self.apply_array(cols)
        return out


def layout_for(spec: ProblemSpec, acceptance_qubits: int = 0) -> RegisterLayout:
    return RegisterLayout(spec.P, spec.Q, acceptance_qubits)


def build_V(layout: RegisterLayout, spec: ProblemSpec) -> Operator:
    """Equal superposition over the 2P valid (move id, move value) pairs.

    For non-power-of-two P the move-id register is prepared with a binary
    rotation tree so ids >= P carry zero amplitude.
    """
    ids = list(layout.move_id)
    m = len(ids)
    gates: list[GateOp] = []
    for b in range(m - 1, -1, -1):
        controls = ids[b + 1 :]
        angles = np.zeros(2 ** len(controls))
        for h in range(len(angles)):
            base = h << (b + 1)
            n0 = max(0, min(spec.P, base + 2**b) - base)
            n1 = max(0, min(spec.P, base + 2 ** (b + 1)) - (base + 2**b))
            if n0 + n1:
                angles[h] = 2 * math.atan2(math.sqrt(n1), math.sqrt(n0))
        gates.append(sv.mux_ry(controls, ids[b], angles))
    gates.append(sv.hadamard(layout.move_value.start))
    return Operator(layout.total, gates, "V")


def coin_acceptance_table(layout: RegisterLayout, spec: ProblemSpec, beta: float) -> np.ndarray:
    """Acceptance for every (state, move id, move value) control value; 0 for invalid ids."""
    n_s = spec.n_states
    n_id = 2**layout.move_id_qubits
    costs = spec.cost_table
    nbr = spec.neighbor_table
    table = np.zeros((2, n_id, n_s))
    for mid in range(min(spec.P, n_id)):
        for bit in (0, 1):
            target = nbr[:, 2 * mid + bit]
            table[bit, mid] = acceptance(costs[target] - costs, beta)
    a = layout.acceptance_qubits
    if a > 0:
        table = np.round(table * 2**a) / 2**a
    return table.reshape(-1)


def build_B(layout: RegisterLayout, spec: ProblemSpec, beta: float) -> Operator:
    """Rotate the coin so that P(coin=1 | s, m) equals the Metropolis acceptance."""
    acc = np.clip(coin_acceptance_table(layout, spec, beta), 0.0, 1.0)
    angles = 2 * np.arcsin(np.sqrt(acc))
    controls = list(layout.state) + list(layout.move)
    return Operator(layout.total, [sv.mux_ry(controls, layout.coin_qubit, angles)], "B")


def _controlled_step(var: Sequence[int], controls: list[int], decrement: bool) -> list[GateOp]:
    """x -> x +/- 1 mod 2**len(var) on ``var`` when all ``controls`` are 1."""
    flips = [sv.pauli_x(q) for q in var] if decrement else []
    inc = [sv.mcx(list(var[:k]) + controls, var[k]) for k in range(len(var) - 1, -1, -1)]
    return flips + inc + flips


def build_F(layout: RegisterLayout, spec: ProblemSpec) -> Operator:
    """On coin=1, shift the selected variable by the selected direction."""
    ids = list(layout.move_id)
    val = layout.move_value.start
    coin = layout.coin_qubit
    gates: list[GateOp] = []
    for i in range(spec.P):
        id_zero = [sv.pauli_x(q) for k, q in enumerate(ids) if not (i >> k) & 1]
        for bit in (0, 1):
            val_zero = [sv.pauli_x(val)] if bit == 0 else []
            wrap = id_zero + val_zero
            body = _controlled_step(list(layout.variable(i)), [coin, val] + ids, decrement=bit == 1)
            gates += wrap + body + wrap
    return Operator(layout.total, gates, "F")


def build_R(layout: RegisterLayout, target: str = "move+coin") -> Operator:
    """2|0><0| - 1 on the reflected registers, identity elsewhere."""
    if target == "move+coin":
        reg = list(layout.move) + list(layout.coin)
    elif target == "state+coin":
        reg = list(layout.state) + list(layout.coin)
    else:
        raise ValueError(f"reflection_target must be one of {REFLECTION_TARGETS}")
    return Operator(layout.total, [sv.reflect_about_zero(reg)], "R")


def build_walk_step(
    layout: RegisterLayout, spec: ProblemSpec, beta: float, reflection_target: str = "move+coin"
) -> Operator:
    V = build_V(layout, spec)
    B = build_B(layout, spec, beta)
    F = build_F(layout, spec)
    R = build_R(layout, reflection_target)
    U = V.then(B).then(F).then(B.adjoint()).then(V.adjoint()).then(R)
    U.name = f"U(beta={beta:g})"
    return U


def initial_state(layout: RegisterLayout, spec: ProblemSpec, which="uniform", limit: int = DEFAULT_QUBIT_LIMIT) -> Statevector:
    psi = sv.init_zero(layout, limit)
    if which == "uniform":
        for q in layout.state:
            sv.apply_gate(psi, sv.hadamard(q))
    else:
        index = int(which)
        if not 0 <= index < spec.n_states:
            raise ValueError("initial basis index outside state space")
        psi.amplitudes[0] = 0.0
        psi.amplitudes[index] = 1.0
    return psi


def evolve_state(
    config: WalkConfig, spec: ProblemSpec, limit: int = DEFAULT_QUBIT_LIMIT, ground: set[int] | None = None
) -> tuple[list[WalkStepReport], Statevector]:
    """Run the walk and also return the final statevector."""
    layout = layout_for(spec, config.acceptance_qubits)
    psi = initial_state(layout, spec, config.initial_state, limit)
    if ground is None:
        ground = brute_force_ground(spec)[1]
    ground_idx = np.fromiter(ground, dtype=np.int64)
    state_reg = list(layout.state)

    def ground_probability():
        return float(sv.marginal_distribution(psi, state_reg)[ground_idx].sum())

    reports = [WalkStepReport(0, config.schedule.beta(0), ground_probability())]
    cache: dict[float, Operator] = {}
    for t in range(1, config.steps + 1):
        beta = config.schedule.beta(t - 1)
        if beta not in cache:
            if len(cache) > 8:
                cache.clear()
            cache[beta] = build_walk_step(layout, spec, beta, config.reflection_target)
        cache[beta].apply(psi)
        reports.append(WalkStepReport(t, beta, ground_probability()))
    return reports, psi


def evolve(config: WalkConfig, spec: ProblemSpec, limit: int = DEFAULT_QUBIT_LIMIT) -> list[WalkStepReport]:
    """Ground-state probability after each of ``config.steps`` walk steps (t=0 included)."""
    return evolve_state(config, spec, limit)[0]
