"""Dense statevector simulation over composed registers.

Qubit 0 is the least significant bit of the basis-state index. Gates are
applied in place by strided slicing along the target axis, so a single-qubit
gate costs O(2^n). Amplitude arrays may carry trailing batch axes (shape
``(2**n, k)``), which lets tests push whole basis blocks through an operator
to read off dense matrices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

DEFAULT_QUBIT_LIMIT = 24


class CapacityError(ValueError):
    """Requested simulation exceeds the configured qubit/state limit."""

    def __init__(self, requested: int, allowed: int, what: str = "qubits"):
        self.requested = requested
        self.allowed = allowed
        super().__init__(f"requested {requested} {what}, limit is {allowed}")


class GateKind(str, Enum):
    H = "hadamard"
    X = "pauli_x"
    CNOT = "controlled_not"
    MCX = "multi_controlled_x"
    RY = "rotation_y"
    MUX_RY = "multiplexed_rotation_y"
    PHASE_FLIP = "phase_flip_on_basis_set"


@dataclass(frozen=True)
class RegisterLayout:
    """Bit ranges of the state, move-id, move-value, coin and acceptance registers.

    Registers are packed from the least significant bit upward in that order.
    """

    n_variables: int
    qubits_per_variable: int
    acceptance_qubits: int = 0

    def __post_init__(self):
        if self.n_variables < 1 or self.qubits_per_variable < 1:
            raise ValueError("need at least one variable and one qubit per variable")
        if self.acceptance_qubits < 0:
            raise ValueError("acceptance_qubits must be >= 0")

    @property
    def state_qubits(self) -> int:
        return self.n_variables * self.qubits_per_variable

    @property
    def move_id_qubits(self) -> int:
        return math.ceil(math.log2(self.n_variables)) if self.n_variables > 1 else 0

    move_value_qubits = 1
    coin_qubits = 1

    @property
    def total(self) -> int:
        return self.state_qubits + self.move_id_qubits + self.acceptance_qubits + 2

    @property
    def state(self) -> range:
        return range(0, self.state_qubits)

    @property
    def move_id(self) -> range:
        start = self.state_qubits
        return range(start, start + self.move_id_qubits)

    @property
    def move_value(self) -> range:
        start = self.move_id.stop
        return range(start, start + 1)

    @property
    def coin(self) -> range:
        start = self.move_value.stop
        return range(start, start + 1)

    @property
    def acceptance(self) -> range:
        start = self.coin.stop
        return range(start, start + self.acceptance_qubits)

    @property
    def move(self) -> range:
        return range(self.move_id.start, self.move_value.stop)

    @property
    def coin_qubit(self) -> int:
        return self.coin.start

    def variable(self, i: int) -> range:
        q = self.qubits_per_variable
        return range(i * q, (i + 1) * q)

    def registers(self) -> dict[str, range]:
        return {
            "state": self.state,
            "move_id": self.move_id,
            "move_value": self.move_value,
            "coin": self.coin,
            "acceptance": self.acceptance,
        }


@dataclass(frozen=True, eq=False)
class GateOp:
    """One gate of the simulator's vocabulary.

    ``angles`` is the rotation table of a multiplexed RY, indexed by the
    integer formed from ``controls`` (``controls[0]`` is the low bit).
    A phase flip acts on the register ``qubits`` and negates the basis
    values listed in ``marked``.
    """

    kind: GateKind
    target: int | None = None
    controls: tuple[int, ...] = ()
    angle: float = 0.0
    angles: np.ndarray | None = None
    qubits: tuple[int, ...] = ()
    marked: frozenset[int] = field(default_factory=frozenset)

    def touched(self) -> tuple[int, ...]:
        t = () if self.target is None else (self.target,)
        return t + tuple(self.controls) + tuple(self.qubits)

    def validate(self, n_qubits: int) -> None:
        for q in self.touched():
            if not 0 <= q < n_qubits:
                raise IndexError(f"qubit index {q} out of range for {n_qubits} qubits")
        if self.target is not None and self.target in self.controls:
            raise ValueError("target qubit is also a control")
        if len(set(self.controls)) != len(self.controls):
            raise ValueError("duplicate control qubits")
        if self.kind is GateKind.MUX_RY:
            if self.angles is None or len(self.angles) != 2 ** len(self.controls):
                raise ValueError("multiplexed rotation needs 2**len(controls) angles")
        if self.kind is GateKind.PHASE_FLIP:
            size = 2 ** len(self.qubits)
            if any(not 0 <= m < size for m in self.marked):
                raise IndexError("marked basis value outside register")

    def adjoint(self) -> "GateOp":
        if self.kind is GateKind.RY:
            return GateOp(GateKind.RY, self.target, self.controls, angle=-self.angle)
        if self.kind is GateKind.MUX_RY:
            return GateOp(GateKind.MUX_RY, self.target, self.controls, angles=-self.angles)
        return self


def hadamard(q: int) -> GateOp:
    return GateOp(GateKind.H, q)


def pauli_x(q: int) -> GateOp:
    return GateOp(GateKind.X, q)


def cnot(control: int, target: int) -> GateOp:
    return GateOp(GateKind.CNOT, target, (control,))


def mcx(controls: Iterable[int], target: int) -> GateOp:
    return GateOp(GateKind.MCX, target, tuple(controls))


def ry(q: int, angle: float) -> GateOp:
    return GateOp(GateKind.RY, q, angle=float(angle))


def mux_ry(controls: Iterable[int], target: int, angles) -> GateOp:
    return GateOp(GateKind.MUX_RY, target, tuple(controls), angles=np.asarray(angles, dtype=float))


def phase_flip(register: Iterable[int], marked: Iterable[int]) -> GateOp:
    return GateOp(GateKind.PHASE_FLIP, qubits=tuple(register), marked=frozenset(int(m) for m in marked))


class Statevector:
    """Normalized amplitudes over ``2**n_qubits`` basis states."""

    def __init__(self, n_qubits: int, amplitudes: np.ndarray):
        amplitudes = np.asarray(amplitudes, dtype=np.complex128)
        if amplitudes.shape[0] != 2**n_qubits:
            raise ValueError(f"expected {2**n_qubits} amplitudes, got {amplitudes.shape[0]}")
        self.n_qubits = n_qubits
        self.amplitudes = amplitudes

    def copy(self) -> "Statevector":
        return Statevector(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __repr__(self):
        return f"Statevector(n_qubits={self.n_qubits})"


def _check_capacity(n_qubits: int, limit: int) -> None:
    if n_qubits > limit:
        raise CapacityError(n_qubits, limit)


def init_zero(layout: RegisterLayout | int, limit: int = DEFAULT_QUBIT_LIMIT) -> Statevector:
    n = layout if isinstance(layout, int) else layout.total
    _check_capacity(n, limit)
    amps = np.zeros(2**n, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(n, amps)


def uniform_state(n: int, limit: int = DEFAULT_QUBIT_LIMIT) -> Statevector:
    _check_capacity(n, limit)
    return Statevector(n, np.full(2**n, 2 ** (-n / 2), dtype=np.complex128))


def _split(amps: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Views of the amplitudes with qubit ``q`` equal to 0 and to 1."""
    view = amps.reshape((-1, 2, 2**q) + amps.shape[1:])
    return view[:, 0], view[:, 1]


_INDEX_CACHE: dict[int, np.ndarray] = {}


def _indices(dim: int) -> np.ndarray:
    idx = _INDEX_CACHE.get(dim)
    if idx is None:
        idx = np.arange(dim, dtype=np.int64)
        if dim <= 2**20:
            _INDEX_CACHE[dim] = idx
    return idx


def _gather_bits(idx: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    value = np.zeros_like(idx)
    for k, q in enumerate(qubits):
        value |= ((idx >> q) & 1) << k
    return value


_PAIR_CACHE: dict[tuple, np.ndarray] = {}


def _controlled_pairs(dim: int, target: int, controls: tuple[int, ...]) -> np.ndarray:
    """Indices with the target bit 0 and every control bit 1."""
    key = (dim, target, controls)
    hit = _PAIR_CACHE.get(key)
    if hit is None:
        low = _split(_indices(dim), target)[0].reshape(-1)
        mask = np.ones(low.shape, dtype=bool)
        for q in controls:
            mask &= ((low >> q) & 1).astype(bool)
        hit = low[mask]
        if len(_PAIR_CACHE) > 4096:
            _PAIR_CACHE.clear()
        _PAIR_CACHE[key] = hit
    return hit


def _expand(mask: np.ndarray, like: np.ndarray) -> np.ndarray:
    """Append singleton axes so ``mask`` broadcasts over the batch axes of ``like``."""
    return mask.reshape(mask.shape + (1,) * (like.ndim - mask.ndim))


def _apply_raw(amps: np.ndarray, gate: GateOp) -> None:
    kind = gate.kind
    if kind is GateKind.PHASE_FLIP:
        if not gate.marked:
            return
        table = np.zeros(2 ** len(gate.qubits), dtype=bool)
        table[list(gate.marked)] = True
        hit = table[_gather_bits(_indices(amps.shape[0]), gate.qubits)]
        amps[hit] *= -1
        return

    a0, a1 = _split(amps, gate.target)
    if kind is GateKind.H:
        s = (a0 + a1) / math.sqrt(2)
        a1[...] = (a0 - a1) / math.sqrt(2)
        a0[...] = s
        return
    if kind is GateKind.RY:
        c, s = math.cos(gate.angle / 2), math.sin(gate.angle / 2)
        n0 = c * a0 - s * a1
        a1 *= c
        a1 += s * a0
        a0[...] = n0
        return

    if kind is GateKind.X and not gate.controls:
        tmp = a0.copy()
        a0[...] = a1
        a1[...] = tmp
        return

    if kind in (GateKind.X, GateKind.CNOT, GateKind.MCX):
        i0 = _controlled_pairs(amps.shape[0], gate.target, gate.controls)
        i1 = i0 | (1 << gate.target)
        amps[i0], amps[i1] = amps[i1], amps[i0].copy()
        return
    low = _split(_indices(amps.shape[0]), gate.target)[0]
    if kind is GateKind.MUX_RY:
        theta = gate.angles[_gather_bits(low, gate.controls)]
        c = _expand(np.cos(theta / 2), a0)
        s = _expand(np.sin(theta / 2), a0)
        n0 = c * a0 - s * a1
        a1[...] = s * a0 + c * a1
        a0[...] = n0
        return
    raise ValueError(f"unknown gate kind {kind}")


def apply_gate(psi: Statevector, gate: GateOp) -> Statevector:
    """Apply ``gate`` in place and return ``psi``."""
    gate.validate(psi.n_qubits)
    _apply_raw(psi.amplitudes, gate)
    return psi


def apply_gates(amps: np.ndarray, gates: Iterable[GateOp]) -> np.ndarray:
    """Apply a gate program to a raw (possibly batched) amplitude array in place."""
    for g in gates:
        _apply_raw(amps, g)
    return amps


def apply_phase_oracle(psi: Statevector, marked: Iterable[int], register: Sequence[int] | None = None) -> Statevector:
    register = tuple(range(psi.n_qubits)) if register is None else tuple(register)
    return apply_gate(psi, phase_flip(register, marked))


def reflect_about_zero(register: Sequence[int]) -> GateOp:
    """2|0><0| - 1 on ``register``: every nonzero register value picks up a -1."""
    return phase_flip(register, range(1, 2 ** len(register)))


def diffusion_gates(register: Sequence[int]) -> list[GateOp]:
    hs = [hadamard(q) for q in register]
    return hs + [reflect_about_zero(register)] + hs


def apply_diffusion(psi: Statevector, register: Sequence[int] | None = None) -> Statevector:
    """Inversion about the mean on ``register``: H^n (2|0><0| - 1) H^n."""
    register = tuple(range(psi.n_qubits)) if register is None else tuple(register)
    for g in diffusion_gates(register):
        apply_gate(psi, g)
    return psi


def marginal_distribution(psi: Statevector, register: Sequence[int] | None = None) -> np.ndarray:
    """Probability of each basis value of ``register`` (register[0] is the low bit)."""
    probs = psi.probabilities()
    if register is None:
        return probs
    register = tuple(register)
    if not register:
        return np.array([probs.sum()])
    if register == tuple(range(psi.n_qubits)):
        return probs
    for q in register:
        if not 0 <= q < psi.n_qubits:
            raise IndexError(f"qubit index {q} out of range")
    if register == tuple(range(register[0], register[0] + len(register))):
        lo = register[0]
        return probs.reshape(-1, 2 ** len(register), 2**lo).sum(axis=(0, 2))
    values = _gather_bits(_indices(probs.shape[0]), register)
    return np.bincount(values, weights=probs, minlength=2 ** len(register))


def sample(psi: Statevector, register: Sequence[int] | None, shots: int, seed) -> np.ndarray:
    """Draw ``shots`` i.i.d. register values; ``seed`` is an int or a Generator."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = marginal_distribution(psi, register)
    probs = probs / probs.sum()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.choice(len(probs), size=shots, p=probs)


def grover_search(n: int, marked: int, iterations: int) -> float:
    """Success probability of ``iterations`` rounds of oracle + diffusion from |s>."""
    if n < 1 or not 0 <= marked < 2**n:
        raise ValueError("need n >= 1 and 0 <= marked < 2**n")
    psi = uniform_state(n)
    for _ in range(iterations):
        apply_phase_oracle(psi, [marked])
        apply_diffusion(psi)
    return float(abs(psi.amplitudes[marked]) ** 2)
