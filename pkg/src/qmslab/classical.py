"""Classical Metropolis-Hastings baseline with the same proposal as the walk.

Proposals are uniform over the 2P single-variable +/-1 moves, rejected
proposals still advance the step counter, and chains start from the uniform
distribution over states.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .problems import ProblemSpec, acceptance, apply_move, brute_force_ground
from .statevector import CapacityError

TRANSITION_LIMIT = 14


@dataclass(frozen=True)
class ChainState:
    current: tuple[int, ...]
    step: int = 0
    stream: int = 0


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    beta: float
    entries: sparse.csr_array

    def toarray(self) -> np.ndarray:
        return self.entries.toarray()


@dataclass(frozen=True, eq=False)
class ChainEstimate:
    """Monte Carlo p(t) for t = 0..t_max and the final empirical state distribution."""

    p: np.ndarray
    stderr: np.ndarray
    final_distribution: np.ndarray
    chains: int


def mh_step(chain: ChainState, spec: ProblemSpec, beta: float, rng: np.random.Generator) -> ChainState:
    moves = spec.moves()
    move = moves[rng.integers(len(moves))]
    proposal = apply_move(chain.current, move, spec)
    delta = spec.evaluate(proposal) - spec.evaluate(chain.current)
    accept = rng.random() < acceptance(delta, beta)
    current = tuple(int(v) for v in proposal) if accept else chain.current
    return ChainState(current, chain.step + 1, chain.stream)


def transition_matrix(spec: ProblemSpec, beta: float, limit: int = TRANSITION_LIMIT) -> TransitionMatrix:
    if spec.n_bits > limit:
        raise CapacityError(spec.n_bits, limit, "state bits for the transition matrix")
    n = spec.n_states
    costs = spec.cost_table
    nbr = spec.neighbor_table
    k = nbr.shape[1]
    rows = np.repeat(np.arange(n), k)
    cols = nbr.reshape(-1)
    vals = acceptance(costs[cols] - costs[rows], beta) / k
    stay = 1.0 - np.bincount(rows, weights=vals, minlength=n)
    rows = np.concatenate([rows, np.arange(n)])
    cols = np.concatenate([cols, np.arange(n)])
    vals = np.concatenate([vals, stay])
    # duplicate (row, col) pairs are summed on conversion
    T = sparse.coo_array((vals, (rows, cols)), shape=(n, n)).tocsr()
    return TransitionMatrix(beta, T)


def exact_success_probability(spec: ProblemSpec, schedule, t_max: int, limit: int = TRANSITION_LIMIT) -> np.ndarray:
    """Ground-set mass after t = 0..t_max steps from the uniform distribution.

    Step ``t`` uses ``schedule.beta(t - 1)``.
    """
    ground = np.fromiter(brute_force_ground(spec)[1], dtype=np.int64)
    dist = np.full(spec.n_states, 1.0 / spec.n_states)
    p = np.empty(t_max + 1)
    p[0] = dist[ground].sum()
    cache: dict[float, sparse.csr_array] = {}
    for t in range(1, t_max + 1):
        beta = schedule.beta(t - 1)
        if beta not in cache:
            cache[beta] = transition_matrix(spec, beta, limit).entries
        dist = cache[beta].T @ dist
        p[t] = dist[ground].sum()
    return p


def run_chains(spec: ProblemSpec, schedule, t_max: int, chains: int, seed) -> ChainEstimate:
    """Run ``chains`` independent chains in lockstep and estimate p(t).

    ``seed`` is an int or a Generator; all chains draw from that one stream.
    """
    if chains < 1:
        raise ValueError("chains must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    costs = spec.cost_table
    nbr = spec.neighbor_table
    is_ground = np.zeros(spec.n_states, dtype=bool)
    is_ground[list(brute_force_ground(spec)[1])] = True

    state = rng.integers(spec.n_states, size=chains)
    p = np.empty(t_max + 1)
    p[0] = is_ground[state].mean()
    for t in range(1, t_max + 1):
        beta = schedule.beta(t - 1)
        proposal = nbr[state, rng.integers(nbr.shape[1], size=chains)]
        u = rng.random(chains)
        accept = u < acceptance(costs[proposal] - costs[state], beta)
        state = np.where(accept, proposal, state)
        p[t] = is_ground[state].mean()
    stderr = np.sqrt(p * (1 - p) / chains)
    final = np.bincount(state, minlength=spec.n_states) / chains
    return ChainEstimate(p, stderr, final, chains)
