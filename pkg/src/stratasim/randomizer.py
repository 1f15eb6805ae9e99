"""Stratified permuted-block treatment assignment.

Patients arrive in enrollment order carrying a reported stratum label.
Each stratum deals treatment codes from its own sequence of randomly
permuted blocks: the next patient in a stratum receives the next unused
code of that stratum's current block, and a fresh block is opened when
the current one is exhausted.  The final block of a stratum may end up
partially used, which is the only source of imbalance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class AllocationRatio:
    """Integer per-arm allocation weights, e.g. ``(1, 2, 2)`` for 1:2:2.

    Arm 0 is the control arm by convention.
    """

    weights: tuple[int, ...]

    def __post_init__(self) -> None:
        weights = tuple(int(w) for w in self.weights)
        if len(weights) < 2:
            raise ConfigurationError("allocation needs at least two arms")
        if any(w < 1 for w in weights) or weights != tuple(self.weights):
            raise ConfigurationError(
                f"allocation weights must be positive integers, got {self.weights!r}"
            )
        object.__setattr__(self, "weights", weights)

    @property
    def n_arms(self) -> int:
        return len(self.weights)

    @property
    def total(self) -> int:
        return sum(self.weights)

    def target_share(self, arm: int) -> float:
        return self.weights[arm] / self.total


@dataclass(frozen=True)
class TrialDesign:
    """Enrollment size, strata mix, and block randomization settings.

    ``block_sizes`` optionally lists admissible block lengths; when set,
    every new block draws its length uniformly from the list.  Otherwise
    all blocks have length ``block_size``.
    """

    n_patients: int
    strata_probs: tuple[float, ...]
    allocation: AllocationRatio
    block_size: int
    block_sizes: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_patients < 1:
            raise ConfigurationError(f"n_patients must be >= 1, got {self.n_patients}")
        probs = tuple(float(p) for p in self.strata_probs)
        if len(probs) < 1 or any(p < 0 for p in probs):
            raise ConfigurationError(f"strata_probs must be nonnegative, got {probs!r}")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ConfigurationError(
                f"strata_probs must sum to 1 within 1e-12, got sum {sum(probs)!r}"
            )
        object.__setattr__(self, "strata_probs", probs)
        object.__setattr__(self, "allocation", _coerce_allocation(self.allocation))
        block_pattern(self.allocation, self.block_size)
        if self.block_sizes is not None:
            sizes = tuple(int(b) for b in self.block_sizes)
            if not sizes:
                raise ConfigurationError("block_sizes must be a nonempty list when given")
            for size in sizes:
                block_pattern(self.allocation, size)
            object.__setattr__(self, "block_sizes", sizes)

    @property
    def n_strata(self) -> int:
        return len(self.strata_probs)


def _coerce_allocation(allocation) -> AllocationRatio:
    if isinstance(allocation, AllocationRatio):
        return allocation
    return AllocationRatio(tuple(allocation))


def block_pattern(allocation: AllocationRatio, block_size: int) -> np.ndarray:
    """Multiset of treatment codes filling one block, in sorted order.

    The block holds ``block_size * w_a / sum(w)`` copies of each arm ``a``,
    so ``block_size`` must be a multiple of the weight total.
    """
    allocation = _coerce_allocation(allocation)
    if block_size < 1 or block_size % allocation.total != 0:
        raise ConfigurationError(
            f"block size {block_size} is not a positive multiple of the "
            f"allocation weight total {allocation.total}"
        )
    per_unit = block_size // allocation.total
    counts = [w * per_unit for w in allocation.weights]
    return np.repeat(np.arange(allocation.n_arms, dtype=np.int8), counts)


def new_block(design: TrialDesign, rng: np.random.Generator) -> np.ndarray:
    """Draw one freshly permuted block of treatment codes."""
    if design.block_sizes is not None:
        size = design.block_sizes[int(rng.integers(len(design.block_sizes)))]
    else:
        size = design.block_size
    return rng.permutation(block_pattern(design.allocation, size))


@dataclass
class BlockState:
    """Mutable per-stratum block queues plus a full assignment audit log.

    ``audit`` records one ``(patient_index, reported_stratum, code)`` tuple
    per assignment, in enrollment order.
    """

    design: TrialDesign
    _queues: list[list[int]] = field(default_factory=list)
    _cursors: list[int] = field(default_factory=list)
    audit: list[tuple[int, int, int]] = field(default_factory=list)
    n_assigned: int = 0

    def __post_init__(self) -> None:
        if not self._queues:
            self._queues = [[] for _ in range(self.design.n_strata)]
            self._cursors = [0] * self.design.n_strata

    def codes_issued(self, stratum: int) -> list[int]:
        """Codes dealt so far in one stratum, in assignment order."""
        return self._queues[stratum][: self._cursors[stratum]]


def assign_next(state: BlockState, reported_stratum: int, rng: np.random.Generator) -> int:
    """Deal the next available treatment code in the reported stratum."""
    stratum = int(reported_stratum)
    if not 0 <= stratum < state.design.n_strata:
        raise ConfigurationError(
            f"reported stratum {stratum} outside 0..{state.design.n_strata - 1}"
        )
    queue = state._queues[stratum]
    cursor = state._cursors[stratum]
    if cursor == len(queue):
        queue.extend(int(c) for c in new_block(state.design, rng))
    code = queue[cursor]
    state._cursors[stratum] = cursor + 1
    state.audit.append((state.n_assigned, stratum, code))
    state.n_assigned += 1
    return code


def randomize_cohort(
    design: TrialDesign,
    reported_strata: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Assign all patients in enrollment order, returning treatment codes.

    The assignment of a patient depends only on the sequence of earlier
    arrivals in the same reported stratum, never on later arrivals or on
    other strata.
    """
    reported = np.asarray(reported_strata)
    if reported.shape != (design.n_patients,):
        raise ConfigurationError(
            f"reported_strata has shape {reported.shape}, expected ({design.n_patients},)"
        )
    state = BlockState(design)
    out = np.empty(design.n_patients, dtype=np.int8)
    for i, stratum in enumerate(reported.tolist()):
        out[i] = assign_next(state, stratum, rng)
    return out


def batch_block_assignments(
    design: TrialDesign,
    reported_strata: np.ndarray,
    n_draws: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw ``n_draws`` independent stratified block assignments at once.

    Vectorized re-randomization for a fixed reported-strata vector: each
    draw concatenates freshly permuted blocks per stratum and deals them
    to that stratum's patients in enrollment order, exactly as the
    sequential path does.  Requires a fixed block size.
    """
    if design.block_sizes is not None:
        raise ConfigurationError("batch assignment supports fixed block sizes only")
    reported = np.asarray(reported_strata)
    if reported.shape != (design.n_patients,):
        raise ConfigurationError(
            f"reported_strata has shape {reported.shape}, expected ({design.n_patients},)"
        )
    pattern = block_pattern(design.allocation, design.block_size)
    block = len(pattern)
    out = np.empty((n_draws, design.n_patients), dtype=np.int8)
    for stratum in range(design.n_strata):
        idx = np.flatnonzero(reported == stratum)
        if idx.size == 0:
            continue
        n_blocks = -(-idx.size // block)
        # argsort of iid uniforms along the last axis is a uniform permutation
        u = rng.random((n_draws, n_blocks, block))
        codes = pattern[np.argsort(u, axis=-1)].reshape(n_draws, n_blocks * block)
        out[:, idx] = codes[:, : idx.size]
    return out
