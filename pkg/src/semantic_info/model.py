"""Finite-alphabet probability objects and synonymous partitions.

A synonymous partition groups the indices of a syntactic alphabet into
disjoint cells; each cell is the set of symbols that carry one meaning.
All objects are frozen and validated on construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

NORM_TOL = 1e-9


class ModelError(ValueError):
    """Base class for invalid model objects."""


class OverlappingCells(ModelError):
    pass


class IncompleteCover(ModelError):
    pass


class EmptyCell(ModelError):
    pass


class InvalidProbabilities(ModelError):
    pass


def _freeze(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Alphabet:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 1:
            raise ModelError("alphabet must contain at least one symbol")
        if len(set(labels)) != len(labels):
            raise ModelError("alphabet labels must be unique")

    @property
    def size(self) -> int:
        return len(self.labels)

    @classmethod
    def indexed(cls, n: int, prefix: str = "s") -> "Alphabet":
        return cls(tuple(f"{prefix}{i}" for i in range(n)))


def _check_probs(probs: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(probs)):
        raise InvalidProbabilities(f"{what}: non-finite entry")
    if np.any(probs < 0):
        raise InvalidProbabilities(f"{what}: negative entry")
    total = float(probs.sum())
    if abs(total - 1.0) > NORM_TOL:
        raise InvalidProbabilities(f"{what}: sum {total:g}")
    # leave rounding-level sums alone so rebuilding a model is bit-exact
    return probs if abs(total - 1.0) <= 1e-14 else probs / total


@dataclass(frozen=True, eq=False)
class Distribution:
    alphabet: Alphabet
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size != self.alphabet.size:
            raise InvalidProbabilities(
                f"probs: expected {self.alphabet.size} entries, got {probs.size}"
            )
        object.__setattr__(self, "probs", _freeze(_check_probs(probs, "probs")))

    @classmethod
    def from_probs(cls, probs: Sequence[float], prefix: str = "u") -> "Distribution":
        return cls(Alphabet.indexed(len(probs), prefix), probs)

    @property
    def size(self) -> int:
        return self.alphabet.size

    def __eq__(self, other):
        return (
            isinstance(other, Distribution)
            and self.alphabet == other.alphabet
            and np.array_equal(self.probs, other.probs)
        )

    __hash__ = None


def validate_partition(cells: Sequence[Sequence[int]], n: int) -> None:
    """Raise if ``cells`` is not a disjoint, nonempty cover of ``range(n)``."""
    seen: set[int] = set()
    for k, cell in enumerate(cells):
        if len(cell) == 0:
            raise EmptyCell(f"cell {k} is empty")
        for i in cell:
            if not 0 <= i < n:
                raise IncompleteCover(f"cell {k}: index {i} out of range 0..{n - 1}")
            if i in seen:
                raise OverlappingCells(f"overlapping cells: index {i} appears twice")
            seen.add(i)
    missing = sorted(set(range(n)) - seen)
    if missing:
        raise IncompleteCover(f"indices {missing} not assigned to any cell")


@dataclass(frozen=True)
class SynonymousPartition:
    alphabet: Alphabet
    cells: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        cells = tuple(tuple(int(i) for i in c) for c in self.cells)
        object.__setattr__(self, "cells", cells)
        validate_partition(cells, self.alphabet.size)

    @classmethod
    def singletons(cls, alphabet: Alphabet) -> "SynonymousPartition":
        return cls(alphabet, tuple((i,) for i in range(alphabet.size)))

    @classmethod
    def single_cell(cls, alphabet: Alphabet) -> "SynonymousPartition":
        return cls(alphabet, (tuple(range(alphabet.size)),))

    @property
    def cell_count(self) -> int:
        return len(self.cells)

    @property
    def labels(self) -> np.ndarray:
        """Cell index of every syntactic symbol."""
        lab = np.empty(self.alphabet.size, dtype=int)
        for k, cell in enumerate(self.cells):
            lab[list(cell)] = k
        return lab

    def indicator(self) -> np.ndarray:
        """N x Ñ 0/1 matrix mapping symbols to cells."""
        m = np.zeros((self.alphabet.size, self.cell_count))
        m[np.arange(self.alphabet.size), self.labels] = 1.0
        return m


@dataclass(frozen=True)
class SemanticVariable:
    dist: Distribution
    partition: SynonymousPartition

    def __post_init__(self):
        if self.dist.alphabet != self.partition.alphabet:
            raise ModelError("distribution and partition use different alphabets")


@dataclass(frozen=True, eq=False)
class JointModel:
    row_alphabet: Alphabet
    col_alphabet: Alphabet
    probs: np.ndarray
    row_partition: SynonymousPartition
    col_partition: SynonymousPartition

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (self.row_alphabet.size, self.col_alphabet.size):
            raise InvalidProbabilities(
                f"joint: expected shape {(self.row_alphabet.size, self.col_alphabet.size)}, "
                f"got {probs.shape}"
            )
        object.__setattr__(self, "probs", _freeze(_check_probs(probs, "joint")))
        if self.row_partition.alphabet != self.row_alphabet:
            raise ModelError("row partition does not match row alphabet")
        if self.col_partition.alphabet != self.col_alphabet:
            raise ModelError("col partition does not match col alphabet")

    @classmethod
    def from_matrix(cls, probs, row_cells=None, col_cells=None) -> "JointModel":
        probs = np.asarray(probs, dtype=float)
        ra = Alphabet.indexed(probs.shape[0], "u")
        ca = Alphabet.indexed(probs.shape[1], "v")
        rp = SynonymousPartition(ra, row_cells) if row_cells is not None else SynonymousPartition.singletons(ra)
        cp = SynonymousPartition(ca, col_cells) if col_cells is not None else SynonymousPartition.singletons(ca)
        return cls(ra, ca, probs, rp, cp)

    def row_marginal(self) -> Distribution:
        return Distribution(self.row_alphabet, self.probs.sum(axis=1))

    def col_marginal(self) -> Distribution:
        return Distribution(self.col_alphabet, self.probs.sum(axis=0))

    def row_variable(self) -> SemanticVariable:
        return SemanticVariable(self.row_marginal(), self.row_partition)

    def col_variable(self) -> SemanticVariable:
        return SemanticVariable(self.col_marginal(), self.col_partition)

    def transpose(self) -> "JointModel":
        return JointModel(
            self.col_alphabet, self.row_alphabet, self.probs.T,
            self.col_partition, self.row_partition,
        )

    def __eq__(self, other):
        return (
            isinstance(other, JointModel)
            and self.row_alphabet == other.row_alphabet
            and self.col_alphabet == other.col_alphabet
            and np.array_equal(self.probs, other.probs)
            and self.row_partition == other.row_partition
            and self.col_partition == other.col_partition
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Channel:
    input_alphabet: Alphabet
    output_alphabet: Alphabet
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (self.input_alphabet.size, self.output_alphabet.size):
            raise InvalidProbabilities(
                f"channel: expected shape {(self.input_alphabet.size, self.output_alphabet.size)}, "
                f"got {m.shape}"
            )
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise InvalidProbabilities("channel: entries must be finite and nonnegative")
        sums = m.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > NORM_TOL)
        if bad.size:
            raise InvalidProbabilities(f"channel: row {bad[0]} sums to {sums[bad[0]]:g}")
        object.__setattr__(self, "matrix", _freeze(m / sums[:, None]))

    @classmethod
    def from_matrix(cls, matrix) -> "Channel":
        m = np.asarray(matrix, dtype=float)
        return cls(Alphabet.indexed(m.shape[0], "x"), Alphabet.indexed(m.shape[1], "y"), m)

    def joint(self, p_x: Distribution, row_partition=None, col_partition=None) -> JointModel:
        if p_x.alphabet != self.input_alphabet:
            raise ModelError("input distribution does not match channel input alphabet")
        rp = row_partition or SynonymousPartition.singletons(self.input_alphabet)
        cp = col_partition or SynonymousPartition.singletons(self.output_alphabet)
        return JointModel(
            self.input_alphabet, self.output_alphabet,
            p_x.probs[:, None] * self.matrix, rp, cp,
        )

    def __eq__(self, other):
        return (
            isinstance(other, Channel)
            and self.input_alphabet == other.input_alphabet
            and self.output_alphabet == other.output_alphabet
            and np.array_equal(self.matrix, other.matrix)
        )

    __hash__ = None


def bsc(crossover: float) -> Channel:
    e = crossover
    return Channel.from_matrix([[1 - e, e], [e, 1 - e]])


def semantic_marginal(v: SemanticVariable) -> np.ndarray:
    """Cell masses q[i_s] = sum of p(u) over cell i_s."""
    return v.dist.probs @ v.partition.indicator()


def product_partition(row: SynonymousPartition, col: SynonymousPartition) -> SynonymousPartition:
    """Partition of the pair alphabet whose cell (a, b) is row cell a x col cell b.

    Pair (i, j) has flat index ``i * N_col + j``; cells come out row-major in (a, b).
    """
    nv = col.alphabet.size
    pair_labels = tuple(f"({r},{c})" for r in row.alphabet.labels for c in col.alphabet.labels)
    cells = []
    for rc in row.cells:
        for cc in col.cells:
            cells.append(tuple(sorted(i * nv + j for i in rc for j in cc)))
    return SynonymousPartition(Alphabet(pair_labels), tuple(cells))


def joint_cell_mass(jm: JointModel) -> np.ndarray:
    """Ñ_u x Ñ_v matrix of cell probabilities p(U_a x V_b)."""
    return jm.row_partition.indicator().T @ jm.probs @ jm.col_partition.indicator()


def pair_variable(jm: JointModel) -> SemanticVariable:
    """The joint model flattened into one variable on the pair alphabet."""
    part = product_partition(jm.row_partition, jm.col_partition)
    return SemanticVariable(Distribution(part.alphabet, jm.probs.ravel()), part)
