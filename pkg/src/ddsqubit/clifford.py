"""The 24-element single-qubit Clifford group and RB sequence generation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence, Tuple, Union

import numpy as np

from .pulse import PrimitiveGate as P

# Each word is in time order (first applied first).  Lengths sum to 45.
DECOMPOSITIONS: Tuple[Tuple[P, ...], ...] = (
    # Paulis
    (P.I,),
    (P.X180,),
    (P.Y180,),
    (P.Y180, P.X180),
    # 2pi/3 rotations
    (P.X90, P.Y90),
    (P.X90, P.YM90),
    (P.XM90, P.Y90),
    (P.XM90, P.YM90),
    (P.Y90, P.X90),
    (P.Y90, P.XM90),
    (P.YM90, P.X90),
    (P.YM90, P.XM90),
    # pi/2 rotations
    (P.X90,),
    (P.XM90,),
    (P.Y90,),
    (P.YM90,),
    (P.XM90, P.Y90, P.X90),
    (P.XM90, P.YM90, P.X90),
    # Hadamard-like
    (P.X180, P.Y90),
    (P.X180, P.YM90),
    (P.Y180, P.X90),
    (P.Y180, P.XM90),
    (P.X90, P.Y90, P.X90),
    (P.XM90, P.Y90, P.XM90),
)

N_CLIFFORDS = 24


def canonical_phase(u: np.ndarray) -> np.ndarray:
    """Fix the global phase: unit determinant, first nonzero entry in the right half-plane."""
    u = np.asarray(u, dtype=complex)
    u = u / np.sqrt(np.linalg.det(u))
    flat = u.ravel()
    first = flat[np.flatnonzero(np.abs(flat) > 1e-9)[0]]
    if first.real < -1e-12 or (abs(first.real) <= 1e-12 and first.imag < 0):
        u = -u
    return u


def phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """``1 - |tr(U^dag V)| / d``: zero iff U and V agree up to global phase."""
    d = u.shape[0]
    return float(max(0.0, 1.0 - abs(np.trace(u.conj().T @ v)) / d))


def word_unitary(word: Sequence[P]) -> np.ndarray:
    u = np.eye(2, dtype=complex)
    for g in word:
        u = g.unitary() @ u
    return u


@dataclass(frozen=True)
class CliffordElement:
    index: int
    unitary: np.ndarray
    decomposition: Tuple[P, ...]

    def __repr__(self):
        word = ",".join(g.value for g in self.decomposition)
        return f"CliffordElement({self.index}, [{word}])"

    def __eq__(self, other):
        return isinstance(other, CliffordElement) and other.index == self.index

    def __hash__(self):
        return hash(self.index)


@lru_cache(maxsize=None)
def elements() -> Tuple[CliffordElement, ...]:
    return tuple(CliffordElement(i, canonical_phase(word_unitary(w)), w)
                 for i, w in enumerate(DECOMPOSITIONS))


def find_index(u: np.ndarray, tol: float = 1e-9) -> int:
    """Index of the element equal to ``u`` up to global phase."""
    for el in elements():
        if phase_distance(el.unitary, u) < tol:
            return el.index
    raise ValueError("matrix is not a single-qubit Clifford")


@lru_cache(maxsize=None)
def composition_table() -> np.ndarray:
    """``table[a, b]`` is the index of ``U_b @ U_a`` (a applied first)."""
    els = elements()
    table = np.empty((N_CLIFFORDS, N_CLIFFORDS), dtype=np.int64)
    for a in els:
        for b in els:
            table[a.index, b.index] = find_index(b.unitary @ a.unitary)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def inverse_table() -> np.ndarray:
    t = composition_table()
    inv = np.array([int(np.flatnonzero(t[a] == IDENTITY)[0]) for a in range(N_CLIFFORDS)])
    inv.setflags(write=False)
    return inv


IDENTITY = 0


def _index(g: Union[int, CliffordElement]) -> int:
    return g.index if isinstance(g, CliffordElement) else int(g)


def element(i: int) -> CliffordElement:
    return elements()[i]


def compose(a: Union[int, CliffordElement], b: Union[int, CliffordElement]) -> CliffordElement:
    """Element equal to ``b . a`` up to phase (``a`` applied first)."""
    return elements()[composition_table()[_index(a), _index(b)]]


def inverse(g: Union[int, CliffordElement]) -> CliffordElement:
    return elements()[inverse_table()[_index(g)]]


def decompose(g: Union[int, CliffordElement]) -> List[P]:
    return list(elements()[_index(g)].decomposition)


def mean_decomposition_length() -> float:
    return sum(len(w) for w in DECOMPOSITIONS) / N_CLIFFORDS


@dataclass(frozen=True)
class RbSequence:
    clifford_indices: Tuple[int, ...]
    recovery_index: int
    seed: object = None

    @property
    def m(self) -> int:
        return len(self.clifford_indices)

    def all_indices(self) -> Tuple[int, ...]:
        return self.clifford_indices + (self.recovery_index,)

    def primitives(self) -> List[P]:
        out: List[P] = []
        for i in self.all_indices():
            out.extend(DECOMPOSITIONS[i])
        return out

    def to_dict(self) -> dict:
        seed = self.seed
        if isinstance(seed, np.random.SeedSequence):
            seed = {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
        return {"seed": seed, "m": self.m, "indices": list(self.clifford_indices),
                "recovery": self.recovery_index}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RbSequence":
        indices = tuple(int(i) for i in data["indices"])
        if int(data.get("m", len(indices))) != len(indices):
            raise ValueError("sequence length does not match its indices")
        return cls(indices, int(data["recovery"]), data.get("seed"))


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def generate_sequence(m: int, seed) -> RbSequence:
    """Uniform random Clifford word of length ``m`` plus its recovery element.

    ``seed`` may be an int, a :class:`numpy.random.SeedSequence` (use
    ``SeedSequence(master, spawn_key=(i, j))`` for per-sequence substreams) or
    a Generator.
    """
    if m < 0:
        raise ValueError("sequence length must be non-negative")
    rng = as_generator(seed)
    idx = tuple(int(i) for i in rng.integers(0, N_CLIFFORDS, size=m))
    table = composition_table()
    total = IDENTITY
    for i in idx:
        total = table[total, i]
    return RbSequence(idx, int(inverse_table()[total]), seed if not isinstance(seed, np.random.Generator) else None)


def sequence_unitary(seq: RbSequence) -> np.ndarray:
    u = np.eye(2, dtype=complex)
    for i in seq.all_indices():
        u = elements()[i].unitary @ u
    return u


def table_json() -> str:
    """Decomposition table for documentation."""
    rows = [{"index": el.index, "primitives": [g.value for g in el.decomposition],
             "unitary": [[[z.real, z.imag] for z in row] for row in el.unitary]}
            for el in elements()]
    return json.dumps({"n_g": mean_decomposition_length(), "cliffords": rows}, indent=2)
