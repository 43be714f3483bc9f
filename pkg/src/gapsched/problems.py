"""QUBO and MaxCut instances and their Ising form.

Bit-order convention used throughout the package: bit ``i`` of a basis index
is qubit ``i`` (little-endian), and a 0 bit means spin ``z_i = +1``.  Hence
``x_i = (1 - z_i) / 2`` maps bitstring values onto spins directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

MAX_BRUTE_FORCE_QUBITS = 24
MAX_PAIRING_RETRIES = 1000


class ProblemError(ValueError):
    """Invalid problem instance or generator arguments."""


@dataclass(frozen=True)
class QuboInstance:
    """Upper-triangular QUBO ``f(x) = sum_{i<=j} Q_ij x_i x_j`` over ``x in {0,1}^n``."""

    n: int
    coeffs: Mapping[tuple[int, int], float]
    bounds_hint: tuple[float, float] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ProblemError(f"n must be >= 1, got {self.n}")
        for (i, j), v in self.coeffs.items():
            if not (0 <= i <= j < self.n):
                raise ProblemError(f"coefficient key {(i, j)} outside upper triangle of n={self.n}")
            if self.bounds_hint is not None:
                lo, hi = self.bounds_hint
                if not (lo <= v <= hi):
                    raise ProblemError(f"Q{(i, j)}={v} outside bounds_hint {self.bounds_hint}")

    def value(self, bits) -> float:
        """QUBO objective for a 0/1 sequence ``bits`` of length ``n``."""
        x = np.asarray(bits, dtype=float)
        return float(sum(v * x[i] * x[j] for (i, j), v in self.coeffs.items()))

    def values(self) -> np.ndarray:
        """Objective for every basis index, using the package bit order."""
        _check_cap(self.n)
        idx = np.arange(2**self.n)
        out = np.zeros(2**self.n)
        for (i, j), v in self.coeffs.items():
            out += v * (((idx >> i) & 1) & ((idx >> j) & 1))
        return out

    def to_dict(self) -> dict:
        return {
            "kind": "qubo",
            "n": self.n,
            "coeffs": [[i, j, v] for (i, j), v in sorted(self.coeffs.items())],
            "bounds_hint": list(self.bounds_hint) if self.bounds_hint is not None else None,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> QuboInstance:
        hint = doc.get("bounds_hint")
        return cls(
            n=int(doc["n"]),
            coeffs={(int(i), int(j)): float(v) for i, j, v in doc["coeffs"]},
            bounds_hint=tuple(hint) if hint is not None else None,
        )


@dataclass(frozen=True)
class GraphInstance:
    """Undirected simple graph with nonnegative edge weights.

    ``weight_range`` records the sampling range of the weights (``None`` for
    unit weights) and drives coefficient rescaling in the benchmark.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]
    weight_range: tuple[float, float] | None = None

    def __post_init__(self):
        seen = set()
        for i, j, w in self.edges:
            if not (0 <= i < j < self.n):
                raise ProblemError(f"edge {(i, j)} must satisfy 0 <= i < j < n")
            if (i, j) in seen:
                raise ProblemError(f"duplicate edge {(i, j)}")
            if w < 0:
                raise ProblemError(f"negative weight {w} on edge {(i, j)}")
            seen.add((i, j))

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for i, j, _ in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def cut_value(self, bits) -> float:
        return float(sum(w for i, j, w in self.edges if bits[i] != bits[j]))

    def to_dict(self) -> dict:
        doc = {"kind": "graph", "n": self.n, "edges": [[i, j, w] for i, j, w in self.edges]}
        if self.weight_range is not None:
            doc["weight_range"] = list(self.weight_range)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> GraphInstance:
        wr = doc.get("weight_range")
        return cls(
            n=int(doc["n"]),
            edges=tuple((int(i), int(j), float(w)) for i, j, w in doc["edges"]),
            weight_range=tuple(wr) if wr is not None else None,
        )


@dataclass(frozen=True)
class IsingModel:
    """Diagonal Hamiltonian ``sum_i h_i z_i + sum_{i<j} J_ij z_i z_j``.

    ``offset`` is not part of the Hamiltonian; it only restores the original
    objective (``objective = energy + offset``).  ``sign`` is -1 for models
    whose objective is maximized (MaxCut); :meth:`oriented` returns the
    Hamiltonian that is actually minimized.
    """

    n: int
    h: np.ndarray
    J: Mapping[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0
    sign: int = 1

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.shape != (self.n,):
            raise ProblemError(f"h must have shape ({self.n},), got {h.shape}")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        for i, j in self.J:
            if not (0 <= i < j < self.n):
                raise ProblemError(f"coupling key {(i, j)} must satisfy i < j < n")
        if self.sign not in (1, -1):
            raise ProblemError("sign must be +1 or -1")

    @cached_property
    def energies(self) -> np.ndarray:
        e = diagonal_energies(self)
        e.setflags(write=False)
        return e

    def energy(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(self.h @ z + sum(v * z[i] * z[j] for (i, j), v in self.J.items()))

    def scaled(self, alpha: float) -> IsingModel:
        return IsingModel(
            n=self.n,
            h=alpha * self.h,
            J={k: alpha * v for k, v in self.J.items()},
            offset=alpha * self.offset,
            sign=self.sign,
        )

    def oriented(self) -> IsingModel:
        """The model with ``sign`` folded in, so minimization is always the goal."""
        if self.sign == 1:
            return self
        return IsingModel(
            n=self.n,
            h=-self.h,
            J={k: -v for k, v in self.J.items()},
            offset=-self.offset,
            sign=1,
        )


def gen_random_qubo(n: int, lo: float, hi: float, seed: int) -> QuboInstance:
    """Random QUBO with every ``Q_ij`` (``i <= j``) i.i.d. uniform on ``[lo, hi]``.

    Coefficients are drawn in row-major upper-triangular order, so the same
    seed always yields the same instance.
    """
    if n < 1:
        raise ProblemError(f"n must be >= 1, got {n}")
    if lo > hi:
        raise ProblemError(f"empty coefficient range [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    keys = [(i, j) for i in range(n) for j in range(i, n)]
    vals = rng.uniform(lo, hi, size=len(keys))
    return QuboInstance(n, {k: float(v) for k, v in zip(keys, vals)}, (float(lo), float(hi)))


def gen_regular_graph(
    n: int,
    d: int,
    weight_range: tuple[float, float] | None = None,
    seed: int = 0,
    max_retries: int = MAX_PAIRING_RETRIES,
) -> GraphInstance:
    """Random simple d-regular graph from the pairing (configuration) model.

    Whole pairings containing a self-loop or a repeated edge are rejected and
    redrawn.
    """
    if d < 0 or d >= n or (n * d) % 2:
        raise ProblemError(f"no simple {d}-regular graph on {n} vertices")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), d)
    for _ in range(max_retries):
        perm = rng.permutation(stubs)
        pairs = perm.reshape(-1, 2)
        a, b = pairs.min(axis=1), pairs.max(axis=1)
        if np.any(a == b):
            continue
        keys = sorted(zip(a.tolist(), b.tolist()))
        if len(set(keys)) != len(keys):
            continue
        if weight_range is None:
            weights = [1.0] * len(keys)
        else:
            wlo, whi = weight_range
            if wlo < 0 or wlo > whi:
                raise ProblemError(f"invalid weight range {weight_range}")
            weights = rng.uniform(wlo, whi, size=len(keys)).tolist()
        edges = tuple((i, j, float(w)) for (i, j), w in zip(keys, weights))
        wr = None if weight_range is None else (float(weight_range[0]), float(weight_range[1]))
        return GraphInstance(n, edges, wr)
    raise ProblemError(f"pairing model failed after {max_retries} retries (n={n}, d={d})")


def qubo_to_ising(q: QuboInstance) -> IsingModel:
    """Substitute ``x_i = (1 - z_i)/2``; ``f(x) = energy(z) + offset`` exactly."""
    h = np.zeros(q.n)
    J: dict[tuple[int, int], float] = {}
    offset = 0.0
    for (i, j), v in sorted(q.coeffs.items()):
        if i == j:
            h[i] -= v / 2
            offset += v / 2
        else:
            h[i] -= v / 4
            h[j] -= v / 4
            offset += v / 4
            if v != 0.0:
                J[(i, j)] = v / 4
    return IsingModel(q.n, h, J, offset, sign=1)


def maxcut_to_ising(g: GraphInstance) -> IsingModel:
    """Ising model whose objective ``energy + offset`` is the cut value.

    The returned model has ``sign = -1``: the cut is maximized.
    """
    J: dict[tuple[int, int], float] = {}
    offset = 0.0
    for i, j, w in g.edges:
        if w < 0:
            raise ProblemError(f"negative weight {w} on edge {(i, j)}")
        J[(i, j)] = J.get((i, j), 0.0) - w / 2
        offset += w / 2
    return IsingModel(g.n, np.zeros(g.n), J, offset, sign=-1)


def rescale_ising(m: IsingModel, q_min: float, q_max: float) -> IsingModel:
    """Scale all coefficients by ``2 / (q_max - q_min)``.

    Maps a model sampled from ``[q_min, q_max]`` onto the coefficient range
    of a ``[-1, 1]`` ensemble.
    """
    if not q_max > q_min:
        raise ProblemError(f"rescaling needs q_max > q_min, got ({q_min}, {q_max})")
    return m.scaled(2.0 / (q_max - q_min))


def diagonal_energies(m: IsingModel, cap: int = MAX_BRUTE_FORCE_QUBITS) -> np.ndarray:
    """Energy of every computational basis state, offset excluded."""
    _check_cap(m.n, cap)
    idx = np.arange(2**m.n)
    z = [1.0 - 2.0 * ((idx >> i) & 1) for i in range(m.n)]
    out = np.zeros(2**m.n)
    for i in range(m.n):
        if m.h[i] != 0.0:
            out += m.h[i] * z[i]
    for (i, j), v in m.J.items():
        out += v * (z[i] * z[j])
    return out


def brute_force_extrema(m: IsingModel, cap: int = MAX_BRUTE_FORCE_QUBITS):
    """Exact ``(E_min, E_max, argmin_set)`` over all basis states.

    ``argmin_set`` holds basis indices (package bit order) attaining ``E_min``;
    ties are decided by exact equality of the computed energies.
    """
    _check_cap(m.n, cap)
    e = m.energies
    e_min, e_max = float(e.min()), float(e.max())
    return e_min, e_max, frozenset(np.flatnonzero(e == e_min).tolist())


def index_to_bits(x: int, n: int) -> tuple[int, ...]:
    return tuple((x >> i) & 1 for i in range(n))


def bits_to_str(x: int, n: int) -> str:
    """Bitstring with qubit 0 first."""
    return "".join(str(b) for b in index_to_bits(x, n))


def load_instance(path) -> QuboInstance | GraphInstance:
    with open(path) as fh:
        doc = json.load(fh)
    return instance_from_dict(doc)


def instance_from_dict(doc: dict) -> QuboInstance | GraphInstance:
    kind = doc.get("kind")
    if kind == "graph" or (kind is None and "edges" in doc):
        return GraphInstance.from_dict(doc)
    if kind == "qubo" or (kind is None and "coeffs" in doc):
        return QuboInstance.from_dict(doc)
    raise ProblemError("instance document has neither 'coeffs' nor 'edges'")


def save_instance(inst: QuboInstance | GraphInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump(inst.to_dict(), fh)


def to_ising(inst: QuboInstance | GraphInstance) -> IsingModel:
    if isinstance(inst, QuboInstance):
        return qubo_to_ising(inst)
    return maxcut_to_ising(inst)


def _check_cap(n: int, cap: int = MAX_BRUTE_FORCE_QUBITS) -> None:
    if n > cap:
        raise ProblemError(f"n={n} exceeds the exhaustive-enumeration cap of {cap}")
