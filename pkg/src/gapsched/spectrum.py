"""Instantaneous spectral gaps of ``H(s) = (1 - s) H0 + s H1``.

``H0 = -sum_i X_i`` is the transverse-field mixer and ``H1`` is the diagonal
problem Hamiltonian of an :class:`~gapsched.problems.IsingModel`.  Pass
``model.oriented()`` for maximization problems such as MaxCut.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .problems import IsingModel, gen_random_qubo, qubo_to_ising

MAX_DIAG_QUBITS = 14
DENSE_MAX_QUBITS = 10
DEFAULT_GRID_SIZE = 101


class SpectrumError(RuntimeError):
    pass


def default_grid(size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    return np.linspace(0.0, 1.0, size)


@dataclass(frozen=True)
class GapProfile:
    grid: np.ndarray
    gaps: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        gaps = np.asarray(self.gaps, dtype=float)
        _check_grid(grid)
        if gaps.shape != grid.shape:
            raise SpectrumError(f"grid has {grid.size} points but {gaps.size} gaps were given")
        if np.any(gaps < 0):
            raise SpectrumError("gaps must be nonnegative")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "gaps", gaps)

    @property
    def kind(self) -> str:
        return self.meta.get("aggregation", "raw")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "gap"])
        for s, g in zip(self.grid, self.gaps):
            w.writerow([repr(float(s)), repr(float(g))])
        return buf.getvalue()


def mixer_matrix(n: int) -> np.ndarray:
    """Dense ``H0 = -sum_i X_i``: -1 between basis states at Hamming distance 1."""
    dim = 2**n
    idx = np.arange(dim)
    out = np.zeros((dim, dim))
    for i in range(n):
        out[idx, idx ^ (1 << i)] = -1.0
    return out


def apply_mixer_hamiltonian(vec: np.ndarray, n: int) -> np.ndarray:
    """``H0 @ vec`` without building the matrix."""
    out = np.zeros_like(vec)
    for i in range(n):
        v = vec.reshape(-1, 2, 2**i)
        out.reshape(-1, 2, 2**i)[...] -= v[:, ::-1, :]
    return out


def hamiltonian_matrix(m: IsingModel, s: float) -> np.ndarray:
    d = m.energies
    return (1.0 - s) * mixer_matrix(m.n) + np.diag(s * d)


def two_lowest_eigenvalues(
    m: IsingModel,
    s: float,
    method: str = "auto",
    cap: int = MAX_DIAG_QUBITS,
    _mixer: np.ndarray | None = None,
) -> tuple[float, float]:
    """The two algebraically smallest eigenvalues of ``H(s)``.

    ``method`` is ``"dense"``, ``"lanczos"`` or ``"auto"`` (dense up to
    ``DENSE_MAX_QUBITS`` qubits).
    """
    if not 0.0 <= s <= 1.0:
        raise SpectrumError(f"s={s} outside [0, 1]")
    if m.n > cap:
        raise SpectrumError(f"n={m.n} exceeds the diagonalization cap of {cap}")
    if method == "auto":
        method = "dense" if m.n <= DENSE_MAX_QUBITS else "lanczos"
    d = m.energies
    if m.n == 1 or method == "dense":
        mixer = _mixer if _mixer is not None else mixer_matrix(m.n)
        mat = (1.0 - s) * mixer
        mat[np.diag_indices_from(mat)] += s * d
        w = scipy.linalg.eigh(mat, eigvals_only=True, subset_by_index=[0, 1], driver="evr")
        return float(w[0]), float(w[1])
    if method != "lanczos":
        raise ValueError(f"unknown method {method!r}")

    def matvec(v):
        v = np.ravel(v)
        return (1.0 - s) * apply_mixer_hamiltonian(v, m.n) + s * d * v

    dim = 2**m.n
    op = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=matvec, dtype=float)
    v0 = np.full(dim, dim**-0.5)
    v0 += 1e-3 * np.cos(np.arange(dim))  # break the symmetry of |+>
    try:
        w = scipy.sparse.linalg.eigsh(op, k=2, which="SA", v0=v0, tol=0, maxiter=20 * dim)[0]
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise SpectrumError(f"Lanczos did not converge at s={s}") from exc
    w = np.sort(w)
    return float(w[0]), float(w[1])


def gap_at(m: IsingModel, s: float, method: str = "auto", **kw) -> float:
    e0, e1 = two_lowest_eigenvalues(m, s, method=method, **kw)
    return max(e1 - e0, 0.0)


def gap_profile(m: IsingModel, grid: Sequence[float] | None = None, method: str = "auto") -> GapProfile:
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    _check_grid(grid)
    mixer = mixer_matrix(m.n) if m.n <= DENSE_MAX_QUBITS else None
    gaps = [gap_at(m, float(s), method=method, _mixer=mixer) for s in grid]
    return GapProfile(grid, np.array(gaps), {"n": m.n, "aggregation": "raw"})


@dataclass(frozen=True)
class EnsembleSpec:
    """Random-QUBO learning ensemble: instance ``k`` uses seed ``seed_base + k``."""

    n: int
    lo: float
    hi: float
    count: int
    seed_base: int = 0

    def models(self) -> Iterable[IsingModel]:
        for k in range(self.count):
            yield qubo_to_ising(gen_random_qubo(self.n, self.lo, self.hi, self.seed_base + k))


def _profile_job(args):
    ens, k, grid = args
    m = qubo_to_ising(gen_random_qubo(ens.n, ens.lo, ens.hi, ens.seed_base + k))
    try:
        return gap_profile(m, grid)
    except Exception as exc:
        raise SpectrumError(f"ensemble instance {k}: {exc}") from exc


def sample_ensemble_gaps(ens: EnsembleSpec, grid: Sequence[float] | None = None, workers: int = 1) -> list[GapProfile]:
    """One raw profile per ensemble instance, ordered by instance index."""
    if ens.count < 1:
        raise SpectrumError("ensemble count must be >= 1")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    jobs = [(ens, k, grid) for k in range(ens.count)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            profiles = list(pool.map(_profile_job, jobs, chunksize=8))
    else:
        profiles = [_profile_job(j) for j in jobs]
    for k, p in enumerate(profiles):
        p.meta.update(instance_id=k, coeff_range=(ens.lo, ens.hi))
    return profiles


def aggregate_profiles(profiles: Sequence[GapProfile], kind: str) -> GapProfile:
    if not profiles:
        raise SpectrumError("no profiles to aggregate")
    grid = profiles[0].grid
    for p in profiles[1:]:
        if p.grid.shape != grid.shape or not np.array_equal(p.grid, grid):
            raise SpectrumError("profiles do not share a common grid")
    stack = np.stack([p.gaps for p in profiles])
    if kind == "mean":
        gaps = stack.mean(axis=0)
    elif kind == "median":
        gaps = np.median(stack, axis=0)
    else:
        raise ValueError(f"unknown aggregation {kind!r}")
    meta = {
        "n": profiles[0].meta.get("n"),
        "coeff_range": profiles[0].meta.get("coeff_range"),
        "instance_count": len(profiles),
        "aggregation": kind,
    }
    return GapProfile(grid, gaps, meta)


def final_gap_distribution(profiles: Sequence[GapProfile]) -> np.ndarray:
    return np.array([p.gaps[-1] for p in profiles])


def ensemble_csv(profiles: Sequence[GapProfile]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance_id", "s", "gap"])
    for k, p in enumerate(profiles):
        for s, g in zip(p.grid, p.gaps):
            w.writerow([k, repr(float(s)), repr(float(g))])
    return buf.getvalue()


def paired_aggregate_csv(mean: GapProfile, median: GapProfile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s", "mean", "median"])
    for s, a, b in zip(mean.grid, mean.gaps, median.gaps):
        w.writerow([repr(float(s)), repr(float(a)), repr(float(b))])
    return buf.getvalue()


def final_gap_csv(profiles: Sequence[GapProfile]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance_id", "final_gap"])
    for k, g in enumerate(final_gap_distribution(profiles)):
        w.writerow([k, repr(float(g))])
    return buf.getvalue()


def _check_grid(grid: np.ndarray) -> None:
    if grid.ndim != 1 or grid.size < 2:
        raise SpectrumError("grid needs at least two points")
    if grid[0] != 0.0 or grid[-1] != 1.0:
        raise SpectrumError("grid must start at 0 and end at 1")
    if np.any(np.diff(grid) <= 0):
        raise SpectrumError("grid must be strictly increasing")
