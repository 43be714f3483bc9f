"""Classical outer loop: COBYLA over (kappa, q) or over all 2p QAOA angles."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.optimize

from .problems import IsingModel
from .schedule import AngleSchedule, BezierGapCurve, derive_angles
from .simulator import expectation, run_layered_circuit

DEFAULT_BUDGET = 200
HEURISTIC_X0 = (1.0, 1.5)
HEURISTIC_BOUNDS = ((1e-3, 50.0), (0.0, 3.0))
QAOA_INIT_RANGE = (0.0, 0.1)
GAMMA_BOUNDS = (-math.pi, math.pi)
BETA_BOUNDS = (-math.pi / 2, math.pi / 2)
RHOBEG = 1.0

METHODS = ("heuristic_mean", "heuristic_median", "vanilla_qaoa")


class NonFiniteObjective(ArithmeticError):
    def __init__(self, params, value):
        super().__init__(f"objective returned {value} at params {list(params)}")
        self.params = np.array(params)
        self.value = value


@dataclass(frozen=True)
class ObjectiveSpec:
    """What to optimize.

    ``kind`` is ``"heuristic"`` (needs ``curve``) or ``"vanilla_qaoa"``.
    ``direction`` is +1 to minimize E and -1 to minimize -E; by default it is
    taken from ``model.sign``.
    """

    kind: str
    p: int
    model: IsingModel
    curve: BezierGapCurve | None = None
    direction: int | None = None
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.kind not in ("heuristic", "vanilla_qaoa"):
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.p < 1 or self.budget < 1:
            raise ValueError("p and budget must be >= 1")
        if self.kind == "heuristic" and self.curve is None:
            raise ValueError("heuristic objective needs a gap curve")
        if self.direction is None:
            object.__setattr__(self, "direction", self.model.sign)
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")

    @property
    def dimension(self) -> int:
        return 2 if self.kind == "heuristic" else 2 * self.p

    @property
    def circuit_model(self) -> IsingModel:
        """Hamiltonian that is both evolved under and minimized."""
        m = self.model
        if self.direction == m.sign:
            return m.oriented()
        return m.oriented().scaled(-1.0)


@dataclass
class OptResult:
    best_params: np.ndarray
    best_value: float
    trace: list[tuple[int, float]]
    evaluations_used: int
    params_trace: list[np.ndarray] = field(default_factory=list, repr=False)
    meta: dict = field(default_factory=dict)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = len(self.best_params)
        w.writerow(["eval_index", "value"] + [f"param_{i}" for i in range(d)])
        for (k, v), x in zip(self.trace, self.params_trace):
            w.writerow([k, repr(v)] + [repr(float(t)) for t in x])
        return buf.getvalue()


def _evaluate(schedule: AngleSchedule, spec: ObjectiveSpec) -> float:
    m = spec.circuit_model
    return expectation(run_layered_circuit(m, schedule), m)


def heuristic_objective(kappa: float, q: float, spec: ObjectiveSpec) -> float:
    return _evaluate(derive_angles(spec.p, kappa, q, spec.curve), spec)


def qaoa_objective(angles: Sequence[float], spec: ObjectiveSpec) -> float:
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (2 * spec.p,):
        raise ValueError(f"expected {2 * spec.p} angles, got shape {angles.shape}")
    return _evaluate(AngleSchedule.free(angles), spec)


def minimize(
    objective: Callable[[np.ndarray], float],
    x0: Sequence[float],
    bounds: Sequence[tuple[float, float]],
    budget: int = DEFAULT_BUDGET,
    seed=None,
    rhobeg: float = RHOBEG,
) -> OptResult:
    """Bounded COBYLA with a hard cap of ``budget`` objective evaluations.

    Iterates are clipped into ``bounds`` before evaluation, so the objective
    never sees an infeasible point.  The best point seen is returned, not the
    last one.  COBYLA is deterministic; ``seed`` is recorded only.
    """
    x0 = np.asarray(x0, dtype=float)
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    if x0.shape != lo.shape:
        raise ValueError("x0 and bounds disagree in dimension")
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError("x0 lies outside bounds")
    if budget < 1:
        raise ValueError("budget must be >= 1")

    trace: list[tuple[int, float]] = []
    xs: list[np.ndarray] = []
    best = [math.inf, x0.copy()]

    def wrapped(x):
        x = np.clip(x, lo, hi)
        v = float(objective(x))
        if not math.isfinite(v):
            raise NonFiniteObjective(x, v)
        trace.append((len(trace), v))
        xs.append(x.copy())
        if v < best[0]:
            best[0], best[1] = v, x.copy()
        return v

    if budget == 1:
        wrapped(x0)
    else:
        scipy.optimize.minimize(
            wrapped,
            x0,
            method="COBYLA",
            bounds=list(zip(lo, hi)),
            options={"maxiter": budget, "rhobeg": rhobeg, "tol": 1e-12},
        )
    return OptResult(np.asarray(best[1]), best[0], trace, len(trace), xs, {"seed": seed, "rhobeg": rhobeg})


def qaoa_initial_point(p: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(*QAOA_INIT_RANGE, size=2 * p)


def optimize_instance(spec: ObjectiveSpec, protocol: str, seed=None) -> OptResult:
    """Run one optimization with the fixed initial point and bounds of ``protocol``."""
    if protocol not in METHODS:
        raise ValueError(f"unknown protocol {protocol!r}")
    if protocol == "vanilla_qaoa":
        if spec.kind != "vanilla_qaoa":
            raise ValueError("vanilla_qaoa protocol needs a vanilla_qaoa objective spec")
        x0 = qaoa_initial_point(spec.p, seed)
        bounds = [GAMMA_BOUNDS] * spec.p + [BETA_BOUNDS] * spec.p
        res = minimize(lambda x: qaoa_objective(x, spec), x0, bounds, spec.budget, seed)
    else:
        if spec.kind != "heuristic":
            raise ValueError(f"{protocol} protocol needs a heuristic objective spec")
        x0 = np.array(HEURISTIC_X0)
        res = minimize(lambda x: heuristic_objective(x[0], x[1], spec), x0, HEURISTIC_BOUNDS, spec.budget, seed)
    res.meta.update(method=protocol, p=spec.p, x0=x0.tolist(), dimension=spec.dimension)
    return res
