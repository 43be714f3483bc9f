"""Bezier gap curves and the closed-form QAOA angle schedule.

The continuous schedule obeys ``ds/dt = kappa * g(s)**q``.  Discretizing
``s`` into ``p`` right-endpoint steps ``s_k = k / p`` and splitting each
step into a cost and a mixer exponential gives

    gamma_k = s_k / p / (kappa * g(s_k)**q)
    beta_k  = (1 - s_k) / p / (kappa * g(s_k)**q)

so every angle follows from ``(kappa, q)`` and the learned gap curve.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Union

import numpy as np

from .spectrum import GapProfile

GAP_FLOOR = 1e-9
POSITIVITY_CHECK_POINTS = 1001


class ScheduleError(ValueError):
    pass


def de_casteljau(t, y) -> np.ndarray:
    """Evaluate the Bernstein form with ordinates ``y`` at ``t`` (scalar or array)."""
    t = np.asarray(t, dtype=float)
    b = np.broadcast_to(np.asarray(y, dtype=float), t.shape + (len(y),)).copy()
    u = (1.0 - t)[..., None]
    tt = t[..., None]
    for r in range(len(y) - 1, 0, -1):
        b[..., :r] = u * b[..., :r] + tt * b[..., 1 : r + 1]
    return b[..., 0]


def bernstein_matrix(t, degree: int) -> np.ndarray:
    """Rows ``[C(d,i) (1-t)^(d-i) t^i]_i`` for each parameter value."""
    t = np.asarray(t, dtype=float)[:, None]
    i = np.arange(degree + 1)[None, :]
    coef = np.array([comb(degree, k) for k in range(degree + 1)], dtype=float)[None, :]
    return coef * (1.0 - t) ** (degree - i) * t**i


@dataclass(frozen=True)
class BezierGapCurve:
    """Gap model ``g(s) = sum_i C(d,i) (1-s)^(d-i) s^i y_i``.

    Control abscissae are implied by identifying the curve parameter with
    ``s``; only the ordinates ``y`` are stored.
    """

    degree: int
    y: tuple[float, ...]
    source_profile_id: str = ""
    rms_residual: float | None = None

    def __post_init__(self):
        if self.degree < 1 or len(self.y) != self.degree + 1:
            raise ScheduleError(f"degree {self.degree} needs {self.degree + 1} ordinates, got {len(self.y)}")
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))

    def __call__(self, s):
        return eval_curve(self, s)

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "y": list(self.y),
            "source_profile_id": self.source_profile_id,
            "rms_residual": self.rms_residual,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> BezierGapCurve:
        return cls(int(doc["degree"]), tuple(doc["y"]), doc.get("source_profile_id", ""), doc.get("rms_residual"))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> BezierGapCurve:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


GapFunction = Union[BezierGapCurve, Callable[[np.ndarray], np.ndarray]]


def eval_curve(curve: BezierGapCurve, s):
    s_arr = np.asarray(s, dtype=float)
    if np.any((s_arr < 0.0) | (s_arr > 1.0)):
        raise ScheduleError("curve parameter outside [0, 1]")
    out = de_casteljau(s_arr, curve.y)
    return float(out) if out.ndim == 0 else out


def fit_bezier(profile: GapProfile, degree: int, profile_id: str = "") -> BezierGapCurve:
    """Least-squares Bernstein fit with both endpoint ordinates pinned to the data.

    Raises :class:`ScheduleError` if the design matrix is rank deficient or
    the fitted curve is not strictly positive on [0, 1].
    """
    if degree < 1:
        raise ScheduleError("degree must be >= 1")
    s, g = profile.grid, profile.gaps
    if s.size < degree + 1:
        raise ScheduleError(f"{s.size} points cannot determine a degree-{degree} curve")
    B = bernstein_matrix(s, degree)
    y = np.empty(degree + 1)
    y[0], y[-1] = g[0], g[-1]
    if degree > 1:
        interior = B[:, 1:-1]
        rhs = g - B[:, 0] * y[0] - B[:, -1] * y[-1]
        sol, _, rank, _ = np.linalg.lstsq(interior, rhs, rcond=None)
        if rank < degree - 1:
            raise ScheduleError(f"rank-deficient Bernstein design matrix (rank {rank} < {degree - 1})")
        y[1:-1] = sol
    resid = B @ y - g
    rms = float(np.sqrt(np.mean(resid**2)))
    check = de_casteljau(np.linspace(0.0, 1.0, POSITIVITY_CHECK_POINTS), y)
    if np.min(check) <= 0.0:
        raise ScheduleError(
            f"fitted degree-{degree} curve is non-positive (min {np.min(check):.3g}); "
            "it cannot be used as a schedule denominator"
        )
    return BezierGapCurve(degree, tuple(y), profile_id, rms)


@dataclass(frozen=True)
class AngleSchedule:
    p: int
    gammas: np.ndarray
    betas: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        gammas = np.asarray(self.gammas, dtype=float)
        betas = np.asarray(self.betas, dtype=float)
        if gammas.shape != (self.p,) or betas.shape != (self.p,):
            raise ScheduleError(f"expected {self.p} gammas and betas")
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "betas", betas)

    @classmethod
    def free(cls, angles) -> AngleSchedule:
        """Vanilla-QAOA schedule from ``(gamma_1..gamma_p, beta_1..beta_p)``."""
        angles = np.asarray(angles, dtype=float)
        if angles.ndim != 1 or angles.size % 2:
            raise ScheduleError("free angles must be a flat vector of length 2p")
        p = angles.size // 2
        return cls(p, angles[:p], angles[p:], {"kind": "free"})

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.gammas, self.betas])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "s_k", "gamma", "beta"])
        for k in range(self.p):
            w.writerow([k + 1, repr((k + 1) / self.p), repr(float(self.gammas[k])), repr(float(self.betas[k]))])
        return buf.getvalue()


def layer_points(p: int) -> np.ndarray:
    """Right-endpoint grid ``s_k = k / p`` for ``k = 1..p``."""
    return np.arange(1, p + 1) / p


def derive_angles(p: int, kappa: float, q: float, gap: GapFunction) -> AngleSchedule:
    if p < 1:
        raise ScheduleError("p must be >= 1")
    if not kappa > 0:
        raise ScheduleError(f"kappa must be positive, got {kappa}")
    s = layer_points(p)
    g = np.asarray(gap(s), dtype=float) * np.ones_like(s)
    floored = bool(np.any(g < GAP_FLOOR))
    denom = kappa * np.maximum(g, GAP_FLOOR) ** q
    ds = 1.0 / p
    gammas = s * ds / denom
    betas = (1.0 - s) * ds / denom
    prov = {
        "kind": "derived",
        "kappa": float(kappa),
        "q": float(q),
        "curve": getattr(gap, "source_profile_id", None) or getattr(gap, "__name__", "custom"),
        "gap_floor_engaged": floored,
    }
    return AngleSchedule(p, gammas, betas, prov)


@dataclass(frozen=True)
class ScheduleTime:
    total_time: float
    gap_floor_engaged: bool


def continuous_schedule_time(kappa: float, q: float, gap: GapFunction, resolution: int = 10_001) -> ScheduleTime:
    """Total evolution time ``T = int_0^1 ds / (kappa g(s)^q)`` by composite Simpson."""
    if not kappa > 0:
        raise ScheduleError(f"kappa must be positive, got {kappa}")
    if resolution < 3:
        raise ScheduleError("resolution must be >= 3")
    if resolution % 2 == 0:
        resolution += 1
    s = np.linspace(0.0, 1.0, resolution)
    g = np.asarray(gap(s), dtype=float) * np.ones_like(s)
    floored = bool(np.any(g < GAP_FLOOR))
    f = 1.0 / (kappa * np.maximum(g, GAP_FLOOR) ** q)
    h = 1.0 / (resolution - 1)
    total = h / 3.0 * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum() + 2.0 * f[2:-1:2].sum())
    return ScheduleTime(float(total), floored)
