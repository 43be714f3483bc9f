"""Statevector simulation of the layered circuit and of the s-domain ODE.

States are plain complex128 numpy arrays of length ``2**n`` in the package
bit order (bit ``i`` of the index is qubit ``i``).  Gate functions mutate
their input in place and also return it.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .problems import IsingModel
from .schedule import GAP_FLOOR, AngleSchedule, GapFunction

MAX_SIM_QUBITS = 24
MAX_ODE_QUBITS = 12
DUMP_MAGIC = b"GSQV"
DUMP_VERSION = 1


class SimulationError(RuntimeError):
    pass


def num_qubits(state: np.ndarray) -> int:
    n = int(state.size).bit_length() - 1
    if state.ndim != 1 or 2**n != state.size:
        raise SimulationError(f"state length {state.size} is not a power of two")
    return n


def init_plus(n: int) -> np.ndarray:
    if not 1 <= n <= MAX_SIM_QUBITS:
        raise SimulationError(f"n={n} outside [1, {MAX_SIM_QUBITS}]")
    return np.full(2**n, 2.0 ** (-n / 2), dtype=complex)


def basis_state(n: int, x: int) -> np.ndarray:
    psi = np.zeros(2**n, dtype=complex)
    psi[x] = 1.0
    return psi


def apply_mixer(state: np.ndarray, beta: float) -> np.ndarray:
    """``exp(-i beta H0)`` with ``H0 = -sum X``, i.e. ``RX(-2 beta)`` on every qubit."""
    if beta == 0.0:
        return state
    n = num_qubits(state)
    c, s = np.cos(beta), 1j * np.sin(beta)
    for i in range(n):
        v = state.reshape(-1, 2, 2**i)
        a0 = v[:, 0, :].copy()
        v[:, 0, :] *= c
        v[:, 0, :] += s * v[:, 1, :]
        v[:, 1, :] *= c
        v[:, 1, :] += s * a0
    return state


def apply_cost(state: np.ndarray, gamma: float, m: IsingModel) -> np.ndarray:
    """``exp(-i gamma H1)``: one diagonal phase pass over the basis energies."""
    e = m.energies
    if e.size != state.size:
        raise SimulationError(f"model has {e.size} basis energies, state has {state.size} amplitudes")
    if gamma != 0.0:
        state *= np.exp(-1j * gamma * e)
    return state


def run_layered_circuit(m: IsingModel, schedule: AngleSchedule) -> np.ndarray:
    """``prod_k exp(-i beta_k H0) exp(-i gamma_k H1) |+>^n``, k = 1 applied first.

    Within each layer the cost unitary acts before the mixer.
    """
    state = init_plus(m.n)
    for gamma, beta in zip(schedule.gammas, schedule.betas):
        apply_cost(state, float(gamma), m)
        apply_mixer(state, float(beta))
    return state


def expectation(state: np.ndarray, m: IsingModel) -> float:
    e = m.energies
    if e.size != state.size:
        raise SimulationError(f"model has {e.size} basis energies, state has {state.size} amplitudes")
    return float(np.dot(state.real**2 + state.imag**2, e))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(np.vdot(a, b)) ** 2)


def norm_sq(state: np.ndarray) -> float:
    return float(np.vdot(state, state).real)


@dataclass
class OdeResult:
    state: np.ndarray
    norm_drift: float
    steps: int


def ode_evolve(
    m: IsingModel,
    kappa: float,
    q: float,
    gap: GapFunction,
    steps: int = 10_000,
) -> OdeResult:
    """Integrate ``i kappa g(s)^q dpsi/ds = H(s) psi`` from s=0 to 1 with fixed-step RK4.

    The state starts in ``|+>^n``.  No renormalization is applied; the final
    ``| ||psi||^2 - 1 |`` is returned as ``norm_drift``.
    """
    if m.n > MAX_ODE_QUBITS:
        raise SimulationError(f"n={m.n} exceeds the ODE cap of {MAX_ODE_QUBITS}")
    if not kappa > 0:
        raise SimulationError(f"kappa must be positive, got {kappa}")
    if steps < 1:
        raise SimulationError("steps must be >= 1")
    n = m.n
    d = m.energies
    h = 1.0 / steps
    s_nodes = np.linspace(0.0, 1.0, 2 * steps + 1)
    g = np.asarray(gap(s_nodes), dtype=float) * np.ones_like(s_nodes)
    if np.any(g < GAP_FLOOR):
        raise SimulationError("gap reaches the floor; the step in physical time diverges")
    rate = 1.0 / (kappa * g**q)

    def rhs(idx: int, psi: np.ndarray) -> np.ndarray:
        s = s_nodes[idx]
        hpsi = s * d * psi
        for i in range(n):
            v = psi.reshape(-1, 2, 2**i)
            hv = hpsi.reshape(-1, 2, 2**i)
            hv -= (1.0 - s) * v[:, ::-1, :]
        return -1j * rate[idx] * hpsi

    psi = init_plus(n)
    for k in range(steps):
        i0 = 2 * k
        k1 = rhs(i0, psi)
        k2 = rhs(i0 + 1, psi + 0.5 * h * k1)
        k3 = rhs(i0 + 1, psi + 0.5 * h * k2)
        k4 = rhs(i0 + 2, psi + h * k3)
        psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return OdeResult(psi, abs(norm_sq(psi) - 1.0), steps)


def sample_bitstrings(state: np.ndarray, shots: int, seed=None) -> np.ndarray:
    """Basis indices drawn i.i.d. from ``|amp|^2``."""
    if shots < 1:
        raise SimulationError("shots must be >= 1")
    prob = state.real**2 + state.imag**2
    prob = prob / prob.sum()
    rng = np.random.default_rng(seed)
    return rng.choice(prob.size, size=shots, p=prob)


def dump_state(state: np.ndarray, path) -> None:
    """Binary dump: 16-byte header (magic, uint32 version, uint64 n), then LE (re, im) float64 pairs."""
    n = num_qubits(state)
    with open(path, "wb") as fh:
        fh.write(DUMP_MAGIC + struct.pack("<IQ", DUMP_VERSION, n))
        fh.write(np.ascontiguousarray(state, dtype="<c16").tobytes())


def load_state(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if header[:4] != DUMP_MAGIC:
            raise SimulationError("not a statevector dump")
        version, n = struct.unpack("<IQ", header[4:])
        if version != DUMP_VERSION:
            raise SimulationError(f"unsupported dump version {version}")
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != 2**n:
        raise SimulationError(f"dump holds {data.size} amplitudes, header says n={n}")
    return data.astype(complex)


def probabilities_csv(state: np.ndarray) -> str:
    n = num_qubits(state)
    if n > 16:
        raise SimulationError("probability export is limited to n <= 16")
    prob = state.real**2 + state.imag**2
    lines = ["index,bitstring,probability"]
    for x, pr in enumerate(prob):
        bits = "".join(str((x >> i) & 1) for i in range(n))
        lines.append(f"{x},{bits},{float(pr)!r}")
    return "\n".join(lines) + "\n"
