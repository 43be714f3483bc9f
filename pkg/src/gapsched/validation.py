"""Self-checks behind ``gapsched validate``.

Each check returns ``(name, passed, detail)``; none of them needs pytest.
"""

from __future__ import annotations

import itertools

import numpy as np
import scipy.linalg

from .problems import brute_force_extrema, gen_random_qubo, qubo_to_ising
from .schedule import AngleSchedule, derive_angles, fit_bezier
from .simulator import fidelity, init_plus, norm_sq, ode_evolve, run_layered_circuit
from .spectrum import EnsembleSpec, aggregate_profiles, gap_at, mixer_matrix, sample_ensemble_gaps


def check_qubo_ising(instances: int = 30, seed: int = 0):
    worst = 0.0
    for k in range(instances):
        n = 2 + k % 7
        q = gen_random_qubo(n, -1.0, 1.0, seed + k)
        m = qubo_to_ising(q)
        for x in range(2**n):
            bits = [(x >> i) & 1 for i in range(n)]
            z = [1 - 2 * b for b in bits]
            worst = max(worst, abs(q.value(bits) - (m.energy(z) + m.offset)))
    return "qubo/ising exactness", worst <= 1e-12, f"max deviation {worst:.2e}"


def check_gap_endpoints(instances: int = 10, n: int = 6, seed: int = 100):
    worst = 0.0
    for k in range(instances):
        m = qubo_to_ising(gen_random_qubo(n, -1.0, 1.0, seed + k))
        e = np.sort(m.energies)
        worst = max(worst, abs(gap_at(m, 0.0) - 2.0), abs(gap_at(m, 1.0) - (e[1] - e[0])))
    return "gap endpoints", worst <= 1e-9, f"max deviation {worst:.2e}"


def check_dense_oracle(n: int = 3, p: int = 3, seed: int = 7):
    m = qubo_to_ising(gen_random_qubo(n, -1.0, 1.0, seed))
    rng = np.random.default_rng(seed)
    sched = AngleSchedule.free(rng.uniform(-1, 1, 2 * p))
    psi = init_plus(n)
    h0, h1 = mixer_matrix(n), np.diag(m.energies)
    for g, b in zip(sched.gammas, sched.betas):
        psi = scipy.linalg.expm(-1j * b * h0) @ (scipy.linalg.expm(-1j * g * h1) @ psi)
    err = float(np.max(np.abs(psi - run_layered_circuit(m, sched))))
    return "circuit vs dense matrix exponentials", err <= 1e-10, f"max amplitude error {err:.2e}"


def check_norm(n: int = 16, p: int = 10, seed: int = 3):
    m = qubo_to_ising(gen_random_qubo(n, -1.0, 1.0, seed))
    sched = AngleSchedule.free(np.random.default_rng(seed).uniform(-3, 3, 2 * p))
    drift = abs(norm_sq(run_layered_circuit(m, sched)) - 1.0)
    return "norm preservation", drift <= 1e-10, f"drift {drift:.2e}"


def check_ode_vs_circuit(n: int = 4, kappa: float = 0.5, q: float = 1.0, seed: int = 11):
    profiles = sample_ensemble_gaps(EnsembleSpec(n, -1.0, 1.0, 20, seed), np.linspace(0, 1, 41))
    curve = fit_bezier(aggregate_profiles(profiles, "mean"), 3)
    m = qubo_to_ising(gen_random_qubo(n, -1.0, 1.0, seed + 1000))
    ref = ode_evolve(m, kappa, q, curve, steps=4000).state
    fids = [fidelity(ref, run_layered_circuit(m, derive_angles(p, kappa, q, curve))) for p in (25, 50, 100, 200, 400)]
    ok = fids[-1] >= 0.99 and all(a <= b + 1e-12 for a, b in itertools.pairwise(fids))
    return "ode vs trotterized circuit", ok, "fidelities " + ", ".join(f"{f:.5f}" for f in fids)


def check_brute_force(n: int = 8, seed: int = 5):
    m = qubo_to_ising(gen_random_qubo(n, -1.0, 1.0, seed))
    e_min, e_max, arg = brute_force_extrema(m)
    rng = np.random.default_rng(seed)
    ok = all(e_min <= m.energies[x] <= e_max for x in rng.integers(0, 2**n, 64))
    ok = ok and all(m.energies[x] == e_min for x in arg)
    return "brute-force extrema", ok, f"E_min={e_min:.6f} E_max={e_max:.6f} |argmin|={len(arg)}"


CHECKS = (check_qubo_ising, check_gap_endpoints, check_brute_force, check_dense_oracle, check_norm,
          check_ode_vs_circuit)


def run_all(out=print) -> bool:
    ok = True
    for check in CHECKS:
        name, passed, detail = check()
        out(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        ok &= passed
    return ok
