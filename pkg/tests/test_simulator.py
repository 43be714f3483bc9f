from functools import reduce

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from gapsched.problems import IsingModel, brute_force_extrema, gen_random_qubo, qubo_to_ising
from gapsched.schedule import AngleSchedule, BezierGapCurve, derive_angles
from gapsched.simulator import (
    SimulationError,
    apply_cost,
    apply_mixer,
    basis_state,
    dump_state,
    expectation,
    fidelity,
    init_plus,
    load_state,
    norm_sq,
    ode_evolve,
    probabilities_csv,
    run_layered_circuit,
    sample_bitstrings,
)
from gapsched.spectrum import mixer_matrix

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
P0 = np.diag([1.0, 0.0])
P1 = np.diag([0.0, 1.0])


def model(n, seed, span=1.0):
    return qubo_to_ising(gen_random_qubo(n, -span, span, seed))


def on_qubit(op, i, n):
    # qubit 0 is the least significant bit, i.e. the rightmost kron factor
    return reduce(np.kron, [op if k == i else I2 for k in reversed(range(n))])


def rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def cx(c, t, n):
    return on_qubit(P0, c, n) + on_qubit(P1, c, n) @ on_qubit(X, t, n)


def gate_level_cost(m, gamma):
    """Literal RZ / CX-RZ-CX construction of exp(-i gamma H1)."""
    n = m.n
    u = np.eye(2**n, dtype=complex)
    for (i, j), v in m.J.items():
        u = cx(i, j, n) @ on_qubit(rz(2 * gamma * v), j, n) @ cx(i, j, n) @ u
    for l in range(n):
        u = on_qubit(rz(2 * gamma * m.h[l]), l, n) @ u
    return u


def dense_circuit(m, sched):
    h0, h1 = mixer_matrix(m.n), np.diag(m.energies)
    psi = init_plus(m.n)
    for g, b in zip(sched.gammas, sched.betas):
        psi = scipy.linalg.expm(-1j * b * h0) @ scipy.linalg.expm(-1j * g * h1) @ psi
    return psi


def test_init_plus():
    np.testing.assert_allclose(init_plus(1), [2**-0.5, 2**-0.5])
    psi = init_plus(20)
    assert psi.size == 2**20 and np.all(psi == psi[0])
    assert norm_sq(psi) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(SimulationError):
        init_plus(0)


def test_mixer_identity_and_plus_invariance():
    psi = np.random.default_rng(0).normal(size=8) + 0j
    assert np.array_equal(apply_mixer(psi.copy(), 0.0), psi)
    out = apply_mixer(init_plus(3), 0.7)
    assert fidelity(out, init_plus(3)) == pytest.approx(1.0, abs=1e-14)
    # |+> is the -1 eigenstate of -X on each qubit: phase exp(i beta n)
    np.testing.assert_allclose(out, np.exp(0.7j * 3) * init_plus(3), atol=1e-14)


def test_mixer_bit_flip():
    out = apply_mixer(basis_state(1, 0), np.pi / 2)
    np.testing.assert_allclose(out, [0, 1j], atol=1e-15)


def test_mixer_is_rx_minus_two_beta():
    beta = 0.31
    rx = scipy.linalg.expm(-0.5j * (-2 * beta) * X)
    psi = np.random.default_rng(1).normal(size=8) + 1j * np.random.default_rng(2).normal(size=8)
    expect = reduce(np.kron, [rx] * 3) @ psi
    np.testing.assert_allclose(apply_mixer(psi.copy(), beta), expect, atol=1e-14)


def test_cost_phases():
    m = IsingModel(1, [-1.0])
    out = apply_cost(init_plus(1), np.pi, m)
    np.testing.assert_allclose(out, 2**-0.5 * np.array([np.exp(1j * np.pi), np.exp(-1j * np.pi)]), atol=1e-15)
    assert np.array_equal(apply_cost(init_plus(1), 0.0, m), init_plus(1))
    m3 = model(3, 0)
    out = apply_cost(basis_state(3, 5), 0.4, m3)
    assert out[5] == pytest.approx(np.exp(-0.4j * m3.energies[5]))
    assert abs(out[5]) == pytest.approx(1.0)


def test_cost_dimension_mismatch():
    with pytest.raises(SimulationError):
        apply_cost(init_plus(2), 0.1, model(3, 0))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_cost_layer_equals_gate_decomposition(n):
    m = model(n, 40 + n)
    gamma = 0.83
    psi = np.random.default_rng(n).normal(size=2**n) + 0j
    psi /= np.linalg.norm(psi)
    np.testing.assert_allclose(apply_cost(psi.copy(), gamma, m), gate_level_cost(m, gamma) @ psi, atol=1e-13)


def test_empty_and_zero_circuits():
    m = model(3, 1)
    empty = AngleSchedule(0, np.zeros(0), np.zeros(0))
    np.testing.assert_array_equal(run_layered_circuit(m, empty), init_plus(3))
    zeros = AngleSchedule.free(np.zeros(8))
    np.testing.assert_array_equal(run_layered_circuit(m, zeros), init_plus(3))


def test_single_layer_matches_dense_product():
    m = model(2, 3)
    sched = AngleSchedule.free([0.9, 0.4])
    np.testing.assert_allclose(run_layered_circuit(m, sched), dense_circuit(m, sched), atol=1e-12)


def test_layer_order_is_cost_then_mixer():
    m = model(2, 3)
    sched = AngleSchedule.free([0.9, 0.4])
    h0, h1 = mixer_matrix(2), np.diag(m.energies)
    swapped = scipy.linalg.expm(-0.9j * h1) @ scipy.linalg.expm(-0.4j * h0) @ init_plus(2)
    assert fidelity(run_layered_circuit(m, sched), swapped) < 0.999


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 4), seed=st.integers(0, 2**31), angles=st.lists(st.floats(-3, 3), min_size=2, max_size=12))
def test_dense_oracle_property(n, seed, angles):
    if len(angles) % 2:
        angles = angles[:-1]
    m = model(n, seed)
    sched = AngleSchedule.free(angles)
    np.testing.assert_allclose(run_layered_circuit(m, sched), dense_circuit(m, sched), atol=1e-10, rtol=0)


def test_layer_composition():
    m = model(4, 8)
    psi = np.random.default_rng(0).normal(size=16) + 0j
    a = apply_cost(apply_cost(psi.copy(), 0.3, m), 0.5, m)
    np.testing.assert_allclose(a, apply_cost(psi.copy(), 0.8, m), atol=1e-12)
    b = apply_mixer(apply_mixer(psi.copy(), 0.3), 0.5)
    np.testing.assert_allclose(b, apply_mixer(psi.copy(), 0.8), atol=1e-12)


def test_expectation_examples():
    m = IsingModel(2, [-1.0, -1.0], {(0, 1): 1.0})
    bell = np.zeros(4, dtype=complex)
    bell[[0, 3]] = 2**-0.5
    assert expectation(bell, m) == pytest.approx(1.0, abs=1e-15)
    assert expectation(basis_state(2, 3), m) == 3.0
    assert expectation(init_plus(6), model(6, 2)) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), angles=st.lists(st.floats(-3, 3), min_size=2, max_size=20))
def test_energy_bracketed_and_norm_kept(seed, angles):
    if len(angles) % 2:
        angles = angles[:-1]
    m = model(6, seed)
    psi = run_layered_circuit(m, AngleSchedule.free(angles))
    e_min, e_max, _ = brute_force_extrema(m)
    assert abs(norm_sq(psi) - 1) <= 1e-10
    assert e_min - 1e-12 <= expectation(psi, m) <= e_max + 1e-12


# -- ODE ---------------------------------------------------------------------------

FLAT = BezierGapCurve(1, (1.0, 1.0))


def test_ode_zero_model_stays_in_plus():
    res = ode_evolve(IsingModel(3, np.zeros(3)), 0.7, 1.0, FLAT, steps=500)
    assert fidelity(res.state, init_plus(3)) == pytest.approx(1.0, abs=1e-10)
    assert res.norm_drift <= 1e-10


def test_ode_matches_fine_product_formula():
    # independent oracle: a midpoint product of exact exponentials of the full H(s)
    m = model(2, 5)
    kappa, q = 0.8, 1.0
    curve = BezierGapCurve(2, (2.0, 0.8, 0.6))
    h0, h1 = mixer_matrix(2), np.diag(m.energies)
    psi = init_plus(2)
    steps = 4000
    for k in range(steps):
        s = (k + 0.5) / steps
        H = (1 - s) * h0 + s * h1
        psi = scipy.linalg.expm(-1j * H / (kappa * curve(s) ** q) / steps) @ psi
    res = ode_evolve(m, kappa, q, curve, steps=2000)
    assert fidelity(res.state, psi) == pytest.approx(1.0, abs=1e-6)


def test_ode_converges_to_circuit_small():
    m = model(3, 2)
    curve = BezierGapCurve(3, (2.0, 1.15, 0.3, 0.3))
    ref = ode_evolve(m, 0.5, 1.0, curve, steps=2000).state
    fids = [fidelity(ref, run_layered_circuit(m, derive_angles(p, 0.5, 1.0, curve))) for p in (25, 100, 400)]
    assert fids[0] <= fids[1] <= fids[2]
    assert fids[2] >= 0.999


def test_ode_rejects_floor_and_caps():
    with pytest.raises(SimulationError):
        ode_evolve(model(2, 0), 1.0, 1.0, lambda s: 1.0 - s, steps=10)
    with pytest.raises(SimulationError):
        ode_evolve(model(2, 0), 0.0, 1.0, FLAT, steps=10)
    with pytest.raises(SimulationError):
        ode_evolve(IsingModel(13, np.zeros(13)), 1.0, 1.0, FLAT, steps=1)


# -- sampling and export -----------------------------------------------------


def test_sample_basis_state():
    shots = sample_bitstrings(basis_state(3, 6), 100, seed=0)
    assert np.all(shots == 6)


def test_sample_plus_is_fair():
    shots = sample_bitstrings(init_plus(1), 100_000, seed=1)
    freq = np.mean(shots == 1)
    assert abs(freq - 0.5) <= 5 * np.sqrt(0.25 / 100_000)
    assert np.array_equal(shots, sample_bitstrings(init_plus(1), 100_000, seed=1))


def test_modal_sample_is_a_ground_state():
    m = model(4, 3)
    e = m.energies
    psi = np.sqrt(np.where(e == e.min(), 0.9, 0.1 / (e.size - 1))).astype(complex)
    shots = sample_bitstrings(psi, 2000, seed=4)
    assert np.bincount(shots).argmax() in brute_force_extrema(m)[2]


def test_dump_roundtrip(tmp_path):
    psi = run_layered_circuit(model(5, 1), AngleSchedule.free([0.3, 0.2, 0.1, 0.5]))
    dump_state(psi, tmp_path / "psi.bin")
    raw = (tmp_path / "psi.bin").read_bytes()
    assert raw[:4] == b"GSQV" and len(raw) == 16 + 16 * 32
    np.testing.assert_array_equal(load_state(tmp_path / "psi.bin"), psi)


def test_probabilities_csv():
    lines = probabilities_csv(basis_state(2, 1)).splitlines()
    assert lines[0] == "index,bitstring,probability"
    assert lines[2] == "1,10,1.0"
