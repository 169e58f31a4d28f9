import itertools
import json
from functools import reduce
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrepsim.entmath import distill_bbpssw, pcs_x_predict, pcs_xz_predict, swap_fidelity
from qrepsim.errors import BudgetError, DomainError, ImpossibleOutcome
from qrepsim.oracle import (
    DensityMatrix,
    NoiseChannel,
    PauliCheckSpec,
    PcsCircuitConfig,
    apply_gate,
    apply_kraus,
    apply_noise,
    bell_fidelity,
    dump_text,
    fidelity_to_phi_plus,
    load_text,
    make_werner,
    partial_trace,
    permute,
    postselect,
    simulate_distill,
    simulate_leung_shor_4to2,
    simulate_pcs,
    simulate_swap,
)
from qrepsim.oracle.density import CNOT, CZ, PHI_PLUS, H, X, Y, Z, I2

FIXTURES = Path(__file__).parent / "fixtures"
werner = st.floats(0.25, 1.0)


def random_state(n: int, rng: np.random.Generator) -> DensityMatrix:
    a = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    m = a @ a.conj().T
    return DensityMatrix(n, m / np.trace(m))


def kron(*ops):
    return reduce(np.kron, ops)


# -- states and gates --------------------------------------------------------


def test_make_werner():
    assert np.allclose(make_werner(1.0).entries, np.outer(PHI_PLUS, PHI_PLUS), atol=1e-15)
    assert np.allclose(make_werner(0.25).entries, np.eye(4) / 4, atol=1e-15)
    for f in (0.25, 0.5, 0.7, 1.0):
        assert fidelity_to_phi_plus(make_werner(f), (0, 1)) == pytest.approx(f, abs=1e-15)
    with pytest.raises(DomainError):
        make_werner(1.2)


def test_fidelity_of_product_state():
    assert bell_fidelity(DensityMatrix.zero(2)) == pytest.approx(0.5, abs=1e-15)


def test_fidelity_traces_out_other_qubits():
    rho = DensityMatrix.zero(1).tensor(make_werner(0.8)).tensor(DensityMatrix.zero(1))
    assert bell_fidelity(rho, (1, 2)) == pytest.approx(0.8, abs=1e-15)


def test_apply_gate_examples():
    rho = DensityMatrix.zero(1)
    assert np.allclose(apply_gate(rho, I2, [0]).entries, rho.entries)
    assert np.allclose(apply_gate(rho, X, [0]).entries, np.diag([0, 1]))
    with pytest.raises(DomainError):
        apply_gate(rho, np.array([[1, 1], [0, 1]]), [0])


def test_cnot_on_three_qubits_matches_dense_product():
    # Phi+ on (0,1), |0> on 2; CNOT with control 1, target 2
    psi = np.kron(PHI_PLUS, [1, 0])
    rho = DensityMatrix.from_pure(psi)
    full = kron(I2, CNOT)
    expected = full @ rho.entries @ full.conj().T
    assert np.allclose(apply_gate(rho, CNOT, [1, 2]).entries, expected, atol=1e-15)
    # control 2, target 0 on a random state, via an explicit permutation matrix
    rng = np.random.default_rng(3)
    rho = random_state(3, rng)
    perm = np.zeros((8, 8))
    for i in range(8):
        b0, b1, b2 = (i >> 2) & 1, (i >> 1) & 1, i & 1
        j = ((b0 ^ b2) << 2) | (b1 << 1) | b2
        perm[j, i] = 1
    expected = perm @ rho.entries @ perm.T
    assert np.allclose(apply_gate(rho, CNOT, [2, 0]).entries, expected, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gates_keep_state_physical(seed):
    rng = np.random.default_rng(seed)
    rho = random_state(3, rng)
    for gate, qs in [(H, [0]), (CNOT, [1, 2]), (CZ, [2, 0]), (Y, [1])]:
        rho = apply_gate(rho, gate, qs)
    rho = apply_noise(rho, NoiseChannel("depolarizing", 0.3, (0, 2)))
    rho = apply_noise(rho, NoiseChannel("dephasing", 0.2, (1,)))
    rho.check()
    assert rho.trace_weight == pytest.approx(1.0, abs=1e-12)


# -- noise -------------------------------------------------------------------


def test_noise_strength_zero_is_identity():
    rho = make_werner(0.8)
    assert np.allclose(apply_noise(rho, NoiseChannel("depolarizing", 0.0, (0,))).entries, rho.entries)
    assert np.allclose(apply_noise(rho, NoiseChannel("dephasing", 0.0, (0, 1))).entries, rho.entries)


def test_full_depolarizing_on_single_pure_qubit():
    rho = DensityMatrix.from_pure(np.array([1, 1]) / np.sqrt(2))
    out = apply_noise(rho, NoiseChannel("depolarizing", 1.0, (0,)))
    assert np.allclose(out.entries, np.eye(2) / 2, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_full_depolarizing_on_all_qubits_gives_maximally_mixed(n):
    rho = random_state(n, np.random.default_rng(n))
    out = apply_noise(rho, NoiseChannel("depolarizing", 1.0, tuple(range(n))))
    assert np.allclose(out.entries, np.eye(2**n) / 2**n, atol=1e-12)


def test_depolarizing_on_half_of_bell_pair_by_kraus_sum():
    p = 0.1
    rho = DensityMatrix.from_pure(PHI_PLUS)
    # Kraus-by-Kraus on qubit 1: sqrt(1 - 3p/4) I, sqrt(p/4) {X, Y, Z}
    acc = np.zeros((4, 4), dtype=complex)
    for w, op in [(1 - 3 * p / 4, I2), (p / 4, X), (p / 4, Y), (p / 4, Z)]:
        k = np.sqrt(w) * kron(I2, op)
        acc += k @ rho.entries @ k.conj().T
    expected = float((PHI_PLUS.conj() @ acc @ PHI_PLUS).real)
    got = bell_fidelity(apply_noise(rho, NoiseChannel("depolarizing", p, (1,))))
    assert got == pytest.approx(expected, abs=1e-12)
    assert got == pytest.approx(1 - 3 * p / 4, abs=1e-12)


@pytest.mark.parametrize("kind,k", [("depolarizing", 1), ("depolarizing", 2), ("depolarizing", 3), ("dephasing", 1)])
def test_kraus_completeness(kind, k):
    ch = NoiseChannel(kind, 0.37, tuple(range(k)))
    ops = ch.kraus_operators()
    total = sum(o.conj().T @ o for o in ops)
    assert np.allclose(total, np.eye(ops[0].shape[0]), atol=1e-12)


def test_joint_depolarizing_closed_form_matches_kraus():
    rho = random_state(3, np.random.default_rng(11))
    ch = NoiseChannel("depolarizing", 0.42, (2, 0))
    fast = apply_noise(rho, ch)
    slow = apply_kraus(rho, ch.kraus_operators(), [2, 0])
    assert np.allclose(fast.entries, slow.entries, atol=1e-13)


def test_incomplete_kraus_rejected():
    with pytest.raises(DomainError):
        apply_kraus(make_werner(0.9), [0.5 * I2], [0])


def test_noise_channel_validation():
    with pytest.raises(DomainError):
        NoiseChannel("depolarizing", 1.5, (0,))
    with pytest.raises(DomainError):
        NoiseChannel("amplitude", 0.1, (0,))


# -- measurement -------------------------------------------------------------


def test_postselect_examples():
    rho = DensityMatrix.zero(1)
    out, p = postselect(rho, 0, 0)
    assert p == 1.0
    assert np.allclose(out.entries, rho.entries)
    plus = DensityMatrix.from_pure(np.array([1, 1]) / np.sqrt(2))
    out, p = postselect(plus, 0, 0)
    assert p == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(out.entries, np.diag([1, 0]), atol=1e-15)


def test_postselect_impossible_branch():
    with pytest.raises(ImpossibleOutcome) as err:
        postselect(DensityMatrix.zero(2), 1, 1)
    assert (err.value.qubit, err.value.outcome) == (1, 1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 2))
def test_branch_probabilities_sum_to_one(seed, q):
    rho = random_state(3, np.random.default_rng(seed))
    _, p0 = postselect(rho, q, 0)
    _, p1 = postselect(rho, q, 1)
    assert p0 + p1 == pytest.approx(1.0, abs=1e-12)


def test_partial_trace_and_permute():
    a, b = make_werner(0.7), DensityMatrix.zero(1)
    rho = a.tensor(b)
    assert np.allclose(partial_trace(rho, [0, 1]).entries, a.entries, atol=1e-15)
    swapped = permute(rho, [2, 0, 1])
    assert np.allclose(swapped.entries, b.tensor(a).entries, atol=1e-15)


def test_dump_and_load_round_trip(tmp_path):
    rho = random_state(2, np.random.default_rng(5))
    path = tmp_path / "rho.txt"
    dump_text(rho, path)
    assert path.read_text().startswith("# density-matrix n_qubits=2")
    back = load_text(path)
    assert np.array_equal(back.entries, rho.entries)


def test_qubit_budget():
    with pytest.raises(BudgetError):
        DensityMatrix.zero(13)


# -- Pauli checks ------------------------------------------------------------


def test_pauli_check_symmetry_contract():
    assert PauliCheckSpec("ZI", "ZI", 2).respects(CNOT)
    assert PauliCheckSpec("XX", "XI", 2).respects(CNOT)
    assert not PauliCheckSpec("XI", "XI", 2).respects(CNOT)
    with pytest.raises(DomainError):
        PauliCheckSpec("XX", "X", 2)


def test_check_specs_name_ancillas_per_recursion_layer():
    specs = PcsCircuitConfig("X_only", 2).check_specs()
    assert list(specs) == ["a1", "a2", "a3", "a4", "a5", "a6"]
    # one check per side per ancilla; qubit 0 is the data pair half
    assert specs["a1"].left_check == "IXIII"
    assert specs["a3"].left_check == "IIZII"
    assert specs["a5"].left_check == "IIIZI"
    assert all(s.left_check == s.right_check for s in specs.values())
    assert specs["a2"].ancilla_index == specs["a1"].ancilla_index + 5


# -- circuits ----------------------------------------------------------------


@pytest.mark.parametrize("variant", ["X_only", "X_and_Z"])
@pytest.mark.parametrize("level", [0, 1])
def test_pcs_noiseless_channel_is_perfect(variant, level):
    c, f = simulate_pcs(PcsCircuitConfig(variant, level, 0.0, 1.0))
    assert c == pytest.approx(1.0, abs=1e-12)
    assert f == pytest.approx(1.0, abs=1e-12)


def test_pcs_x_only_rec2_noiseless_channel_is_perfect():
    c, f = simulate_pcs(PcsCircuitConfig("X_only", 2, 0.0, 1.0))
    assert (c, f) == pytest.approx((1.0, 1.0), abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(werner)
def test_pcs_oracle_matches_closed_forms(f):
    for variant, fn in (("X_only", pcs_x_predict), ("X_and_Z", pcs_xz_predict)):
        exact = simulate_pcs(PcsCircuitConfig(variant, 0, 0.0, f))
        ana = fn(f)
        assert exact.postselect_prob == pytest.approx(ana.postselect_prob, abs=1e-10)
        assert exact.output_fidelity == pytest.approx(ana.output_fidelity, abs=1e-10)


@pytest.mark.parametrize("cfg", [PcsCircuitConfig("X_only", 1, 0.004, 0.8), PcsCircuitConfig("X_and_Z", 0, 0.01, 0.9)])
def test_pcs_joint_register_agrees(cfg):
    split = simulate_pcs(cfg)
    joint = simulate_pcs(cfg, joint_register=True)
    assert split.postselect_prob == pytest.approx(joint.postselect_prob, abs=1e-12)
    assert split.output_fidelity == pytest.approx(joint.output_fidelity, abs=1e-12)


def test_pcs_budget_and_config_errors():
    with pytest.raises(BudgetError):
        simulate_pcs(PcsCircuitConfig("X_and_Z", 2, 0.0, 0.9))
    with pytest.raises(DomainError):
        PcsCircuitConfig("X_only", 3)
    with pytest.raises(DomainError):
        PcsCircuitConfig("Y_only", 0)
    with pytest.raises(DomainError):
        PcsCircuitConfig("X_only", 0, 0.0, 0.2)


def test_pcs_gate_noise_lowers_fidelity():
    clean = simulate_pcs(PcsCircuitConfig("X_only", 1, 0.0, 0.9)).output_fidelity
    noisy = simulate_pcs(PcsCircuitConfig("X_only", 1, 0.01, 0.9)).output_fidelity
    assert noisy < clean


def test_swap_oracle_examples():
    assert simulate_swap(1.0, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert simulate_swap(0.25, 0.8) == pytest.approx(0.25, abs=1e-12)
    assert simulate_swap(0.85, 0.7) == pytest.approx(swap_fidelity(0.85, 0.7), abs=1e-12)
    assert simulate_swap(0.9, 0.9) == pytest.approx(swap_fidelity(0.9, 0.9), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(werner, werner)
def test_swap_and_distill_formulas_match_oracle(f1, f2):
    assert simulate_swap(f1, f2) == pytest.approx(swap_fidelity(f1, f2), abs=1e-12)
    ex = simulate_distill(f1, f2)
    an = distill_bbpssw(f1, f2)
    assert ex.success_prob == pytest.approx(an.success_prob, abs=1e-12)
    assert ex.out_fidelity == pytest.approx(an.out_fidelity, abs=1e-12)


def test_distill_oracle_fixed_points():
    assert simulate_distill(1.0, 1.0) == pytest.approx((1.0, 1.0), abs=1e-12)
    assert simulate_distill(0.25, 0.25).out_fidelity == pytest.approx(0.25, abs=1e-12)


# -- 4-to-2 ------------------------------------------------------------------


def _pauli_frame_422(f: float):
    """Independent reference: enumerate Pauli errors on Bob's halves.

    Decoder-conjugated errors with no X/Y on the two syndrome qubits are
    accepted; an output pair is perfect when its decoded Pauli is I.
    """
    P = {"I": I2, "X": X, "Y": Y, "Z": Z}

    def cnot(c, t):
        m = np.zeros((16, 16))
        for i in range(16):
            bits = [(i >> (3 - k)) & 1 for k in range(4)]
            if bits[c]:
                bits[t] ^= 1
            m[sum(b << (3 - k) for k, b in enumerate(bits)), i] = 1
        return m

    h0 = kron(H, I2, I2, I2)
    dec = reduce(lambda a, b: b @ a, [cnot(0, 3), cnot(0, 2), cnot(0, 1), h0, cnot(2, 3), cnot(1, 3)])
    labels = ["".join(l) for l in itertools.product("IXYZ", repeat=4)]
    mats = {l: kron(*(P[c] for c in l)) for l in labels}
    w = {"I": f, "X": (1 - f) / 3, "Y": (1 - f) / 3, "Z": (1 - f) / 3}
    acc = ok1 = ok2 = 0.0
    for l in labels:
        conj = dec @ mats[l] @ dec.conj().T
        out = next(m for m in labels if abs(abs(np.trace(mats[m].conj().T @ conj)) / 16 - 1) < 1e-9)
        if out[0] in "IZ" and out[3] in "IZ":
            pr = np.prod([w[c] for c in l])
            acc += pr
            ok1 += pr * (out[1] == "I")
            ok2 += pr * (out[2] == "I")
    return acc, (ok1 / acc, ok2 / acc)


def test_422_trivial_points():
    p, (f1, f2) = simulate_leung_shor_4to2(1.0)
    assert (p, f1, f2) == pytest.approx((1.0, 1.0, 1.0), abs=1e-12)
    _, (f1, f2) = simulate_leung_shor_4to2(0.25)
    assert (f1, f2) == pytest.approx((0.25, 0.25), abs=1e-12)


@pytest.mark.parametrize("f", [0.85, 0.9, 0.95])
def test_422_matches_pauli_frame_reference(f):
    p, fids = simulate_leung_shor_4to2(f)
    rp, rfids = _pauli_frame_422(f)
    assert p == pytest.approx(rp, abs=1e-12)
    assert fids == pytest.approx(rfids, abs=1e-12)
    assert min(fids) > f


def test_422_regression_vectors():
    doc = json.loads((FIXTURES / "leung_shor_v1.json").read_text())
    assert doc["version"] == 1
    for case in doc["cases"]:
        p, fids = simulate_leung_shor_4to2(case["f"], case["gate_noise"])
        assert p == pytest.approx(case["success_prob"], abs=doc["tolerance"])
        assert list(fids) == pytest.approx(case["out_fidelities"], abs=doc["tolerance"])


def test_422_domain_errors():
    with pytest.raises(DomainError):
        simulate_leung_shor_4to2(0.1)
    with pytest.raises(DomainError):
        simulate_leung_shor_4to2(0.9, 1.5)
