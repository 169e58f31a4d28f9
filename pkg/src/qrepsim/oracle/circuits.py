"""Exact circuit-level references for the analytic Werner formulas.

Layout of the distributed Pauli-check circuit, per end node (A or B):

* ``k`` stays in the end node's memory, ``r`` is the register photon sent to
  the repeater C; ``k, r`` start as |Phi+>.
* Each data-check ancilla starts in |+> and controls a Pauli on ``r`` before
  transmission. Recursion adds a fresh ancilla that Z-checks the previous
  ancilla in the chain (the red gates).
* ``r`` and every ancilla cross the fiber. Each suffers independent
  single-qubit depolarizing noise sized so that an unprotected A-C-B link
  (two hops swapped at C) ends with the configured fidelity.
* C undoes the checks in mirror order, measures every ancilla and keeps only
  all-zero outcomes, then performs a Bell measurement on ``r_A, r_B`` with
  Pauli correction on ``k_B``.

The two halves never interact before the Bell measurement, so each half is
simulated on its own register and the halves are joined for the final step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np

from ..entmath import MIXED_FIDELITY, PcsPrediction
from ..errors import BudgetError, DomainError
from .density import (
    CNOT,
    CZ,
    MAX_QUBITS,
    PAULIS,
    DensityMatrix,
    H,
    X,
    Z,
    apply_gate,
    bell_fidelity,
    controlled,
    depolarize,
    discard,
    make_werner,
    pauli_string,
    permute,
    project,
)

Variant = Literal["X_only", "X_and_Z"]


@dataclass(frozen=True)
class PauliCheckSpec:
    """A left/right pair of Pauli checks controlled by one ancilla."""

    left_check: str
    right_check: str
    ancilla_index: int

    def __post_init__(self):
        if len(self.left_check) != len(self.right_check):
            raise DomainError("left and right checks must cover the same qubits")
        if set(self.left_check + self.right_check) - set("IXYZ"):
            raise DomainError("checks must be strings over IXYZ")

    def respects(self, unitary: np.ndarray, atol: float = 1e-12) -> bool:
        """True when ``P_L U P_R == U`` for the protected unitary."""
        left = pauli_string(self.left_check)
        right = pauli_string(self.right_check)
        return bool(np.allclose(left @ unitary @ right, unitary, atol=atol))


@dataclass(frozen=True)
class PcsCircuitConfig:
    variant: Variant = "X_only"
    recursion_level: int = 0
    gate_depolarizing_prob: float = 0.0
    channel_fidelity: float = 1.0

    def __post_init__(self):
        if self.variant not in ("X_only", "X_and_Z"):
            raise DomainError(f"unknown PCS variant {self.variant!r}")
        if self.recursion_level not in (0, 1, 2):
            raise DomainError(f"recursion level must be 0, 1 or 2, got {self.recursion_level}")
        if not 0.0 <= self.gate_depolarizing_prob <= 1.0:
            raise DomainError("gate depolarizing probability outside [0, 1]")
        if not MIXED_FIDELITY <= self.channel_fidelity <= 1.0:
            raise DomainError("channel fidelity outside [0.25, 1]")

    @property
    def data_checks(self) -> tuple[str, ...]:
        return ("X",) if self.variant == "X_only" else ("X", "Z")

    @property
    def qubits_per_side(self) -> int:
        return 2 + len(self.data_checks) * (1 + self.recursion_level)

    @property
    def n_qubits(self) -> int:
        return 2 * self.qubits_per_side

    def side_checks(self) -> list[tuple[int, int, str]]:
        """``(ancilla, target, pauli)`` triples in left-to-right order for one side."""
        checks = []
        nxt = 2
        chains = []
        for p in self.data_checks:
            checks.append((nxt, 1, p))
            chains.append(nxt)
            nxt += 1
        for _ in range(self.recursion_level):
            for i, parent in enumerate(chains):
                checks.append((nxt, parent, "Z"))
                chains[i] = nxt
                nxt += 1
        return checks

    def check_specs(self) -> dict[str, PauliCheckSpec]:
        """Checks named ``a1, a2, ...`` alternating A-side and B-side ancillas."""
        per = self.qubits_per_side
        out = {}
        for j, (anc, target, p) in enumerate(self.side_checks()):
            label = "".join(p if q == target else "I" for q in range(per))
            for side in (0, 1):
                out[f"a{2 * j + side + 1}"] = PauliCheckSpec(label, label, anc + side * per)
        return out


def link_fidelity_for(channel_fidelity: float) -> float:
    """Per-hop fidelity f with ``f^2 + (1 - f)^2 / 3`` equal to the end-to-end value."""
    return (1.0 + math.sqrt(max(12.0 * channel_fidelity - 3.0, 0.0))) / 4.0


def _gate2(rho: DensityMatrix, gate: np.ndarray, a: int, b: int, p: float) -> DensityMatrix:
    rho = apply_gate(rho, gate, [a, b])
    if p > 0:
        rho = depolarize(rho, [a, b], p)
    return rho


def _bell_pair(rho: DensityMatrix, a: int, b: int, p: float) -> DensityMatrix:
    rho = apply_gate(rho, H, [a])
    return _gate2(rho, CNOT, a, b, p)


def _pcs_side(rho: DensityMatrix, cfg: PcsCircuitConfig, offset: int, hop_fidelity: float) -> DensityMatrix:
    p_gate = cfg.gate_depolarizing_prob
    checks = [(a + offset, t + offset, P) for a, t, P in cfg.side_checks()]
    k, r = offset, offset + 1
    rho = _bell_pair(rho, k, r, p_gate)
    for anc, target, P in checks:
        rho = apply_gate(rho, H, [anc])
        rho = _gate2(rho, controlled(PAULIS[P]), anc, target, p_gate)
    strength = 4.0 * (1.0 - hop_fidelity) / 3.0
    if strength > 0:
        for q in [r] + [a for a, _, _ in checks]:
            rho = depolarize(rho, [q], strength)
    for anc, target, P in reversed(checks):
        rho = _gate2(rho, controlled(PAULIS[P]), anc, target, p_gate)
        rho = apply_gate(rho, H, [anc])
        rho = project(rho, anc, 0)
    return rho


def bell_measure_swap(rho: DensityMatrix, ka: int, ra: int, rb: int, kb: int, p_gate: float = 0.0) -> DensityMatrix:
    """Bell measurement on ``ra, rb`` with Pauli correction on ``kb``.

    Returns the (unnormalized) reduced state on ``ka, kb`` summed over all four
    corrected outcomes.
    """
    rho = _gate2(rho, CNOT, ra, rb, p_gate)
    rho = apply_gate(rho, H, [ra])
    acc = None
    for m1 in (0, 1):
        for m2 in (0, 1):
            branch = project(project(rho, ra, m1), rb, m2)
            if m2:
                branch = apply_gate(branch, X, [kb])
            if m1:
                branch = apply_gate(branch, Z, [kb])
            red = discard(branch, [ra, rb])
            acc = red.entries if acc is None else acc + red.entries
    ka_first = 0 if ka < kb else 1
    out = DensityMatrix(2, acc)
    return out if ka_first == 0 else permute(out, [1, 0])


def simulate_pcs(config: PcsCircuitConfig, *, joint_register: bool = False) -> PcsPrediction:
    """Exact postselection probability and A-B fidelity for distributed PCS.

    Args:
        config: circuit variant, recursion depth and noise levels.
        joint_register: simulate both halves in one register instead of
            joining them just before the Bell measurement. Slower; gives the
            same numbers.
    """
    if config.n_qubits > MAX_QUBITS:
        raise BudgetError(f"PCS circuit needs {config.n_qubits} qubits, limit is {MAX_QUBITS}")
    f_hop = link_fidelity_for(config.channel_fidelity)
    per = config.qubits_per_side
    n_anc = per - 2
    if joint_register:
        rho = DensityMatrix.zero(2 * per)
        rho = _pcs_side(rho, config, 0, f_hop)
        rho = _pcs_side(rho, config, per, f_hop)
        c = rho.trace_weight
        anc = [q for q in range(2 * per) if q % per >= 2]
        rho = discard(rho, anc)  # now kA, rA, kB, rB
    else:
        side = _pcs_side(DensityMatrix.zero(per), config, 0, f_hop)
        side = discard(side, list(range(2, 2 + n_anc)))
        rho = side.tensor(side)
        c = rho.trace_weight
    rho = permute(rho, [0, 1, 3, 2])  # kA, rA, rB, kB
    out = bell_measure_swap(rho, 0, 1, 2, 3, config.gate_depolarizing_prob)
    return PcsPrediction(c, bell_fidelity(out, (0, 1)))


def simulate_swap(f1: float, f2: float, gate_noise: float = 0.0) -> float:
    """Corrected Bell-measurement swap of Werner(f1) on (0,1) and Werner(f2) on (2,3)."""
    rho = make_werner(f1).tensor(make_werner(f2))
    return bell_fidelity(bell_measure_swap(rho, 0, 1, 2, 3, gate_noise), (0, 1))


class DistillOutcome(NamedTuple):
    success_prob: float
    out_fidelity: float


def simulate_distill(f1: float, f2: float, gate_noise: float = 0.0) -> DistillOutcome:
    """Recurrence distillation: bilateral CNOT from pair 1 onto pair 2, keep on agreement."""
    rho = make_werner(f1).tensor(make_werner(f2))  # A1 B1 A2 B2
    rho = _gate2(rho, CNOT, 0, 2, gate_noise)
    rho = _gate2(rho, CNOT, 1, 3, gate_noise)
    kept = None
    for m in (0, 1):
        branch = discard(project(project(rho, 2, m), 3, m), [2, 3])
        kept = branch if kept is None else DensityMatrix(2, kept.entries + branch.entries)
    p = kept.trace_weight
    return DistillOutcome(p, bell_fidelity(kept, (0, 1)))


class FourToTwoOutcome(NamedTuple):
    success_prob: float
    out_fidelities: tuple[float, float]


def _decode_422(rho: DensityMatrix, q: tuple[int, int, int, int], p: float) -> DensityMatrix:
    """Inverse of the [[4,2,2]] encoder; afterwards ``q[0]`` holds XXXX, ``q[3]`` holds ZZZZ."""
    q0, q1, q2, q3 = q
    rho = _gate2(rho, CNOT, q0, q3, p)
    rho = _gate2(rho, CNOT, q0, q2, p)
    rho = _gate2(rho, CNOT, q0, q1, p)
    rho = apply_gate(rho, H, [q0])
    rho = _gate2(rho, CNOT, q2, q3, p)
    rho = _gate2(rho, CNOT, q1, q3, p)
    return rho


def simulate_leung_shor_4to2(f: float, gate_noise: float = 0.0) -> FourToTwoOutcome:
    """Four Werner(f) pairs in, two pairs out, via bilateral [[4,2,2]] syndrome comparison.

    Both ends run the decoder of the code whose stabilizers are XXXX and
    ZZZZ. The two syndrome qubits at each end are measured and the round is
    kept only if A and B agree on both (trivial relative syndrome). The two
    logical qubits become the output pairs.
    """
    if not MIXED_FIDELITY <= f <= 1.0:
        raise DomainError(f"input fidelity {f} outside [0.25, 1]")
    if not 0.0 <= gate_noise <= 1.0:
        raise DomainError("gate noise outside [0, 1]")
    w = make_werner(f)
    rho = w.tensor(w).tensor(w).tensor(w)  # A1 B1 A2 B2 A3 B3 A4 B4
    rho = permute(rho, [0, 2, 4, 6, 1, 3, 5, 7])  # A1..A4 B1..B4
    rho = _decode_422(rho, (0, 1, 2, 3), gate_noise)
    rho = _decode_422(rho, (4, 5, 6, 7), gate_noise)
    acc = None
    for s0 in (0, 1):
        for s3 in (0, 1):
            branch = project(project(rho, 0, s0), 4, s0)
            branch = project(project(branch, 3, s3), 7, s3)
            acc = branch.entries if acc is None else acc + branch.entries
    kept = discard(DensityMatrix(8, acc), [0, 3, 4, 7])  # A2 A3 B2 B3
    p = kept.trace_weight
    return FourToTwoOutcome(p, (bell_fidelity(kept, (0, 2)), bell_fidelity(kept, (1, 3))))
