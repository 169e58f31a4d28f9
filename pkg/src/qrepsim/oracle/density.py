"""Dense density-matrix simulation for small registers.

States are kept unnormalized after projections so that a chain of
postselections carries its acceptance probability in the trace.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from ..errors import BudgetError, DomainError, ImpossibleOutcome

MAX_QUBITS = 12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}

CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)

PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
BELL_STATES = {
    "phi+": PHI_PLUS,
    "phi-": np.array([1, 0, 0, -1], dtype=complex) / np.sqrt(2),
    "psi+": np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2),
    "psi-": np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2),
}


def controlled(p: np.ndarray) -> np.ndarray:
    """Two-qubit controlled version of a single-qubit operator (control first)."""
    out = np.zeros((4, 4), dtype=complex)
    out[:2, :2] = I2
    out[2:, 2:] = p
    return out


def pauli_string(label: str) -> np.ndarray:
    return reduce(np.kron, (PAULIS[c] for c in label))


@dataclass
class DensityMatrix:
    """A possibly unnormalized state on ``n_qubits`` qubits.

    Qubit 0 is the most significant bit of the basis index.
    """

    n_qubits: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise BudgetError(f"{self.n_qubits} qubits outside 1..{MAX_QUBITS}")
        dim = 2**self.n_qubits
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.shape != (dim, dim):
            raise DomainError(f"expected {dim}x{dim} matrix, got {self.entries.shape}")

    @classmethod
    def zero(cls, n_qubits: int) -> "DensityMatrix":
        dim = 2**n_qubits
        m = np.zeros((dim, dim), dtype=complex)
        m[0, 0] = 1.0
        return cls(n_qubits, m)

    @classmethod
    def from_pure(cls, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        n = int(round(np.log2(psi.size)))
        return cls(n, np.outer(psi, psi.conj()))

    @property
    def trace_weight(self) -> float:
        return float(np.trace(self.entries).real)

    def normalized(self) -> "DensityMatrix":
        w = self.trace_weight
        if w <= 0:
            raise DomainError("cannot normalize a state with zero trace")
        return DensityMatrix(self.n_qubits, self.entries / w)

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(self.n_qubits + other.n_qubits, np.kron(self.entries, other.entries))

    def check(self, atol: float = 1e-9) -> None:
        """Raise ``AssertionError`` unless Hermitian and positive semidefinite."""
        m = self.entries
        assert np.max(np.abs(m - m.conj().T)) <= atol, "not Hermitian"
        evals = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        assert evals.min() >= -atol, f"negative eigenvalue {evals.min()}"
        assert abs(evals.sum() - self.trace_weight) <= atol, "trace mismatch"


def _as_tensor(rho: DensityMatrix) -> np.ndarray:
    return rho.entries.reshape((2,) * (2 * rho.n_qubits))


def _from_tensor(t: np.ndarray, n: int) -> DensityMatrix:
    dim = 2**n
    return DensityMatrix(n, t.reshape(dim, dim))


def _check_qubits(rho: DensityMatrix, qubits: Sequence[int]) -> None:
    if len(set(qubits)) != len(qubits):
        raise DomainError(f"repeated qubit in {qubits}")
    for q in qubits:
        if not 0 <= q < rho.n_qubits:
            raise IndexError(f"qubit {q} out of range for {rho.n_qubits} qubits")


def _apply_operator(rho: DensityMatrix, op: np.ndarray, qubits: Sequence[int], adj: np.ndarray) -> np.ndarray:
    """Return the tensor of ``op rho adj`` with ``op`` acting on ``qubits``."""
    n, k = rho.n_qubits, len(qubits)
    t = _as_tensor(rho)
    op_t = op.reshape((2,) * (2 * k))
    t = np.tensordot(op_t, t, axes=(list(range(k, 2 * k)), list(qubits)))
    t = np.moveaxis(t, list(range(k)), list(qubits))
    adj_t = adj.reshape((2,) * (2 * k))
    bra_axes = [n + q for q in qubits]
    t = np.tensordot(t, adj_t, axes=(bra_axes, list(range(k))))
    t = np.moveaxis(t, list(range(2 * n - k, 2 * n)), bra_axes)
    return t


def apply_gate(rho: DensityMatrix, gate: np.ndarray, qubits: Sequence[int]) -> DensityMatrix:
    """Conjugate ``rho`` by a unitary acting on up to three listed qubits."""
    qubits = list(qubits)
    _check_qubits(rho, qubits)
    k = len(qubits)
    if not 1 <= k <= 3:
        raise DomainError("gates act on 1 to 3 qubits")
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (2**k, 2**k):
        raise DomainError(f"gate shape {gate.shape} does not match {k} qubits")
    if np.max(np.abs(gate.conj().T @ gate - np.eye(2**k))) > 1e-12:
        raise DomainError("gate is not unitary")
    return _from_tensor(_apply_operator(rho, gate, qubits, gate.conj().T), rho.n_qubits)


def apply_kraus(rho: DensityMatrix, kraus: Sequence[np.ndarray], qubits: Sequence[int]) -> DensityMatrix:
    qubits = list(qubits)
    _check_qubits(rho, qubits)
    dim = 2 ** len(qubits)
    total = sum(k.conj().T @ k for k in kraus)
    if np.max(np.abs(total - np.eye(dim))) > 1e-12:
        raise DomainError("Kraus operators are not complete")
    acc = None
    for k in kraus:
        t = _apply_operator(rho, k, qubits, k.conj().T)
        acc = t if acc is None else acc + t
    return _from_tensor(acc, rho.n_qubits)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on ``keep``, in the listed order."""
    keep = list(keep)
    _check_qubits(rho, keep)
    n = rho.n_qubits
    drop = [q for q in range(n) if q not in keep]
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    ket = [letters[i] for i in range(n)]
    bra = [letters[n + i] for i in range(n)]
    for q in drop:
        bra[q] = ket[q]
    out = [ket[q] for q in keep] + [bra[q] for q in keep]
    t = np.einsum("".join(ket + bra) + "->" + "".join(out), _as_tensor(rho))
    return _from_tensor(t, len(keep))


def permute(rho: DensityMatrix, order: Sequence[int]) -> DensityMatrix:
    """Reorder qubits so that new qubit ``i`` is old qubit ``order[i]``."""
    order = list(order)
    if sorted(order) != list(range(rho.n_qubits)):
        raise DomainError(f"{order} is not a permutation")
    n = rho.n_qubits
    t = np.transpose(_as_tensor(rho), order + [n + q for q in order])
    return _from_tensor(t, n)


@dataclass(frozen=True)
class NoiseChannel:
    """A noise process on a set of qubits.

    ``depolarizing`` acts jointly on all targets:
    ``rho -> (1 - p) rho + p * (I / 2^k) (x) Tr_targets(rho)``.
    ``dephasing`` acts independently on each target:
    ``rho -> (1 - p/2) rho + (p/2) Z rho Z``.
    """

    kind: Literal["depolarizing", "dephasing"]
    strength: float
    targets: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in ("depolarizing", "dephasing"):
            raise DomainError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.strength <= 1.0:
            raise DomainError(f"noise strength {self.strength} outside [0, 1]")
        if not self.targets:
            raise DomainError("noise channel needs at least one target")
        object.__setattr__(self, "targets", tuple(self.targets))

    def kraus_operators(self) -> list[np.ndarray]:
        """Kraus set on the targets (jointly for depolarizing, per qubit for dephasing)."""
        p = self.strength
        if self.kind == "dephasing":
            return [np.sqrt(1 - p / 2) * I2, np.sqrt(p / 2) * Z]
        k = len(self.targets)
        if k > 3:
            raise BudgetError("explicit Kraus sets are limited to 3 targets")
        ops = []
        for labels in itertools.product("IXYZ", repeat=k):
            w = p / 4**k + (1 - p if set(labels) == {"I"} else 0.0)
            ops.append(np.sqrt(w) * pauli_string("".join(labels)))
        return ops


def apply_noise(rho: DensityMatrix, ch: NoiseChannel) -> DensityMatrix:
    _check_qubits(rho, ch.targets)
    if ch.strength == 0.0:
        return rho
    if ch.kind == "dephasing":
        kraus = ch.kraus_operators()
        for q in ch.targets:
            rho = apply_kraus(rho, kraus, [q])
        return rho
    # joint depolarizing, closed form: identical to the 4^k-element Pauli Kraus sum
    n, k = rho.n_qubits, len(ch.targets)
    rest = [q for q in range(n) if q not in ch.targets]
    if rest:
        reduced = partial_trace(rho, rest)
        mixed = DensityMatrix(k, np.eye(2**k, dtype=complex) / 2**k).tensor(reduced)
        inverse = [0] * n
        for pos, q in enumerate(list(ch.targets) + rest):
            inverse[q] = pos
        mixed = permute(mixed, inverse)
    else:
        mixed = DensityMatrix(n, np.eye(2**n, dtype=complex) * rho.trace_weight / 2**n)
    return DensityMatrix(n, (1 - ch.strength) * rho.entries + ch.strength * mixed.entries)


def depolarize(rho: DensityMatrix, qubits: Sequence[int], strength: float) -> DensityMatrix:
    return apply_noise(rho, NoiseChannel("depolarizing", strength, tuple(qubits)))


def project(rho: DensityMatrix, qubit: int, outcome: int) -> DensityMatrix:
    """Unnormalized projection of ``qubit`` onto ``|outcome>``."""
    _check_qubits(rho, [qubit])
    if outcome not in (0, 1):
        raise DomainError(f"outcome must be 0 or 1, got {outcome}")
    t = _as_tensor(rho).copy()
    n = rho.n_qubits
    idx = [slice(None)] * (2 * n)
    idx[qubit] = 1 - outcome
    t[tuple(idx)] = 0
    idx = [slice(None)] * (2 * n)
    idx[n + qubit] = 1 - outcome
    t[tuple(idx)] = 0
    return _from_tensor(t, n)


def postselect(rho: DensityMatrix, qubit: int, outcome: int) -> tuple[DensityMatrix, float]:
    """Project onto an outcome and renormalize.

    Returns:
        The conditional state and the branch probability relative to ``rho``'s
        own trace.

    Raises:
        ImpossibleOutcome: the branch has zero probability.
    """
    projected = project(rho, qubit, outcome)
    w = projected.trace_weight
    if w <= 1e-15 * max(rho.trace_weight, 1e-300):
        raise ImpossibleOutcome(qubit, outcome)
    return projected.normalized(), w / rho.trace_weight


def discard(rho: DensityMatrix, qubits: Sequence[int]) -> DensityMatrix:
    keep = [q for q in range(rho.n_qubits) if q not in set(qubits)]
    return partial_trace(rho, keep)


def bell_fidelity(rho: DensityMatrix, pair: tuple[int, int] = (0, 1)) -> float:
    """Overlap of the normalized reduced state on ``pair`` with |Phi+>."""
    red = partial_trace(rho, list(pair))
    w = red.trace_weight
    if w <= 0:
        raise DomainError("state has zero trace")
    return float((PHI_PLUS.conj() @ red.entries @ PHI_PLUS).real / w)


fidelity_to_phi_plus = bell_fidelity


def make_werner(f: float) -> DensityMatrix:
    """Two-qubit Werner state with |Phi+> weight ``f``."""
    if not 0.0 <= f <= 1.0:
        raise DomainError(f"fidelity {f} outside [0, 1]")
    m = f * np.outer(PHI_PLUS, PHI_PLUS)
    for name in ("phi-", "psi+", "psi-"):
        b = BELL_STATES[name]
        m = m + (1 - f) / 3 * np.outer(b, b.conj())
    return DensityMatrix(2, m)


def dump_text(rho: DensityMatrix, path: str | Path) -> None:
    """Write ``rho`` as plain text: a header line, then one row per matrix row.

    Each row lists ``re im`` pairs for every column, in ``repr`` precision.
    """
    lines = [f"# density-matrix n_qubits={rho.n_qubits} trace_weight={float(rho.trace_weight)!r}"]
    for row in rho.entries:
        lines.append(" ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_text(path: str | Path) -> DensityMatrix:
    rows = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    vals = np.array([[float(x) for x in ln.split()] for ln in rows])
    m = vals[:, 0::2] + 1j * vals[:, 1::2]
    n = int(round(np.log2(m.shape[0])))
    return DensityMatrix(n, m)
