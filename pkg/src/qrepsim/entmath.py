"""Closed-form entanglement algebra for Werner-state links.

Every function here is pure. Fidelities are overlaps with |Phi+>; the
maximally mixed two-qubit state sits at 0.25, which is the lower edge of the
Werner regime for the swap, distillation and Pauli-check formulas.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

from .errors import BoundsError, DegenerateInputError, DomainError

MIXED_FIDELITY = 0.25

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class FlatObjectiveWarning(RuntimeWarning):
    """The pump search found no interior improvement over its endpoints."""


class PcsPrediction(NamedTuple):
    postselect_prob: float
    output_fidelity: float


class DistillResult(NamedTuple):
    success_prob: float
    out_fidelity: float


@dataclass(frozen=True)
class CarParams:
    """Parameters of the coincidences-to-accidentals model.

    Attributes:
        alpha_s: signal-arm transmittance, in (0, 1].
        alpha_i: idler-arm transmittance, in (0, 1].
        mu_c: mean correlated pairs per pulse.
        mu_sn: mean noise photons per pulse in the signal arm.
        mu_in: mean noise photons per pulse in the idler arm.
        d_s: mean signal dark counts per coincidence window.
        d_i: mean idler dark counts per coincidence window.
    """

    alpha_s: float
    alpha_i: float
    mu_c: float
    mu_sn: float = 0.0
    mu_in: float = 0.0
    d_s: float = 0.0
    d_i: float = 0.0

    def __post_init__(self):
        for name in ("alpha_s", "alpha_i"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise DomainError(f"{name} must lie in (0, 1], got {v}")
        for name in ("mu_c", "mu_sn", "mu_in", "d_s", "d_i"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise DomainError(f"{name} must be finite and >= 0, got {v}")

    def with_mu_c(self, mu_c: float) -> "CarParams":
        return replace(self, mu_c=mu_c)


@dataclass(frozen=True)
class InterferenceCounts:
    n_max: float
    n_min: float

    def __post_init__(self):
        if self.n_min < 0 or self.n_max < 0:
            raise DomainError("interference counts must be nonnegative")
        if self.n_min > self.n_max:
            raise DomainError(f"n_min={self.n_min} exceeds n_max={self.n_max}")


def _check_werner(name: str, f: float) -> None:
    if not MIXED_FIDELITY <= f <= 1.0:
        raise DomainError(f"{name}={f} outside the Werner range [0.25, 1]")


def _check_fidelity(name: str, f: float) -> None:
    if not 0.0 <= f <= 1.0:
        raise DomainError(f"{name}={f} outside [0, 1]")


def pcs_x_predict(f: float) -> PcsPrediction:
    """Postselection probability and fidelity for Pauli X checks.

    Args:
        f: Bell fidelity the repeater link would deliver without checks.

    Returns:
        PcsPrediction with ``c = (1 + 2f)^2 / 9`` and ``F' = 9 f^2 / (1 + 2f)^2``.
    """
    _check_werner("f", f)
    s = 1.0 + 2.0 * f
    return PcsPrediction(s * s / 9.0, 9.0 * f * f / (s * s))


def pcs_xz_predict(f: float) -> PcsPrediction:
    """Postselection probability and fidelity for combined X and Z checks."""
    _check_werner("f", f)
    r = math.sqrt(12.0 * f - 3.0)
    c = (3.0 + 6.0 * f - r + 4.0 * f * r) ** 2 / 324.0
    num = 1.0 + 52.0 * f * f - r - 2.0 * f * (4.0 + r)
    den = (r - 1.0 - 8.0 * f) ** 2
    return PcsPrediction(c, num / den)


def swap_fidelity(f1: float, f2: float) -> float:
    """Fidelity after an ideal Bell-measurement swap of two Werner pairs."""
    _check_werner("f1", f1)
    _check_werner("f2", f2)
    return f1 * f2 + (1.0 - f1) * (1.0 - f2) / 3.0


def distill_bbpssw(f1: float, f2: float) -> DistillResult:
    """One round of 2-to-1 recurrence distillation on Werner inputs.

    Bilateral CNOT from the first pair onto the second, both target qubits
    measured in Z, kept when the outcomes agree.
    """
    _check_werner("f1", f1)
    _check_werner("f2", f2)
    e1 = (1.0 - f1) / 3.0
    e2 = (1.0 - f2) / 3.0
    p = (f1 + e1) * (f2 + e2) + 4.0 * e1 * e2
    return DistillResult(p, (f1 * f2 + e1 * e2) / p)


def werner_decohere(f0: float, elapsed: float, t_coh: float) -> float:
    """Exponential relaxation of a stored pair toward the mixed fidelity 0.25."""
    _check_fidelity("f0", f0)
    if not t_coh > 0:
        raise DomainError(f"t_coh must be positive, got {t_coh}")
    if elapsed < 0:
        raise DomainError(f"elapsed must be >= 0, got {elapsed}")
    if elapsed == 0:
        return f0
    return MIXED_FIDELITY + (f0 - MIXED_FIDELITY) * math.exp(-elapsed / t_coh)


def decohere_until(f0: float, threshold: float, t_coh: float) -> float:
    """Time for ``werner_decohere`` to fall from ``f0`` to ``threshold``.

    Returns ``inf`` when the threshold is never reached and 0 when ``f0`` is
    already at or below it.
    """
    if f0 <= threshold:
        return 0.0
    if threshold <= MIXED_FIDELITY:
        return math.inf
    return t_coh * math.log((f0 - MIXED_FIDELITY) / (threshold - MIXED_FIDELITY))


def car_model(p: CarParams) -> float:
    """Coincidences-to-accidentals ratio for a pair source under coexistence noise."""
    num = p.alpha_s * p.alpha_i * p.mu_c
    den = ((p.mu_c + p.mu_sn) * p.alpha_s + p.d_s) * ((p.mu_c + p.mu_in) * p.alpha_i + p.d_i)
    if den == 0.0:
        raise DegenerateInputError("both CAR denominator factors vanish (no pairs, noise or dark counts)")
    return num / den + 1.0


def optimal_pump(fixed: CarParams, bounds: tuple[float, float], rtol: float = 1e-6) -> tuple[float, float]:
    """Pump level ``mu_c`` that maximizes CAR inside ``bounds``.

    ``fixed.mu_c`` is ignored. The objective is unimodal in ``mu_c``, so a
    golden-section search on ``log(mu_c)`` is run to relative width ``rtol``
    and the result compared with both endpoints.

    Returns:
        ``(mu_c_star, car_star)``.
    """
    lo, hi = bounds
    if not (lo > 0 and hi > lo and math.isfinite(hi)):
        raise BoundsError(f"need 0 < lo < hi < inf, got ({lo}, {hi})")

    def car_at(mu: float) -> float:
        return car_model(fixed.with_mu_c(mu))

    a, b = math.log(lo), math.log(hi)
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    g1, g2 = car_at(math.exp(x1)), car_at(math.exp(x2))
    tol = math.log1p(rtol)
    while b - a > tol:
        if g1 >= g2:
            b, x2, g2 = x2, x1, g1
            x1 = b - _INV_PHI * (b - a)
            g1 = car_at(math.exp(x1))
        else:
            a, x1, g1 = x1, x2, g2
            x2 = a + _INV_PHI * (b - a)
            g2 = car_at(math.exp(x2))

    mid = math.exp(0.5 * (a + b))
    candidates = [(car_at(mid), mid), (car_at(lo), lo), (car_at(hi), hi)]
    car_star, mu_star = max(candidates, key=lambda t: t[0])
    if car_star - max(candidates[1][0], candidates[2][0]) < 1e-12:
        warnings.warn(
            f"CAR objective shows no interior gain on [{lo}, {hi}]; returning endpoint-level value",
            FlatObjectiveWarning,
            stacklevel=2,
        )
    return mu_star, car_star


def visibility(counts: InterferenceCounts) -> float:
    total = counts.n_max + counts.n_min
    if total == 0:
        raise DegenerateInputError("visibility undefined with zero counts")
    return (counts.n_max - counts.n_min) / total


def coexistence_fidelity(source_fidelity: float, car: float) -> float:
    """Effective link fidelity when accidentals mix in white noise at weight 1/CAR."""
    _check_werner("source_fidelity", source_fidelity)
    if not car >= 1.0:
        raise DomainError(f"CAR must be >= 1, got {car}")
    if math.isinf(car):
        return source_fidelity
    w = 1.0 / car
    return (1.0 - w) * source_fidelity + w * MIXED_FIDELITY
