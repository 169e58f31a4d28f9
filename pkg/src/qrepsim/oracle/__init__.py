"""Exact density-matrix reference simulator."""

from .circuits import (
    PauliCheckSpec,
    PcsCircuitConfig,
    bell_measure_swap,
    link_fidelity_for,
    simulate_distill,
    simulate_leung_shor_4to2,
    simulate_pcs,
    simulate_swap,
)
from .density import (
    DensityMatrix,
    NoiseChannel,
    apply_gate,
    apply_kraus,
    apply_noise,
    bell_fidelity,
    discard,
    dump_text,
    fidelity_to_phi_plus,
    load_text,
    make_werner,
    partial_trace,
    permute,
    postselect,
    project,
)

__all__ = [
    "DensityMatrix",
    "NoiseChannel",
    "PauliCheckSpec",
    "PcsCircuitConfig",
    "apply_gate",
    "apply_kraus",
    "apply_noise",
    "bell_fidelity",
    "bell_measure_swap",
    "discard",
    "dump_text",
    "fidelity_to_phi_plus",
    "link_fidelity_for",
    "load_text",
    "make_werner",
    "partial_trace",
    "permute",
    "postselect",
    "project",
    "simulate_distill",
    "simulate_leung_shor_4to2",
    "simulate_pcs",
    "simulate_swap",
]
