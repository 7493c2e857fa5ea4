"""Certified trace-distance error bounds for noisy quantum circuits."""

from .circuit import (
    BasisState,
    CircuitError,
    Gate,
    IfMeasure,
    Program,
    Seq,
    Skip,
    gate_count,
    parse_program,
    print_program,
)
from .channels import (
    Channel,
    ChannelError,
    HermitianMap,
    NoiseModel,
    bit_flip,
    decoherence,
    depolarizing,
    parse_noise_model,
    pauli_twirl,
    phase_flip,
)
from .densesim import exact_error, exec_ideal, exec_noisy, partial_trace, trace_distance
from .diamond import (
    DualCertificate,
    SolverError,
    constrained_bound,
    constrained_diamond_norm,
    sampled_lower_bound,
    unconstrained_bound,
    unconstrained_diamond_norm,
    verify_certificate,
    worst_case_bound,
)
from .mps import MpsState, run_branch, run_tn
from .logic import (
    Report,
    analyze,
    check,
    compare_models,
    compare_noise_models,
    derivation_from_json,
    derivation_to_json,
)
from .bench import gen_bench

__version__ = "0.1.0"
