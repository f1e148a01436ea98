"""Exact Fock-space simulation of post-selected linear-optical CPF and Toffoli gates."""

from .analysis import (
    SweepTable,
    TruthTable,
    UndefinedFidelityError,
    average_over_alpha2,
    gate_fidelity,
    kraus_map,
    success_probability,
    sweep_alpha2,
    truth_table,
)
from .elements import BS, HWP, PBS, SIGMA_X, SIGMA_Z, ElementSpec, bs, hwp, pauli, pbs
from .engine import (
    BranchOutcome,
    Checkpoint,
    Circuit,
    ConfigurationError,
    Detect,
    DetectionRule,
    FeedForwardRule,
    PreconditionError,
    Reroute,
    measure_polarization,
    post_select,
    run,
    success_branches,
    total_probability,
    trace_checkpoint,
)
from .fock import (
    BasisKet,
    FockError,
    FockState,
    ModeId,
    ModeUnitary,
    Pol,
    RegistryError,
    SectorError,
    ValidationError,
    ZeroNormError,
    apply_mode_unitary,
    inner_product,
    normalize,
    permanent,
    permanent_amplitude,
)
from .gates import (
    GateOptions,
    build_cpf_circuit,
    build_toffoli_circuit,
    decode_output,
    encode_input,
    encode_logical,
    ideal_gate,
)

__version__ = "0.1.0"
