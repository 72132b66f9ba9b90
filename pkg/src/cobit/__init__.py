"""Delegated NAND computation on simulated polarization qubits."""

from .states import (
    CobitState,
    NonUnitaryError,
    apply,
    basis_state,
    equal_up_to_global_phase,
    measure_z,
    ry,
    trace_distance,
)
from .plates import (
    PHI,
    THETA,
    PlateProgram,
    compile_nand_program,
    cumulative_operator,
    hwp,
    three_plate_nand,
)
from .protocol import (
    ClientCapability,
    RoundConfig,
    RoundResult,
    RoundTranscript,
    client_decode,
    run_round,
    server_measure,
    server_prepare,
)
from .noise import (
    CoherentSource,
    DriftSchedule,
    ExperimentConfig,
    HeraldedSource,
    NoiseModel,
    SuccessEstimate,
    calibrate_to_target,
    estimate_mean_success,
    estimate_success,
    stability_series,
)
from .blindness import (
    BlindnessReport,
    adversary_guess_experiment,
    averaged_view,
    builtin_strategies,
    run_blindness_audit,
)
from .circuits import (
    BoolCircuit,
    DelegationPlan,
    evaluate_delegated,
    lower,
    parse_netlist,
    reference_evaluate,
)
from .wire import (
    ClientWireConfig,
    ServerWireConfig,
    WireClient,
    WireServer,
    run_client,
    run_server,
)
from .config import RunConfig, load_config

__version__ = "0.1.0"
