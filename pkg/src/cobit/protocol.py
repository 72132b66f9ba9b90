"""Client and server roles for one delegated NAND round.

Flow: the server prepares copies of |0>, the client transforms them with a
plate program (or the equivalent abstract rotation sequence) that encodes
its inputs a, b XOR-padded by a fresh secret bit r, the server measures in
the computational basis and reports the dominant outcome s, and the client
decodes NAND(a, b) = s ^ 1 ^ r.  The pad bit never leaves the client.

The client role is deliberately thin: everything it does routes through
ClientCapability (XOR, fresh random bits, plate selection and application).
Nothing in the client code path measures a state or reads amplitudes; a
structural test enforces this.

An inconclusive round (no surviving detection) is represented as s = None.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .noise import NoiseModel
from .plates import PlateProgram, compile_nand_program, hwp
from .states import CobitState, apply, basis_state, measure_z, rotation, ry

INCONCLUSIVE = None

_U = ry(np.pi / 2.0)
_X = np.array([[0.0, 1.0], [1.0, 0.0]])


def abstract_round_operator(a: int, b: int, r: int) -> np.ndarray:
    """X^r (U+)^(a^b) U^b U^a with U = ry(pi/2), as a single matrix."""
    op = np.linalg.matrix_power(_U, a + b)
    if a ^ b:
        op = _U.T @ op
    if r:
        op = _X @ op
    return op


@dataclass
class ClientCapability:
    """The restricted toolbox the client is allowed to use."""

    rng: np.random.Generator

    def xor(self, *bits: int) -> int:
        out = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError(f"xor takes bits, got {b!r}")
            out ^= b
        return out

    def fresh_bit(self) -> int:
        return int(self.rng.integers(0, 2))

    def nand_program(self, a: int, b: int, r: int) -> PlateProgram:
        return compile_nand_program(a, b, r)

    def apply_program(
        self,
        batch: list[CobitState],
        program: PlateProgram,
        jitter_sigma: float = 0.0,
        bench_rng: np.random.Generator | None = None,
    ) -> list[CobitState]:
        """Send each copy through the physical plates, with setting jitter."""
        angles = np.array(program.angles)
        if jitter_sigma > 0.0:
            if bench_rng is None:
                raise ValueError("jitter requires a bench rng")
            angles = angles + bench_rng.normal(0.0, jitter_sigma, size=angles.shape)
        op = np.eye(2)
        for alpha in angles:
            op = hwp(float(alpha)) @ op
        return [apply(op, s) for s in batch]

    def apply_abstract(
        self, batch: list[CobitState], a: int, b: int, r: int
    ) -> list[CobitState]:
        """Apply X^r (U+)^(a^b) U^b U^a directly, without plates."""
        op = abstract_round_operator(a, b, r)
        return [apply(op, s) for s in batch]


@dataclass(frozen=True)
class RoundTranscript:
    """Client-side record of one round; the pad r stays in this process."""

    a: int
    b: int
    r: int
    n_copies: int
    s: int | None
    decoded: int | None
    mode: str
    ticks: tuple[int, int, int]  # monotonic ns at prepare / transform / measure


@dataclass(frozen=True)
class ServerView:
    """Everything the server sees in a round: padded states and the outcome."""

    states: tuple[CobitState, ...]
    s: int | None


@dataclass(frozen=True)
class RoundResult:
    decoded: int | None
    transcript: RoundTranscript
    view: ServerView | None = None
    cause: str | None = None


@dataclass(frozen=True)
class RoundConfig:
    mode: str = "plates"  # "plates" | "abstract"
    n_copies: int = 1
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    time_min: float = 0.0
    force_r: int | None = None  # tests and the no-pad control only
    record_view: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("plates", "abstract"):
            raise ValueError(f"mode must be 'plates' or 'abstract', got {self.mode!r}")
        if self.n_copies < 1:
            raise ValueError("n_copies must be >= 1")
        if self.force_r not in (None, 0, 1):
            raise ValueError("force_r must be None, 0 or 1")


def server_prepare(n_copies: int) -> list[CobitState]:
    """n identical |0> copies."""
    if n_copies < 1:
        raise ValueError("n_copies must be >= 1")
    return [basis_state(0) for _ in range(n_copies)]


def client_transform_plates(
    batch: list[CobitState],
    a: int,
    b: int,
    cap: ClientCapability,
    jitter_sigma: float = 0.0,
    bench_rng: np.random.Generator | None = None,
    force_r: int | None = None,
) -> tuple[list[CobitState], int]:
    """Pick a fresh pad, compile the four-plate program, run the batch through."""
    r = cap.fresh_bit() if force_r is None else force_r
    program = cap.nand_program(a, b, r)
    return cap.apply_program(batch, program, jitter_sigma, bench_rng), r


def client_transform_abstract(
    batch: list[CobitState],
    a: int,
    b: int,
    cap: ClientCapability,
    force_r: int | None = None,
) -> tuple[list[CobitState], int]:
    """Abstract-gate version of the client transform."""
    r = cap.fresh_bit() if force_r is None else force_r
    return cap.apply_abstract(batch, a, b, r), r


def server_measure(
    batch: list[CobitState],
    rng: np.random.Generator,
    detector_efficiency: float = 1.0,
    dark_count_prob: float = 0.0,
) -> int | None:
    """Majority vote over detected computational-basis outcomes.

    Undetected copies contribute nothing; a dark count contributes one
    uniformly random outcome.  Ties break uniformly at random; zero
    detections give INCONCLUSIVE.
    """
    outcomes = []
    for state in batch:
        if detector_efficiency >= 1.0 or rng.random() < detector_efficiency:
            outcomes.append(measure_z(state, rng))
    if dark_count_prob > 0.0 and rng.random() < dark_count_prob:
        outcomes.append(int(rng.integers(0, 2)))
    if not outcomes:
        return INCONCLUSIVE
    ones = sum(outcomes)
    zeros = len(outcomes) - ones
    if ones == zeros:
        return int(rng.integers(0, 2))
    return int(ones > zeros)


def client_decode(s: int | None, r: int) -> int | None:
    """NAND(a, b) = s ^ 1 ^ r; inconclusive rounds stay inconclusive."""
    if s is INCONCLUSIVE:
        return INCONCLUSIVE
    return s ^ 1 ^ r


def run_round(
    a: int,
    b: int,
    config: RoundConfig = RoundConfig(),
    rng: np.random.Generator | None = None,
) -> RoundResult:
    """One full delegated NAND round, in process."""
    if a not in (0, 1) or b not in (0, 1):
        raise ValueError(f"inputs must be bits, got a={a!r}, b={b!r}")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    noise = config.noise
    cap = ClientCapability(rng)

    t0 = time.monotonic_ns()
    batch = server_prepare(config.n_copies)

    # Fiber drift: one slow rotation per round, same on both paths.
    eps = noise.drift.sample(config.time_min, rng)
    rot = rotation(eps) if eps != 0.0 else None
    if rot is not None:
        batch = [apply(rot, s) for s in batch]

    if config.mode == "plates":
        batch, r = client_transform_plates(
            batch, a, b, cap, noise.plate_jitter_sigma, rng, config.force_r
        )
    else:
        batch, r = client_transform_abstract(batch, a, b, cap, config.force_r)
    t1 = time.monotonic_ns()

    if rot is not None:
        batch = [apply(rot, s) for s in batch]
    if noise.loss_prob > 0.0:
        batch = [s for s in batch if rng.random() >= noise.loss_prob]

    s = server_measure(batch, rng, noise.detector_efficiency, noise.dark_count_prob)
    t2 = time.monotonic_ns()

    decoded = client_decode(s, r)
    transcript = RoundTranscript(
        a=a,
        b=b,
        r=r,
        n_copies=config.n_copies,
        s=s,
        decoded=decoded,
        mode=config.mode,
        ticks=(t0, t1, t2),
    )
    view = ServerView(tuple(batch), s) if config.record_view else None
    cause = "no_detection" if s is INCONCLUSIVE else None
    return RoundResult(decoded, transcript, view, cause)
