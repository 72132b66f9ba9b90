"""Boolean circuits lowered to delegated NAND rounds plus local XOR.

Circuits come from a small netlist format (one gate per line, INPUT/OUTPUT
declarations, '#' comments; grammar in the README).  Lowering targets the
delegation model: every NAND is one delegated round, XOR stays local.  By
default NOT is also delegated as NAND(x, x), so derived gates cost

    NAND = 1, NOT = 1, AND = 2, OR = 3 delegated rounds.

With local_not=True, NOT becomes a local XOR against a constant-one wire
and AND/OR drop to one round each; this leaks nothing extra (the constant
never reaches the server) but is kept off by default so the conservative
cost model above is what plans report.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .protocol import RoundConfig, RoundTranscript, run_round

GATE_ARITY = {"NAND": 2, "AND": 2, "OR": 2, "XOR": 2, "NOT": 1}

# Conservative delegated-round cost per source gate.
ROUND_COST = {"NAND": 1, "NOT": 1, "AND": 2, "OR": 3, "XOR": 0}
ROUND_COST_LOCAL_NOT = {"NAND": 1, "NOT": 0, "AND": 1, "OR": 1, "XOR": 0}

MAX_INPUTS = 64

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_GATE_LINE = re.compile(
    r"(?P<out>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<op>[A-Za-z]+)\s*"
    r"\(\s*(?P<args>[^)]*)\)$"
)


class NetlistError(ValueError):
    """Netlist parse or validation failure, with a line number when known."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Gate:
    out: str
    op: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class BoolCircuit:
    """Gates in definition order; arguments must be defined before use."""

    inputs: tuple[str, ...]
    gates: tuple[Gate, ...]
    outputs: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.inputs:
            raise NetlistError("circuit has no inputs")
        if len(self.inputs) > MAX_INPUTS:
            raise NetlistError(f"more than {MAX_INPUTS} inputs")
        defined = set()
        for name in self.inputs:
            if not _NAME.match(name):
                raise NetlistError(f"bad wire name {name!r}")
            if name in defined:
                raise NetlistError(f"duplicate input {name!r}")
            defined.add(name)
        for g in self.gates:
            if g.op not in GATE_ARITY:
                raise NetlistError(f"unknown gate {g.op!r}")
            if len(g.args) != GATE_ARITY[g.op]:
                raise NetlistError(
                    f"{g.op} takes {GATE_ARITY[g.op]} argument(s), got {len(g.args)}"
                )
            for arg in g.args:
                if arg not in defined:
                    raise NetlistError(f"wire {arg!r} used before definition")
            if g.out in defined:
                raise NetlistError(f"wire {g.out!r} defined twice")
            if not _NAME.match(g.out):
                raise NetlistError(f"bad wire name {g.out!r}")
            defined.add(g.out)
        if not self.outputs:
            raise NetlistError("circuit has no outputs")
        for name in self.outputs:
            if name not in defined:
                raise NetlistError(f"output {name!r} is never defined")

    @property
    def wire_names(self) -> set[str]:
        return set(self.inputs) | {g.out for g in self.gates}


def parse_netlist(text: str) -> BoolCircuit:
    """Parse netlist source into a validated circuit."""
    inputs: list[str] = []
    outputs: list[str] = []
    gates: list[Gate] = []
    defined: set[str] = set()
    output_lines: dict[str, int] = {}  # OUTPUT may precede the defining gate
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head = line.split(None, 1)
        if head[0] in ("INPUT", "OUTPUT"):
            if len(head) < 2:
                raise NetlistError(f"{head[0]} needs at least one name", lineno)
            names = [n.strip() for n in head[1].split(",")]
            for name in names:
                if not _NAME.match(name):
                    raise NetlistError(f"bad wire name {name!r}", lineno)
                if head[0] == "INPUT":
                    if name in defined:
                        raise NetlistError(f"duplicate input {name!r}", lineno)
                    defined.add(name)
                else:
                    output_lines[name] = lineno
            (inputs if head[0] == "INPUT" else outputs).extend(names)
            continue
        m = _GATE_LINE.match(line)
        if not m:
            raise NetlistError(f"cannot parse {line!r}", lineno)
        op = m.group("op").upper()
        if op not in GATE_ARITY:
            raise NetlistError(f"unknown gate {op!r}", lineno)
        args = tuple(s.strip() for s in m.group("args").split(",") if s.strip())
        if len(args) != GATE_ARITY[op]:
            raise NetlistError(
                f"{op} takes {GATE_ARITY[op]} argument(s), got {len(args)}", lineno
            )
        for arg in args:
            if arg not in defined:
                raise NetlistError(f"wire {arg!r} used before definition", lineno)
        out = m.group("out")
        if out in defined:
            raise NetlistError(f"wire {out!r} defined twice", lineno)
        defined.add(out)
        gates.append(Gate(out, op, args))
    for name, lineno in output_lines.items():
        if name not in defined:
            raise NetlistError(f"output {name!r} is never defined", lineno)
    try:
        return BoolCircuit(tuple(inputs), tuple(gates), tuple(outputs))
    except NetlistError:
        raise
    except ValueError as exc:  # pragma: no cover - defensive
        raise NetlistError(str(exc)) from exc


def format_netlist(circuit: BoolCircuit) -> str:
    """Render a circuit back to netlist source."""
    lines = [f"INPUT {name}" for name in circuit.inputs]
    lines += [f"{g.out} = {g.op}({', '.join(g.args)})" for g in circuit.gates]
    lines += [f"OUTPUT {name}" for name in circuit.outputs]
    return "\n".join(lines) + "\n"


_LOCAL_EVAL = {
    "NAND": lambda x, y: 1 - (x & y),
    "AND": lambda x, y: x & y,
    "OR": lambda x, y: x | y,
    "XOR": lambda x, y: x ^ y,
    "NOT": lambda x: 1 - x,
}


def reference_evaluate(circuit: BoolCircuit, assignment: dict[str, int]) -> dict[str, int]:
    """Plain boolean evaluation; the oracle the delegated path is checked against."""
    wires = _check_assignment(circuit.inputs, assignment)
    for g in circuit.gates:
        wires[g.out] = _LOCAL_EVAL[g.op](*(wires[a] for a in g.args))
    return {name: wires[name] for name in circuit.outputs}


def _check_assignment(inputs: tuple[str, ...], assignment: dict[str, int]) -> dict[str, int]:
    if set(assignment) != set(inputs):
        raise ValueError(
            f"assignment keys {sorted(assignment)} != inputs {sorted(inputs)}"
        )
    for name, v in assignment.items():
        if v not in (0, 1):
            raise ValueError(f"input {name!r} must be 0 or 1, got {v!r}")
    return dict(assignment)


def assignment_from_bits(circuit: BoolCircuit, bits: str) -> dict[str, int]:
    """Map a bitstring like '101' onto the inputs in declaration order."""
    if len(bits) != len(circuit.inputs) or any(c not in "01" for c in bits):
        raise ValueError(
            f"need {len(circuit.inputs)} bits for inputs {circuit.inputs}, got {bits!r}"
        )
    return {name: int(c) for name, c in zip(circuit.inputs, bits)}


# ---------------------------------------------------------------------------
# lowering


@dataclass(frozen=True)
class PlanStep:
    kind: str  # "nand" (delegated) | "xor" (local)
    out: str
    args: tuple[str, str]


@dataclass(frozen=True)
class DelegationPlan:
    """Execution plan: delegated NANDs and local XORs over named wires."""

    inputs: tuple[str, ...]
    steps: tuple[PlanStep, ...]
    outputs: tuple[str, ...]
    const_one: str | None = None  # present only when lowered with local_not

    @property
    def delegated_rounds(self) -> int:
        return sum(1 for s in self.steps if s.kind == "nand")

    @property
    def local_xors(self) -> int:
        return sum(1 for s in self.steps if s.kind == "xor")


def expected_rounds(circuit: BoolCircuit, local_not: bool = False) -> int:
    """Delegated-round count implied by the per-gate cost model."""
    cost = ROUND_COST_LOCAL_NOT if local_not else ROUND_COST
    return sum(cost[g.op] for g in circuit.gates)


def lower(circuit: BoolCircuit, local_not: bool = False) -> DelegationPlan:
    """Rewrite every gate into delegated NANDs plus local XORs."""
    taken = set(circuit.wire_names)
    counter = 0

    def fresh(stem: str) -> str:
        nonlocal counter
        while True:
            name = f"_t{counter}_{stem}"
            counter += 1
            if name not in taken:
                taken.add(name)
                return name

    const_one = None
    if local_not:
        const_one = fresh("one")

    steps: list[PlanStep] = []

    def nand(out: str, x: str, y: str) -> None:
        steps.append(PlanStep("nand", out, (x, y)))

    def xor(out: str, x: str, y: str) -> None:
        steps.append(PlanStep("xor", out, (x, y)))

    def negate(out: str, x: str) -> None:
        if local_not:
            xor(out, x, const_one)
        else:
            nand(out, x, x)

    for g in circuit.gates:
        if g.op == "NAND":
            nand(g.out, *g.args)
        elif g.op == "XOR":
            xor(g.out, *g.args)
        elif g.op == "NOT":
            negate(g.out, g.args[0])
        elif g.op == "AND":
            t = fresh(g.out)
            nand(t, *g.args)
            negate(g.out, t)
        elif g.op == "OR":
            nx, ny = fresh(g.out), fresh(g.out)
            negate(nx, g.args[0])
            negate(ny, g.args[1])
            nand(g.out, nx, ny)
    return DelegationPlan(
        inputs=circuit.inputs,
        steps=tuple(steps),
        outputs=circuit.outputs,
        const_one=const_one,
    )


# ---------------------------------------------------------------------------
# delegated execution


class InconclusiveEvaluation(RuntimeError):
    """A delegated round came back inconclusive; the evaluation stops."""

    def __init__(self, step_index: int, wire: str) -> None:
        self.step_index = step_index
        self.wire = wire
        super().__init__(f"inconclusive delegated round at step {step_index} ({wire!r})")


@dataclass(frozen=True)
class EvalResult:
    """Delegated evaluation outcome.

    wire_values is client-side bookkeeping; nothing here is shown to the
    server, whose entire view per round is the padded states and s.
    """

    outputs: dict[str, int]
    transcripts: tuple[RoundTranscript, ...]
    wire_values: dict[str, int] = field(repr=False, default_factory=dict)

    @property
    def rounds_used(self) -> int:
        return len(self.transcripts)


def evaluate_delegated(
    plan: DelegationPlan,
    assignment: dict[str, int],
    config: RoundConfig = RoundConfig(),
    rng: np.random.Generator | None = None,
) -> EvalResult:
    """Run the plan, delegating each NAND as one protocol round."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    wires = _check_assignment(plan.inputs, assignment)
    if plan.const_one is not None:
        wires[plan.const_one] = 1
    transcripts: list[RoundTranscript] = []
    for i, step in enumerate(plan.steps):
        x, y = (wires[a] for a in step.args)
        if step.kind == "xor":
            wires[step.out] = x ^ y
            continue
        result = run_round(x, y, config, rng)
        if result.decoded is None:
            raise InconclusiveEvaluation(i, step.out)
        wires[step.out] = result.decoded
        transcripts.append(result.transcript)
    outputs = {name: wires[name] for name in plan.outputs}
    return EvalResult(outputs, tuple(transcripts), wires)


def sweep_all_inputs(
    circuit: BoolCircuit,
    config: RoundConfig = RoundConfig(),
    rng: np.random.Generator | None = None,
    local_not: bool = False,
) -> list[tuple[dict[str, int], dict[str, int], dict[str, int]]]:
    """Delegated vs reference outputs for every input assignment.

    Returns (assignment, delegated, reference) triples; feasible for up to
    MAX_INPUTS inputs in principle but exhaustive only when 2^n is sane, so
    callers should keep n small.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    plan = lower(circuit, local_not)
    rows = []
    n = len(circuit.inputs)
    for value in range(1 << n):
        bits = format(value, f"0{n}b")
        assignment = assignment_from_bits(circuit, bits)
        got = evaluate_delegated(plan, assignment, config, rng).outputs
        want = reference_evaluate(circuit, assignment)
        rows.append((assignment, got, want))
    return rows


def random_circuit(
    rng: np.random.Generator, n_inputs: int = 6, n_gates: int = 20
) -> BoolCircuit:
    """Random well-formed circuit; every op equally likely, args reuse any wire."""
    if not 1 <= n_inputs <= MAX_INPUTS:
        raise ValueError("n_inputs out of range")
    inputs = tuple(f"x{i}" for i in range(n_inputs))
    wires = list(inputs)
    ops = sorted(GATE_ARITY)
    gates = []
    for i in range(n_gates):
        op = ops[int(rng.integers(len(ops)))]
        k = GATE_ARITY[op]
        args = tuple(wires[int(j)] for j in rng.integers(len(wires), size=k))
        out = f"w{i}"
        gates.append(Gate(out, op, args))
        wires.append(out)
    n_out = int(rng.integers(1, min(4, n_gates) + 1))
    outputs = tuple(f"w{i}" for i in range(n_gates - n_out, n_gates))
    return BoolCircuit(inputs, tuple(gates), outputs)
