"""Command-line interface.

Subcommands:

    truth-table   success estimates for all four input pairs, split by pad
    stability     success sampled over elapsed time under drift
    blindness     exact blindness audit plus guessing-strategy scores
    circuit       lower a netlist and run it through delegated rounds
    serve         run the measuring server on a TCP endpoint
    connect       run delegated rounds against a server

Every command that draws randomness requires --seed; identical config and
seed give byte-identical delimited output.  Report commands with --out
write the table at the given path and a PNG figure next to it.

Exit codes: 0 success, 2 bad configuration or usage, 3 wire/protocol
failure, 4 blindness verdict failed, 5 delegated outputs disagree with the
reference evaluation.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import blindness as bl
from . import circuits as ci
from . import report as rp
from .config import ConfigError, RunConfig, apply_calibration, load_config
from .noise import CalibrationError, estimate_success
from .protocol import RoundConfig
from .wire import (
    ClientWireConfig,
    ServerWireConfig,
    WireClient,
    WireError,
    WireServer,
    parse_endpoint,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_WIRE = 3
EXIT_BLINDNESS = 4
EXIT_MISMATCH = 5


def _add_common(p: argparse.ArgumentParser, out: bool = True) -> None:
    p.add_argument("--config", metavar="PATH", help="YAML run configuration")
    p.add_argument("--seed", type=int, required=True, help="RNG seed (required)")
    if out:
        p.add_argument("--out", metavar="PATH", help="write table here, figure beside it")
        p.add_argument("--format", choices=("csv", "txt"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cobit", description="delegated NAND computation on simulated cobits"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("truth-table", help="success per input pair and pad value")
    _add_common(p)
    p.add_argument("--trials", type=int, help="override trials per input pair")
    p.add_argument("--mode", choices=("plates", "abstract"))
    p.add_argument("--copies", type=int, help="override copies per round")

    p = sub.add_parser("stability", help="success over elapsed time under drift")
    _add_common(p)
    p.add_argument("--trials", type=int, help="override trials per time point")

    p = sub.add_parser("blindness", help="server-view blindness audit")
    _add_common(p)
    p.add_argument("--mode", choices=("plates", "abstract"), default="plates")
    p.add_argument(
        "--no-pad",
        action="store_true",
        help="negative control: pin r = 0; the audit must fail",
    )
    p.add_argument("--rounds", type=int, default=2000, help="adversary harness rounds")

    p = sub.add_parser("circuit", help="run a netlist through delegated rounds")
    _add_common(p)
    p.add_argument("netlist", metavar="NETLIST", help="netlist file")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--inputs", metavar="BITS", help="one assignment, declaration order")
    g.add_argument("--all-inputs", action="store_true", help="sweep every assignment")
    p.add_argument(
        "--local-not", action="store_true", help="evaluate NOT locally via XOR"
    )

    p = sub.add_parser("serve", help="run the measuring server")
    p.add_argument("endpoint", metavar="HOST:PORT")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("connect", help="run rounds against a server")
    p.add_argument("endpoint", metavar="HOST:PORT")
    _add_common(p)
    p.add_argument("--a", type=int, choices=(0, 1), help="fixed input a")
    p.add_argument("--b", type=int, choices=(0, 1), help="fixed input b")
    p.add_argument("--uniform", action="store_true", help="fresh uniform inputs")
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--mode", choices=("plates", "abstract"), default="plates")
    p.add_argument("--timeout", type=float, default=5.0)
    return parser


def _load(args) -> RunConfig:
    return load_config(args.config)


def _print_calibration(results) -> None:
    for res in results:
        print(
            f"calibrated {res.free_param} = {res.value:.6g}"
            f" (achieved {res.achieved.overall.p_hat:.4f})"
        )


def cmd_truth_table(args) -> int:
    run = _load(args)
    if args.trials:
        run = dataclasses.replace(run, trials=args.trials)
    exp = run.experiment
    if args.mode:
        exp = dataclasses.replace(exp, mode=args.mode)
    if args.copies:
        exp = dataclasses.replace(exp, n_copies=args.copies)
    run = dataclasses.replace(run, experiment=exp)
    exp, cal = apply_calibration(run, args.seed)
    _print_calibration(cal)
    rng = np.random.default_rng(args.seed)
    table = {
        (a, b): estimate_success(a, b, exp, run.trials, rng)
        for a in (0, 1)
        for b in (0, 1)
    }
    for (a, b), est in sorted(table.items()):
        e = est.overall
        print(
            f"a={a} b={b}: success {e.p_hat:.4f} +/- {e.stderr:.4f}"
            f" ({e.n} conclusive, {est.inconclusive_fraction:.3f} inconclusive)"
        )
    print(f"grand mean success: {rp.grand_mean(table):.4f}")
    if args.out:
        out = Path(args.out)
        rp.write_truth_table(out, table, args.format)
        rp.render_truth_table(out.with_suffix(".png"), table)
        print(f"wrote {out} and {out.with_suffix('.png')}")
    return EXIT_OK


def cmd_stability(args) -> int:
    from .noise import stability_series

    run = _load(args)
    if args.trials:
        run = dataclasses.replace(run, trials=args.trials)
    exp, cal = apply_calibration(run, args.seed)
    _print_calibration(cal)
    rng = np.random.default_rng(args.seed)
    series = stability_series(
        exp, run.duration_min, run.points, run.trials, rng
    )
    for p in series:
        e = p.estimate.overall
        print(f"t={p.t_min:6.1f} min: success {e.p_hat:.4f} +/- {e.stderr:.4f}")
    if args.out:
        out = Path(args.out)
        rp.write_stability(out, series, args.format)
        rp.render_stability(out.with_suffix(".png"), series)
        print(f"wrote {out} and {out.with_suffix('.png')}")
    return EXIT_OK


def cmd_blindness(args) -> int:
    run = _load(args)
    audit = bl.run_blindness_audit(
        mode=args.mode, seed=args.seed, pad_removed=args.no_pad
    )
    rng = np.random.default_rng(args.seed)
    round_config = RoundConfig(
        mode=args.mode,
        n_copies=run.experiment.n_copies,
        noise=run.experiment.noise,
        force_r=0 if args.no_pad else None,
    )
    strategies = bl.builtin_strategies(args.seed) + [bl.PadLeakSanity()]
    scores = bl.adversary_guess_experiment(strategies, args.rounds, round_config, rng)
    for line in audit.to_lines():
        print(line)
    print("guessing strategies:")
    for sc in scores:
        print(
            f"  {sc.name}: inputs {sc.inputs_accuracy.p_hat:.4f},"
            f" AND {sc.and_accuracy.p_hat:.4f}"
        )
    if args.out:
        out = Path(args.out)
        rp.write_blindness(out, audit, scores, args.format)
        print(f"wrote {out}")
    return EXIT_OK if audit.passed else EXIT_BLINDNESS


def cmd_circuit(args) -> int:
    run = _load(args)
    try:
        circuit = ci.parse_netlist(Path(args.netlist).read_text())
    except OSError as exc:
        print(f"cannot read netlist: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ci.NetlistError as exc:
        print(f"netlist error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    plan = ci.lower(circuit, args.local_not)
    config = RoundConfig(
        mode=run.experiment.mode,
        n_copies=run.experiment.n_copies,
        noise=run.experiment.noise,
        seed=args.seed,
    )
    rng = np.random.default_rng(args.seed)
    print(
        f"{len(circuit.gates)} gate(s) -> {plan.delegated_rounds} delegated round(s),"
        f" {plan.local_xors} local XOR(s)"
    )
    try:
        if args.all_inputs:
            rows = []
            for value in range(1 << len(circuit.inputs)):
                bits = format(value, f"0{len(circuit.inputs)}b")
                assignment = ci.assignment_from_bits(circuit, bits)
                got = ci.evaluate_delegated(plan, assignment, config, rng).outputs
                want = ci.reference_evaluate(circuit, assignment)
                rows.append((assignment, got, want))
            bad = [row for row in rows if row[1] != row[2]]
            for assignment, got, want in rows:
                bits = "".join(str(assignment[k]) for k in circuit.inputs)
                mark = "ok" if got == want else "MISMATCH"
                print(f"{bits}: {got} [{mark}]")
            if args.out:
                out = Path(args.out)
                rp.write_circuit_sweep(
                    out, rows, circuit.inputs, circuit.outputs, args.format
                )
                print(f"wrote {out}")
            if bad:
                print(f"{len(bad)} assignment(s) disagree with reference", file=sys.stderr)
                return EXIT_MISMATCH
            return EXIT_OK
        assignment = ci.assignment_from_bits(circuit, args.inputs)
        result = ci.evaluate_delegated(plan, assignment, config, rng)
        want = ci.reference_evaluate(circuit, assignment)
        for name in circuit.outputs:
            print(f"{name} = {result.outputs[name]}")
        print(f"rounds used: {result.rounds_used}")
        if result.outputs != want:
            print(f"reference disagrees: {want}", file=sys.stderr)
            return EXIT_MISMATCH
        return EXIT_OK
    except ci.InconclusiveEvaluation as exc:
        print(f"evaluation failed: {exc}", file=sys.stderr)
        return EXIT_WIRE
    except ValueError as exc:
        print(f"bad inputs: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def cmd_serve(args) -> int:
    run = _load(args)
    try:
        host, port = parse_endpoint(args.endpoint)
        server = WireServer(
            host,
            port,
            ServerWireConfig(
                n_copies=run.wire_copies,
                noise=run.experiment.noise,
                seed=args.seed,
                time_min=run.experiment.time_min,
            ),
        ).start()
    except (ValueError, OSError) as exc:
        print(f"cannot serve: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, ValueError) else EXIT_WIRE
    print(f"listening on {server.host}:{server.port}", flush=True)
    try:
        import time as _time

        while True:
            _time.sleep(0.2)
    except KeyboardInterrupt:
        return EXIT_OK
    finally:
        server.close()


def cmd_connect(args) -> int:
    run = _load(args)
    if not args.uniform and (args.a is None or args.b is None):
        print("need --a and --b, or --uniform", file=sys.stderr)
        return EXIT_CONFIG
    rng = np.random.default_rng(args.seed)
    config = ClientWireConfig(
        mode=args.mode,
        timeout_s=args.timeout,
        seed=args.seed,
        plate_jitter_sigma=run.experiment.noise.plate_jitter_sigma,
    )
    rows = []
    try:
        host, port = parse_endpoint(args.endpoint)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    try:
        with WireClient(host, port, config) as client:
            for i in range(args.rounds):
                if args.uniform:
                    a, b = (int(x) for x in rng.integers(0, 2, size=2))
                else:
                    a, b = args.a, args.b
                result = client.run_round(a, b)
                nand = 1 - (a & b)
                rows.append((i, a, b, result.decoded, nand, result.cause))
    except (WireError, OSError) as exc:
        print(f"wire failure: {exc}", file=sys.stderr)
        return EXIT_WIRE
    conclusive = [r for r in rows if r[3] is not None]
    correct = sum(1 for r in conclusive if r[3] == r[4])
    print(
        f"{len(rows)} round(s): {len(conclusive)} conclusive,"
        f" {correct} correct,"
        f" {len(rows) - len(conclusive)} inconclusive"
    )
    if args.out:
        lines = ["round,a,b,decoded,expected,cause"]
        for i, a, b, dec, nand, cause in rows:
            dec_s = "" if dec is None else str(dec)
            lines.append(f"{i},{a},{b},{dec_s},{nand},{cause or ''}")
        Path(args.out).write_text("\n".join(lines) + "\n")
        print(f"wrote {args.out}")
    return EXIT_OK


_COMMANDS = {
    "truth-table": cmd_truth_table,
    "stability": cmd_stability,
    "blindness": cmd_blindness,
    "circuit": cmd_circuit,
    "serve": cmd_serve,
    "connect": cmd_connect,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
