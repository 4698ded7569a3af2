"""Command-line front-end: ``gen``, ``run``, ``validate`` and ``compare``.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 I/O or format error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import (CapacityError, ComparisonError, ConfigurationError, FormatError, SimError)
from .formats import load_inputs, load_network, save_inputs, save_network
from .mapping import CrossbarDims
from .pipeline import RunConfig, outputs_csv, run, validate, workload_hash
from .report import CostReport, TechConstants, compare

log = logging.getLogger("tacitsim")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t]


def _adc(text: str):
    if text == "ideal":
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--adc takes 'ideal' or a bit count, got {text!r}")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--network", required=True, help="network manifest (JSON)")
    p.add_argument("--weights", required=True, help="packed weights file")
    p.add_argument("--inputs", required=True, help="inputs file")
    p.add_argument("--mapping", choices=("tacit", "custbinary"), default="tacit")
    p.add_argument("--backend", choices=("epcm", "opcm"), default="epcm")
    p.add_argument("--crossbar", default="128x128", help="crossbar size MxN (default 128x128)")
    p.add_argument("--adc", type=_adc, default=None, help="'ideal' or ADC resolution in bits")
    p.add_argument("--wdm-k", type=int, default=16, help="WDM capacity K (oPCM only)")
    p.add_argument("--tech", help="JSON file overriding technology constants")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--counter-bits", type=int, default=5,
                   help="width of CustBinaryMap local popcount counters")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tacitsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a network and write cost report + outputs")
    _add_run_flags(p)
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")

    p = sub.add_parser("validate", help="check simulated dots against the reference engine")
    _add_run_flags(p)
    p.add_argument("--inject-fault", type=_int_list, metavar="LAYER,TILE,ROW,COL",
                   help="flip one device bit before validating")

    p = sub.add_parser("compare", help="normalize cost reports against a baseline design")
    p.add_argument("reports", nargs="+", help="report.json files written by 'run'")
    p.add_argument("--baseline", default="custbinary-epcm")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("gen", help="write a seeded synthetic workload")
    p.add_argument("--kind", choices=("mlp", "cnn", "single"), default="mlp")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=8, help="number of input samples")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--name", help="network name (defaults to the kind)")
    p.add_argument("--input-size", type=int, default=32, help="MLP input features")
    p.add_argument("--hidden", type=_int_list, default=[64, 32], help="MLP/CNN hidden widths")
    p.add_argument("--channels", type=_int_list, default=[8, 8], help="CNN conv channels")
    p.add_argument("--image", default="1x8x8", help="CNN input CxHxW")
    p.add_argument("--m", type=int, default=16, help="single: weight vector length")
    p.add_argument("--n", type=int, default=32, help="single: weight vector count")
    p.add_argument("--classes", type=int, default=10)
    return parser


def _config(args) -> RunConfig:
    tech = TechConstants.load(args.tech) if args.tech else TechConstants()
    return RunConfig(args.mapping, args.backend, CrossbarDims.parse(args.crossbar), args.adc,
                     args.wdm_k, tech, args.seed, args.counter_bits)


def _load_workload(args):
    net = load_network(args.network, args.weights)
    inputs = load_inputs(args.inputs)
    try:
        blobs = [Path(p).read_bytes() for p in (args.network, args.weights, args.inputs)]
    except OSError as exc:
        raise FormatError(str(exc)) from exc
    return net, inputs, workload_hash(*blobs)


def _out_dir(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    config = _config(args)
    net, inputs, wid = _load_workload(args)
    report, result = run(config, net, inputs, wid)
    out = _out_dir(args)
    if out is None:
        sys.stdout.write(report.to_json() if args.format == "json" else report.to_csv())
        return EXIT_OK
    (out / "report.json").write_text(report.to_json())
    if args.format == "csv":
        (out / "report.csv").write_text(report.to_csv())
    (out / "outputs.csv").write_text(outputs_csv(result))
    if not args.no_figures:
        from .plotting import plot_energy_breakdown

        plot_energy_breakdown(report, out / "energy_breakdown.png")
    log.info("%s: %d steps, %.3e s, %.3e J", report.design, report.total_steps,
             report.total_time, report.total_energy)
    return EXIT_OK


def cmd_validate(args) -> int:
    config = _config(args)
    net, inputs, _ = _load_workload(args)
    fault = None
    if args.inject_fault:
        if len(args.inject_fault) != 4:
            raise ConfigurationError("--inject-fault takes LAYER,TILE,ROW,COL")
        fault = tuple(args.inject_fault)
    result = validate(config, net, inputs, fault)
    text = json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n"
    out = _out_dir(args)
    if out is not None:
        (out / "validation.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK if result.passed else EXIT_VALIDATION


def cmd_compare(args) -> int:
    reports = [CostReport.load(p) for p in args.reports]
    table = compare(reports, args.baseline)
    body = table.to_json() if args.format == "json" else table.to_csv()
    out = _out_dir(args)
    if out is None:
        sys.stdout.write(body)
        return EXIT_OK
    (out / f"comparison.{args.format}").write_text(body)
    if not args.no_figures:
        from .plotting import plot_comparison

        plot_comparison(table, out)
    return EXIT_OK


def cmd_gen(args) -> int:
    from . import workload

    name = args.name or args.kind
    if args.kind == "mlp":
        net = workload.synthetic_mlp(args.seed, args.input_size, args.hidden, args.classes, name)
    elif args.kind == "cnn":
        try:
            shape = tuple(int(d) for d in args.image.lower().split("x"))
        except ValueError:
            raise ConfigurationError(f"--image must look like CxHxW, got {args.image!r}") from None
        net = workload.synthetic_cnn(args.seed, shape, args.channels, args.hidden[-1],
                                     args.classes, name)
    else:
        net = workload.single_layer_net(args.seed, args.m, args.n, args.classes, name)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_network(net, out / "network.json", out / "weights.bin")
    save_inputs(workload.synthetic_inputs(args.seed, net, args.count), out / "inputs.bin")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "validate": cmd_validate, "compare": cmd_compare, "gen": cmd_gen}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, CapacityError, ComparisonError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
