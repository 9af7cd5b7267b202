"""Command-line interface: ``nnbisim {check,minimize,quotient,bound,eval,compare}``.

Each command prints one JSON run report on stdout and a short human summary
on stderr.  Exit codes: 0 success, 1 failed check or precondition, 2 usage
error, 3 unreadable or malformed input document.
"""

from __future__ import annotations

import argparse
import sys
import time
from contextlib import contextmanager

import numpy as np

from . import io
from .approx import POLICY_NAMES, check_delta_bisimulation, global_error_bound, quotient_delta
from .bisim import check_bisimulation
from .errors import ContractError, DocumentError, PreconditionError, ValidationError
from .minimize import minimize
from .network import Network, forward
from .partition import NetPartition, identity_partition

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class _Abort(Exception):
    def __init__(self, status: int, message: str, detail=None):
        super().__init__(message)
        self.status = status
        self.detail = detail


class Run:
    """Accumulates the fields of one run report."""

    def __init__(self, command: str, inputs: dict):
        self.command = command
        self.inputs = inputs
        self.timings: dict[str, float] = {}
        self.sizes: dict = {}
        self.result: dict = {}
        self.summary: list[str] = []

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0

    def report(self, status: int) -> dict:
        return {
            "command": self.command,
            "inputs": self.inputs,
            "timings": self.timings,
            "sizes": self.sizes,
            "result": self.result,
            "exit_status": status,
        }


def _nonneg(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (x >= 0 and np.isfinite(x)):
        raise argparse.ArgumentTypeError(f"must be a finite non-negative number: {text!r}")
    return x


def _count(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text!r}")
    return n


def _load_model(run: Run, path: str) -> Network:
    with run.phase("load"):
        try:
            return io.read_model(path)
        except (OSError, DocumentError, ValidationError) as e:
            raise _Abort(EXIT_IO, f"cannot load model {path}: {e}") from None


def _load_partition(run: Run, path: str) -> NetPartition:
    with run.phase("load"):
        try:
            return io.read_partition(path)
        except (OSError, DocumentError, ValidationError) as e:
            raise _Abort(EXIT_IO, f"cannot load partition {path}: {e}") from None


def _match(net: Network, p: NetPartition, path: str):
    if p.layer_sizes != net.layer_sizes:
        raise _Abort(
            EXIT_FAILED,
            f"partition {path} covers layer sizes {list(p.layer_sizes)}, model has {list(net.layer_sizes)}",
        )


def _write(run: Run, path: str | None, text: str):
    if path is None:
        return
    with run.phase("write"):
        try:
            io.write_text(path, text)
        except OSError as e:
            raise _Abort(EXIT_IO, f"cannot write {path}: {e}") from None


def _size(net: Network) -> dict:
    return {"nodes": net.node_count, "edges": net.edge_count, "layer_sizes": list(net.layer_sizes)}


def _precondition(e: PreconditionError):
    detail = e.report.to_dict() if e.report is not None else None
    return _Abort(EXIT_FAILED, str(e), detail)


def cmd_check(args, run: Run) -> int:
    net = _load_model(run, args.model)
    p = _load_partition(run, args.partition)
    _match(net, p, args.partition)
    run.sizes = _size(net)
    with run.phase("check"):
        gaps = check_delta_bisimulation(net, p, args.delta or 0.0)
        if args.delta is None:
            report = check_bisimulation(net, p)
            ok, witness = report.ok, report.witness
        else:
            ok, witness = gaps.ok, gaps.witness
    run.result = {
        "kind": "exact" if args.delta is None else "delta",
        "delta": args.delta,
        "ok": ok,
        "witness": None if witness is None else witness.to_dict(),
        "max_bias_gap": gaps.max_bias_gap,
        "max_presum_gap": gaps.max_presum_gap,
    }
    what = "an NN-bisimulation" if args.delta is None else f"a {args.delta}-bisimulation"
    run.summary.append(f"{'ok' if ok else 'FAILED'}: partition {'is' if ok else 'is not'} {what}")
    if witness is not None:
        run.summary.append(f"witness: {witness}")
    run.summary.append(f"max bias gap {gaps.max_bias_gap!r}, max pre-sum gap {gaps.max_presum_gap!r}")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_minimize(args, run: Run) -> int:
    net = _load_model(run, args.model)
    with run.phase("minimize"):
        res = minimize(net, preserve_io=args.preserve_io == "on")
    reduced = res.network
    _write(run, args.out, io.save_model(reduced))
    _write(run, args.partition_out, io.save_partition(res.partition))
    run.sizes = {"before": _size(net), "after": _size(reduced)}
    run.result = {
        "partition": res.partition.as_lists(),
        "merged_nodes": net.node_count - reduced.node_count,
        "removed_edges": net.edge_count - reduced.edge_count,
        "refinement_steps": len(res.trace.steps),
        "presum_splits": res.trace.presum_splits,
    }
    run.summary.append(
        f"reduced {net.node_count} -> {reduced.node_count} nodes, "
        f"{net.edge_count} -> {reduced.edge_count} edges ({res.trace.presum_splits} pre-sum splits)"
    )
    return EXIT_OK


def cmd_quotient(args, run: Run) -> int:
    net = _load_model(run, args.model)
    p = _load_partition(run, args.partition)
    _match(net, p, args.partition)
    with run.phase("quotient"):
        try:
            reduced = quotient_delta(net, p, args.delta, args.policy)
        except PreconditionError as e:
            raise _precondition(e) from None
    _write(run, args.out, io.save_model(reduced))
    run.sizes = {"before": _size(net), "after": _size(reduced)}
    run.result = {"delta": args.delta, "policy": args.policy, "model": io.model_to_dict(reduced)}
    run.summary.append(f"quotient under {args.policy}: {net.node_count} -> {reduced.node_count} nodes")
    return EXIT_OK


def cmd_bound(args, run: Run) -> int:
    net = _load_model(run, args.model)
    p = _load_partition(run, args.partition)
    _match(net, p, args.partition)
    run.sizes = _size(net)
    with run.phase("bound"):
        try:
            bound = global_error_bound(net, p, args.delta, args.eps0, args.vinf)
        except PreconditionError as e:
            raise _precondition(e) from None
    run.result = bound.to_dict()
    for n, step in enumerate(bound.per_layer, start=1):
        run.summary.append(f"layer {n}: eps' = {step.eps_prime!r}, eps = {step.eps!r}")
    run.summary.append(f"output deviation bound eps'' = {bound.eps_final!r}")
    return EXIT_OK


def cmd_eval(args, run: Run) -> int:
    net = _load_model(run, args.model)
    run.sizes = _size(net)
    if len(args.inputs) != net.layer_sizes[0]:
        raise _Abort(EXIT_FAILED, f"model expects {net.layer_sizes[0]} inputs, got {len(args.inputs)}")
    with run.phase("eval"):
        try:
            out = forward(net, np.array([args.inputs]))[0]
        except ContractError as e:
            raise _Abort(EXIT_FAILED, str(e)) from None
    run.result = {"outputs": out.tolist()}
    run.summary.append("outputs: " + " ".join(repr(x) for x in out.tolist()))
    return EXIT_OK


def cmd_compare(args, run: Run) -> int:
    a = _load_model(run, args.model_a)
    b = _load_model(run, args.model_b)
    p = _load_partition(run, args.map) if args.map else identity_partition(a)
    run.sizes = {"model_a": _size(a), "model_b": _size(b)}
    if p.layer_sizes != a.layer_sizes:
        raise _Abort(EXIT_FAILED, f"map covers layer sizes {list(p.layer_sizes)}, model_a has {list(a.layer_sizes)}")
    if p.block_counts != b.layer_sizes:
        raise _Abort(
            EXIT_FAILED, f"model_b layer sizes {list(b.layer_sizes)} do not match the map's blocks {list(p.block_counts)}"
        )
    rng = np.random.default_rng(args.seed)
    with run.phase("compare"):
        Xb = rng.uniform(-args.vinf, args.vinf, size=(args.samples, b.layer_sizes[0]))
        Xa = Xb[:, p[0].labels]
        out_a = forward(a, Xa)
        out_b = forward(b, Xb)
        dev = np.abs(out_b[:, p[-1].labels] - out_a)
    worst = float(dev.max()) if args.samples else None
    run.result = {"samples": args.samples, "seed": args.seed, "vinf": args.vinf, "max_deviation": worst}
    if worst is None:
        run.summary.append("no samples drawn")
    else:
        run.summary.append(f"max block-wise output deviation over {args.samples} samples: {worst!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nnbisim", description="Bisimulation-based reduction of feedforward networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="check whether a partition is an (approximate) bisimulation")
    p.add_argument("model")
    p.add_argument("partition")
    p.add_argument("--delta", type=_nonneg, default=None, help="run the delta-bisimulation check")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("minimize", help="compute the coarsest bisimulation and the reduced model")
    p.add_argument("model")
    p.add_argument("--preserve-io", choices=("on", "off"), default="on")
    p.add_argument("--out", help="write the reduced model here")
    p.add_argument("--partition-out", help="write the coarsest partition here")
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("quotient", help="build the (delta-)quotient of a model")
    p.add_argument("model")
    p.add_argument("partition")
    p.add_argument("--delta", type=_nonneg, default=0.0)
    p.add_argument("--policy", choices=[n for n in POLICY_NAMES if n != "explicit"], default="min_index")
    p.add_argument("--out", help="write the quotient model here")
    p.set_defaults(func=cmd_quotient)

    p = sub.add_parser("bound", help="bound the output deviation of delta-quotients")
    p.add_argument("model")
    p.add_argument("partition")
    p.add_argument("--delta", type=_nonneg, default=0.0)
    p.add_argument("--eps0", type=_nonneg, default=0.0)
    p.add_argument("--vinf", type=_nonneg, default=1.0)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("eval", help="evaluate a model on one input vector")
    p.add_argument("model")
    p.add_argument("inputs", nargs="*", type=float)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="sample inputs and measure the output deviation of two models")
    p.add_argument("model_a")
    p.add_argument("model_b")
    p.add_argument("--samples", type=_count, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vinf", type=_nonneg, default=1.0)
    p.add_argument("--map", help="partition of model_a whose blocks are model_b's nodes")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    inputs = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    run = Run(args.command, inputs)
    try:
        status = args.func(args, run)
    except _Abort as e:
        status = e.status
        run.result["error"] = str(e)
        if e.detail is not None:
            run.result["detail"] = e.detail
        run.summary.append(f"error: {e}")
    sys.stdout.write(io.dumps(run.report(status)))
    for line in run.summary:
        print(line, file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
