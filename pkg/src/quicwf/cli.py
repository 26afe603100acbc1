"""Command-line entry point: ``quicwf {ingest,synth,featurize,sweep,topa,rerun}``.

Any long flag can also be given through the environment as ``QUICWF_<FLAG>``
(upper case, dashes as underscores, e.g. ``QUICWF_SEED=3``); an explicit flag
always wins. List-valued flags (``--algo``) take comma-separated env values.

Every output embeds a manifest with the fully resolved argument vector and
the sha256 of each input, so ``quicwf rerun <report>`` replays the run into
the recorded paths.
"""
from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from . import __version__, reports
from .classify import ALGORITHMS
from .dataset import write_matrix
from .evaluate import DEFAULT_KS, EvaluationError, k_sweep, top_a_table
from .features import FeaturizationError, featurize_dataset
from .ingest import (CaptureError, TraceFileError, ingest_capture, load_traces, store_traces)
from .synth import NetworkCondition, SiteParams, dump_sites, generate_corpus
from .trace import Protocol

ENV_PREFIX = "QUICWF_"
PROTOCOLS = [x.value.lower() for x in Protocol]

EXIT_OK, EXIT_INPUT, EXIT_EMPTY, EXIT_PARAMS, EXIT_EVAL = 0, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def parse_k_spec(spec: str) -> list[int]:
    """``40``, ``5,10,40`` or inclusive ``start:stop:step``."""
    spec = str(spec).strip()
    try:
        if ":" in spec:
            parts = [int(p) for p in spec.split(":")]
            if len(parts) == 2:
                parts.append(1)
            if len(parts) != 3:
                raise ValueError
            start, stop, step = parts
            if step < 1 or stop < start:
                raise ValueError
            ks = list(range(start, stop + 1, step))
        else:
            ks = [int(p) for p in spec.split(",") if p.strip()]
    except ValueError:
        raise CliError(EXIT_PARAMS, f"bad --k spec {spec!r}") from None
    if not ks or min(ks) < 1:
        raise CliError(EXIT_PARAMS, f"--k values must be >= 1, got {spec!r}")
    return ks


def _range_pair(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    return int(lo), int(hi or lo)


def _env_name(dest: str) -> str:
    return ENV_PREFIX + dest.upper()


def _apply_env(parser: argparse.ArgumentParser) -> None:
    """Turn QUICWF_* variables into defaults; parsed flags still override them."""
    for action in parser._actions:
        if not action.option_strings or action.dest in ("help", "out"):
            continue
        raw = os.environ.get(_env_name(action.dest))
        if raw is None:
            continue
        if isinstance(action, argparse._AppendAction):
            continue  # an append default would merge with flags; filled after parsing
        if action.nargs == 0:
            action.default = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                action.default = action.type(raw) if action.type else raw
            except (TypeError, ValueError):
                raise CliError(EXIT_PARAMS, f"{_env_name(action.dest)}={raw!r} is not a valid "
                                            f"{action.option_strings[-1]} value") from None
        action.required = False


def _common(p, *, features=True, seed=True, threads=False):
    if features:
        p.add_argument("--features", choices=("simple", "transfer"), default="simple")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    if threads:
        p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quicwf", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"quicwf {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="pcap -> tailored JSONL traces")
    p.add_argument("capture")
    p.add_argument("--protocol", required=True, type=str.lower,
                   choices=PROTOCOLS)
    p.add_argument("--label", default=None)
    p.add_argument("--whole-conversation", action="store_true",
                   help="keep handshake packets (no tailoring)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="synthetic corpus -> JSONL traces")
    p.add_argument("--sites", type=int, default=20)
    p.add_argument("--visits", type=int, default=50)
    p.add_argument("--protocol", default="iquic", type=str.lower,
                   choices=PROTOCOLS)
    p.add_argument("--loss", type=float, default=0.0)
    p.add_argument("--delay", type=float, default=0.01)
    p.add_argument("--bandwidth", type=float, default=0.0, help="bits/s, 0 = unlimited")
    p.add_argument("--mtu", type=int, default=1400)
    p.add_argument("--n-resources", default="4:12", help="lo:hi resources per site")
    p.add_argument("--size-median", type=float, default=6000.0)
    p.add_argument("--size-sigma", type=float, default=1.2)
    p.add_argument("--order-window", type=float, default=4.0)
    p.add_argument("--size-jitter", type=float, default=0.0)
    p.add_argument("--sites-out", default=None, help="also write site models as JSON")
    _common(p, features=False)
    p.add_argument("--out", required=True)

    p = sub.add_parser("featurize", help="traces -> feature matrix CSV")
    p.add_argument("traces")
    _common(p, seed=False)
    p.add_argument("--k", default="40")
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="k-sweep cross-validation")
    p.add_argument("traces")
    _common(p, threads=True)
    p.add_argument("--k", default=f"{DEFAULT_KS[0]}:{DEFAULT_KS[-1]}:5")
    p.add_argument("--algo", action="append", type=str.upper, default=None,
                   help=f"repeatable, one of {','.join(ALGORITHMS)} (default RF)")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--a-max", type=int, default=1)
    p.add_argument("--out", required=True, help="prefix for .csv/.jsonl/.manifest.json")

    p = sub.add_parser("topa", help="Top-a accuracy table")
    p.add_argument("traces")
    _common(p, threads=True)
    p.add_argument("--k", default="5:40:5")
    p.add_argument("--a-max", type=int, default=5)
    p.add_argument("--algo", action="append", type=str.upper, default=None)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--out", required=True)

    p = sub.add_parser("rerun", help="replay the run recorded in a report's manifest")
    p.add_argument("report")
    p.add_argument("--no-verify", action="store_true", help="skip input hash check")
    return ap


def _normalized_argv(args) -> list[str]:
    """Fully resolved argument vector, independent of env and cwd."""
    out = [args.command]
    for key, val in sorted(vars(args).items()):
        if key in ("command", "func") or val is None or val is False:
            continue
        flag = "--" + key.replace("_", "-")
        if key in ("capture", "traces"):
            out.insert(1, os.path.abspath(val))
        elif val is True:
            out.append(flag)
        elif isinstance(val, list):
            for v in val:
                out += [flag, str(v)]
        elif key in ("out", "sites_out"):
            out += [flag, os.path.abspath(val)]
        else:
            out += [flag, str(val)]
    return out


def _manifest(args, inputs: Sequence[str], outputs: Sequence[str], **fields) -> dict:
    return reports.make_manifest(
        args.command, _normalized_argv(args),
        inputs={os.path.abspath(p): reports.file_digest(p) for p in inputs},
        outputs=[os.path.abspath(p) for p in outputs], **fields)


def _load(path):
    try:
        traces = load_traces(path)
    except (OSError, TraceFileError, ValueError) as e:
        raise CliError(EXIT_INPUT, f"cannot read traces: {e}") from e
    if not traces:
        raise CliError(EXIT_EMPTY, f"{path}: no traces")
    return traces


def _algos(args) -> list[str]:
    algos = list(dict.fromkeys(args.algo or ["RF"]))
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad:
        raise CliError(EXIT_PARAMS, f"unknown algorithm(s) {bad}; choose from {ALGORITHMS}")
    return algos


def _check_eval_params(args, ks):
    if args.folds < 2:
        raise CliError(EXIT_PARAMS, f"--folds must be >= 2, got {args.folds}")
    if args.trees < 1:
        raise CliError(EXIT_PARAMS, f"--trees must be >= 1, got {args.trees}")
    if args.a_max < 1:
        raise CliError(EXIT_PARAMS, f"--a-max must be >= 1, got {args.a_max}")
    if args.threads < 1:
        raise CliError(EXIT_PARAMS, f"--threads must be >= 1, got {args.threads}")


def _forest_hp(args) -> dict:
    return {"RF": {"n_estimators": args.trees}, "ET": {"n_estimators": args.trees}}


def cmd_ingest(args) -> int:
    try:
        with open(args.capture, "rb") as fh:
            data = fh.read()
        traces, summary = ingest_capture(data, args.protocol, args.label, args.whole_conversation)
    except OSError as e:
        raise CliError(EXIT_INPUT, f"cannot read capture {args.capture}: {e.strerror}") from e
    except CaptureError as e:
        raise CliError(EXIT_INPUT, f"{args.capture}: {e}") from e
    print(summary.line())
    for w in summary.parse.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for msg in summary.failed:
        print(f"warning: {msg}", file=sys.stderr)
    if not traces:
        raise CliError(EXIT_EMPTY, f"{args.capture}: no tailored traces "
                                   f"({summary.split.conversations} conversations)")
    store_traces(traces, args.out, _manifest(args, [args.capture], [args.out],
                                             protocol=args.protocol))
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        params = SiteParams(_range_pair(args.n_resources), args.size_median, args.size_sigma)
        net = NetworkCondition(args.bandwidth, args.delay, args.loss)
        corpus = generate_corpus(args.sites, args.visits, net, args.protocol, args.seed, params,
                                 args.mtu, args.size_jitter, args.order_window)
    except ValueError as e:
        raise CliError(EXIT_PARAMS, f"invalid synth parameters: {e}") from e
    outs = [args.out] + ([args.sites_out] if args.sites_out else [])
    man = _manifest(args, [], outs, protocol=args.protocol, seed=args.seed,
                    network={"loss": args.loss, "delay": args.delay,
                             "bandwidth": args.bandwidth})
    store_traces(corpus.traces, args.out, man)
    if args.sites_out:
        dump_sites(corpus.sites, args.sites_out)
    print(f"sites={len(corpus.sites)} traces={len(corpus.traces)} -> {args.out}")
    return EXIT_OK


def cmd_featurize(args) -> int:
    ks = parse_k_spec(args.k)
    if len(ks) != 1:
        raise CliError(EXIT_PARAMS, "featurize takes a single --k")
    traces = _load(args.traces)
    try:
        ds = featurize_dataset(traces, args.features, ks[0])
    except FeaturizationError as e:
        raise CliError(EXIT_INPUT, str(e)) from e
    write_matrix(ds, args.out)
    print(f"rows={len(ds)} dim={ds.schema.dim} skipped={ds.skipped} -> {args.out}")
    return EXIT_OK


def _progress(k, algo):
    print(f"  k={k} {algo}", file=sys.stderr, flush=True)


def cmd_sweep(args) -> int:
    ks = parse_k_spec(args.k)
    algos = _algos(args)
    _check_eval_params(args, ks)
    traces = _load(args.traces)
    try:
        result = k_sweep(traces, args.features, algos, ks, args.seed, args.folds, args.a_max,
                         _forest_hp(args), args.threads, progress=_progress)
    except EvaluationError as e:
        raise CliError(EXIT_EVAL, f"evaluation failed at {e}") from e
    except FeaturizationError as e:
        raise CliError(EXIT_INPUT, str(e)) from e
    paths = [args.out + ".csv", args.out + ".jsonl", args.out + ".manifest.json"]
    man = _manifest(args, [args.traces], paths, feature_set=args.features, ks=ks,
                    algorithms=algos, seed=args.seed, folds=args.folds,
                    fold_scheme="stratified", topa="per-fold mean")
    reports.write_sweep_csv(result, paths[0], man)
    reports.write_sweep_jsonl(result, paths[1], man)
    reports.write_manifest(man, paths[2])
    for algo in algos:
        print(algo, " ".join(f"{k}:{acc:.3f}" for k, acc in result.curve(algo)))
    return EXIT_OK


def cmd_topa(args) -> int:
    ks = parse_k_spec(args.k)
    algos = _algos(args)
    if len(algos) != 1:
        raise CliError(EXIT_PARAMS, "topa takes a single --algo")
    _check_eval_params(args, ks)
    traces = _load(args.traces)
    n_labels = len({t.label for t in traces})
    if args.a_max > n_labels:
        raise CliError(EXIT_PARAMS, f"--a-max {args.a_max} exceeds {n_labels} classes")
    try:
        result = top_a_table(traces, args.features, ks, args.a_max, args.seed, args.folds,
                             algos[0], args.threads, hyperparams=_forest_hp(args))
    except EvaluationError as e:
        raise CliError(EXIT_EVAL, f"evaluation failed at {e}") from e
    except FeaturizationError as e:
        raise CliError(EXIT_INPUT, str(e)) from e
    man = _manifest(args, [args.traces], [args.out], feature_set=args.features, ks=ks,
                    algorithms=algos, seed=args.seed, folds=args.folds, a_max=args.a_max,
                    topa="per-fold mean")
    reports.write_topa_csv(result, args.out, man)
    for k in result.ks:
        print(k, " ".join(f"{result.table[k, a]:.3f}" for a in range(1, args.a_max + 1)))
    return EXIT_OK


def cmd_rerun(args) -> int:
    try:
        man = reports.read_manifest(args.report)
    except (OSError, ValueError) as e:
        raise CliError(EXIT_INPUT, f"cannot read {args.report}: {e}") from e
    if not man or "argv" not in man:
        raise CliError(EXIT_INPUT, f"{args.report}: no manifest found")
    if man.get("command") == "rerun":
        raise CliError(EXIT_PARAMS, "refusing to replay a rerun")
    if not args.no_verify:
        for path, digest in man.get("inputs", {}).items():
            try:
                ok = reports.file_digest(path) == digest
            except OSError:
                ok = False
            if not ok:
                raise CliError(EXIT_INPUT, f"input {path} missing or changed since the recorded run")
    return run(man["argv"], use_env=False)


COMMANDS = {"ingest": cmd_ingest, "synth": cmd_synth, "featurize": cmd_featurize,
            "sweep": cmd_sweep, "topa": cmd_topa, "rerun": cmd_rerun}


def run(argv: Sequence[str], use_env: bool = True) -> int:
    parser = build_parser()
    if use_env:
        for sp in parser._subparsers._group_actions[0].choices.values():
            _apply_env(sp)
    args = parser.parse_args(list(argv))
    if use_env and getattr(args, "algo", "unset") is None and os.environ.get(_env_name("algo")):
        args.algo = [v.upper() for v in os.environ[_env_name("algo")].split(",") if v]
    return COMMANDS[args.command](args)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return run(argv)
    except CliError as e:
        print(f"quicwf: error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
