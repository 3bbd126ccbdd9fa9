"""Command-line interface.

Every command writes a deterministic report (JSON, or CSV for ``sweep``).
Exit status: 0 on success, 1 when a check or solver fails, 2 on malformed
input.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .benchlab import FAMILIES, InstanceRecipe
from .chain_solver import multidiscounted_value_fixed_point, parity_value_mc
from .decision_solver import multidiscounted_value_mdp, parity_value_mdp
from .documents import (
    DocumentError,
    digest,
    dumps,
    load_game,
    load_unchecked,
    raw_structure,
    to_document,
    write_document,
)
from .game_core import (
    DiscountSpec,
    MarkovChain,
    ParityObjective,
    ShapeMismatch,
    StructureKind,
    distance_report,
    validate_structure,
)
from .game_solver import (
    LimitSchedule,
    multidiscounted_value_concurrent,
    parity_value_concurrent_approx,
    parity_value_turnbased,
)
from .robustness import (
    BoundInputs,
    beta_threshold,
    certify_strategy_robustness,
    certify_value_bound,
    continuity_sweep,
    perturb,
    perturbation_bound,
)

EXIT_OK, EXIT_FAIL, EXIT_PARSE = 0, 1, 2
SWEEP_HEADER = ["eps", "sample", "sup_diff", "bound", "dist_R"]


class UsageError(Exception):
    pass


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _eps_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from None


def _values(states, v) -> dict[str, float]:
    return {s: float(x) for s, x in zip(states, v)}


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _parse_schedule(text: str, states, p: ParityObjective, G) -> LimitSchedule:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError("--schedule expects ORDER,KMIN,KMAX")
    order, kmin, kmax = parts[0], int(parts[1]), int(parts[2])
    if order in ("asc", "ascending", "default"):
        return LimitSchedule.default(G, p, kmin, kmax)
    if order in ("desc", "descending"):
        seq = sorted(states, key=lambda s: (-p.priority[s], states.index(s)))
        return LimitSchedule(tuple(seq), kmin, kmax)
    seq = order.split(":")
    if sorted(seq) != sorted(states):
        raise UsageError("--schedule order must list every state once, separated by ':'")
    return LimitSchedule(tuple(seq), kmin, kmax)


# --- commands ---------------------------------------------------------------


def cmd_validate(args, report) -> int:
    doc = load_unchecked(args.file)
    report["kind"] = doc.kind
    diags = [
        {"rule": d.rule, "state": d.state, "message": d.message, "move": list(d.move) if d.move else None}
        for d in validate_structure(raw_structure(doc))
    ]
    if not diags:
        try:
            load_game(args.file)
        except DocumentError as exc:
            diags.append({"rule": "document", "state": None, "message": str(exc), "move": None})
    report["diagnostics"] = diags
    report["valid"] = not diags
    return EXIT_OK if not diags else EXIT_FAIL


def cmd_solve(args, report) -> int:
    g = load_game(args.file)
    obj = g.objective(args.objective)
    G, kind = g.structure, g.kind
    states = list(G.states)
    report["kind"] = kind.value
    report["objective"] = args.objective
    meta: dict = {"tol": args.tol}
    parity = isinstance(obj, ParityObjective)
    if args.schedule or (parity and kind is StructureKind.CONCURRENT):
        if not parity:
            raise UsageError("--schedule applies to parity objectives")
        sched = _parse_schedule(args.schedule, states, obj, G) if args.schedule else LimitSchedule.default(G, obj)
        res = parity_value_concurrent_approx(G, obj, sched)
        report["values"] = _values(states, res.values)
        meta.update(
            {
                "method": "nested-discount-limits",
                "converged": res.converged,
                "order": list(sched.order),
                "k_min": sched.k_min,
                "k_max": sched.k_max,
                "trace": res.trace,
            }
        )
        report["solver"] = meta
        return EXIT_OK if res.converged else EXIT_FAIL
    if kind is StructureKind.MARKOV_CHAIN:
        v = parity_value_mc(G, obj) if parity else multidiscounted_value_fixed_point(G, obj)
        report["values"] = _values(states, v)
        meta["method"] = "linear-solve"
    elif kind in (StructureKind.MDP_PLAYER1, StructureKind.MDP_PLAYER2):
        res = parity_value_mdp(G, obj) if parity else multidiscounted_value_mdp(G, obj, args.tol)
        report["values"] = _values(states, res.values)
        report["strategy"] = {f"player{res.strategy.owner}": res.strategy.as_choices()}
        meta.update({"method": "end-components" if parity else "value-iteration", "iterations": res.iterations})
    elif parity:
        res = parity_value_turnbased(G, obj, args.method or "improvement")
        report["values"] = _values(states, res.values)
        report["strategy"] = {"player1": res.strategy1.as_choices(), "player2": res.strategy2.as_choices()}
        meta.update(res.meta)
    else:
        res = multidiscounted_value_concurrent(G, obj, args.tol, args.method or "shapley")
        report["values"] = _values(states, res.values)
        report["strategy"] = {
            "player1": res.strategy1.assignment,
            "player2": res.strategy2.assignment,
        }
        meta.update({"method": res.meta["method"], "iterations": res.iterations})
    report["solver"] = meta
    return EXIT_OK


def cmd_distance(args, report) -> int:
    g1, g2 = load_game(args.file1), load_game(args.file2)
    d = distance_report(g1.structure, g2.structure)
    report.update(
        {
            "dist_A": d.absolute,
            "dist_R": d.ratio,
            "structurally_equivalent": d.structurally_equivalent,
            "eta": d.eta,
        }
    )
    return EXIT_OK


def cmd_bound(args, report) -> int:
    if args.ratio is None and args.abs is None and not args.beta:
        raise UsageError("give --ratio, --abs with --eta, or --beta")
    try:
        if args.ratio is not None or args.abs is not None:
            inputs = BoundInputs(args.n, eps_R=args.ratio, eps_A=args.abs, eta=args.eta)
            report["bound"] = perturbation_bound(inputs)
        if args.beta:
            if args.eps is None or args.eta is None:
                raise UsageError("--beta needs --eps and --eta")
            report["beta"] = beta_threshold(args.eta, args.eps, args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return EXIT_OK


def cmd_perturb(args, report) -> int:
    g = load_game(args.file)
    H = perturb(g.structure, args.eps, args.seed)
    if isinstance(g.structure, MarkovChain):
        H = MarkovChain(H.states, np.array([T[0, 0] for T in H.tensors]))
    doc = to_document(H, g.priority, g.discount)
    if args.output:
        write_document(args.output, doc)
        report["output"] = args.output
        report["output_sha256"] = digest(args.output)
        return EXIT_OK
    report["document"] = doc
    return EXIT_OK


def cmd_certify(args, report) -> int:
    g1, g2 = load_game(args.file1), load_game(args.file2)
    obj = g1.objective(args.objective)
    if args.strategy:
        if args.eps is None:
            raise UsageError("--strategy needs --eps")
        if not isinstance(obj, ParityObjective):
            raise UsageError("strategy certification uses the parity objective")
        cert = certify_strategy_robustness(g1.structure, g2.structure, obj, args.eps)
    else:
        cert = certify_value_bound(g1.structure, g2.structure, obj)
    report["certificate"] = cert.to_dict()
    return EXIT_OK if cert.holds else EXIT_FAIL


def cmd_sweep(args, report) -> int:
    g = load_game(args.file)
    obj = g.objective(args.objective)
    rows = continuity_sweep(g.structure, obj, args.eps_list, args.samples, args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow([repr(r.eps), r.sample, repr(r.sup_diff), repr(r.bound), repr(r.dist_R)])
    report["_csv"] = buf.getvalue()
    return EXIT_OK


def cmd_family(args, report) -> int:
    params = {}
    for item in args.params or []:
        if "=" not in item:
            raise UsageError(f"--params entries look like key=value, got {item!r}")
        k, v = item.split("=", 1)
        params[k.replace("-", "_")] = v
    for k in ("eps", "n", "seed", "kind", "moves", "min_prob", "objective"):
        v = getattr(args, k, None)
        if v is not None:
            params[k] = v
    built = InstanceRecipe(args.name, params).build()
    obj = built.pop("objective", None)
    prio = obj if isinstance(obj, ParityObjective) else None
    disc = obj if isinstance(obj, DiscountSpec) else None
    docs = {name: to_document(G, prio, disc) for name, G in built.items()}
    report["family"] = args.name
    report["params"] = {k: str(v) for k, v in sorted(params.items())}
    if args.output:
        out = Path(args.output)
        if len(docs) == 1:
            write_document(out, next(iter(docs.values())))
            report["outputs"] = {out.name: digest(out)}
        else:
            out.mkdir(parents=True, exist_ok=True)
            report["outputs"] = {}
            for name, doc in docs.items():
                path = out / f"{name}.json"
                write_document(path, doc)
                report["outputs"][path.name] = digest(path)
    else:
        report["documents"] = docs
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robustparity", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, output=True):
        if output:
            p.add_argument("-o", "--output", help="write the result here instead of stdout")
        p.add_argument("--timing", action="store_true", help="include wall time (breaks byte-identical reruns)")
        return p

    p = common(sub.add_parser("validate", help="check a game document"))
    p.add_argument("file")
    p.set_defaults(func=cmd_validate, inputs=("file",))

    p = common(sub.add_parser("solve", help="values and optimal strategies"))
    p.add_argument("file")
    p.add_argument("--objective", choices=("parity", "multidiscounted"), required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--method", choices=("improvement", "enumeration", "shapley", "strategy-iteration"))
    p.add_argument("--schedule", help="ORDER,KMIN,KMAX with ORDER asc, desc or s1:s2:...")
    p.set_defaults(func=cmd_solve, inputs=("file",))

    p = common(sub.add_parser("distance", help="absolute and ratio distance"))
    p.add_argument("file1")
    p.add_argument("file2")
    p.set_defaults(func=cmd_distance, inputs=("file1", "file2"))

    p = common(sub.add_parser("bound", help="perturbation bound and beta threshold"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ratio", type=float)
    p.add_argument("--abs", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--beta", action="store_true")
    p.add_argument("--eps", type=float)
    p.set_defaults(func=cmd_bound, inputs=())

    p = common(sub.add_parser("perturb", help="structurally equivalent random perturbation"))
    p.add_argument("file")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.set_defaults(func=cmd_perturb, inputs=("file",))

    p = common(sub.add_parser("certify", help="check the value bound or strategy robustness"))
    p.add_argument("file1")
    p.add_argument("file2")
    p.add_argument("--objective", choices=("parity", "multidiscounted"), required=True)
    p.add_argument("--strategy", action="store_true")
    p.add_argument("--eps", type=float)
    p.set_defaults(func=cmd_certify, inputs=("file1", "file2"))

    p = common(sub.add_parser("sweep", help="continuity sweep as CSV"))
    p.add_argument("file")
    p.add_argument("--eps-list", type=_eps_list, required=True)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--objective", choices=("parity", "multidiscounted"), default="parity")
    p.set_defaults(func=cmd_sweep, inputs=("file",))

    p = common(sub.add_parser("family", help="materialize a named instance family"))
    p.add_argument("name", choices=FAMILIES)
    p.add_argument("--params", nargs="*", metavar="KEY=VALUE")
    p.add_argument("--eps", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--kind")
    p.add_argument("--moves", type=int)
    p.add_argument("--min-prob", dest="min_prob", type=float)
    p.add_argument("--objective", choices=("parity", "multidiscounted"))
    p.set_defaults(func=cmd_family, inputs=())
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    report: dict = {"command": argv}
    try:
        report["inputs"] = {getattr(args, k): digest(getattr(args, k)) for k in args.inputs}
        status = args.func(args, report)
    except (DocumentError, UsageError, ShapeMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except Exception as exc:  # solver or certification failure
        report["error"] = f"{type(exc).__name__}: {exc}"
        status = EXIT_FAIL
    if args.timing:
        report["wall_time_s"] = time.perf_counter() - start
    report["status"] = status
    csv_text = report.pop("_csv", None)
    target = args.output if args.command not in ("perturb", "family") else None
    if csv_text is not None and status == EXIT_OK:
        _emit(csv_text, target)
    else:
        _emit(dumps(report), target)
    return status


if __name__ == "__main__":
    sys.exit(main())
