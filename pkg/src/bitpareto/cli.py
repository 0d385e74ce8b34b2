"""Command-line surface: sensitivity profiling, search, baselines, oracle, report.

Every run writes into one output directory with a manifest describing the
full configuration, so results are reproducible from the manifest alone.
Exit codes: 0 success, 1 runtime error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import shlex
import sys
from pathlib import Path

from . import __version__, engine, oracle, plots
from .evaluators import (
    Evaluator,
    EvaluatorError,
    PooledEvaluator,
    SyntheticModel,
    TransformedEvaluator,
    make_synthetic_evaluator,
)
from .external import external_evaluator
from .moea import NsgaParams
from .sensitivity import measure_sensitivity, profile_report
from .space import SpaceError, effective_bits, load_search_space

ABLATION_MULTIPLIERS = (1.5, 2.0, 3.0, 5.0)


class UsageError(Exception):
    """Configuration problems that should exit with code 2."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bitpareto",
        description="Pareto search over per-layer bit-width assignments",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, evaluator: bool = True):
        p.add_argument("--space", required=True, help="search-space JSON file")
        if evaluator:
            p.add_argument(
                "--evaluator",
                required=True,
                help="synthetic:<params.json> or exec:<command ...>",
            )
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="run", help="output directory")
        p.add_argument("--parallel", type=int, default=1, help="evaluator fan-out")
        p.add_argument("--plots", action="store_true", help="render figures too")

    p_sens = sub.add_parser("sensitivity", help="profile per-layer sensitivity")
    common(p_sens)
    p_sens.add_argument("--prune-multiplier", default="2", help="FLOAT or 'off'")

    p_search = sub.add_parser("search", help="run the full iterative search")
    common(p_search)
    p_search.add_argument("--iterations", type=int, default=200)
    p_search.add_argument("--initial", type=int, default=250)
    p_search.add_argument("--candidates", type=int, default=50)
    p_search.add_argument("--population", type=int, default=200)
    p_search.add_argument("--generations", type=int, default=20)
    p_search.add_argument("--crossover", type=float, default=0.9)
    p_search.add_argument("--mutation", type=float, default=0.1)
    p_search.add_argument("--subset-pool", type=int, default=100)
    p_search.add_argument("--prune-multiplier", default="off", help="FLOAT or 'off'")
    p_search.add_argument("--target-bits", default="", help="comma-separated list")
    p_search.add_argument("--tolerance", type=float, default=0.005)
    p_search.add_argument("--resume", metavar="DIR", default=None,
                          help="resume from this run directory's checkpoint")

    p_base = sub.add_parser("baseline", help="one-shot or greedy baseline")
    common(p_base)
    p_base.add_argument("--method", choices=["one-shot", "greedy"], required=True)
    p_base.add_argument("--target-bits", required=True, help="comma-separated list")
    p_base.add_argument("--tolerance", type=float, default=1e-9)

    p_oracle = sub.add_parser("oracle", help="exhaustive front and checks")
    common(p_oracle)
    p_oracle.add_argument("--cap", type=int, default=oracle.DEFAULT_CAP)
    p_oracle.add_argument("--front", default=None, help="front JSON to grade")
    p_oracle.add_argument(
        "--check-transform",
        choices=["none", "increasing", "reversed"],
        default="none",
        help="front-coincidence check against a transformed evaluator",
    )

    p_report = sub.add_parser("report", help="render figures from a run directory")
    p_report.add_argument("--run", required=True, help="existing run directory")
    p_report.add_argument("--out", default=None, help="figure directory (default: run dir)")

    return parser


def _parse_multiplier(raw: str) -> float | None:
    if raw.lower() in ("off", "none", ""):
        return None
    try:
        value = float(raw)
    except ValueError:
        raise UsageError(f"--prune-multiplier must be a number or 'off', got {raw!r}")
    if value <= 0:
        raise UsageError("--prune-multiplier must be positive")
    return value


def _parse_targets(raw: str) -> list[float]:
    if not raw.strip():
        return []
    try:
        return [float(t) for t in raw.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--target-bits must be comma-separated numbers, got {raw!r}")


def _load_space(path: str):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"space file not found: {p}")
    return load_search_space(p)


def _make_evaluator(spec: str, space, parallel: int) -> Evaluator:
    if ":" not in spec:
        raise UsageError(
            f"--evaluator must be synthetic:<params.json> or exec:<command>, got {spec!r}"
        )
    kind, _, rest = spec.partition(":")
    if kind == "synthetic":
        path = Path(rest)
        if not path.exists():
            raise UsageError(f"synthetic params file not found: {path}")
        model = SyntheticModel.from_file(path)
        if len(model.weights) != len(space.layers):
            raise UsageError(
                f"synthetic model has {len(model.weights)} weights, "
                f"space has {len(space.layers)} layers"
            )
        if parallel > 1:
            return PooledEvaluator([make_synthetic_evaluator(model)] * parallel)
        return make_synthetic_evaluator(model)
    if kind == "exec":
        command = shlex.split(rest)
        if not command:
            raise UsageError("exec evaluator needs a command")
        if parallel > 1:
            workers = [external_evaluator(command, space) for _ in range(parallel)]
            return PooledEvaluator(workers)
        return external_evaluator(command, space)
    raise UsageError(f"unknown evaluator kind {kind!r}")


def _write_manifest(out: Path, args: argparse.Namespace) -> None:
    manifest = {
        "version": __version__,
        "command": args.command,
        "config": {
            k: v for k, v in sorted(vars(args).items()) if k != "command"
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _module_name(layer_name: str) -> str:
    return layer_name.rsplit(".", 1)[-1]


def _write_allocation_csv(space, config, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "module", "bits"])
        for layer, b in zip(space.layers, config.bits):
            writer.writerow([layer.name, _module_name(layer.name), b])


def _front_records(front) -> list[dict]:
    return [
        {"eff_bits": e.bits, "score": e.score, "bits": list(e.config.bits)}
        for e in front
    ]


# -- subcommands -------------------------------------------------------------


def cmd_sensitivity(args) -> int:
    space = _load_space(args.space)
    evaluator = _make_evaluator(args.evaluator, space, args.parallel)
    multiplier = _parse_multiplier(args.prune_multiplier) or 2.0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, args)

    profile = measure_sensitivity(space, evaluator)
    report = profile_report(space, profile, multiplier)
    (out / "profile.json").write_text(json.dumps(report, indent=2) + "\n")

    print(f"median sensitivity: {profile.median:.6g}")
    for m in ABLATION_MULTIPLIERS:
        summary = profile_report(space, profile, m)
        frozen = ", ".join(summary["frozen"]) or "-"
        print(
            f"multiplier {m:>4}: excluded {summary['excluded_fraction'] * 100:.2f}% "
            f"({len(summary['frozen'])} layers: {frozen})"
        )
    if args.plots:
        plots.plot_sensitivity(
            report["scores"],
            [l.name for l in space.layers],
            profile.median,
            multiplier,
            out / "sensitivity.png",
        )
    print(f"profile written to {out / 'profile.json'}")
    return 0


def cmd_search(args) -> int:
    space = _load_space(args.space)
    evaluator = _make_evaluator(args.evaluator, space, args.parallel)
    targets = _parse_targets(args.target_bits)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, args)

    params = engine.SearchParams(
        initial_samples=args.initial,
        iterations=args.iterations,
        candidates_per_iter=args.candidates,
        nsga=NsgaParams(
            population=args.population,
            generations=args.generations,
            crossover_prob=args.crossover,
            mutation_prob=args.mutation,
            seed=args.seed,
        ),
        subset_pool=args.subset_pool,
        prune_multiplier=_parse_multiplier(args.prune_multiplier),
        seed=args.seed,
    )

    resume = args.resume is not None
    ckpt_dir = Path(args.resume) if resume else out
    result = engine.search(
        space,
        evaluator,
        params,
        checkpoint_dir=ckpt_dir,
        resume=resume,
    )
    searched_space = result.space or space

    result.archive.dump_jsonl(out / "archive.jsonl")
    front_records = _front_records(result.front) if result.front else []
    (out / "front.json").write_text(json.dumps(front_records, indent=2) + "\n")

    if result.status != "ok":
        print(f"search failed: {result.error}", file=sys.stderr)
        print(f"partial archive ({len(result.archive)} entries) kept in {out}")
        return 1

    print(
        f"archive: {len(result.archive)} entries, "
        f"{result.true_evaluations} true evaluations, "
        f"front size {len(result.front)}"
    )

    for target in targets:
        tag = f"{target:g}"
        try:
            entry = engine.select_optimal(result.archive, target, args.tolerance)
        except engine.NoCandidateError as exc:
            print(f"target {tag}: {exc}", file=sys.stderr)
            continue
        selection = {
            "target_bits": target,
            "tolerance": args.tolerance,
            "eff_bits": entry.bits,
            "score": entry.score,
            "bits": list(entry.config.bits),
        }
        (out / f"selected_{tag}.json").write_text(
            json.dumps(selection, indent=2) + "\n"
        )
        _write_allocation_csv(searched_space, entry.config, out / f"allocation_{tag}.csv")
        print(f"target {tag}: score {entry.score:.6g} at {entry.bits:.4f} bits")

    if args.plots:
        _render_run_figures(out, searched_space)
    return 0


def cmd_baseline(args) -> int:
    space = _load_space(args.space)
    evaluator = _make_evaluator(args.evaluator, space, args.parallel)
    targets = _parse_targets(args.target_bits)
    if not targets:
        raise UsageError("baseline needs at least one --target-bits value")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, args)

    profile = None
    if args.method == "one-shot":
        profile = measure_sensitivity(space, evaluator)

    for target in targets:
        tag = f"{target:g}"
        if args.method == "one-shot":
            config = engine.one_shot_search(space, profile, target)
            score = evaluator.evaluate_batch([config])[0]
            record = {
                "method": "one-shot",
                "target_bits": target,
                "eff_bits": effective_bits(config, space),
                "score": score,
                "bits": list(config.bits),
                "search_evaluations": 0,
                "profile_evaluations": len(space.layers),
            }
        else:
            greedy = engine.greedy_search(space, evaluator, target, args.tolerance)
            score = (
                greedy.score
                if greedy.score is not None
                else evaluator.evaluate_batch([greedy.config])[0]
            )
            record = {
                "method": "greedy",
                "target_bits": target,
                "eff_bits": effective_bits(greedy.config, space),
                "score": score,
                "bits": list(greedy.config.bits),
                "search_evaluations": greedy.evaluations,
                "rounds": greedy.rounds,
            }
        path = out / f"baseline_{args.method}_{tag}.json"
        path.write_text(json.dumps(record, indent=2) + "\n")
        print(
            f"{args.method} @ {tag}: score {record['score']:.6g} "
            f"at {record['eff_bits']:.4f} bits "
            f"({record['search_evaluations']} search evaluations)"
        )
    return 0


def cmd_oracle(args) -> int:
    space = _load_space(args.space)
    evaluator = _make_evaluator(args.evaluator, space, args.parallel)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, args)

    front = oracle.enumerate_front(space, evaluator, cap=args.cap)
    payload: dict = {"front": _front_records(front)}

    if args.front:
        supplied_path = Path(args.front)
        if not supplied_path.exists():
            raise UsageError(f"front file not found: {supplied_path}")
        supplied = json.loads(supplied_path.read_text())
        candidate = [
            engine.ArchiveEntry(
                config=engine.BitConfig(tuple(rec["bits"])),
                score=float(rec["score"]),
                bits=float(rec["eff_bits"]),
            )
            for rec in supplied
        ]
        comparison = oracle.compare_fronts(front, candidate, space=space)
        payload["comparison"] = comparison.to_dict()
        print(f"hypervolume ratio: {comparison.hypervolume_ratio:.6f}")

    if args.check_transform != "none":
        if args.check_transform == "increasing":
            transform = lambda s: s**3 + 2.0 * s
        else:
            transform = lambda s: -s
        q2 = TransformedEvaluator(evaluator, transform)
        check = oracle.verify_front_coincidence(space, evaluator, q2, cap=args.cap)
        payload["coincidence"] = check.to_dict()
        print(f"coincident: {str(check.coincident).lower()}")

    (out / "oracle.json").write_text(json.dumps(payload, indent=2) + "\n")
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    if not run_dir.exists():
        raise UsageError(f"run directory not found: {run_dir}")
    out = Path(args.out) if args.out else run_dir
    out.mkdir(parents=True, exist_ok=True)

    manifest_path = run_dir / "manifest.json"
    space = None
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        space_path = manifest.get("config", {}).get("space")
        if space_path and Path(space_path).exists():
            space = load_search_space(space_path)

    rendered = _render_run_figures(run_dir, space, out)
    if not rendered:
        print("nothing to render: no front/profile/archive files found", file=sys.stderr)
        return 1
    for path in rendered:
        print(f"wrote {path}")
    return 0


def _render_run_figures(run_dir: Path, space=None, out: Path | None = None) -> list[Path]:
    out = out or run_dir
    rendered: list[Path] = []
    front_path = run_dir / "front.json"
    if front_path.exists():
        front = json.loads(front_path.read_text())
        if front:
            rendered.append(plots.plot_front(front, out / "front.png"))
    profile_path = run_dir / "profile.json"
    if profile_path.exists():
        report = json.loads(profile_path.read_text())
        names = (
            [l.name for l in space.layers]
            if space is not None
            else [str(i) for i in range(len(report["scores"]))]
        )
        rendered.append(
            plots.plot_sensitivity(
                report["scores"], names, report["median"], 2.0, out / "sensitivity.png"
            )
        )
    archive_path = run_dir / "archive.jsonl"
    if archive_path.exists():
        rows = [
            json.loads(line)
            for line in archive_path.read_text().splitlines()
            if line.strip()
        ]
        if rows:
            rendered.append(plots.plot_convergence(rows, out / "convergence.png"))
    for alloc in sorted(run_dir.glob("allocation_*.csv")):
        with open(alloc, newline="") as fh:
            rows = [
                {"layer": r["layer"], "module": r["module"], "bits": int(r["bits"])}
                for r in csv.DictReader(fh)
            ]
        if rows:
            rendered.append(
                plots.plot_allocation(
                    rows, out / (alloc.stem + ".png"), title=alloc.stem
                )
            )
    return rendered


_COMMANDS = {
    "sensitivity": cmd_sensitivity,
    "search": cmd_search,
    "baseline": cmd_baseline,
    "oracle": cmd_oracle,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SpaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EvaluatorError, oracle.SpaceTooLargeError, engine.TargetUnreachableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
