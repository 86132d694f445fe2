"""Command-line front end.

Exit codes: 0 success, 1 validation failure (bad config, graph, or run
directory), 2 runtime failure, 3 criteria and simulation disagree.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ..propagation import OrderOverflowError
from ..scattering import PacketFitError, TrustedWindowError
from .config import ConfigError, RunConfig, load_config
from .manifest import ManifestError, ManifestWriter, RunManifest
from .runner import (_criteria_job, _scatter_job, inconsistent, read_prediction,
                     run_many, validate_scenario)

log = logging.getLogger("scatterlab")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_INCONSISTENT = 0, 1, 2, 3


def resolve_out(args, cfg: RunConfig | None) -> Path:
    env = os.environ.get("SCATTERLAB_OUT")
    if env:
        return Path(env)
    if getattr(args, "out", None):
        return Path(args.out)
    if cfg is not None and cfg.out:
        return Path(cfg.out)
    return Path("runs") / (cfg.name if cfg else "run")


def _seed(args, cfg: RunConfig) -> int:
    seed = cfg.seed if args.seed is None else args.seed
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", "--seed")
    return seed


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    problems = _validated(cfg)
    for p in problems:
        print(f"INVALID {p}")
    if not problems:
        print(f"OK {len(cfg.scenarios)} scenarios in {cfg.source}")
    return EXIT_INVALID if problems else EXIT_OK


def _validated(cfg: RunConfig) -> list[str]:
    problems = []
    for i, scn in enumerate(cfg.scenarios):
        problems += validate_scenario(scn, f"scenarios[{i}]")
    return problems


def cmd_criteria(args) -> int:
    cfg = load_config(args.config)
    problems = _validated(cfg)
    if problems:
        for p in problems:
            print(f"INVALID {p}")
        return EXIT_INVALID
    out = resolve_out(args, cfg)
    writer = ManifestWriter(out, cfg.config_hash, _seed(args, cfg))
    s_values = tuple(args.s_values) if args.s_values else None
    results = run_many(_criteria_job, [(s, s_values) for s in cfg.scenarios], args.jobs)
    for scn, (files, summary) in sorted(zip(cfg.scenarios, results), key=lambda r: r[0].scenario_id):
        for rel, content in sorted(files.items()):
            writer.write(rel, content)
        writer.set_status(scn.scenario_id, "criteria", summary["prediction"])
        print(f"{scn.scenario_id}: prediction={summary['prediction']} "
              + " ".join(f"{k}={v}" for k, v in summary["verdicts"].items()))
    writer.close()
    return EXIT_OK


def cmd_scatter(args) -> int:
    cfg = load_config(args.config)
    problems = _validated(cfg)
    if problems:
        for p in problems:
            print(f"INVALID {p}")
        return EXIT_INVALID
    out = resolve_out(args, cfg)
    seed = _seed(args, cfg)
    writer = ManifestWriter(out, cfg.config_hash, seed)
    results = run_many(_scatter_job, [(s, seed, args.both_signs) for s in cfg.scenarios], args.jobs)
    code = EXIT_OK
    for scn, (files, summary) in sorted(zip(cfg.scenarios, results), key=lambda r: r[0].scenario_id):
        prediction = read_prediction(out, scn.scenario_id)
        summary["prediction"] = prediction
        summary["consistent"] = not inconsistent(prediction, summary["simulation"])
        files[f"{scn.scenario_id}/scatter/summary.json"] = json.dumps(summary, indent=2, sort_keys=True) + "\n"
        for rel, content in sorted(files.items()):
            writer.write(rel, content)
        writer.set_status(scn.scenario_id, "scatter", summary["simulation"])
        flag = "" if summary["consistent"] else "  INCONSISTENT"
        print(f"{scn.scenario_id}: simulation={summary['simulation']} prediction={prediction}{flag}")
        if not summary["consistent"]:
            code = EXIT_INCONSISTENT
    writer.close()
    return code


REPORT_COLUMNS = ("scenario_id", "vertex_sum", "edge_sum_j1", "edge_sum_j2", "quasi_equiv",
                  "asp", "prediction", "simulation", "agreement")


def build_summary(run_dir: Path) -> list[dict]:
    manifest = RunManifest.load(run_dir)
    manifest.verify(run_dir)
    rows = []
    for sid in sorted(manifest.scenarios):
        crit_rel = f"{sid}/criteria/prediction.json"
        scat_rel = f"{sid}/scatter/summary.json"
        crit = json.loads((run_dir / crit_rel).read_text()) if crit_rel in manifest.files else None
        scat = json.loads((run_dir / scat_rel).read_text()) if scat_rel in manifest.files else None
        v = crit["verdicts"] if crit else {}
        asp = v.get("asp", [])
        row = {c: "" for c in REPORT_COLUMNS}
        row.update({k: v.get(k, "") for k in ("vertex_sum", "edge_sum_j1", "edge_sum_j2", "quasi_equiv")})
        row["scenario_id"] = sid
        row["asp"] = asp[0] if asp and all(a == asp[0] for a in asp) else ("mixed" if asp else "")
        row["prediction"] = crit["prediction"] if crit else ""
        row["simulation"] = scat["simulation"] if scat else ""
        row["agreement"] = not inconsistent(row["prediction"] or None, row["simulation"])
        rows.append(row)
    return rows


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir) if args.run_dir else resolve_out(args, None)
    try:
        rows = build_summary(run_dir)
    except ManifestError as exc:
        print(f"ERROR {exc}", file=sys.stderr)
        return EXIT_INVALID
    csv_lines = [",".join(REPORT_COLUMNS)] + [",".join(str(r[c]) for c in REPORT_COLUMNS) for r in rows]
    md = ["| " + " | ".join(REPORT_COLUMNS) + " |", "|" + "---|" * len(REPORT_COLUMNS)]
    md += ["| " + " | ".join(str(r[c]) for c in REPORT_COLUMNS) + " |" for r in rows]
    manifest = RunManifest.load(run_dir)
    writer = ManifestWriter(run_dir, manifest.config_hash, manifest.seed)
    writer.write("summary.csv", "\n".join(csv_lines) + "\n")
    writer.write("summary.md", "\n".join(md) + "\n")
    writer.close()
    print("\n".join(md))
    return EXIT_OK if all(r["agreement"] for r in rows) else EXIT_INCONSISTENT


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not vals or any(not 0 < v < 1 for v in vals):
        raise argparse.ArgumentTypeError("s values must lie in (0, 1)")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None,
                        help="scenario config (JSON); defaults to the bundled suite")
    common.add_argument("--out", default=None, help="run directory (SCATTERLAB_OUT overrides)")
    common.add_argument("--jobs", type=int, default=1, help="parallel scenario workers")
    common.add_argument("--seed", type=int, default=None, help="master seed for invariant checks")
    common.add_argument("--s-values", type=_float_list, default=None, dest="s_values",
                        help="comma-separated heat times for the asp criterion")
    common.add_argument("--both-signs", action="store_true", dest="both_signs",
                        help="also probe t -> -oo with momentum-reflected packets")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="scatterlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="parse the config and validate its graphs")
    sub.add_parser("criteria", parents=[common], help="evaluate the summability criteria")
    sub.add_parser("scatter", parents=[common], help="simulate and test asymptotic equivalence")
    rp = sub.add_parser("report", parents=[common], help="summarize a completed run")
    rp.add_argument("run_dir", nargs="?", default=None)
    return parser


COMMANDS = {"validate": cmd_validate, "criteria": cmd_criteria, "scatter": cmd_scatter,
            "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"INVALID {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OrderOverflowError, TrustedWindowError, PacketFitError, ArithmeticError) as exc:
        print(f"RUNTIME {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"RUNTIME {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
