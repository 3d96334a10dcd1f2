"""Command-line entry point.

Exit codes: 0 ok, 1 usage or invalid input, 2 empty conditioned campaign,
3 I/O failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from . import oracle as orc
from . import stats
from . import trajectory as tr
from . import verify as vf
from .qubit import NAMED_STATES, DomainError, PureState, sample_tomography_counts, tomography_estimate

EXIT_OK, EXIT_USAGE, EXIT_EMPTY, EXIT_IO, EXIT_VERIFY = 0, 1, 2, 3, 4

log = logging.getLogger("povm_reversal")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


def _sibling(out: Path, tag: str) -> Path:
    return out.with_name(f"{out.stem}.{tag}{out.suffix}")


def run_manifest(command: str, config: dict[str, Any], **extra: Any) -> dict[str, Any]:
    """Resolved configuration plus provenance; only the timestamp varies between reruns."""
    return {
        "schema_version": stats.SCHEMA_VERSION,
        "artifact_version": __version__,
        "command": command,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config,
        **extra,
    }


def load_custom_ensemble(path: str | Path) -> tr.EnsembleSpec:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    members = []
    for item in payload:
        re0, im0, re1, im1 = (float(v) for v in item["state"])
        members.append((PureState(complex(re0, im0), complex(re1, im1)).normalized(), float(item["weight"])))
    return tr.EnsembleSpec.custom(members)


def parse_ensemble(text: str) -> tr.EnsembleSpec:
    if text == "z":
        return tr.EnsembleSpec.z_basis()
    if text == "x":
        return tr.EnsembleSpec.x_basis()
    if text.startswith("custom:"):
        return load_custom_ensemble(text.split(":", 1)[1])
    raise DomainError(f"unknown ensemble {text!r}; use z, x or custom:<file>")


def parse_state(text: str) -> PureState:
    if text in NAMED_STATES:
        return NAMED_STATES[text]()
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise DomainError("state must be z0, z1, x+, x- or re0,im0,re1,im1")
    return PureState(complex(parts[0], parts[1]), complex(parts[2], parts[3])).normalized()


def _departure_summary(result: tr.CampaignResult) -> dict[str, Any]:
    ks = np.unique(result.k)
    if ks.size == 1 and ks[0] > 0:
        k = int(ks[0])
        counts = np.bincount(result.n_plus, minlength=k + 1)
        centers, pmf = stats.lattice_pmf(result.n_over_N, k)
        return {
            "k": k,
            "n_plus_counts": counts.tolist(),
            "n_over_N": centers.tolist(),
            "probability": pmf.tolist(),
            "peaks": stats.peak_locations(centers, pmf),
        }
    vals, counts = np.unique(result.n_over_N[~np.isnan(result.n_over_N)], return_counts=True)
    return {"k": None, "n_over_N": vals.tolist(), "count": counts.tolist()}


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = parse_ensemble(args.ensemble)
    config = tr.ProtocolConfig(
        strength=args.lam, steps=args.steps, mode=args.mode, copies=args.copies,
        seed=args.seed, condition_k=args.condition_k,
    )
    result = tr.run_campaign(spec, config, workers=args.workers)
    crossings = stats.zero_crossing_summary(result.return_counts)
    departures = _departure_summary(result)
    resolved = {"ensemble": spec.to_dict(), **config.to_dict(), "workers": result.workers}
    summary = {
        "status": result.status,
        "generated": result.generated,
        "retained": result.retained,
        "acceptance_rate": result.acceptance_rate,
    }
    out = Path(args.out)
    if args.format == "json":
        payload = stats.to_payload(result, resolved)
        payload["data"].update(
            summary,
            zero_crossings=stats.to_payload(crossings)["data"],
            departures=departures,
        )
        stats.write_text(out, stats.dumps_json(payload))
        outputs = [out.name]
    else:
        stats.export(result, "csv", out)
        stats.export(crossings, "csv", _sibling(out, "zero_crossings"))
        stats.write_text(_sibling(out, "departures").with_suffix(".json"), stats.dumps_json(departures))
        outputs = [out.name, _sibling(out, "zero_crossings").name, _sibling(out, "departures").with_suffix(".json").name]
    stats.write_text(_manifest_path(out), stats.dumps_json(run_manifest("simulate", resolved, outputs=outputs, **summary)))
    print(f"{result.retained}/{result.generated} trajectories retained (acceptance {result.acceptance_rate:.6g})")
    if departures.get("peaks"):
        print("n/N peaks at " + ", ".join(f"{p:+.3f}" for p in departures["peaks"]))
    return EXIT_EMPTY if result.status == "empty" else EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    out = Path(args.out)
    fmt = args.format or ("json" if out.suffix == ".json" else "csv")
    resolved: dict[str, Any] = {"steps": args.steps}
    if args.quantum:
        if args.lam is None or args.condition_k is None:
            raise DomainError("--quantum needs --lambda and --condition-k")
        state = parse_state(args.state)
        pmf = orc.conditional_departure_distribution(args.steps, args.condition_k, args.lam, state)
        resolved.update(quantum=True, strength=args.lam, state=args.state, condition_k=args.condition_k)
        stats.export(pmf, fmt, out, resolved)
        extra: dict[str, Any] = {}
        print("l  probability")
        for l, p in enumerate(pmf.probabilities):
            print(f"{l:<2} {p:.12f}")
    else:
        table = orc.enumerate_all(args.steps)
        report = orc.reflection_identity_check(table)
        stats.export(table, fmt, out, resolved)
        extra = {
            "reflection_identity": {
                "passed": report.passed,
                "checked": report.checked,
                "violations": [list(v) for v in report.violations],
            },
            "no_return_walks": table.no_return,
        }
        print(f"{len(table.counts)} (k, l) cells; reflection identity {'PASS' if report.passed else 'FAIL'}")
    stats.write_text(_manifest_path(out), stats.dumps_json(run_manifest("oracle", resolved, outputs=[out.name], **extra)))
    if not args.quantum and not extra["reflection_identity"]["passed"]:
        return EXIT_VERIFY
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    results = vf.run_suites(seed=args.seed, cases=args.cases)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {r.cases:>6}  {'PASS' if r.passed else 'FAIL'}")
    failed = [r for r in results if not r.passed]
    if failed:
        first = failed[0]
        print(f"first failure: suite {first.name}: {json.dumps(first.counterexample, default=str)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_tomography(args: argparse.Namespace) -> int:
    if args.lam == 0.0:
        raise DomainError("lambda = 0 measurements carry no information; estimation impossible")
    if args.shots_per_axis <= 0:
        raise DomainError("--shots-per-axis must be positive")
    state = parse_state(args.state)
    rng = np.random.default_rng(args.seed)
    counts = sample_tomography_counts(state, args.lam, args.shots_per_axis, rng)
    estimate = tomography_estimate(*counts, args.lam)
    true = state.bloch()
    error = float(np.linalg.norm(estimate.r - true))
    config = {"state": args.state, "strength": args.lam, "shots_per_axis": args.shots_per_axis, "seed": args.seed}
    payload = {
        "schema_version": stats.SCHEMA_VERSION,
        "config": config,
        "data": {
            "counts": {ax: [c.n_plus, c.n_minus] for ax, c in zip("xyz", counts)},
            "estimate": estimate.r.tolist(),
            "true": true.tolist(),
            "error_norm": error,
            "out_of_range": estimate.out_of_range,
        },
    }
    out = Path(args.out)
    stats.write_text(out, stats.dumps_json(payload))
    stats.write_text(_manifest_path(out), stats.dumps_json(run_manifest("tomography", config, outputs=[out.name])))
    print("estimate " + " ".join(f"{v:+.6f}" for v in estimate.r) + f"  error {error:.3g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="povm-reversal", description="Unsharp-measurement reversal simulator and walk oracle.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run a filtered or unfiltered campaign")
    sim.add_argument("--ensemble", required=True, metavar="{z,x,custom:FILE}")
    sim.add_argument("--lambda", dest="lam", type=float, required=True)
    sim.add_argument("--steps", type=int, required=True)
    sim.add_argument("--mode", choices=[tr.FILTERED, tr.UNFILTERED], required=True)
    sim.add_argument("--copies", type=int, required=True)
    sim.add_argument("--condition-k", type=int, default=None)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--workers", type=int, default=None, help=f"default from ${tr.WORKERS_ENV} or 1")
    sim.add_argument("--out", required=True)
    sim.add_argument("--format", choices=["csv", "json"], default="json")
    sim.set_defaults(func=cmd_simulate)

    orc_p = sub.add_parser("oracle", help="exhaustive walk enumeration")
    orc_p.add_argument("--steps", type=int, required=True)
    orc_p.add_argument("--quantum", action="store_true")
    orc_p.add_argument("--lambda", dest="lam", type=float, default=None)
    orc_p.add_argument("--state", choices=sorted(NAMED_STATES), default="z0")
    orc_p.add_argument("--condition-k", type=int, default=None)
    orc_p.add_argument("--out", required=True)
    orc_p.add_argument("--format", choices=["csv", "json"], default=None)
    orc_p.set_defaults(func=cmd_oracle)

    ver = sub.add_parser("verify", help="run the algebraic invariant suites")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--cases", type=int, default=1000)
    ver.set_defaults(func=cmd_verify)

    tom = sub.add_parser("tomography", help="Bloch-vector estimation from unsharp counts")
    tom.add_argument("--state", required=True)
    tom.add_argument("--lambda", dest="lam", type=float, required=True)
    tom.add_argument("--shots-per-axis", type=int, required=True)
    tom.add_argument("--seed", type=int, required=True)
    tom.add_argument("--out", required=True)
    tom.set_defaults(func=cmd_tomography)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DomainError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
