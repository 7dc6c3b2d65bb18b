"""Command-line front end: ``blochframes invariants | frame | verify | model-info``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field

from .chern import ROUNDING_TOLERANCE, compute_invariants
from .errors import BlochFrameError, StageError, ValidationError
from .frames import export_frame, frame_nd, parseval_frame, wannierize
from .kgrid import KGrid
from .models import GAP_THRESHOLD, build_projector_field, builtin, load_model
from .verifysuite import SUITES, _plain, run_suite

DEFAULT_GRID = {1: 32, 2: 32, 3: 16, 4: 12}
TOLERANCES = {"rounding": ROUNDING_TOLERANCE, "gap": GAP_THRESHOLD}


@dataclass
class RunConfig:
    command: str
    model: dict | None = None
    grid: int | None = None
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: dict(TOLERANCES))
    threads: int = 1
    out: str | None = None
    parseval: bool | None = None
    wannier: str | None = None
    suite: str | None = None

    def echo(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def _parse_pairs(items, what):
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ValidationError(f"{what} must look like NAME=VALUE, got {item!r}")
        try:
            out[key] = float(val)
        except ValueError:
            raise ValidationError(f"{what} {key} needs a number, got {val!r}") from None
    return out


def _resolve_model(args):
    if args.model and args.model_file:
        raise ValidationError("give either --model or --model-file, not both")
    if args.model_file:
        if args.param:
            raise ValidationError("--param applies to built-in models only")
        return load_model(args.model_file)
    if not args.model:
        raise ValidationError("a model is required (--model NAME or --model-file PATH)")
    return builtin(args.model, _parse_pairs(args.param, "--param"))


def build_config(args):
    """Validate arguments into a RunConfig (plus the model object when the command needs one)."""
    tol = dict(TOLERANCES)
    for key, val in _parse_pairs(args.tol, "--tol").items():
        if key not in TOLERANCES:
            raise ValidationError(f"unknown tolerance {key!r}; choose from {sorted(TOLERANCES)}")
        if val <= 0:
            raise ValidationError(f"tolerance {key} must be positive")
        tol[key] = val
    if args.grid is not None and args.grid < 2:
        raise ValidationError("--grid must be at least 2")
    if args.threads < 1:
        raise ValidationError("--threads must be at least 1")
    model = None
    if args.command != "verify":
        model = _step("model", _resolve_model, args)
    grid = args.grid
    if model is not None and grid is None:
        grid = DEFAULT_GRID[model.dim]
    cfg = RunConfig(args.command, model.to_dict() if model is not None else None, grid, args.seed, tol,
                    args.threads, args.out)
    if args.command == "frame":
        if not args.out:
            raise ValidationError("frame needs --out PATH for the binary frame")
        cfg.parseval = args.parseval
        cfg.wannier = args.wannier
    if args.command == "verify":
        cfg.suite = args.suite
    return cfg, model


def _step(stage, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except BlochFrameError as exc:
        raise StageError(stage, exc) from exc


def _emit(payload: dict, out: str | None):
    text = json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _projectors(cfg, model):
    grid = KGrid(model.dim, cfg.grid)
    return _step("projector", build_projector_field, model, grid, cfg.threads, cfg.tolerances["gap"])


def cmd_invariants(cfg, model, args):
    pf, gap = _projectors(cfg, model)
    report = _step("invariants", compute_invariants, pf, gap, cfg.tolerances["rounding"])
    _emit({"config": cfg.echo(), **report.to_dict()}, cfg.out)
    return 0


def cmd_frame(cfg, model, args):
    pf, gap = _projectors(cfg, model)
    build = parseval_frame if cfg.parseval else frame_nd
    res = _step("frame", build, pf, cfg.seed)
    side = export_frame(res, cfg.out, cfg.echo())
    summary = {"config": cfg.echo(), "frame": cfg.out, "sidecar": side, "kind": res.kind, "M": res.M,
               "certificate": res.certificate.to_dict(), "residuals": res.residuals, "gap": gap.to_dict()}
    if cfg.wannier:
        prof = _step("wannier", wannierize, res)
        prof.to_csv(cfg.wannier)
        summary["wannier"] = {"csv": cfg.wannier, "slope_log10": prof.slope}
    _emit(summary, None)
    return 0


def cmd_verify(cfg, model, args):
    results = run_suite(cfg.suite, cfg.seed, cfg.grid)
    checks = []
    for r in results:
        d = r.to_dict()
        if not args.timings:
            d.pop("runtime", None)
        checks.append(d)
    failed = [r for r in results if not r.passed]
    _emit({"config": cfg.echo(), "checks": checks, "passed": len(results) - len(failed),
           "failed": len(failed)}, cfg.out)
    print(f"verify {cfg.suite}: {len(results) - len(failed)}/{len(results)} checks passed", file=sys.stderr)
    for r in failed:
        print(f"  FAIL {r.name} [{r.model}] n={r.grid}", file=sys.stderr)
    return 1 if failed else 0


def cmd_model_info(cfg, model, args):
    info = {"config": cfg.echo(), "dim": model.dim, "norb": model.norb, "occupied": model.occupied,
            "hoppings": len(model.hoppings)}
    _, gap = _projectors(cfg, model)
    info["gap"] = gap.to_dict()
    _emit(info, cfg.out)
    return 0


COMMANDS = {"invariants": cmd_invariants, "frame": cmd_frame, "verify": cmd_verify,
            "model-info": cmd_model_info}


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="built-in model name")
    common.add_argument("--param", action="append", metavar="K=V", help="built-in model parameter")
    common.add_argument("--model-file", metavar="PATH", help="model JSON file")
    common.add_argument("--grid", type=int, metavar="N", help="points per axis")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", action="append", metavar="NAME=V",
                        help="tolerance override: rounding or gap")
    common.add_argument("--out", metavar="PATH", help="output path (stdout when omitted)")
    common.add_argument("--threads", type=int, default=1, help="worker cap for projector sampling")

    parser = argparse.ArgumentParser(prog="blochframes", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("invariants", parents=[common], help="Chern numbers as JSON")
    fr = sub.add_parser("frame", parents=[common], help="build and export a Bloch frame")
    fr.add_argument("--parseval", action="store_true", help="periodic Parseval frame instead")
    fr.add_argument("--wannier", metavar="CSV", help="write Wannier amplitudes to CSV")
    ver = sub.add_parser("verify", parents=[common], help="run a verification suite")
    ver.add_argument("--suite", default="all", choices=sorted(SUITES) + ["all"])
    ver.add_argument("--timings", action="store_true", help="include per-check runtimes")
    sub.add_parser("model-info", parents=[common], help="model summary and gap scan")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg, model = _step("config", build_config, args)
        return COMMANDS[args.command](cfg, model, args)
    except BlochFrameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: [io] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
