"""Command-line entry point: ``fracshell <subcommand> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
from scipy.io import mmwrite

from .assembly import BoundarySpec, assemble_linear
from .errors import ConfigError, FracShellError
from .studies import (
    CaseConfig,
    build_model,
    convergence_study,
    curvature_study,
    run_case,
    sweep,
    write_csv,
    write_json,
    write_records,
)

OUT_ENV = "FRACSHELL_OUT"
DEFAULT_OUT = "results"


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON case configuration (defaults apply when omitted)")
    common.add_argument("--out", type=Path, help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--threads", type=int, default=1, help="worker threads for independent cases")
    common.add_argument("--verbose", action="store_true", help="log Newton iterations")

    parser = argparse.ArgumentParser(prog="fracshell", description="Fractional-order nonlocal shell panel analysis")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run a single case")
    p = sub.add_parser("sweep", parents=[common], help="alpha x l_f parametric sweep")
    p.add_argument("--alpha", type=float, nargs="+", help="fractional orders (overrides config 'sweep.alpha')")
    p.add_argument("--l-f", dest="l_f", type=float, nargs="+", help="horizon lengths (overrides config 'sweep.l_f')")
    p = sub.add_parser("converge", parents=[common], help="mesh convergence over dynamic rates")
    p.add_argument("--rates", type=float, nargs="+", default=[5.0, 10.0, 20.0])
    p = sub.add_parser("curvature", parents=[common], help="radius and load-direction study")
    p.add_argument("--radii", type=float, nargs="+", default=[5.0, 10.0], help="radii in units of a")
    p.add_argument("--directions", nargs="+", default=["+e3", "-e3"], choices=["+e3", "-e3"])
    p = sub.add_parser("stencil-dump", parents=[common], help="dump derivative stencils (and optionally K)")
    p.add_argument("--matrix-market", action="store_true", help="also write the stiffness matrix (.mtx)")
    return parser


def _raw_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None


def _out_dir(args) -> Path:
    out = args.out or Path(os.environ.get(OUT_ENV, DEFAULT_OUT))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _meta(args, raw: dict, started: float) -> dict:
    return {"command": args.command, "input": raw, "elapsed": time.perf_counter() - started}


def _cmd_run(args, config, raw, out, t0):
    record = run_case(config)
    files = write_records(out, "case", [record], _meta(args, raw, t0))
    return {"w_center": record.w_center, "w_bar": record.w_bar, "q_bar": record.q_bar, "files": files}


def _cmd_sweep(args, config, raw, out, t0):
    spec = raw.get("sweep", {})
    alphas = args.alpha or spec.get("alpha")
    l_fs = args.l_f or spec.get("l_f")
    if not alphas or not l_fs:
        raise ConfigError("sweep needs alpha and l_f lists (flags or the 'sweep' config section)")
    records = sweep(config, alphas, l_fs, threads=args.threads)
    files = write_records(out, "sweep", records, _meta(args, raw, t0))
    return {"cases": len(records), "failed": sum(r.error is not None for r in records), "files": files}


def _cmd_converge(args, config, raw, out, t0):
    rows = convergence_study(config, args.rates)
    dicts = [dataclasses.asdict(r) for r in rows]
    files = {
        "table": write_csv(out / "convergence.csv", dicts, list(dicts[0])),
        "json": write_json(out / "convergence.json", {"meta": _meta(args, raw, t0), "config": config.to_dict(), "rows": dicts}),
    }
    return {"rows": len(rows), "files": files}


def _cmd_curvature(args, config, raw, out, t0):
    if config.analysis.kind != "nonlinear":
        config = config.replace(analysis={"kind": "nonlinear"})
    radii = [r * config.panel.a for r in args.radii]
    rows = curvature_study(config, radii, args.directions, threads=args.threads)
    dicts = [dataclasses.asdict(r) for r in rows]
    files = {
        "table": write_csv(out / "curvature.csv", dicts, [f.name for f in dataclasses.fields(rows[0].__class__)] if rows else ["R"]),
        "json": write_json(out / "curvature.json", {"meta": _meta(args, raw, t0), "config": config.to_dict(), "rows": dicts}),
    }
    return {"rows": len(rows), "files": files}


def _cmd_stencil_dump(args, config, raw, out, t0):
    model = build_model(config)
    hmap = model.ops.horizon_map
    rows = []
    for qs in hmap.sets:
        for direction, pts, D, hz in ((1, qs.x1, qs.D1, qs.h1), (2, qs.x2, qs.D2, qs.h2)):
            for k, x in enumerate(pts):
                for node in np.flatnonzero(D[k]):
                    rows.append(
                        {
                            "set": qs.name, "direction": direction, "point": k, "position": x,
                            "l_minus": hz[k][0], "l_plus": hz[k][1], "node": int(node), "weight": D[k, node],
                        }
                    )
    files = {"stencils": write_csv(out / "stencils.csv", rows, list(rows[0]))}
    if args.matrix_market:
        system = assemble_linear(model)
        path = out / "stiffness.mtx"
        mmwrite(str(path), system.to_sparse(), comment=f"bc-free stiffness; constrained by {BoundarySpec(config.bc).kind}", symmetry="symmetric")
        files["matrix"] = path
    write_json(out / "stencils.json", {"meta": _meta(args, raw, t0), "config": config.to_dict(), "notes": list(hmap.notes)})
    return {"entries": len(rows), "files": files}


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "converge": _cmd_converge,
    "curvature": _cmd_curvature,
    "stencil-dump": _cmd_stencil_dump,
}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s %(message)s",
        stream=sys.stderr,
        force=True,
    )
    t0 = time.perf_counter()
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        raw = _raw_config(args.config)
        config = CaseConfig.from_dict(raw)
        out = _out_dir(args)
        summary = _COMMANDS[args.command](args, config, raw, out, t0)
    except FracShellError as exc:
        print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(json.dumps({"error": "internal", "message": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 2
    print(json.dumps(summary, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
