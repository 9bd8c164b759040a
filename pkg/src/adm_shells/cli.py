"""Command line front end: ``adm-shells <command> [--config path] [overrides]``.

Every command writes JSON reports (and CSV tables where a table makes sense)
into ``--out``. Reports carry the physical conventions in use.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import pipeline
from .adm_charges import charges
from .config import SCHEMA, RunConfig, load_config
from .moments import DegenerateSeed, angular_moments, cm_moments
from .shell_fields import InvariantViolation, save_field, scale_to_shell
from .verify import run_verify

CONVENTIONS = {
    "E": "1/(16 pi) flux",
    "P": "1/(8 pi) flux",
    "J": "1/(8 pi E) flux",
    "C": "1/(16 pi E) flux",
    "lambda": "-8 pi E alpha",
    "beta": "64 pi E gamma",
    "rotation": "push-forward F'(x) = R F(R^T x) R^T",
}


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _resolution(text: str) -> tuple:
    try:
        nt, npf = text.lower().split("x")
        return int(nt), int(npf)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("resolution must look like 64x128") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adm-shells", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, help="output directory (overrides out_dir)")
    common.add_argument("--resolution", type=_resolution, help="sphere grid, e.g. 64x128")
    common.add_argument("--k", type=_floats, help="comma separated shell scales")
    common.add_argument("--radii", type=_floats, help="comma separated charge radii (in units of the mass)")
    common.add_argument("--no-E-normalization", dest="no_E", action="store_true", help="report E J and E C")
    sub.add_parser("verify", parents=[common], help="sphere identities, divergence, L sigma and parity checks")
    sub.add_parser("target", parents=[common], help="targeted fields and their moment vectors")
    p = sub.add_parser("pipeline", parents=[common], help="scale, correct and measure for every k")
    p.add_argument("--fixed-point", action="store_true", help="also drive the measured dJ to alpha at the largest k")
    sub.add_parser("adm", parents=[common], help="charges of the base data")
    sub.add_parser("moments", parents=[common], help="moment vectors of the targeted fields across k")
    sub.add_parser("correct", parents=[common], help="corrector solve and residuals for every k")
    sub.add_parser("schema", parents=[common], help="write the configuration schema")
    return ap


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.resolution:
        cfg = replace(cfg, resolution=args.resolution)
    if args.k:
        if min(args.k) < 1:
            raise ValueError("shell scales must be >= 1")
        cfg = replace(cfg, k_list=args.k)
    if args.radii:
        if len(args.radii) < 3:
            raise ValueError("need at least 3 radii")
        cfg = replace(cfg, radii=args.radii)
    if args.no_E:
        cfg = replace(cfg, normalize_by_E=False)
    if args.out:
        cfg = replace(cfg, out_dir=str(args.out))
    return cfg


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    path.write_text(buf.getvalue(), encoding="utf-8")


# -- commands -------------------------------------------------------------------------


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    checks = run_verify(cfg)
    ok = all(c.ok for c in checks)
    table = next(c.detail["suite"] for c in checks if c.name == "div_identity")
    _write_json(out / "verify.json", {"ok": ok, "checks": [c.to_json() for c in checks], "config": cfg.to_json()})
    rows = [(f"{a}x{b}", e, o) for (a, b), e, o in zip(table["resolutions"], table["errors"], [""] + table["orders"])]
    _write_csv(out / "convergence.csv", ["resolution", "identity_error", "order"], rows)
    for c in checks:
        status = "ok  " if c.ok else "FAIL"
        print(f"{status} {c.name:36s} value={c.value:.3e} tol={c.tol:.1e} margin={c.tol - c.value:+.3e}")
    return 0 if ok else 1


def _energy(cfg: RunConfig) -> float:
    return charges(pipeline.base_data(cfg), pipeline.radius_ladder(cfg, 1.0), True).E


def cmd_target(cfg: RunConfig, out: Path) -> int:
    E = _energy(cfg)
    alpha = np.asarray(cfg.alpha, dtype=float)
    report = {"energy": E, "conventions": CONVENTIONS, "alpha": alpha.tolist(), "gamma": list(cfg.gamma)}
    fields = pipeline.targeted_fields(cfg, alpha, cfg.gamma, E)
    if fields.sigma is not None:
        save_field(fields.sigma, out / "sigma.chsh")
        save_field(fields.tau, out / "tau.chsh")
        mv = angular_moments(fields.sigma, fields.tau)
        report["angular"] = {"target": (-8 * np.pi * E * alpha).tolist(), "moment": mv.to_json()}
    else:
        # zero target: two shells at k and 2k carrying opposite nonzero targets
        v = np.array([0.0, 0.0, 1.0])
        k = float(cfg.k_list[0])
        shells = []
        for sign, kk, tag in ((1.0, k, "k"), (-1.0, 2 * k, "2k")):
            f = pipeline.targeted_fields(cfg, sign * v, (0.0, 0.0, 0.0), E)
            s, t = scale_to_shell(f.sigma, kk), scale_to_shell(f.tau, kk)
            save_field(s, out / f"sigma_{tag}.chsh")
            save_field(t, out / f"tau_{tag}.chsh")
            shells.append({"scale": kk, "v": (sign * v).tolist(), "moment": angular_moments(s, t).to_json()})
        total = np.sum([s["moment"]["values"] for s in shells], axis=0)
        report["angular"] = {"composition": shells, "total": total.tolist()}
    if fields.sigma_cm is not None:
        save_field(fields.sigma_cm, out / "sigma_cm.chsh")
        mv = cm_moments(fields.sigma_cm)
        report["cm"] = {"target": (64 * np.pi * E * np.asarray(cfg.gamma)).tolist(), "moment": mv.to_json()}
    _write_json(out / "moments.json", report)
    print(json.dumps({k: report[k] for k in report if k in ("angular", "cm")}, indent=1)[:2000])
    return 0


def cmd_moments(cfg: RunConfig, out: Path) -> int:
    E = _energy(cfg)
    fields = pipeline.targeted_fields(cfg, cfg.alpha, cfg.gamma, E)
    rows, report = [], {"conventions": CONVENTIONS, "rows": []}
    for k in cfg.k_list:
        a = angular_moments(scale_to_shell(fields.sigma, k), scale_to_shell(fields.tau, k)) if fields.sigma is not None else None
        c = cm_moments(scale_to_shell(fields.sigma_cm, k)) if fields.sigma_cm is not None else None
        av = a.values if a is not None else np.zeros(3)
        cv = c.values if c is not None else np.zeros(3)
        report["rows"].append({"k": k, "angular": a.to_json() if a is not None else None, "cm": c.to_json() if c is not None else None})
        rows.append((k, *av, *cv))
    _write_json(out / "moments.json", report)
    _write_csv(out / "moments.csv", ["k", "T1", "T2", "T3", "Tcm1", "Tcm2", "Tcm3"], rows)
    for r in rows:
        print(" ".join(f"{float(v):.12g}" for v in r))
    return 0


def cmd_adm(cfg: RunConfig, out: Path) -> int:
    base = pipeline.base_data(cfg)
    radii = [float(r) * cfg.base["mass"] for r in sorted(cfg.radii)]
    cs = charges(base, radii, cfg.normalize_by_E)
    _write_json(out / "adm.json", cs.to_json())
    rows = [(rho, cs.samples["E"][i], *cs.samples["P"][i], *cs.samples["J"][i], *cs.samples["C"][i]) for i, rho in enumerate(radii)]
    _write_csv(out / "adm.csv", ["rho", "E", "P1", "P2", "P3", "EJ1", "EJ2", "EJ3", "EC1", "EC2", "EC3"], rows)
    print(cs.dumps())
    return 0


def cmd_correct(cfg: RunConfig, out: Path) -> int:
    from .corrector import correct
    from .initial_data import with_shells

    base = pipeline.base_data(cfg)
    fields = pipeline.targeted_fields(cfg, cfg.alpha, cfg.gamma, _energy(cfg))
    report, rows = {"rows": []}, []
    for k in cfg.k_list:
        data = with_shells(base, *fields.shells(k))
        sol = correct(data, L=cfg.corrector.L, ds=cfg.corrector.ds, outer_factor=cfg.corrector.outer_factor)
        s = sol.summary()
        report["rows"].append({"k": k, **s})
        b, a = s["residual_before"], s["residual_after"]
        rows.append((k, s["A"], *s["B"], b["sup_H"], a["sup_H"], b["sup_M"], a["sup_M"]))
        print(f"k={k:g} A={s['A']:.6g} sup_H {b['sup_H']:.3e} -> {a['sup_H']:.3e}")
    _write_json(out / "correct.json", report)
    _write_csv(out / "correct.csv", ["k", "A", "B1", "B2", "B3", "sup_H_before", "sup_H_after", "sup_M_before", "sup_M_after"], rows)
    return 0


def cmd_pipeline(cfg: RunConfig, out: Path, fixed_point: bool = False) -> int:
    report = pipeline.run_pipeline(cfg)
    if fixed_point:
        report["fixed_point"] = pipeline.drive_angular(cfg, max(cfg.k_list))
    _write_json(out / "pipeline.json", report)
    (out / "pipeline.csv").write_text(pipeline.report_csv(report), encoding="utf-8")
    for r in report["rows"]:
        print(f"k={r['k']:g} dJ={np.round(r['dJ'], 6).tolist()} dC={np.round(r['dC'], 6).tolist()}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except Exception as exc:  # noqa: BLE001
        print(f"invalid configuration: {getattr(exc, 'message', exc)}", file=sys.stderr)
        return 2
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", cfg.to_json())
    try:
        if args.command == "verify":
            return cmd_verify(cfg, out)
        if args.command == "schema":
            _write_json(out / "config.schema.json", SCHEMA)
            return 0
        if args.command == "target":
            return cmd_target(cfg, out)
        if args.command == "moments":
            return cmd_moments(cfg, out)
        if args.command == "adm":
            return cmd_adm(cfg, out)
        if args.command == "correct":
            return cmd_correct(cfg, out)
        if args.command == "pipeline":
            return cmd_pipeline(cfg, out, args.fixed_point)
    except pipeline.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InvariantViolation, DegenerateSeed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
