"""Run the full pipeline for a config and print the per-k charge changes.

    python3 scripts/run_pipeline.py [config.json] [--out DIR] [--fixed-point]
"""
import argparse
import json
from pathlib import Path

from adm_shells import pipeline
from adm_shells.config import RunConfig, load_config


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config", nargs="?", type=Path)
    ap.add_argument("--out", type=Path, default=Path("out/pipeline"))
    ap.add_argument("--fixed-point", action="store_true")
    args = ap.parse_args()
    cfg = load_config(args.config) if args.config else RunConfig()
    args.out.mkdir(parents=True, exist_ok=True)
    report = pipeline.run_pipeline(cfg)
    if args.fixed_point:
        report["fixed_point"] = pipeline.drive_angular(cfg, max(cfg.k_list))
    (args.out / "pipeline.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    (args.out / "pipeline.csv").write_text(pipeline.report_csv(report))
    print(f"{'k':>5} {'dev_J':>10} {'dev_C':>10} {'E_bar - E - A/2':>16}")
    for r in report["rows"]:
        print(f"{r['k']:5g} {r['dev_J']:10.3e} {r['dev_C']:10.3e} {r['E_bar'] - r['E_plus_half_A']:16.2e}")
    for key in ("dev_J_exponent", "dev_C_exponent"):
        if key in report:
            print(f"{key} = {report[key]:.3f}")
    if "fixed_point" in report:
        fp = report["fixed_point"]
        print(f"fixed point: z = {fp['z']} after {fp['iterations']} evaluations, residual {fp['residual']:.2e}")


if __name__ == "__main__":
    main()
