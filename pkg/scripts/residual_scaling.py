"""Decay of the uncorrected constraint residual on A_k with k.

Prints sup |H| and sup |M| per k, the plain power-law exponent, and the
exponent with a 1/k correction for the Schwarzschild background. The flat
background is shown for comparison.
"""
import numpy as np

from adm_shells import pipeline
from adm_shells.config import RunConfig
from adm_shells.constraints import fit_exponent, residual_report
from adm_shells.initial_data import flat_data, with_shells


def corrected_exponent(ks, vals):
    A = np.stack([np.ones_like(ks), -np.log(ks), 1.0 / ks], 1)
    return float(np.linalg.lstsq(A, np.log(vals), rcond=None)[0][1])


def main():
    cfg = RunConfig()
    fields = pipeline.targeted_fields(cfg, cfg.alpha, (0.0, 0.0, 0.0), 1.0)
    ks = np.array([4.0, 8.0, 16.0, 32.0])
    for name, base in (("schwarzschild", pipeline.base_data(cfg)), ("flat", flat_data())):
        rep = residual_report(lambda k: with_shells(base, *fields.shells(k)), ks)
        print(name)
        for r in rep.rows:
            print(f"  k={r['k']:4g} sup_H={r['sup_H']:.3e} sup_M={r['sup_M']:.3e}")
        sup = np.array([max(r["sup_H"], r["sup_M"]) for r in rep.rows])
        print(f"  power fit {fit_exponent(ks, sup):.3f}  with 1/k term {corrected_exponent(ks, sup):.3f}")


if __name__ == "__main__":
    main()
