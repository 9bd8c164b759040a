"""Grid convergence of the sphere identity, the Poisson solver and the moment quadrature."""
import numpy as np

from adm_shells.moments import angular_moments, cm_moments
from adm_shells.shell_fields import default_pair, make_sigma_cm
from adm_shells.verify import gauss_law_check, identity_suite, observed_order, poisson_convergence


def main():
    suite = identity_suite(((16, 32), (32, 64), (64, 128), (128, 256)))
    print("sphere identity  div delta*(du) + 1/2 d(Delta u + 2u)")
    for (a, b), e in zip(suite["resolutions"], suite["errors"]):
        print(f"  {a:4d}x{b:<4d} {e:.3e}")
    print(f"  observed order before round-off: {observed_order(suite['errors']):.2f}")

    conv = poisson_convergence()
    print("radial Poisson solver, manufactured solution")
    for n, e in zip(conv["n_s"], conv["errors"]):
        print(f"  n_s={n:4d} {e:.3e}")
    print("  orders " + " ".join(f"{o:.2f}" for o in conv["orders"]))
    print(f"Gauss law relative error {gauss_law_check()['rel_error']:.2e}")

    sigma, tau = default_pair()
    t = angular_moments(sigma, tau)
    c = cm_moments(make_sigma_cm())
    print("moment two-resolution estimates (relative)")
    print(f"  angular {t.error / np.linalg.norm(t.values):.2e}")
    print(f"  cm      {c.error / np.linalg.norm(c.values):.2e}")


if __name__ == "__main__":
    main()
