"""Homogenisation from several basepoints and the ratio to the Maslov turns.

The homogenised value of a path does not depend on the basepoint, and it is
a fixed multiple of the homogenised Maslov turns.  The multiple per form
kind is what the calibration ledger stores.

Run with ``python3 demos/homogenize_and_calibrate.py`` (about half a minute).
"""

import numpy as np

from momentqm.engine import homogenize
from momentqm.sp_qm import frozen_ledger, maslov_turns, random_sp_path, sp_instance
from momentqm.symplectic import j0, random_compatible


def main():
    rng = np.random.default_rng(5)
    n, k_max = 1, 16
    space, action = sp_instance(n)
    basepoints = [j0(n)] + [random_compatible(rng, n, 0.5) for _ in range(2)]
    ledger = frozen_ledger(n)
    print(f"frozen ledger n = {n}: kappa = {ledger.kappa}")
    for i in range(4):
        p = random_sp_path(rng, n, reach=6)
        ests = [homogenize(space, action, p, x, k_max) for x in basepoints]
        tau = maslov_turns(p**k_max, n) / k_max
        line = ", ".join(f"{r.estimate:+.5f} +- {r.half_width:.4f}" for r in ests)
        print(f"path {i}: {line}   kappa * tau = {ledger.kappa_trace * tau:+.5f}")


if __name__ == "__main__":
    main()
