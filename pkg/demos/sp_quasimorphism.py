"""The quasimorphism on paths in Sp(2n, R).

* rotation loops at J0 give -2 pi m n,
* the surface quadrature agrees with the isotropy rotation number,
* the defect of a pair equals the area of the triangle spanned by the orbit,
* a path and its inverse cancel.

Run with ``python3 demos/sp_quasimorphism.py``.
"""

import numpy as np

from momentqm.engine import defect, nu_x
from momentqm.sp_qm import random_sp_path, rotation_loop, rotation_number_nu, sp_instance
from momentqm.symplectic import j0, random_compatible


def main():
    rng = np.random.default_rng(11)
    for n in (1, 2):
        space, action = sp_instance(n)
        print(f"n = {n}")
        for m in (1, 2):
            v = nu_x(space, action, rotation_loop(n, m), j0(n)).value
            print(f"  rotation loop m={m}: nu = {v:+.10f}   (-2 pi m n = {-2 * np.pi * m * n:+.10f})")
        x = random_compatible(rng, n, 0.5)
        for i in range(3):
            p = random_sp_path(rng, n, segments=3)
            rep = nu_x(space, action, p, x)
            inv = nu_x(space, action, ~p, x).value
            print(
                f"  path {i}: nu = {rep.value:+.8f} (disk {rep.disk_term:+.4f}, moment {rep.moment_term:+.4f}), "
                f"rotation number {rotation_number_nu(p, x):+.8f}, nu + nu(inverse) = {rep.value + inv:+.1e}"
            )
        p, q = random_sp_path(rng, n), random_sp_path(rng, n)
        d, tri = defect(space, action, p, q, j0(n))
        print(f"  defect {d:+.8f}, triangle area {tri:+.8f}")


if __name__ == "__main__":
    main()
