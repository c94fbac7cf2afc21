"""Hamiltonian flows on the torus and the disk.

* the scalar curvature of a warped structure against its closed form, and
  the total curvature on the torus;
* frak_S of a rotation bump on the disk against the calibrated Maslov
  prediction;
* the Calabi invariant of the same flow.

Run with ``python3 demos/surface_flows.py`` (about ten seconds).
"""

import numpy as np

from momentqm.ham2d import HamFlowSpec, Hamiltonian, JField, SurfaceGrid, calabi, hermitian_scalar_curvature
from momentqm.ham2d import local_type_report
from momentqm.ham2d.grid import poly_bump
from momentqm.sp_qm import frozen_ledger


def main():
    torus = SurfaceGrid("torus", 64)
    x, _ = torus.xy
    w, a = 2 * np.pi, 0.3
    f = a * np.sin(w * x)
    J = JField(torus, np.zeros_like(x), np.exp(f))
    exact = -(a * -w * w * np.sin(w * x) + (a * w * np.cos(w * x)) ** 2) * np.exp(f)
    S = hermitian_scalar_curvature(J)
    print(f"warped torus: max |S - exact| = {np.max(np.abs(S - exact)):.2e}, total curvature = {torus.integrate(S):+.2e}")

    disk = SurfaceGrid("disk", 32)
    R, k = 0.3, 8
    for amp in (0.01, 0.02):
        H = Hamiltonian(lambda x, y, amp=amp: amp * poly_bump(np.hypot(x, y), R, k))
        spec = HamFlowSpec.autonomous(H, 1.0, dt=1e-2)
        rep = local_type_report(disk, spec, frozen_ledger(1), k_max=4)
        print(
            f"bump a={amp}: frak_S = {rep.frak_s:+.6e}, kappa * tau = {rep.prediction:+.6e}, "
            f"relative difference {rep.relative:.1e}, Calabi = {calabi(disk, spec):.4e}"
        )


if __name__ == "__main__":
    main()
