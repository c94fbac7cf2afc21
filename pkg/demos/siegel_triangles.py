"""Geodesic triangles in the Siegel space and the bound on their areas.

Draws random triangles of complex structures in R^2 (the upper half-plane)
and in R^4, reports their areas under the three form normalisations and
shows how the siegel-form area of a flattening triangle approaches pi.

Run with ``python3 demos/siegel_triangles.py``.
"""

import numpy as np

from momentqm.quadrature import QuadParams
from momentqm.siegel import triangle_area
from momentqm.symplectic import random_compatible, siegel_to_j


def upper_half_plane(z):
    return siegel_to_j(np.array([[z]])).entries


def main():
    rng = np.random.default_rng(3)
    print("random triangles (n = 2): area by form kind")
    for _ in range(3):
        tri = [random_compatible(rng, 2, 1.0) for _ in range(3)]
        areas = {k: triangle_area(k, *tri).value for k in ("trace", "siegel", "bergman")}
        print("  " + "  ".join(f"{k:>7} {v:+.6f}" for k, v in areas.items()))

    print("\nflattening triangles in the upper half-plane, siegel form (bound pi)")
    quad = QuadParams(s_nodes=32, t_nodes=16)
    for eps in (0.5, 0.2, 0.1, 0.05, 0.02):
        tri = [upper_half_plane(z) for z in (-1 + eps * 1j, 1 + eps * 1j, 1j / eps)]
        res = triangle_area("siegel", *tri, quad)
        print(f"  height {eps:5.2f}: |area| = {abs(res.value):.6f}   pi - |area| = {np.pi - abs(res.value):.2e}")


if __name__ == "__main__":
    main()
