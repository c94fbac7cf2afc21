"""Dense linear algebra for Sp(2n, R), its Lie algebra, U(n) and compatible
complex structures.

Conventions
-----------
Coordinates are stacked as ``(p, q)`` and the standard complex structure is

    J0 = [[0, -I], [I, 0]].

A matrix ``M`` is symplectic when ``M.T @ J0 @ M == J0``.  The symplectic form
is ``omega(xi, eta) = xi.T @ J0.T @ eta`` so that ``omega(., J0 .)`` is the
Euclidean inner product.  A complex structure ``J`` is compatible when
``J @ J == -I`` and ``G = -J0 @ J`` (the matrix of ``omega(., J .)``) is
symmetric positive definite; equivalently ``J = J0 @ G`` with ``G`` a
positive-definite symplectic matrix.

Angles are measured in turns (a full circle is 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

TOL_SP = 1e-9
TOL_PD = 1e-12


class NotSymplecticError(ValueError):
    pass


class UndersampledError(ValueError):
    """Raised when consecutive samples of a circle-valued path jump by half a turn or more."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


def j0(n: int) -> np.ndarray:
    """Standard complex structure on R^{2n}."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


def half_dim(M) -> int:
    m = np.shape(M)[-1]
    if m % 2 or np.shape(M)[-2] != m:
        raise ValueError(f"expected a (2n, 2n) matrix, got shape {np.shape(M)}")
    return m // 2


def symplectic_residual(M) -> float:
    M = np.asarray(M, dtype=float)
    J = j0(half_dim(M))
    r = np.swapaxes(M, -1, -2) @ J @ M - J
    return float(np.max(np.abs(r)))


def algebra_residual(X) -> float:
    X = np.asarray(X, dtype=float)
    J = j0(half_dim(X))
    r = np.swapaxes(X, -1, -2) @ J + J @ X
    return float(np.max(np.abs(r)))


def is_symplectic(M, tol=TOL_SP) -> bool:
    return symplectic_residual(M) < tol * max(1.0, float(np.max(np.abs(M))) ** 2)


def sp_inverse(M) -> np.ndarray:
    """Inverse of a symplectic matrix, ``J0^T M^T J0`` (exact, no solve)."""
    M = np.asarray(M, dtype=float)
    J = j0(half_dim(M))
    return -J @ np.swapaxes(M, -1, -2) @ J


@dataclass(frozen=True)
class SympMatrix:
    entries: np.ndarray
    tol: float = TOL_SP

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        object.__setattr__(self, "entries", a)
        if not is_symplectic(a, self.tol):
            raise NotSymplecticError(
                f"matrix is not symplectic (residual {symplectic_residual(a):.3e})"
            )

    @property
    def n(self) -> int:
        return half_dim(self.entries)


@dataclass(frozen=True)
class SpAlgebra:
    entries: np.ndarray
    tol: float = TOL_SP

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        object.__setattr__(self, "entries", a)
        scale = max(1.0, float(np.max(np.abs(a))))
        if algebra_residual(a) > self.tol * scale:
            raise ValueError(
                f"matrix is not in sp(2n) (residual {algebra_residual(a):.3e})"
            )


@dataclass(frozen=True)
class CompatibleJ:
    entries: np.ndarray
    tol: float = TOL_SP

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        object.__setattr__(self, "entries", a)
        check_compatible(a, self.tol)

    @property
    def n(self) -> int:
        return half_dim(self.entries)

    @property
    def metric(self) -> np.ndarray:
        return -j0(self.n) @ self.entries


@dataclass(frozen=True)
class SiegelPoint:
    """Point ``Z = X + iY`` of the Siegel upper half-space."""

    X: np.ndarray
    Y: np.ndarray
    tol_pd: float = TOL_PD

    def __post_init__(self):
        X = np.atleast_2d(np.array(self.X, dtype=float))
        Y = np.atleast_2d(np.array(self.Y, dtype=float))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        if X.shape != Y.shape or X.shape[0] != X.shape[1]:
            raise ValueError("X and Y must be square matrices of equal size")
        if not np.allclose(X, X.T, atol=TOL_SP) or not np.allclose(Y, Y.T, atol=TOL_SP):
            raise ValueError("X and Y must be symmetric")
        if np.linalg.eigvalsh(Y)[0] <= self.tol_pd:
            raise ValueError("imaginary part is not positive definite")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def Z(self) -> np.ndarray:
        return self.X + 1j * self.Y

    @classmethod
    def from_complex(cls, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        return cls(Z.real, Z.imag)


def check_compatible(J, tol=TOL_SP):
    J = np.asarray(J, dtype=float)
    n = half_dim(J)
    scale = max(1.0, float(np.max(np.abs(J)))) ** 2
    sq = J @ J + np.eye(2 * n)
    if np.max(np.abs(sq)) > tol * scale:
        raise ValueError(f"J^2 != -I (residual {np.max(np.abs(sq)):.3e})")
    G = -j0(n) @ J
    if np.max(np.abs(G - G.T)) > tol * scale:
        raise ValueError("omega(., J .) is not symmetric")
    if np.linalg.eigvalsh(0.5 * (G + G.T))[0] <= 0:
        raise ValueError("omega(., J .) is not positive definite")


# ---------------------------------------------------------------------------
# exponential and polar decomposition


def mat_exp(A) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring Pade), stacks allowed.

    Raises ``FloatingPointError`` when the result overflows.
    """
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ValueError("non-finite entries")
    with np.errstate(over="ignore", invalid="ignore"):
        E = scipy.linalg.expm(A)
    if not np.all(np.isfinite(E)):
        raise FloatingPointError("matrix exponential overflowed")
    return E


def polar_unitary(M, check=True):
    """Left polar decomposition ``M = P @ U`` of a symplectic matrix.

    ``U`` is orthogonal and symplectic (an element of U(n)), ``P`` symmetric
    positive definite and symplectic.  Works on stacks of matrices.

    Returns
    -------
    U, P : ndarray
    """
    M = np.asarray(M, dtype=float)
    if check and not is_symplectic(M):
        raise NotSymplecticError(
            f"polar_unitary needs a symplectic matrix (residual {symplectic_residual(M):.3e})"
        )
    W, s, Vt = np.linalg.svd(M)
    U = W @ Vt
    P = (W * s[..., None, :]) @ np.swapaxes(W, -1, -2)
    P = 0.5 * (P + np.swapaxes(P, -1, -2))
    return U, P


def det_complex(U, tol=TOL_SP):
    """Complex determinant of ``U = [[A, -B], [B, A]]`` viewed as ``A + iB``."""
    U = np.asarray(U, dtype=float)
    n = half_dim(U)
    A = U[..., :n, :n]
    B = U[..., n:, :n]
    if (
        np.max(np.abs(U[..., n:, n:] - A)) > tol
        or np.max(np.abs(U[..., :n, n:] + B)) > tol
    ):
        raise ValueError("matrix does not commute with J0 (not in U(n))")
    d = np.linalg.det(A + 1j * B)
    if np.max(np.abs(np.abs(d) - 1.0)) > max(tol, 1e-8):
        raise ValueError("matrix is not unitary (|det| != 1)")
    return d


# ---------------------------------------------------------------------------
# angle tracks


@dataclass
class AngleTrack:
    """Ordered samples of a circle-valued path."""

    samples: np.ndarray
    turns: float = field(init=False)

    def __post_init__(self):
        z = np.asarray(self.samples, dtype=complex).ravel()
        mod = np.abs(z)
        if np.any(mod == 0):
            raise ValueError("zero sample has no argument")
        self.samples = z / mod
        self.turns = varangle(self.samples)

    def concat(self, other: "AngleTrack") -> "AngleTrack":
        if not np.isclose(self.samples[-1], other.samples[0]):
            raise ValueError("tracks do not join")
        return AngleTrack(np.concatenate([self.samples, other.samples[1:]]))


def angle_increments(samples) -> np.ndarray:
    """Per-step minimal argument increments, in turns, along the last axis."""
    z = np.asarray(samples, dtype=complex)
    return np.angle(z[..., 1:] * np.conj(z[..., :-1])) / (2 * np.pi)


def varangle(samples, max_step=0.5):
    """Total continuous variation of argument in turns.

    ``samples`` may carry leading batch axes; the path runs along the last
    axis.  A step of ``max_step`` turns or more is treated as undersampling.
    """
    if isinstance(samples, AngleTrack):
        return samples.turns
    inc = angle_increments(samples)
    # exactly antipodal steps come back as +-0.5 and are ambiguous
    bad = np.abs(inc) >= max_step - 1e-12
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise UndersampledError(
            f"argument jumps by {inc[tuple(idx)]:.3f} turns at sample {tuple(idx)}",
            index=tuple(int(i) for i in idx),
        )
    out = inc.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Siegel half-space <-> compatible complex structures


def siegel_to_metric(X, Y) -> np.ndarray:
    """``G = -J0 J`` for ``Z = X + iY``; stacks allowed."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Yi = np.linalg.inv(Y)
    top = np.concatenate([Yi, -Yi @ X], axis=-1)
    bot = np.concatenate([-X @ Yi, Y + X @ Yi @ X], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def metric_to_siegel(G):
    G = np.asarray(G, dtype=float)
    n = half_dim(G)
    Y = np.linalg.inv(G[..., :n, :n])
    Y = 0.5 * (Y + np.swapaxes(Y, -1, -2))
    X = -Y @ G[..., :n, n:]
    X = 0.5 * (X + np.swapaxes(X, -1, -2))
    return X, Y


def siegel_to_j(Z) -> CompatibleJ:
    """Compatible complex structure of a Siegel point.

    ``Z = g . iI`` with ``g = [[Y^(1/2), X Y^(-1/2)], [0, Y^(-1/2)]]`` maps to
    ``g J0 g^-1 = J0 (g g^T)^(-1)``.  This is the unique Sp-equivariant map
    sending ``iI`` to ``J0``.
    """
    if not isinstance(Z, SiegelPoint):
        Z = SiegelPoint.from_complex(Z)
    G = siegel_to_metric(Z.X, Z.Y)
    return CompatibleJ(j0(Z.n) @ G)


def j_to_siegel(J) -> SiegelPoint:
    Jm = J.entries if isinstance(J, CompatibleJ) else np.asarray(J, dtype=float)
    if not isinstance(J, CompatibleJ):
        check_compatible(Jm)
    X, Y = metric_to_siegel(-j0(half_dim(Jm)) @ Jm)
    return SiegelPoint(X, Y)


def mobius(g, Z) -> np.ndarray:
    """Fractional-linear action ``(A Z + B)(C Z + D)^-1``."""
    g = np.asarray(g, dtype=float)
    n = half_dim(g)
    Z = np.asarray(Z.Z if isinstance(Z, SiegelPoint) else Z, dtype=complex)
    A, B, C, D = g[:n, :n], g[:n, n:], g[n:, :n], g[n:, n:]
    return (A @ Z + B) @ np.linalg.inv(C @ Z + D)


def conj_action(g, J) -> np.ndarray:
    """``g . J = g J g^-1`` for symplectic ``g``."""
    g = np.asarray(g, dtype=float)
    Jm = J.entries if isinstance(J, CompatibleJ) else np.asarray(J, dtype=float)
    return g @ Jm @ sp_inverse(g)


def sp_sqrt_pd(G):
    """Symmetric positive square root and its inverse (stacks allowed)."""
    w, V = np.linalg.eigh(G)
    r = np.sqrt(w)
    Vt = np.swapaxes(V, -1, -2)
    return (V * r[..., None, :]) @ Vt, (V / r[..., None, :]) @ Vt


def transvection_to(J) -> np.ndarray:
    """Symmetric positive symplectic ``h`` with ``h J0 h^-1 = J``."""
    Jm = J.entries if isinstance(J, CompatibleJ) else np.asarray(J, dtype=float)
    G = -j0(half_dim(Jm)) @ Jm
    _, Gm = sp_sqrt_pd(0.5 * (G + np.swapaxes(G, -1, -2)))
    return Gm


# ---------------------------------------------------------------------------
# random generators (tests and suites)


def random_algebra(rng, n, scale=1.0) -> np.ndarray:
    """Random element ``J0 S`` of sp(2n) with Gaussian symmetric ``S``."""
    S = rng.normal(scale=scale, size=(2 * n, 2 * n))
    return j0(n) @ (0.5 * (S + S.T))


def random_symplectic(rng, n, scale=0.7) -> np.ndarray:
    return mat_exp(random_algebra(rng, n, scale))


def random_compatible(rng, n, scale=0.7) -> np.ndarray:
    g = random_symplectic(rng, n, scale)
    return conj_action(g, j0(n))


def random_tangent(rng, J, scale=1.0) -> np.ndarray:
    """Random tangent vector at ``J`` (infinitesimal action of a random generator)."""
    J = np.asarray(J, dtype=float)
    X = random_algebra(rng, half_dim(J), scale)
    return X @ J - J @ X
