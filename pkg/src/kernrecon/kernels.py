"""Closed-form kernels: pairwise values, Gram matrices, and analytic gradients.

Every kernel is a plain frozen dataclass holding its parameters.  The
module-level functions dispatch on the spec type:

    kernel_value(spec, x, y)        -> float
    kernel_matrix(spec, A, B)       -> (a, b) Gram block, row-tiled
    kernel_grad(spec, z, xhat)      -> d/dxhat k(z, xhat)

For the reconstruction loop, `kernel_and_grad_factors` returns the Gram
matrix together with coefficient matrices (GA, GB, diag) such that

    d/dxhat_i k(z_j, xhat_i) = diag * (GA[j, i] * z_j + GB[j, i] * xhat_i)

which every supported kernel family admits.  This lets the attack assemble
full-batch point gradients with two matrix products instead of an m*n loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "LaplaceKernel",
    "RbfKernel",
    "PolynomialKernel",
    "NtkKernel",
    "BandwidthGaussianKernel",
    "KernelSpec",
    "kernel_value",
    "kernel_matrix",
    "kernel_grad",
    "kernel_and_grad_factors",
    "kappa0",
    "kappa1",
    "ntk_value",
]

# kappa0' diverges at +-1 and round-off pushes cosines of near-parallel
# inputs slightly past 1, so derivative arguments are clamped this far in.
ARCCOS_CLAMP = 1e-7

# Rows per Gram tile; bounds peak memory when the query count is large.
GRAM_TILE_ROWS = 4096

# Below this separation the Laplace direction is undefined; the zero vector
# (a valid subgradient) is returned instead.
LAPLACE_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class LaplaceKernel:
    """k(x, y) = exp(-gamma * ||x - y||)."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class RbfKernel:
    """k(x, y) = exp(-gamma * ||x - y||^2)."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class PolynomialKernel:
    """k(x, y) = (c0 + gamma * <x, y>)^degree."""

    c0: float
    gamma: float
    degree: int

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError(f"c0 must be positive, got {self.c0}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if int(self.degree) != self.degree or self.degree < 1:
            raise ValueError(f"degree must be an integer >= 1, got {self.degree}")


@dataclass(frozen=True)
class NtkKernel:
    """Neural tangent kernel of a depth-layer fully connected ReLU network.

    Defined on the sphere by the kappa0/kappa1 layer recursion and extended
    to general nonzero inputs by homogeneity:
    k(x, y) = ||x|| ||y|| k_sphere(x/||x||, y/||y||).
    """

    depth: int

    def __post_init__(self):
        if int(self.depth) != self.depth or self.depth < 1:
            raise ValueError(f"depth must be an integer >= 1, got {self.depth}")


@dataclass(frozen=True)
class BandwidthGaussianKernel:
    """Normalized Gaussian kernel with a per-coordinate bandwidth.

    k(x, y) = (2 pi)^(-d/2) * prod_j h_j^(-1)
              * exp(-1/2 * sum_j (x_j - y_j)^2 / h_j^2)

    `h_diag` holds the standard-deviation-scale bandwidths h_j; each kernel
    slice integrates to one, so a mean of these bumps is a density.
    """

    h_diag: tuple[float, ...]

    def __post_init__(self):
        h = np.asarray(self.h_diag, dtype=float)
        if h.ndim != 1 or h.size == 0:
            raise ValueError("h_diag must be a nonempty 1-D sequence")
        if not np.all(h > 0):
            raise ValueError("all bandwidths must be strictly positive")
        object.__setattr__(self, "h_diag", tuple(float(v) for v in h))

    @property
    def bandwidths(self) -> np.ndarray:
        return np.asarray(self.h_diag, dtype=float)


KernelSpec = (
    LaplaceKernel
    | RbfKernel
    | PolynomialKernel
    | NtkKernel
    | BandwidthGaussianKernel
)


def kappa0(u):
    """First arccos kernel: (pi - arccos(u)) / pi, mapping [-1, 1] to [0, 1]."""
    u = _check_cosine(u)
    return (np.pi - np.arccos(u)) / np.pi


def kappa1(u):
    """Second arccos kernel: (u (pi - arccos u) + sqrt(1 - u^2)) / pi."""
    u = _check_cosine(u)
    return (u * (np.pi - np.arccos(u)) + np.sqrt(1.0 - u * u)) / np.pi


def _check_cosine(u):
    u = np.asarray(u, dtype=float)
    if u.size and np.max(np.abs(u)) > 1.0 + ARCCOS_CLAMP:
        raise ValueError("cosine argument outside [-1, 1]")
    return np.clip(u, -1.0, 1.0)


def _kappa0_deriv(u):
    # 1 / (pi sqrt(1 - u^2)) on the clamped interior.
    u = np.clip(u, -1.0 + ARCCOS_CLAMP, 1.0 - ARCCOS_CLAMP)
    return 1.0 / (np.pi * np.sqrt(1.0 - u * u))


def _ntk_recursion(u, depth, with_grad=False):
    """Run the depth-layer recursion on an array of layer-0 cosines.

    Returns (t, t') where t is the sphere kernel value and t' its derivative
    with respect to the input cosine (None unless requested).  Uses the
    identity kappa1' = kappa0 so forward accumulation needs no autodiff.
    """
    g = np.clip(u, -1.0, 1.0)
    t = g.copy() if isinstance(g, np.ndarray) else g
    gp = tp = None
    if with_grad:
        gp = np.ones_like(g)
        tp = np.ones_like(g)
    for _ in range(depth):
        k0 = kappa0(g)
        if with_grad:
            k0p = _kappa0_deriv(g)
            new_gp = k0 * gp
            tp = tp * k0 + t * k0p * gp + new_gp
            gp = new_gp
        g_next = kappa1(g)
        t = t * k0 + g_next
        g = g_next
    return t, tp


def _row_norms(A, name):
    norms = np.linalg.norm(A, axis=1)
    if np.any(norms == 0.0):
        raise ValueError(f"{name} contains a zero vector; the homogeneous "
                         "extension is undefined at the origin")
    return norms


def ntk_value(depth, x, y):
    """Depth-layer NTK between two nonzero vectors."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    y = np.asarray(y, dtype=float).reshape(1, -1)
    return float(_matrix_block(NtkKernel(depth), x, y)[0, 0])


def _as_points(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return x, y


def _check_dims(spec, d):
    if isinstance(spec, BandwidthGaussianKernel) and len(spec.h_diag) != d:
        raise ValueError(
            f"bandwidth vector has length {len(spec.h_diag)}, input dimension is {d}")


def kernel_value(spec, x, y):
    """Evaluate k(x, y) for a pair of vectors."""
    x, y = _as_points(x, y)
    _check_dims(spec, x.size)
    return float(_matrix_block(spec, x[None, :], y[None, :])[0, 0])


def _inner_products(A, B):
    # einsum keeps the per-entry reduction order independent of row tiling,
    # unlike BLAS gemm, so assembled Gram matrices are schedule-invariant
    return np.einsum("ik,jk->ij", A, B)


def _matrix_block(spec, A, B):
    if isinstance(spec, LaplaceKernel):
        return np.exp(-spec.gamma * cdist(A, B))
    if isinstance(spec, RbfKernel):
        return np.exp(-spec.gamma * cdist(A, B, "sqeuclidean"))
    if isinstance(spec, PolynomialKernel):
        return (spec.c0 + spec.gamma * _inner_products(A, B)) ** spec.degree
    if isinstance(spec, BandwidthGaussianKernel):
        h = spec.bandwidths
        d = h.size
        norm = (2.0 * np.pi) ** (-0.5 * d) / np.prod(h)
        sq = cdist(A / h, B / h, "sqeuclidean")
        return norm * np.exp(-0.5 * sq)
    if isinstance(spec, NtkKernel):
        na = _row_norms(A, "first argument")
        nb = _row_norms(B, "second argument")
        u = _inner_products(A / na[:, None], B / nb[:, None])
        t, _ = _ntk_recursion(np.clip(u, -1.0, 1.0), spec.depth)
        return (na[:, None] * nb[None, :]) * t
    raise TypeError(f"unsupported kernel spec: {type(spec).__name__}")


def kernel_matrix(spec, A, B, tile_rows=GRAM_TILE_ROWS):
    """Gram block K[i, j] = k(A_i, B_j), computed in row tiles.

    Parameters
    ----------
    A, B : (a, d) and (b, d) arrays with matching column counts.
    tile_rows : rows of A per tile; bounds peak memory for large query sets.
        The assembled matrix does not depend on the tile size.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    _check_dims(spec, A.shape[1])
    if A.shape[0] <= tile_rows:
        return _matrix_block(spec, A, B)
    out = np.empty((A.shape[0], B.shape[0]))
    for start in range(0, A.shape[0], tile_rows):
        stop = min(start + tile_rows, A.shape[0])
        out[start:stop] = _matrix_block(spec, A[start:stop], B)
    return out


def _grad_factor_block(spec, Z, X, K=None):
    """Factors (K, GA, GB, diag) of the gradient of k(z, .) at each xhat.

    d/dxhat_i k(z_j, xhat_i) = diag * (GA[j, i] z_j + GB[j, i] xhat_i),
    with diag a length-d vector (None meaning ones).
    """
    if isinstance(spec, LaplaceKernel):
        dist = cdist(Z, X)
        if K is None:
            K = np.exp(-spec.gamma * dist)
        # zero subgradient where the points coincide
        safe = np.where(dist < LAPLACE_SINGULAR_TOL, np.inf, dist)
        scale = spec.gamma * K / safe
        return K, scale, -scale, None
    if isinstance(spec, RbfKernel):
        if K is None:
            K = _matrix_block(spec, Z, X)
        scale = 2.0 * spec.gamma * K
        return K, scale, -scale, None
    if isinstance(spec, PolynomialKernel):
        base = spec.c0 + spec.gamma * _inner_products(Z, X)
        if K is None:
            K = base ** spec.degree
        ga = spec.gamma * spec.degree * base ** (spec.degree - 1)
        return K, ga, np.zeros_like(ga), None
    if isinstance(spec, BandwidthGaussianKernel):
        if K is None:
            K = _matrix_block(spec, Z, X)
        return K, K, -K, spec.bandwidths ** -2.0
    if isinstance(spec, NtkKernel):
        nz = _row_norms(Z, "query")
        nx = _row_norms(X, "candidate")
        u = np.clip(_inner_products(Z / nz[:, None], X / nx[:, None]), -1.0, 1.0)
        t, tp = _ntk_recursion(u, spec.depth, with_grad=True)
        if K is None:
            K = (nz[:, None] * nx[None, :]) * t
        gb = (nz[:, None] / nx[None, :]) * (t - u * tp)
        return K, tp, gb, None
    raise TypeError(f"unsupported kernel spec: {type(spec).__name__}")


def kernel_and_grad_factors(spec, Z, X):
    """Gram matrix of (queries, candidates) plus gradient factors.

    One fused pass so the reconstruction loop shares distance/recursion work
    between the kernel values and their candidate gradients.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if Z.shape[1] != X.shape[1]:
        raise ValueError(f"dimension mismatch: {Z.shape[1]} vs {X.shape[1]}")
    _check_dims(spec, Z.shape[1])
    return _grad_factor_block(spec, Z, X)


def kernel_grad(spec, z, xhat):
    """Gradient of k(z, .) evaluated at xhat."""
    z, xhat = _as_points(z, xhat)
    _check_dims(spec, z.size)
    _, ga, gb, diag = kernel_and_grad_factors(spec, z[None, :], xhat[None, :])
    grad = ga[0, 0] * z + gb[0, 0] * xhat
    if diag is not None:
        grad = diag * grad
    return grad
