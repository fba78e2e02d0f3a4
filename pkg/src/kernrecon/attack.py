"""Query-based reconstruction of a kernel model's training set.

The attack samples query points, evaluates the attacked model once on them
(through its query-only oracle), and then minimizes the mean squared gap
between a candidate kernel expansion and the cached answers:

    L(Xhat, Ahat) = 1/(mC) * sum_jc ( sum_i Ahat[i,c] k(z_j, xhat_i)
                                      - target[j,c] )^2

Candidate points and coefficients are stepped by per-block Adam under
OneCycle schedules.  For density models the per-coordinate bandwidth is a
third block, parameterized as log-bandwidths so positivity holds by
construction.

Randomness: one generator per run, consumed in a fixed order -- queries,
then candidate points, then coefficients, then any mini-batch shuffles --
so a seed pins the whole trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist

from .errors import NumericalError
from .kernels import BandwidthGaussianKernel, kernel_and_grad_factors, kernel_matrix
from .optim import Adam, OneCycleSchedule

__all__ = [
    "NormalQueries",
    "UniformBoxQueries",
    "MixtureQueries",
    "GridQueries",
    "FileQueries",
    "FixedQueries",
    "sample_queries",
    "QuerySet",
    "ReconstructionParams",
    "AttackConfig",
    "AttackResult",
    "reconstruction_loss",
    "loss_gradients",
    "run_attack",
    "run_attack_pca",
    "canonicalize",
    "query_count_bound",
    "match_to_truth",
    "MatchReport",
]


# ---------------------------------------------------------------------------
# query sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalQueries:
    """Isotropic zero-mean Gaussian queries with standard deviation `sigma`."""
    sigma: float = 1.0


@dataclass(frozen=True)
class UniformBoxQueries:
    """Uniform queries on the box [low, high]^d."""
    low: float = -1.0
    high: float = 1.0


@dataclass(frozen=True)
class MixtureQueries:
    """Equal-weight Gaussian mixture with the given centers and shared sigma."""
    centers: tuple[tuple[float, ...], ...]
    sigma: float = 1.0


@dataclass(frozen=True)
class GridQueries:
    """Deterministic lattice on [low, high]^2 (two-dimensional inputs only)."""
    low: float = -1.0
    high: float = 1.0


@dataclass(frozen=True)
class FileQueries:
    """Queries read from a matrix file; the first m rows are used."""
    path: str


@dataclass(frozen=True)
class FixedQueries:
    """A caller-supplied query matrix, used verbatim (first m rows)."""
    points: tuple[tuple[float, ...], ...]

    @classmethod
    def from_array(cls, Z) -> "FixedQueries":
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return cls(points=tuple(map(tuple, Z)))


def _square_factors(m):
    r = int(math.isqrt(m))
    while m % r:
        r -= 1
    return r, m // r


def sample_queries(dist, m, d, rng):
    """Draw an (m, d) query matrix; deterministic given the generator state."""
    if m < 1:
        raise ValueError(f"need at least one query, got m={m}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    if isinstance(dist, NormalQueries):
        return rng.normal(0.0, dist.sigma, size=(m, d))
    if isinstance(dist, UniformBoxQueries):
        return rng.uniform(dist.low, dist.high, size=(m, d))
    if isinstance(dist, MixtureQueries):
        centers = np.atleast_2d(np.asarray(dist.centers, dtype=float))
        if centers.shape[1] != d:
            raise ValueError(
                f"mixture centers have dimension {centers.shape[1]}, expected {d}")
        which = rng.integers(0, centers.shape[0], size=m)
        return centers[which] + rng.normal(0.0, dist.sigma, size=(m, d))
    if isinstance(dist, GridQueries):
        if d != 2:
            raise ValueError("grid queries are only defined for d=2")
        rows, cols = _square_factors(m)
        ax0 = _grid_axis(dist.low, dist.high, rows)
        ax1 = _grid_axis(dist.low, dist.high, cols)
        g0, g1 = np.meshgrid(ax0, ax1, indexing="ij")
        return np.column_stack([g0.ravel(), g1.ravel()])
    if isinstance(dist, FileQueries):
        from .storage import read_matrix
        return _take_rows(read_matrix(dist.path), m, d, "query file")
    if isinstance(dist, FixedQueries):
        return _take_rows(np.asarray(dist.points, dtype=float), m, d,
                          "fixed query set")
    raise TypeError(f"unsupported query distribution: {type(dist).__name__}")


def _take_rows(Z, m, d, what):
    Z = np.atleast_2d(Z)
    if Z.shape[0] < m:
        raise ValueError(f"{what} holds {Z.shape[0]} rows, {m} requested")
    if Z.shape[1] != d:
        raise ValueError(f"{what} dimension {Z.shape[1]}, expected {d}")
    return Z[:m].copy()


def _grid_axis(low, high, count):
    if count == 1:
        return np.array([(low + high) / 2.0])
    return np.linspace(low, high, count)


# ---------------------------------------------------------------------------
# parameters and loss
# ---------------------------------------------------------------------------

@dataclass
class QuerySet:
    """Query points and the attacked model's cached answers on them."""

    Z: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if self.targets.shape[0] != self.Z.shape[0]:
            raise ValueError("one target row per query required")


@dataclass
class ReconstructionParams:
    """Optimization variables: candidate points, coefficients, and optionally
    log-bandwidths for density targets."""

    points: np.ndarray
    coeffs: np.ndarray
    log_bandwidth: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.ndim == 1:
            self.coeffs = self.coeffs[:, None]
        if self.coeffs.shape[0] != self.points.shape[0]:
            raise ValueError("one coefficient row per candidate required")
        if self.log_bandwidth is not None:
            self.log_bandwidth = np.asarray(self.log_bandwidth, dtype=float).ravel()

    def copy(self) -> "ReconstructionParams":
        lb = None if self.log_bandwidth is None else self.log_bandwidth.copy()
        return ReconstructionParams(self.points.copy(), self.coeffs.copy(), lb)


@dataclass
class AttackConfig:
    """Reconstruction run settings.

    `num_candidates` should be an upper bound on the attacked model's
    training-set size; surplus candidates end up merged or zeroed out and are
    removed by `canonicalize`.  Learning rates are the per-block OneCycle
    peaks (the bandwidth block, when enabled, shares `lr_coeffs`).
    """

    num_candidates: int
    num_queries: int
    steps: int = 20_000
    seed: int = 0
    query_dist: object = field(default_factory=NormalQueries)
    point_init_std: float = 0.3
    coeff_init_var: float = 0.05
    lr_points: float = 2e-2
    lr_coeffs: float = 1e-2
    merge_tol: float | None = None
    coeff_tol: float | None = None
    batch_size: int | None = None
    trace_every: int = 1
    learn_bandwidth: bool = False

    def __post_init__(self):
        if self.num_candidates < 1 or self.num_queries < 1 or self.steps < 0:
            raise ValueError("candidate/query counts must be >= 1 and steps >= 0")
        if not (self.point_init_std > 0 and self.coeff_init_var > 0):
            raise ValueError("initialization scales must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1 when given")
        if self.trace_every < 1:
            raise ValueError("trace_every must be >= 1")


@dataclass
class AttackResult:
    """Final parameters, the (step, loss) trace, and any requested snapshots."""

    params: ReconstructionParams
    loss_trace: np.ndarray
    snapshots: dict[int, ReconstructionParams]
    final_loss: float


def query_count_bound(n: int, d: int) -> int:
    """Least query count m with m > n(d+2), enough to pin down n candidates
    in dimension d."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    return n * (d + 2) + 1


def _effective_spec(params, spec):
    if params.log_bandwidth is not None:
        return BandwidthGaussianKernel(tuple(np.exp(params.log_bandwidth)))
    return spec


def reconstruction_loss(params, queries: QuerySet, spec) -> float:
    """Mean squared gap between the candidate expansion and the cached targets."""
    used = _effective_spec(params, spec)
    K = kernel_matrix(used, queries.Z, params.points)
    R = K @ params.coeffs - queries.targets
    loss = float((R * R).sum() / R.size)
    if not np.isfinite(loss):
        raise NumericalError("non-finite reconstruction loss")
    return loss


def _loss_and_grads(spec, points, coeffs, log_h, Z, targets):
    """Fused loss + gradients for one (mini-)batch.

    Gradients: the coefficient block gets (2/mC) K^T R; each candidate point
    gets (2/mC) sum_j (R_j . A_i) d/dxhat k(z_j, xhat_i), assembled from the
    kernel's (GA, GB, diag) factor form; log-bandwidths get the chain rule
    through exp.
    """
    if log_h is not None:
        spec = BandwidthGaussianKernel(tuple(np.exp(log_h)))
    K, GA, GB, diag = kernel_and_grad_factors(spec, Z, points)
    R = K @ coeffs - targets
    scale = 2.0 / R.size
    loss = float((R * R).sum() / R.size)
    g_coeffs = scale * (K.T @ R)
    W = R @ coeffs.T                                   # (m, n) pair weights
    g_points = (GA * W).T @ Z + (GB * W).sum(axis=0)[:, None] * points
    if diag is not None:
        g_points = g_points * diag[None, :]
    g_points *= scale
    g_log_h = None
    if log_h is not None:
        h = np.exp(log_h)
        M = W * K
        col_z = M.sum(axis=1)
        col_x = M.sum(axis=0)
        sq = col_z @ (Z * Z) + col_x @ (points * points) \
            - 2.0 * ((Z.T @ M) * points.T).sum(axis=1)
        g_log_h = scale * (sq / (h * h) - M.sum())
    return loss, g_points, g_coeffs, g_log_h


def loss_gradients(params, queries: QuerySet, spec):
    """Gradients of `reconstruction_loss` with respect to the candidate
    points, the coefficients, and (when present) the log-bandwidths."""
    loss, g_points, g_coeffs, g_log_h = _loss_and_grads(
        spec, params.points, params.coeffs, params.log_bandwidth,
        queries.Z, queries.targets)
    if not np.isfinite(loss):
        raise NumericalError("non-finite reconstruction loss")
    return g_points, g_coeffs, g_log_h


# ---------------------------------------------------------------------------
# the optimization loop
# ---------------------------------------------------------------------------

def run_attack(oracle, config: AttackConfig, snapshot_steps=()) -> AttackResult:
    """Mount the reconstruction attack against a query-only oracle.

    The oracle is evaluated exactly once, on the m sampled queries; every
    later step works off the cached answers.  Returns the final parameters,
    the loss trace (strided by `trace_every`, plus the final full-batch
    loss), and parameter snapshots at the requested step indices.
    """
    return _optimize(oracle, config, projector=None, snapshot_steps=snapshot_steps)


def run_attack_pca(oracle, config: AttackConfig, basis,
                   snapshot_steps=()) -> AttackResult:
    """Reconstruction attack restricted to the span of an orthonormal basis.

    `basis` is (d, k) with orthonormal columns.  Full-dimensional variables
    are optimized but candidates are evaluated through the projection onto
    span(basis), so the returned points lie in that span while the optimizer
    geometry stays coordinate-wise in the ambient space.
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    gram = basis.T @ basis
    if np.max(np.abs(gram - np.eye(basis.shape[1]))) > 1e-10:
        raise ValueError("basis columns are not orthonormal")
    projector = basis @ basis.T
    return _optimize(oracle, config, projector=projector,
                     snapshot_steps=snapshot_steps)


def _optimize(oracle, config, projector, snapshot_steps):
    n, m = config.num_candidates, config.num_queries
    d, C = oracle.input_dim, oracle.output_dim
    rng = np.random.default_rng(config.seed)

    Z = sample_queries(config.query_dist, m, d, rng)
    targets = oracle.evaluate(Z)        # the single oracle interaction

    log_h = None
    if config.learn_bandwidth:
        if not isinstance(oracle.spec, BandwidthGaussianKernel):
            raise ValueError("bandwidth learning requires a density-style kernel")
        # start from the query set's own deviation-based rule; the attacked
        # model's true bandwidths stay unused.
        from .models import scott_bandwidths
        log_h = np.log(scott_bandwidths(Z))

    free = rng.normal(0.0, config.point_init_std, size=(n, d))
    coeffs = rng.normal(0.0, math.sqrt(config.coeff_init_var), size=(n, C))

    def project(block):
        return block if projector is None else block @ projector

    opt_points, opt_coeffs = Adam(), Adam()
    opt_h = Adam() if log_h is not None else None
    sched_points = OneCycleSchedule(config.lr_points, max(config.steps, 1))
    sched_coeffs = OneCycleSchedule(config.lr_coeffs, max(config.steps, 1))

    wanted = set(int(s) for s in snapshot_steps)
    snapshots = {}
    trace = []
    batcher = _BatchCycler(m, config.batch_size, rng)

    for t in range(config.steps):
        points = project(free)
        if t in wanted:
            snapshots[t] = ReconstructionParams(
                points.copy(), coeffs.copy(),
                None if log_h is None else log_h.copy())
        idx = batcher.next_batch()
        Zb = Z if idx is None else Z[idx]
        Tb = targets if idx is None else targets[idx]
        loss, g_points, g_coeffs, g_log_h = _loss_and_grads(
            oracle.spec, points, coeffs, log_h, Zb, Tb)
        if not np.isfinite(loss):
            raise NumericalError(
                f"non-finite reconstruction loss at step {t}", step=t,
                last_state=ReconstructionParams(
                    points.copy(), coeffs.copy(),
                    None if log_h is None else log_h.copy()))
        if t % config.trace_every == 0:
            trace.append((t, loss))
        lr_p, lr_c = sched_points.lr(t), sched_coeffs.lr(t)
        free = opt_points.step(free, project(g_points), lr_p)
        coeffs = opt_coeffs.step(coeffs, g_coeffs, lr_c)
        if log_h is not None:
            log_h = opt_h.step(log_h, g_log_h, lr_c)

    params = ReconstructionParams(project(free), coeffs, log_h)
    final_loss = reconstruction_loss(params, QuerySet(Z, targets), oracle.spec)
    trace.append((config.steps, final_loss))
    if config.steps in wanted:
        snapshots[config.steps] = params.copy()
    return AttackResult(params, np.asarray(trace, dtype=float),
                        snapshots, final_loss)


class _BatchCycler:
    """Without-replacement mini-batch indices, reshuffled each epoch."""

    def __init__(self, m, batch_size, rng):
        self.m = m
        self.batch_size = batch_size if batch_size is not None and batch_size < m \
            else None
        self.rng = rng
        self.order = None
        self.pos = 0

    def next_batch(self):
        if self.batch_size is None:
            return None
        if self.order is None or self.pos >= self.m:
            self.order = self.rng.permutation(self.m)
            self.pos = 0
        idx = self.order[self.pos:self.pos + self.batch_size]
        self.pos += self.batch_size
        return idx


# ---------------------------------------------------------------------------
# post-processing
# ---------------------------------------------------------------------------

def canonicalize(params: ReconstructionParams, merge_tol=None,
                 coeff_tol=None) -> ReconstructionParams:
    """Merge near-duplicate candidates and drop near-zero coefficients.

    Candidates within `merge_tol` of each other (single linkage) collapse to
    their coefficient-weighted mean with coefficients summed per channel;
    candidates whose largest coefficient magnitude stays below `coeff_tol`
    are removed.  Idempotent at fixed tolerances.
    """
    points = params.points.copy()
    coeffs = params.coeffs.copy()
    d = points.shape[1]
    if merge_tol is None:
        merge_tol = 1e-3 * math.sqrt(d)
    if coeff_tol is None:
        coeff_tol = 1e-6 * (np.abs(coeffs).max() if coeffs.size else 0.0)
    if not (merge_tol > 0 and coeff_tol >= 0):
        raise ValueError("tolerances must be positive")

    # repeat merge passes: merged means can land within tolerance again
    while points.shape[0] > 1:
        groups = _single_linkage(points, merge_tol)
        if len(groups) == points.shape[0]:
            break
        new_points = np.empty((len(groups), d))
        new_coeffs = np.empty((len(groups), coeffs.shape[1]))
        for g, idx in enumerate(groups):
            weights = np.abs(coeffs[idx]).sum(axis=1)
            total = weights.sum()
            if total > 0.0:
                new_points[g] = weights @ points[idx] / total
            else:
                new_points[g] = points[idx].mean(axis=0)
            new_coeffs[g] = coeffs[idx].sum(axis=0)
        points, coeffs = new_points, new_coeffs

    keep = np.abs(coeffs).max(axis=1) >= coeff_tol if coeffs.size else \
        np.zeros(0, dtype=bool)
    return ReconstructionParams(points[keep], coeffs[keep],
                                None if params.log_bandwidth is None
                                else params.log_bandwidth.copy())


def _single_linkage(points, tol):
    """Partition indices by transitive closure of pairwise distance <= tol."""
    n = points.shape[0]
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    close = np.triu(cdist(points, points) <= tol, k=1)
    for i, j in zip(*np.nonzero(close)):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[rj] = ri
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.asarray(v) for v in groups.values()]


@dataclass
class MatchReport:
    """Greedy pairing of reconstructions to the true support."""

    pairs: list[tuple[int, int]]
    distances: np.ndarray            # per truth point; inf when unmatched
    relative_distances: np.ndarray
    coeff_gaps: np.ndarray | None    # max-abs coefficient gap per truth point
    matched_fraction: float          # fraction of truth points within tol


def match_to_truth(recon: ReconstructionParams, truth_points,
                   truth_coeffs=None, tol=1e-3, relative=False) -> MatchReport:
    """Pair each true point with a reconstruction by greedy nearest neighbor.

    Pairs are formed globally: the closest remaining (truth, recon) pair is
    committed first, without replacement.  `matched_fraction` counts truth
    points whose paired distance (relative to the truth norm when
    `relative`) is at most `tol`.
    """
    truth_points = np.atleast_2d(np.asarray(truth_points, dtype=float))
    N = truth_points.shape[0]
    distances = np.full(N, np.inf)
    coeff_gaps = None
    truth_c = None
    if truth_coeffs is not None:
        coeff_gaps = np.full(N, np.nan)
        truth_c = np.asarray(truth_coeffs, dtype=float)
        if truth_c.ndim == 1:
            truth_c = truth_c[:, None]
    pairs = []
    if recon.points.shape[0]:
        D = cdist(truth_points, recon.points)
        work = D.copy()
        for _ in range(min(N, recon.points.shape[0])):
            i, j = np.unravel_index(np.argmin(work), work.shape)
            pairs.append((int(i), int(j)))
            distances[i] = D[i, j]
            if coeff_gaps is not None:
                coeff_gaps[i] = np.abs(recon.coeffs[j] - truth_c[i]).max()
            work[i, :] = np.inf
            work[:, j] = np.inf
    norms = np.maximum(np.linalg.norm(truth_points, axis=1), 1e-12)
    relative_distances = distances / norms
    scored = relative_distances if relative else distances
    matched_fraction = float(np.mean(scored <= tol))
    return MatchReport(pairs, distances, relative_distances,
                       coeff_gaps, matched_fraction)
