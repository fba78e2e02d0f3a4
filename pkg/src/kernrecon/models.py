"""Attacked models: kernel ridge regression, kernel SVM, kernel density.

Each trainer returns a kernel-expansion model (support points plus a
coefficient matrix).  The reconstruction side never sees those fields: it
receives a `ModelOracle`, whose public surface is evaluation at new points,
the kernel spec, and the input/output dimensions -- nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import NumericalError
from .kernels import BandwidthGaussianKernel, kernel_matrix
from .optim import Adam, OneCycleSchedule

__all__ = [
    "Dataset",
    "TrainedKernelModel",
    "ModelOracle",
    "KdeModel",
    "train_krr",
    "train_svm_gd",
    "train_kde",
    "hinge_objective",
    "scott_bandwidths",
]

# Jitter escalation for borderline Gram factorizations: start at
# 1e-12 * trace(K)/N on the diagonal, grow tenfold, give up after 6 retries.
_JITTER_SCALE = 1e-12
_JITTER_GROWTH = 10.0
_JITTER_RETRIES = 6


@dataclass
class Dataset:
    """Training inputs X (N, d) and targets Y.

    Y is (N, C) real-valued for regression; for SVM training it is a length-N
    label vector, either +-1 (binary) or integer classes 1..C.
    """

    X: np.ndarray
    Y: np.ndarray
    image_shape: tuple[int, int, int] | None = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.Y = np.asarray(self.Y, dtype=float)
        if self.X.shape[0] < 1:
            raise ValueError("dataset needs at least one row")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("inputs must be finite")
        if self.Y.shape[0] != self.X.shape[0]:
            raise ValueError(
                f"target rows {self.Y.shape[0]} != input rows {self.X.shape[0]}")


def _require_distinct_rows(X, what="training inputs"):
    order = np.lexsort(X.T[::-1])
    diffs = np.diff(X[order], axis=0)
    if len(diffs) and np.any(np.all(diffs == 0.0, axis=1)):
        raise ValueError(f"{what} contain duplicate rows")


class ModelOracle:
    """Query-only access to a trained model.

    Exposes batch evaluation, the kernel spec, and the dimensions; support
    points and coefficients are unreachable through this surface.
    """

    def __init__(self, evaluate_fn, spec, input_dim, output_dim):
        self._evaluate_fn = evaluate_fn
        self.spec = spec
        self.input_dim = int(input_dim)
        self.output_dim = int(output_dim)

    def evaluate(self, points):
        """Evaluate the model at an (m, input_dim) batch; returns (m, output_dim)."""
        Z = np.atleast_2d(np.asarray(points, dtype=float))
        if Z.shape[1] != self.input_dim:
            raise ValueError(
                f"query dimension {Z.shape[1]} != model dimension {self.input_dim}")
        if not np.all(np.isfinite(Z)):
            raise ValueError("query points must be finite")
        out = self._evaluate_fn(Z)
        return np.asarray(out, dtype=float).reshape(Z.shape[0], self.output_dim)


@dataclass(frozen=True)
class TrainedKernelModel:
    """Kernel expansion f_c(x) = sum_i coeffs[i, c] * k(x, support_i)."""

    spec: object
    support: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        support = np.atleast_2d(np.asarray(self.support, dtype=float))
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim == 1:
            coeffs = coeffs[:, None]
        if coeffs.shape[0] != support.shape[0]:
            raise ValueError("one coefficient row per support point required")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coefficients must be finite")
        _require_distinct_rows(support, "support points")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def input_dim(self) -> int:
        return self.support.shape[1]

    @property
    def output_dim(self) -> int:
        return self.coeffs.shape[1]

    def predict(self, Z):
        """Evaluate the expansion at an (m, d) batch of points."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return kernel_matrix(self.spec, Z, self.support) @ self.coeffs

    def oracle(self) -> ModelOracle:
        """Query-only facade over this model."""
        return ModelOracle(self.predict, self.spec, self.input_dim, self.output_dim)


def _solve_spd(K, rhs):
    """Solve K a = rhs for symmetric positive-definite K with jitter escalation."""
    n = K.shape[0]
    jitter = 0.0
    base = _JITTER_SCALE * np.trace(K) / n
    for attempt in range(_JITTER_RETRIES + 1):
        try:
            system = K if jitter == 0.0 else K + jitter * np.eye(n)
            factor = cho_factor(system, lower=True)
            sol = cho_solve(factor, rhs)
        except LinAlgError:
            sol = None
        if sol is not None and np.all(np.isfinite(sol)):
            return sol
        jitter = base if jitter == 0.0 else jitter * _JITTER_GROWTH
    raise NumericalError(
        "Gram system is numerically indefinite even after jitter escalation")


def train_krr(data: Dataset, spec, ridge: float = 0.0) -> TrainedKernelModel:
    """Kernel ridge regression: coefficients (K + N*ridge*I)^-1 Y.

    With ridge = 0 and a strictly positive-definite kernel the model
    interpolates the targets at the training inputs.
    """
    if ridge < 0:
        raise ValueError(f"ridge must be nonnegative, got {ridge}")
    X = data.X
    Y = data.Y if data.Y.ndim == 2 else data.Y[:, None]
    _require_distinct_rows(X)
    N = X.shape[0]
    K = kernel_matrix(spec, X, X)
    system = K + (N * ridge) * np.eye(N) if ridge > 0 else K
    coeffs = _solve_spd(system, Y)
    return TrainedKernelModel(spec, X, coeffs)


def _binary_hinge(F, y):
    # F: (N, 1) margins, y: (N,) in {-1, +1}
    slack = 1.0 - y * F[:, 0]
    loss = np.maximum(slack, 0.0).mean()
    grad_f = np.where(slack > 0.0, -y, 0.0)[:, None] / len(y)
    return loss, grad_f


def _multiclass_hinge(F, labels):
    # Crammer-Singer hinge; labels are 0-based here.  Ties in the competing
    # argmax go to the lowest class index (np.argmax convention).
    N, C = F.shape
    rows = np.arange(N)
    competing = F.copy()
    competing[rows, labels] = -np.inf
    rival = np.argmax(competing, axis=1)
    slack = 1.0 + F[rows, rival] - F[rows, labels]
    active = slack > 0.0
    loss = np.maximum(slack, 0.0).mean()
    grad_f = np.zeros_like(F)
    grad_f[rows[active], rival[active]] += 1.0 / N
    grad_f[rows[active], labels[active]] -= 1.0 / N
    return loss, grad_f


def _hinge_terms(K, coeffs, y, labels):
    F = K @ coeffs
    if labels is None:
        return _binary_hinge(F, y)
    return _multiclass_hinge(F, labels)


def _svm_labels(Y):
    y = np.asarray(Y, dtype=float).ravel()
    values = np.unique(y)
    if set(values.tolist()) <= {-1.0, 1.0}:
        return y, None, 1
    if not np.all(y == np.round(y)) or np.any(y < 1):
        raise ValueError("SVM labels must be +-1 or integer classes 1..C")
    labels = y.astype(int) - 1
    C = int(labels.max()) + 1
    if C < 2:
        raise ValueError("multiclass labels must span at least two classes")
    return y, labels, C


def hinge_objective(spec, support, labels, coeffs):
    """Hinge objective of a kernel expansion, evaluated at given coefficients."""
    K = kernel_matrix(spec, support, support)
    y, cls, _ = _svm_labels(labels)
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim == 1:
        coeffs = coeffs[:, None]
    loss, _ = _hinge_terms(K, coeffs, y, cls)
    return loss


def train_svm_gd(data: Dataset, spec, steps: int = 100_000,
                 max_lr: float = 1e-2, trace_every: int = 100):
    """Hard-margin kernel SVM trained by gradient descent on the coefficients.

    Runs full-batch hinge subgradient steps through Adam with a OneCycle
    schedule, starting from zero coefficients.  Returns the trained model and
    the (step, loss) trace; the last trace entry is the objective evaluated
    at the returned coefficients.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    X = data.X
    _require_distinct_rows(X)
    y, labels, C = _svm_labels(data.Y)
    N = X.shape[0]
    K = kernel_matrix(spec, X, X)
    coeffs = np.zeros((N, C))
    opt = Adam()
    schedule = OneCycleSchedule(max_lr=max_lr, total_steps=steps)
    trace = []
    for t in range(steps):
        loss, grad_f = _hinge_terms(K, coeffs, y, labels)
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite SVM loss at step {t}", step=t)
        if t % trace_every == 0:
            trace.append((t, loss))
        coeffs = opt.step(coeffs, K @ grad_f, schedule.lr(t))
    final_loss, _ = _hinge_terms(K, coeffs, y, labels)
    trace.append((steps, final_loss))
    model = TrainedKernelModel(spec, X, coeffs)
    return model, np.asarray(trace)


def scott_bandwidths(points: np.ndarray) -> np.ndarray:
    """Per-coordinate bandwidths h_j = N^(-1/6) * sample std of coordinate j."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    N = points.shape[0]
    if N < 2:
        raise ValueError("need at least two points for a sample deviation")
    sigma = points.std(axis=0, ddof=1)
    if np.any(sigma <= 0.0):
        raise ValueError("zero variance in some coordinate; bandwidth undefined")
    return N ** (-1.0 / 6.0) * sigma


@dataclass(frozen=True)
class KdeModel:
    """Kernel density estimate: mean of normalized Gaussian bumps.

    f(x) = N^-1 sum_i k_H(x, x_i) with per-coordinate bandwidths `h_diag`;
    nonnegative everywhere and integrating to one.
    """

    support: np.ndarray
    h_diag: np.ndarray

    def __post_init__(self):
        support = np.atleast_2d(np.asarray(self.support, dtype=float))
        h = np.asarray(self.h_diag, dtype=float).ravel()
        if h.size != support.shape[1]:
            raise ValueError("one bandwidth per coordinate required")
        if not np.all(h > 0):
            raise ValueError("bandwidths must be strictly positive")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "h_diag", h)

    @property
    def spec(self) -> BandwidthGaussianKernel:
        return BandwidthGaussianKernel(tuple(self.h_diag))

    @property
    def input_dim(self) -> int:
        return self.support.shape[1]

    @property
    def coeffs(self) -> np.ndarray:
        N = self.support.shape[0]
        return np.full((N, 1), 1.0 / N)

    def density(self, Z):
        """Estimated density at an (m, d) batch; returns (m, 1)."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return kernel_matrix(self.spec, Z, self.support) @ self.coeffs

    def oracle(self) -> ModelOracle:
        """Query-only facade over the estimator."""
        return ModelOracle(self.density, self.spec, self.input_dim, 1)


def train_kde(points: np.ndarray) -> KdeModel:
    """Fit a Gaussian KDE with per-coordinate bandwidths from the N^(-1/6) rule."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return KdeModel(points, scott_bandwidths(points))
