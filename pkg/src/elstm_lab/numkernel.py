"""Dense linear algebra, activations, and spectral analysis primitives.

Everything downstream (cells, closed-form analysis, models) is expressed in
terms of the small vocabulary of operations defined here: matrix-vector
products, element-wise sigmoid/tanh with derivatives, Hadamard products,
concatenation, matrix powers, and the spectral norm via power iteration.

All public operations work on float64 ndarrays and raise on non-finite
results instead of letting NaN/Inf propagate silently.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class NumericError(ArithmeticError):
    """A value that must be finite came out NaN or infinite."""


class ConvergenceError(RuntimeError):
    """An iterative method ran out of iterations before reaching tolerance."""

    def __init__(self, message, last_estimate):
        super().__init__(message)
        self.last_estimate = last_estimate


def tensor(data, dtype=np.float64):
    """Build a finite-checked 1-D or 2-D array in row-major order."""
    arr = np.ascontiguousarray(data, dtype=dtype)
    if arr.ndim not in (1, 2):
        raise DimensionError(f"expected a vector or matrix, got ndim={arr.ndim}")
    check_finite(arr, "tensor")
    return arr


def check_finite(x, context):
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite value in {context}")
    return x


def make_rng(seed):
    """Seeded PCG64 generator; identical seeds give identical streams.

    Accepts a scalar seed or a sequence of integers (useful for deriving
    independent sub-streams such as ``[seed, epoch]``).
    """
    if isinstance(seed, (list, tuple)):
        return np.random.default_rng([int(s) for s in seed])
    return np.random.default_rng(int(seed))


def matvec(W, x):
    """Matrix-vector product W @ x with explicit shape checking."""
    W = np.asarray(W)
    x = np.asarray(x)
    if W.ndim != 2 or x.ndim != 1 or W.shape[1] != x.shape[0]:
        raise DimensionError(f"matvec shape mismatch: {W.shape} @ {x.shape}")
    return check_finite(W @ x, "matvec")


def sigmoid(x):
    """Element-wise logistic function 1 / (1 + exp(-x)), range (0, 1)."""
    return check_finite(expit(np.asarray(x, dtype=np.float64)), "sigmoid")


def sigmoid_deriv(x):
    """sigma(x) * (1 - sigma(x))."""
    s = sigmoid(x)
    return s * (1.0 - s)


def tanh(x):
    """Element-wise hyperbolic tangent, range (-1, 1)."""
    return check_finite(np.tanh(np.asarray(x, dtype=np.float64)), "tanh")


def tanh_deriv(x):
    """1 - tanh(x)^2."""
    t = np.tanh(np.asarray(x, dtype=np.float64))
    return 1.0 - t * t


def l2_norm(x):
    """Euclidean norm of a vector or Frobenius-compatible norm of a matrix."""
    return float(np.linalg.norm(np.asarray(x)))


def concat(a, b):
    """Concatenate two vectors into one."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 1 or b.ndim != 1:
        raise DimensionError(f"concat expects vectors, got {a.shape} and {b.shape}")
    return np.concatenate([a, b])


def hadamard(a, b):
    """Element-wise product of two equal-shaped arrays."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"hadamard shape mismatch: {a.shape} vs {b.shape}")
    return a * b


def matpow(W, k):
    """k-th matrix power of a square matrix; matpow(W, 0) is the identity."""
    W = np.asarray(W)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise DimensionError(f"matpow expects a square matrix, got {W.shape}")
    if k < 0:
        raise DimensionError(f"matpow expects k >= 0, got {k}")
    return np.linalg.matrix_power(W, k)


def spectral_norm(W, tol=1e-10, max_iter=10000, rng=None):
    """Largest singular value of W by power iteration on W^T W.

    Converges when successive singular-value estimates differ by less than
    ``tol`` (relative to max(1, estimate)); raises ConvergenceError carrying
    the last estimate otherwise.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise DimensionError(f"spectral_norm expects a matrix, got shape {W.shape}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if rng is None:
        rng = make_rng(0)
    n = W.shape[1]
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    gram = W.T @ W
    sigma = 0.0
    for _ in range(max_iter):
        y = gram @ v
        lam = float(np.linalg.norm(y))
        if lam == 0.0:
            return 0.0  # v in the null space of a rank-deficient W; sigma is 0 only if W == 0
        new_sigma = np.sqrt(lam)
        if abs(new_sigma - sigma) < tol * max(1.0, new_sigma):
            return new_sigma
        sigma = new_sigma
        v = y / lam
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations", sigma
    )


def min_singular_value(W):
    """Smallest singular value, from a full decomposition (small matrices)."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise DimensionError(f"min_singular_value expects a matrix, got {W.shape}")
    return float(np.linalg.svd(W, compute_uv=False)[-1])
