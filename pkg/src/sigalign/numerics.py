"""Dense float64 kernels shared by the whole package.

Everything here is a pure function on numpy arrays. Probability vectors are
plain 1-D arrays on the class simplex; batches are row-major 2-D arrays.
Entropies are measured in bits so that H / log2(C) is exactly 1 on the
uniform distribution.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

Array = np.ndarray

SIMPLEX_TOL = 1e-9


def as_float_array(values, name: str = "array") -> Array:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    return arr


def check_finite(values, name: str = "array") -> Array:
    """Return values as float64, rejecting NaN/Inf with the offending index."""
    arr = as_float_array(values, name)
    finite = np.isfinite(arr)
    if not finite.all():
        idx = tuple(int(k) for k in np.argwhere(~finite)[0])
        pos = idx[0] if len(idx) == 1 else idx
        raise ValueError(f"{name} has non-finite entry {arr[idx]!r} at index {pos}")
    return arr


def is_probability_vector(p, tol: float = SIMPLEX_TOL) -> bool:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2 or not np.isfinite(arr).all():
        return False
    if (arr < -tol).any() or (arr > 1.0 + tol).any():
        return False
    return abs(float(arr.sum()) - 1.0) <= tol


def assert_probability_vector(p, name: str = "p", tol: float = SIMPLEX_TOL) -> Array:
    arr = check_finite(p, name)
    if not is_probability_vector(arr, tol):
        raise ValueError(
            f"{name} is not a probability vector (sum={float(np.sum(arr))!r})"
        )
    return arr


def softmax(logits) -> Array:
    """Max-shifted softmax of a single logit vector (length >= 2)."""
    x = check_finite(logits, "logits")
    if x.ndim != 1 or x.size < 2:
        raise ValueError(f"logits must be a 1-D array of length >= 2, got shape {x.shape}")
    e = np.exp(x - x.max())
    return e / e.sum()


def softmax_rows(logits) -> Array:
    """Row-wise max-shifted softmax of a 2-D logit matrix."""
    x = check_finite(logits, "logits")
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError(f"logits must be a 2-D matrix with >= 2 columns, got shape {x.shape}")
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def log_softmax_rows(logits) -> Array:
    """Row-wise log-softmax, stable even when softmax underflows to 0."""
    x = check_finite(logits, "logits")
    shifted = x - x.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def entropy_bits(p) -> float:
    """Shannon entropy in bits with the 0*log(0) := 0 convention."""
    arr = np.asarray(p, dtype=np.float64)
    nz = arr > 0.0
    if not nz.any():
        return 0.0
    return float(-(arr[nz] * np.log2(arr[nz])).sum())


def entropy_bits_rows(p) -> Array:
    """Row-wise entropy in bits of a matrix of probability rows."""
    arr = np.asarray(p, dtype=np.float64)
    terms = np.where(arr > 0.0, arr * np.log2(arr, where=arr > 0.0, out=np.zeros_like(arr)), 0.0)
    return -terms.sum(axis=1)


def dot(a, b) -> float:
    """Inner product of two equal-length vectors."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.shape != bv.shape or av.ndim != 1:
        raise ValueError(f"dot needs equal-length 1-D arrays, got {av.shape} and {bv.shape}")
    return float(av @ bv)


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two non-zero vectors, clipped to [-1, 1]."""
    av = check_finite(a, "a")
    bv = check_finite(b, "b")
    if av.shape != bv.shape or av.ndim != 1:
        raise ValueError(f"cosine needs equal-length 1-D arrays, got {av.shape} and {bv.shape}")
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine_similarity is undefined for zero-norm input")
    return float(np.clip(float(av @ bv) / (na * nb), -1.0, 1.0))


def finite_diff_gradient(
    scalar_fn: Callable[[Array], float],
    point: Sequence[float] | Array,
    epsilon: float = 1e-6,
) -> Array:
    """Central-difference gradient of scalar_fn at point (test oracle)."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    x = np.array(point, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + epsilon
        up = float(scalar_fn(x))
        flat[k] = orig - epsilon
        down = float(scalar_fn(x))
        flat[k] = orig
        gflat[k] = (up - down) / (2.0 * epsilon)
    return grad
