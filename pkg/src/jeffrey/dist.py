"""Distributions on finite domains and the information functionals used by the EM loop.

All logarithms are natural (nats). Probabilities live in the linear domain,
which is adequate for domains up to a few hundred points; very large or very
sparse problems could underflow ``p(y)`` and would need log-space arithmetic.
"""

from __future__ import annotations

import json
import math
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ValidationError

SIMPLEX_TOL = 1e-9


class Dist:
    """An immutable point on the probability simplex."""

    __slots__ = ("_w",)

    def __init__(self, weights: np.ndarray):
        w = np.array(weights, dtype=np.float64)
        w.setflags(write=False)
        self._w = w

    @property
    def weights(self) -> np.ndarray:
        return self._w

    def __len__(self) -> int:
        return self._w.shape[0]

    def __getitem__(self, i):
        return self._w[i]

    def __iter__(self):
        return iter(self._w.tolist())

    def __array__(self, dtype=None, copy=None):
        return self._w if dtype is None else self._w.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Dist):
            return NotImplemented
        return np.array_equal(self._w, other._w)

    def __hash__(self):
        return hash(self._w.tobytes())

    def __repr__(self):
        return "Dist(" + ", ".join(f"{v:.6g}" for v in self._w) + ")"

    def to_json(self) -> str:
        return json.dumps(self._w.tolist())

    @classmethod
    def from_json(cls, text: str) -> "Dist":
        data = json.loads(text)
        if not isinstance(data, list):
            raise ValidationError("a distribution must be a JSON array of numbers")
        return make_dist(data)


def make_dist(weights: Iterable[float]) -> Dist:
    """Validate ``weights`` and return them as a :class:`Dist`.

    Entries down to ``-SIMPLEX_TOL`` are clamped to zero and the vector is
    renormalized so the stored weights sum to one.
    """
    try:
        w = np.asarray(list(weights), dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"weights must be real numbers: {exc}") from None
    if w.ndim != 1 or w.size == 0:
        raise ValidationError("a distribution needs at least one weight")
    if not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite")
    if w.min() < -SIMPLEX_TOL:
        raise ValidationError(f"negative weight {w.min():.3g} below tolerance")
    total = w.sum()
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise ValidationError(f"weights sum to {total:.12g}, not 1")
    return _renormalized(w)


def _renormalized(w: np.ndarray) -> Dist:
    # Used after internal arithmetic: clamp rounding negatives, kill drift.
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if total != 1.0:
        w = w / total
    return Dist(w)


def from_arithmetic(w: np.ndarray) -> Dist:
    """Wrap the result of internal arithmetic, checking it is still a simplex point."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size == 0 or not np.all(np.isfinite(w)):
        raise ValidationError("arithmetic produced an invalid distribution")
    if w.min() < -SIMPLEX_TOL or abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise ValidationError(f"arithmetic drifted off the simplex (sum {w.sum():.12g})")
    return _renormalized(w)


def uniform(n: int) -> Dist:
    if n < 1:
        raise ValidationError("domain size must be positive")
    return Dist(np.full(n, 1.0 / n))


def point_mass(n: int, i: int) -> Dist:
    if not 0 <= i < n:
        raise ValidationError(f"index {i} outside domain of size {n}")
    w = np.zeros(n)
    w[i] = 1.0
    return Dist(w)


def empirical_from_samples(samples: Sequence[int], domain_size: int) -> Dist:
    """Frequency distribution of ``samples`` over ``range(domain_size)``."""
    if domain_size < 1:
        raise ValidationError("domain size must be positive")
    s = np.asarray(samples)
    if s.size == 0:
        raise ValidationError("no samples")
    if not np.issubdtype(s.dtype, np.integer):
        raise ValidationError("samples must be integer indices")
    if s.min() < 0 or s.max() >= domain_size:
        raise ValidationError(f"sample index outside [0, {domain_size})")
    counts = np.bincount(s, minlength=domain_size)
    return _renormalized(counts / s.size)


def support(p: Dist) -> frozenset[int]:
    return frozenset(np.flatnonzero(p.weights > 0).tolist())


def _check_same(p: Dist, q: Dist) -> None:
    if len(p) != len(q):
        raise DimensionError(f"domain sizes differ: {len(p)} vs {len(q)}")


def kl_divergence(p: Dist, q: Dist) -> float:
    """Relative entropy D(p || q) in nats; ``math.inf`` when p is not absolutely continuous w.r.t. q."""
    _check_same(p, q)
    pw, qw = p.weights, q.weights
    active = pw > 0
    if np.any(qw[active] == 0):
        return math.inf
    # sum p log(p/q) == sum [p log(p/q) + q - p] + q-mass off supp(p) for
    # normalized p, q. Each bracket is >= 0; near q == p it is evaluated as
    # p (r - log1p r), r = q/p - 1, which keeps full relative precision.
    pa, qa = pw[active], qw[active]
    with np.errstate(over="ignore", invalid="ignore"):
        r = qa / pa - 1.0
        near = np.abs(r) < 0.5
        terms = np.where(near, pa * (r - np.log1p(r)), pa * np.log(pa / qa) + qa - pa)
    return float(np.sum(terms) + qw[~active].sum())


def log_likelihood(tau: Dist, predicted: Dist) -> float:
    """Scaled log-likelihood sum_y tau(y) log predicted(y); ``-inf`` on an impossible observation."""
    _check_same(tau, predicted)
    active = tau.weights > 0
    pa = predicted.weights[active]
    if np.any(pa == 0):
        return -math.inf
    return float(np.sum(tau.weights[active] * np.log(pa)))


def entropy(p: Dist) -> float:
    w = p.weights[p.weights > 0]
    return float(-np.sum(w * np.log(w)))


def l1_distance(p, q) -> float:
    return float(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())
