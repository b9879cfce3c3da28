"""Discrete channels C(y|x) stored as row-stochastic N x M matrices.

Rows are indexed by input x, columns by output y.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dist import SIMPLEX_TOL, Dist, from_arithmetic, support
from .errors import DimensionError, EmptyDomainError, PlausibilityError, ValidationError


class Channel:
    """Row-stochastic matrix of conditional probabilities C(y|x)."""

    __slots__ = ("_m",)

    def __init__(self, matrix):
        try:
            m = np.array(matrix, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"channel entries must be real numbers: {exc}") from None
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise ValidationError(f"channel must be a non-empty 2-d matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("channel entries must be finite")
        if m.min() < -SIMPLEX_TOL:
            raise ValidationError(f"negative channel entry {m.min():.3g}")
        m = np.clip(m, 0.0, None)
        sums = m.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > SIMPLEX_TOL)
        if bad.size:
            x = int(bad[0])
            raise ValidationError(f"row {x} sums to {sums[x]:.12g}, not 1")
        m = m / sums[:, None]
        m.setflags(write=False)
        self._m = m

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def n(self) -> int:
        return self._m.shape[0]

    @property
    def m(self) -> int:
        return self._m.shape[1]

    def row(self, x: int) -> Dist:
        return Dist(self._m[x])

    def __repr__(self):
        return f"Channel(n={self.n}, m={self.m})"

    @classmethod
    def identity(cls, n: int) -> "Channel":
        return cls(np.eye(n))

    @classmethod
    def uniform(cls, n: int, m: int) -> "Channel":
        return cls(np.full((n, m), 1.0 / m))

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "m": self.m, "rows": self._m.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Channel":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed channel JSON: {exc}") from None
        if not isinstance(data, dict) or "rows" not in data:
            raise ValidationError('channel JSON must be an object with a "rows" field')
        c = cls(data["rows"])
        if data.get("n", c.n) != c.n or data.get("m", c.m) != c.m:
            raise ValidationError(
                f'declared shape ({data.get("n")}, {data.get("m")}) does not match rows ({c.n}, {c.m})'
            )
        return c

    @classmethod
    def from_csv(cls, text: str) -> "Channel":
        rows = [r for r in csv.reader(io.StringIO(text)) if r and any(f.strip() for f in r)]
        if not rows:
            raise ValidationError("empty channel CSV")
        try:
            [float(f) for f in rows[0]]
        except ValueError:
            rows = rows[1:]  # header
        try:
            values = [[float(f) for f in r] for r in rows]
        except ValueError as exc:
            raise ValidationError(f"malformed channel CSV: {exc}") from None
        if len({len(r) for r in values}) > 1:
            raise ValidationError("channel CSV rows have differing lengths")
        return cls(values)


def load_channel(path) -> Channel:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        return Channel.from_csv(text)
    return Channel.from_json(text)


@dataclass(frozen=True)
class InverseChannel:
    """Bayesian inversion of a channel under a prior.

    ``matrix[y, x]`` is the posterior of x given y. Rows for outputs the prior
    cannot produce (``predictive[y] == 0``) are undefined; they hold NaN and
    ``defined[y]`` is False.
    """

    matrix: np.ndarray
    defined: np.ndarray
    base_prior: Dist
    predictive: Dist


@dataclass(frozen=True)
class Joint:
    """Joint distribution p(x, y) = theta(x) C(y|x) as an N x M matrix."""

    matrix: np.ndarray


def _check_input(c: Channel, theta: Dist) -> None:
    if len(theta) != c.n:
        raise DimensionError(f"prior has {len(theta)} entries, channel has {c.n} inputs")


def _check_output(c: Channel, tau: Dist) -> None:
    if len(tau) != c.m:
        raise DimensionError(f"output distribution has {len(tau)} entries, channel has {c.m} outputs")


def push_forward(c: Channel, theta: Dist) -> Dist:
    """Predicted output distribution sum_x theta(x) C(y|x)."""
    _check_input(c, theta)
    return from_arithmetic(theta.weights @ c.matrix)


def likelihood_column(c: Channel, y: int) -> np.ndarray:
    """The unnormalized likelihood x -> C(y|x)."""
    if not 0 <= y < c.m:
        raise ValidationError(f"output index {y} outside [0, {c.m})")
    return c.matrix[:, y].copy()


def joint(c: Channel, theta: Dist) -> Joint:
    _check_input(c, theta)
    j = theta.weights[:, None] * c.matrix
    j.setflags(write=False)
    return Joint(j)


def invert(c: Channel, theta: Dist) -> InverseChannel:
    _check_input(c, theta)
    j = theta.weights[:, None] * c.matrix
    pred = j.sum(axis=0)
    defined = pred > 0
    inv = np.full((c.m, c.n), np.nan)
    inv[defined] = (j[:, defined] / pred[defined]).T
    inv.setflags(write=False)
    defined.setflags(write=False)
    return InverseChannel(inv, defined, theta, from_arithmetic(pred))


def apply_inverse(inv: InverseChannel, tau: Dist) -> Dist:
    """Average the posterior rows under ``tau``."""
    if len(tau) != inv.matrix.shape[0]:
        raise DimensionError(
            f"output distribution has {len(tau)} entries, inverse has {inv.matrix.shape[0]} rows"
        )
    t = tau.weights
    bad = np.flatnonzero((t > 0) & ~inv.defined)
    if bad.size:
        raise PlausibilityError(
            f"observed outputs {bad.tolist()} have zero predicted probability", bad
        )
    active = t > 0
    return from_arithmetic(t[active] @ inv.matrix[active])


def has_full_image(c: Channel, theta: Dist) -> bool:
    return bool(np.all(push_forward(c, theta).weights > 0))


def implausible_outputs(c: Channel, theta: Dist, tau: Dist) -> list[int]:
    """Outputs charged by ``tau`` that ``theta`` predicts with probability zero."""
    _check_output(c, tau)
    pred = push_forward(c, theta).weights
    return np.flatnonzero((tau.weights > 0) & (pred == 0)).tolist()


def is_plausible(c: Channel, theta: Dist, tau: Dist) -> bool:
    _check_output(c, tau)
    return support(tau) <= support(push_forward(c, theta))


def prune_inputs(c: Channel, tau: Dist) -> tuple[Channel, list[int]]:
    """Drop inputs that cannot produce any observed output.

    Returns the reduced channel and ``kept``, where ``kept[i]`` is the original
    index of reduced input ``i``.
    """
    _check_output(c, tau)
    reachable = (c.matrix[:, tau.weights > 0] > 0).any(axis=1)
    kept = np.flatnonzero(reachable).tolist()
    if not kept:
        raise EmptyDomainError("no input can produce the observed outputs")
    return Channel(c.matrix[kept]), kept


def embed(theta: Dist, kept: list[int], n: int) -> Dist:
    """Re-embed a distribution over kept inputs into the original domain with zeros."""
    if len(theta) != len(kept):
        raise DimensionError("kept-index map does not match the distribution")
    w = np.zeros(n)
    w[kept] = theta.weights
    return Dist(w)


def restrict(theta: Dist, kept: list[int]) -> Dist:
    """Restrict to the kept inputs and renormalize."""
    w = theta.weights[kept]
    total = w.sum()
    if total <= 0:
        raise PlausibilityError("prior puts no mass on any input compatible with the observations")
    return Dist(w / total)
