"""Seeded synthetic observations: hidden inputs drawn i.i.d. from a true
distribution, each pushed through the channel to an observed output."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .channel import Channel
from .dist import Dist, empirical_from_samples, make_dist
from .errors import DimensionError, ValidationError

GENERATOR_ID = f"numpy.random.PCG64/numpy-{np.__version__.split('.')[0]}"


@dataclass(frozen=True)
class SyntheticRun:
    true_theta: Dist
    n: int
    seed: int
    xs: tuple[int, ...]
    ys: tuple[int, ...]
    generator: str = GENERATOR_ID

    def to_dict(self) -> dict:
        return {
            "generator": self.generator,
            "seed": self.seed,
            "n": self.n,
            "true_theta": self.true_theta.weights.tolist(),
            "xs": list(self.xs),
            "ys": list(self.ys),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SyntheticRun":
        try:
            d = json.loads(text)
            run = cls(make_dist(d["true_theta"]), int(d["n"]), int(d["seed"]),
                      tuple(d["xs"]), tuple(d["ys"]), d.get("generator", GENERATOR_ID))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValidationError(f"malformed synthetic run: {exc!r}") from None
        if len(run.xs) != run.n or len(run.ys) != run.n:
            raise ValidationError("xs/ys length does not match n")
        return run

    def ys_text(self) -> str:
        return "".join(f"{y}\n" for y in self.ys)


def categorical(rng: np.random.Generator, probs: np.ndarray, size: int) -> np.ndarray:
    """Inverse-CDF draws; the last bucket absorbs any rounding residue in the cumulative sum."""
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side="right")


def sample_run(c: Channel, true_theta: Dist, n: int, seed: int) -> SyntheticRun:
    if n < 1:
        raise ValidationError("sample count must be positive")
    if len(true_theta) != c.n:
        raise DimensionError(f"true distribution has {len(true_theta)} entries, channel has {c.n} inputs")
    if not 0 <= seed < 2**64:
        raise ValidationError("seed must be an unsigned 64-bit integer")
    rng = np.random.Generator(np.random.PCG64(seed))
    xs = categorical(rng, true_theta.weights, n)
    cdf = np.cumsum(c.matrix, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(n)
    ys = (u[:, None] >= cdf[xs]).sum(axis=1)
    return SyntheticRun(true_theta, n, seed, tuple(xs.tolist()), tuple(ys.tolist()))


def observed_tau(run: SyntheticRun, m: int) -> Dist:
    return empirical_from_samples(np.asarray(run.ys, dtype=np.int64), m)
