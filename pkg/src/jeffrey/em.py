"""Jeffrey's update rule run as an EM iteration, with per-step diagnostics.

Each step replaces the prior with the posterior averaged under the observed
output frequencies. The loop records the relative entropy between the
observations and the prediction, the log-likelihood, and the changes in the
two halves of the EM decomposition L = Q + H, so a finished trace can be
checked for monotone improvement after the fact.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

from .channel import (
    Channel,
    apply_inverse,
    embed,
    implausible_outputs,
    invert,
    prune_inputs,
    push_forward,
    restrict,
)
from .dist import Dist, kl_divergence, l1_distance, log_likelihood, make_dist
from .errors import DimensionError, PlausibilityError, ValidationError

MONOTONE_TOL = 1e-10
IDENTITY_TOL = 1e-9
ORACLE_MAX_INPUTS = 4


class StopReason(str, enum.Enum):
    KL_TOLERANCE = "kl_tolerance"
    THETA_FIXED_POINT = "theta_fixed_point"
    MAX_ITERATIONS = "max_iterations"
    LIKELIHOOD_PLATEAU = "likelihood_plateau"


@dataclass(frozen=True)
class StopCriteria:
    """When to stop iterating.

    ``kl_tol`` stops once the observations are fitted to within that many
    nats; at its default of 0 it only fires on an exact fit. The likelihood
    gain shrinks quadratically with the distance to the optimum, so a
    positive ``delta_l_tol`` stops roughly ``sqrt(delta_l_tol)`` away from it;
    the default of 0 stops only once the likelihood stops improving at all.
    """

    max_iterations: int = 10_000
    theta_l1_tol: float = 1e-10
    delta_l_tol: float = 0.0
    kl_tol: float = 0.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be positive")
        for name in ("theta_l1_tol", "delta_l_tol", "kl_tol"):
            v = getattr(self, name)
            if not v >= 0:
                raise ValidationError(f"{name} must be non-negative")


@dataclass(frozen=True)
class StepRecord:
    iteration: int
    theta: Dist
    predictive: Dist
    kl: float
    log_lik: float
    delta_q: float | None = None
    delta_h: float | None = None

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "theta": self.theta.weights.tolist(),
            "predictive": self.predictive.weights.tolist(),
            "kl": _enc(self.kl),
            "log_lik": _enc(self.log_lik),
            "delta_q": _enc(self.delta_q),
            "delta_h": _enc(self.delta_h),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepRecord":
        try:
            return cls(
                iteration=int(d["iteration"]),
                theta=make_dist(d["theta"]),
                predictive=make_dist(d["predictive"]),
                kl=_dec(d["kl"]),
                log_lik=_dec(d["log_lik"]),
                delta_q=_dec(d.get("delta_q")),
                delta_h=_dec(d.get("delta_h")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed step record: {exc!r}") from None


def _enc(v):
    # JSON has no infinities; spell them out.
    if v is None or math.isfinite(v):
        return v
    return "inf" if v > 0 else "-inf"


def _dec(v):
    if v is None:
        return None
    if isinstance(v, str):
        if v not in ("inf", "-inf"):
            raise ValueError(f"unexpected value {v!r}")
        return float(v)
    return float(v)


@dataclass
class Trace:
    records: list[StepRecord] = field(default_factory=list)
    converged: bool = False
    stop_reason: StopReason | None = None
    kept: list[int] | None = None

    @property
    def final(self) -> StepRecord:
        return self.records[-1]

    @property
    def kl(self) -> list[float]:
        return [r.kl for r in self.records]

    @property
    def log_lik(self) -> list[float]:
        return [r.log_lik for r in self.records]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        records = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from None
            records.append(StepRecord.from_dict(d))
        return cls(records)

    def to_csv(self) -> str:
        n = len(self.records[0].theta) if self.records else 0
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "kl", "log_lik", "delta_q", "delta_h"] + [f"theta_{i}" for i in range(n)])
        for r in self.records:
            w.writerow(
                [r.iteration, _fmt(r.kl), _fmt(r.log_lik), _fmt(r.delta_q), _fmt(r.delta_h)]
                + [_fmt(v) for v in r.theta.weights]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, channel: Channel | None = None) -> "Trace":
        """Read a CSV trace. Predictive columns are not stored in CSV, so they are
        recomputed when a channel is given and left as ``theta`` otherwise."""
        rows = list(csv.DictReader(io.StringIO(text)))
        records = []
        for row in rows:
            try:
                thetas = [float(row[k]) for k in sorted(
                    (k for k in row if k.startswith("theta_")), key=lambda k: int(k[6:]))]
                theta = make_dist(thetas)
                records.append(StepRecord(
                    iteration=int(row["iteration"]),
                    theta=theta,
                    predictive=push_forward(channel, theta) if channel else theta,
                    kl=float(row["kl"]),
                    log_lik=float(row["log_lik"]),
                    delta_q=float(row["delta_q"]) if row["delta_q"] else None,
                    delta_h=float(row["delta_h"]) if row["delta_h"] else None,
                ))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"malformed CSV trace row: {exc!r}") from None
        return cls(records)


def _fmt(v) -> str:
    if v is None:
        return ""
    return format(float(v), ".17g")


def _require_plausible(c: Channel, theta: Dist, tau: Dist, what: str) -> None:
    bad = implausible_outputs(c, theta, tau)
    if bad:
        raise PlausibilityError(f"{what} gives zero probability to observed outputs {bad}", bad)


def _check_dims(c: Channel, tau: Dist, *thetas: Dist) -> None:
    if len(tau) != c.m:
        raise DimensionError(f"tau has {len(tau)} entries, channel has {c.m} outputs")
    for th in thetas:
        if len(th) != c.n:
            raise DimensionError(f"prior has {len(th)} entries, channel has {c.n} inputs")


def jeffrey_step(c: Channel, theta_t: Dist, tau: Dist) -> Dist:
    """One application of Jeffrey's rule: the posterior averaged under ``tau``."""
    _check_dims(c, tau, theta_t)
    return apply_inverse(invert(c, theta_t), tau)


def _posterior_weights(c: Channel, theta_t: Dist, tau: Dist) -> np.ndarray:
    # W[x, y] = tau(y) p_t(x|y); zero on columns tau does not charge.
    _require_plausible(c, theta_t, tau, "theta_t")
    inv = invert(c, theta_t)
    active = tau.weights > 0
    w = np.zeros((c.n, c.m))
    w[:, active] = (inv.matrix[active] * tau.weights[active, None]).T
    return w


def _weighted_log(w: np.ndarray, v: np.ndarray) -> float:
    """sum w log v over w > 0, with 0 log 0 = 0; -inf if a positive weight meets v = 0."""
    active = w > 0
    va = v[active]
    if np.any(va == 0):
        return -math.inf
    return float(np.sum(w[active] * np.log(va)))


def q_function(c: Channel, theta: Dist, theta_t: Dist, tau: Dist) -> float:
    """Expected complete-data log-likelihood Q(theta | theta_t)."""
    _check_dims(c, tau, theta, theta_t)
    w = _posterior_weights(c, theta_t, tau)
    return _weighted_log(w, theta.weights[:, None] * c.matrix)


def h_function(c: Channel, theta: Dist, theta_t: Dist, tau: Dist) -> float:
    """H(theta | theta_t) = -sum tau(y) p_t(x|y) log p_theta(x|y)."""
    _check_dims(c, tau, theta, theta_t)
    w = _posterior_weights(c, theta_t, tau)
    _require_plausible(c, theta, tau, "theta")
    post = invert(c, theta).matrix.T  # N x M, NaN on undefined columns
    post = np.where(np.isnan(post), 0.0, post)
    return -_weighted_log(w, post)


def delta_l(c: Channel, theta_new: Dist, theta_t: Dist, tau: Dist) -> float:
    """Log-likelihood gain L(theta_new) - L(theta_t)."""
    _check_dims(c, tau, theta_new, theta_t)
    _require_plausible(c, theta_t, tau, "theta_t")
    _require_plausible(c, theta_new, tau, "theta_new")
    active = tau.weights > 0
    p_new = push_forward(c, theta_new).weights[active]
    p_old = push_forward(c, theta_t).weights[active]
    return float(np.sum(tau.weights[active] * np.log(p_new / p_old)))


def delta_q(c: Channel, theta_new: Dist, theta_t: Dist, tau: Dist) -> float:
    """Q(theta_new | theta_t) - Q(theta_t | theta_t).

    Computed as sum_x r(x) log(theta_new(x) / theta_t(x)) with r the Jeffrey
    posterior, which avoids cancellation between two large Q values.
    """
    _check_dims(c, tau, theta_new, theta_t)
    _require_plausible(c, theta_t, tau, "theta_t")
    r = jeffrey_step(c, theta_t, tau).weights
    active = r > 0
    new = theta_new.weights[active]
    if np.any(new == 0):
        return -math.inf
    return float(np.sum(r[active] * np.log(new / theta_t.weights[active])))


def delta_h(c: Channel, theta_new: Dist, theta_t: Dist, tau: Dist) -> float:
    """H(theta_new | theta_t) - H(theta_t | theta_t): the tau-weighted KL between
    the per-output posteriors under theta_t and under theta_new. Never negative."""
    _check_dims(c, tau, theta_new, theta_t)
    _require_plausible(c, theta_t, tau, "theta_t")
    _require_plausible(c, theta_new, tau, "theta_new")
    active = tau.weights > 0
    old = invert(c, theta_t).matrix[active]
    new = invert(c, theta_new).matrix[active]
    charged = old > 0
    if np.any(charged & (new == 0)):
        return math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(charged, old * np.log(old / new), 0.0)
    return float(tau.weights[active] @ terms.sum(axis=1))


def _record(c: Channel, tau: Dist, it: int, theta: Dist, prev: Dist | None) -> StepRecord:
    pred = push_forward(c, theta)
    dq = dh = None
    if prev is not None:
        dq = delta_q(c, theta, prev, tau)
        dh = delta_h(c, theta, prev, tau)
    return StepRecord(it, theta, pred, kl_divergence(tau, pred), log_likelihood(tau, pred), dq, dh)


def run(c: Channel, theta0: Dist, tau: Dist, stop: StopCriteria | None = None) -> Trace:
    """Iterate Jeffrey's rule from ``theta0`` until a stopping criterion fires.

    Inputs that cannot produce any observed output are pruned first and
    iterated over the reduced channel; every recorded theta is re-embedded in
    the original input domain with exact zeros at pruned indices. Record 0 is
    ``theta0`` itself.
    """
    stop = stop or StopCriteria()
    _check_dims(c, tau, theta0)
    _require_plausible(c, theta0, tau, "theta0")
    reduced, kept = prune_inputs(c, tau)
    theta = restrict(theta0, kept)

    records = [_record(c, tau, 0, theta0, None)]
    trace = Trace(records, kept=kept)
    prev_full = theta0
    for it in range(1, stop.max_iterations + 1):
        new = jeffrey_step(reduced, theta, tau)
        new_full = embed(new, kept, c.n)
        rec = _record(c, tau, it, new_full, prev_full)
        records.append(rec)
        step_l1 = l1_distance(new, theta)
        gain = records[-2].kl - rec.kl  # equals the log-likelihood gain, without cancellation
        theta, prev_full = new, new_full
        if rec.kl <= stop.kl_tol:
            trace.stop_reason = StopReason.KL_TOLERANCE
        elif step_l1 <= stop.theta_l1_tol:
            trace.stop_reason = StopReason.THETA_FIXED_POINT
        elif gain <= stop.delta_l_tol:
            trace.stop_reason = StopReason.LIKELIHOOD_PLATEAU
        else:
            continue
        trace.converged = True
        return trace
    trace.stop_reason = StopReason.MAX_ITERATIONS
    return trace


@dataclass(frozen=True)
class Violation:
    index: int
    kind: str  # "kl_increase", "log_lik_decrease" or "identity"
    magnitude: float


@dataclass(frozen=True)
class CertificationReport:
    passed: bool
    steps_checked: int
    first_violation: int | None
    violations: tuple[Violation, ...]
    max_kl_increase: float
    max_log_lik_decrease: float
    max_identity_error: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "steps_checked": self.steps_checked,
            "first_violation": self.first_violation,
            "violations": [v.__dict__ for v in self.violations],
            "max_kl_increase": self.max_kl_increase,
            "max_log_lik_decrease": self.max_log_lik_decrease,
            "max_identity_error": self.max_identity_error,
            "monotone_tol": MONOTONE_TOL,
            "identity_tol": IDENTITY_TOL,
        }


def _rise(before: float, after: float) -> float:
    # after - before, with equal infinities counted as no change
    return 0.0 if before == after else after - before


def certify_monotone(trace: Trace) -> CertificationReport:
    """Check that KL never rises and log-likelihood never falls between steps.

    A violation's ``index`` is the later record of the offending pair.
    Rises up to ``MONOTONE_TOL`` pass but still show up in the maxima. Also
    checks that each KL drop equals the matching log-likelihood gain.
    """
    if not trace.records:
        raise ValidationError("cannot certify an empty trace")
    kl, ll = trace.kl, trace.log_lik
    violations = []
    max_kl_up = max_ll_down = max_ident = 0.0
    for t in range(1, len(kl)):
        up = _rise(kl[t - 1], kl[t])
        down = -_rise(ll[t - 1], ll[t])
        ident = abs(up - down)
        if math.isnan(ident):
            ident = math.inf
        max_kl_up = max(max_kl_up, up)
        max_ll_down = max(max_ll_down, down)
        max_ident = max(max_ident, ident)
        if up > MONOTONE_TOL:
            violations.append(Violation(t, "kl_increase", up))
        if down > MONOTONE_TOL:
            violations.append(Violation(t, "log_lik_decrease", down))
        if ident > IDENTITY_TOL:
            violations.append(Violation(t, "identity", ident))
    return CertificationReport(
        passed=not violations,
        steps_checked=len(kl) - 1,
        first_violation=violations[0].index if violations else None,
        violations=tuple(violations),
        max_kl_increase=max_kl_up,
        max_log_lik_decrease=max_ll_down,
        max_identity_error=max_ident,
    )


@lru_cache(maxsize=8)
def simplex_grid(n: int, resolution: int) -> np.ndarray:
    """Every point k / resolution with non-negative integers k summing to
    ``resolution``, in lexicographic order of k."""
    slots = resolution + n - 1
    counts = []
    for bars in combinations(range(slots), n - 1):
        edges = (-1,) + bars + (slots,)
        counts.append([edges[i + 1] - edges[i] - 1 for i in range(n)])
    k = np.array(counts, dtype=np.int64)
    grid = k[np.lexsort(k.T[::-1])] / resolution
    grid.setflags(write=False)
    return grid


def argmax_q_oracle(c: Channel, theta_t: Dist, tau: Dist, grid_resolution: int) -> Dist:
    """Brute-force maximizer of Q(. | theta_t) over a simplex lattice.

    Only for tiny input alphabets; it exists to check that the Jeffrey step
    is the constrained maximizer of Q. Ties go to the lexicographically first
    lattice point.
    """
    _check_dims(c, tau, theta_t)
    if c.n > ORACLE_MAX_INPUTS:
        raise ValidationError(f"oracle supports at most {ORACLE_MAX_INPUTS} inputs, got {c.n}")
    if grid_resolution < 1:
        raise ValidationError("grid resolution must be positive")
    w = _posterior_weights(c, theta_t, tau)
    grid = simplex_grid(c.n, grid_resolution)
    active = w > 0
    joints = grid[:, :, None] * c.matrix[None, :, :]  # K x N x M
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(active, w * np.log(joints), 0.0)
    scores = terms.reshape(len(grid), -1).sum(axis=1)
    return Dist(grid[int(np.argmax(scores))])
