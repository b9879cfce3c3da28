"""Command-line entry point: ``jeffrey estimate | simulate | verify``.

Exit codes: 0 success (and certified), 1 certification failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import embed, load_channel, prune_inputs, push_forward
from .datagen import observed_tau, sample_run
from .dist import Dist, empirical_from_samples, kl_divergence, uniform
from .em import StopCriteria, Trace, certify_monotone, run
from .errors import PlausibilityError, ValidationError

EXIT_OK = 0
EXIT_UNCERTIFIED = 1
EXIT_BAD_INPUT = 2


@dataclass
class RunConfig:
    channel_path: Path
    output_dir: Path
    tau_path: Path | None = None
    samples_path: Path | None = None
    theta0: str = "uniform"
    stop: StopCriteria = StopCriteria()
    seed: int | None = None
    emit_plot_data: bool = False

    def __post_init__(self):
        if (self.tau_path is None) == (self.samples_path is None):
            raise ValidationError("give exactly one of --tau or --samples")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def read_samples(path: Path) -> np.ndarray:
    try:
        return np.array([int(line) for line in path.read_text().split()], dtype=np.int64)
    except ValueError as exc:
        raise ValidationError(f"{path}: sample file must hold one integer per line ({exc})") from None


def read_dist(path: Path) -> Dist:
    try:
        return Dist.from_json(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def cmd_estimate(cfg: RunConfig) -> int:
    c = load_channel(cfg.channel_path)
    if cfg.tau_path is not None:
        tau = read_dist(cfg.tau_path)
    else:
        tau = empirical_from_samples(read_samples(cfg.samples_path), c.m)
    if len(tau) != c.m:
        raise ValidationError(f"observations cover {len(tau)} outputs, channel has {c.m}")

    _, kept = prune_inputs(c, tau)
    if cfg.theta0 == "uniform":
        theta0 = embed(uniform(len(kept)), kept, c.n)
    else:
        theta0 = read_dist(Path(cfg.theta0))

    trace = run(c, theta0, tau, cfg.stop)
    report = certify_monotone(trace)
    final = trace.final
    excluded = [i not in set(kept) for i in range(c.n)]

    out = cfg.output_dir
    write_atomic(out / "trace.jsonl", trace.to_jsonl())
    write_atomic(out / "trace.csv", trace.to_csv())
    write_atomic(out / "estimate.json", _dump({
        "theta_hat": final.theta.weights.tolist(),
        "excluded": excluded,
        "predictive": final.predictive.weights.tolist(),
        "kl": final.kl,
        "log_lik": final.log_lik,
        "iterations": final.iteration,
        "converged": trace.converged,
        "stop_reason": trace.stop_reason.value,
        "seed": cfg.seed,
    }))
    write_atomic(out / "certificate.json", _dump(report.to_dict()))
    if cfg.emit_plot_data:
        lines = ["iteration,kl,log_lik\n"] + [
            f"{r.iteration},{r.kl:.17g},{r.log_lik:.17g}\n" for r in trace.records
        ]
        write_atomic(out / "plot.csv", "".join(lines))

    print(f"theta_hat = {[round(v, 10) for v in final.theta.weights.tolist()]}")
    print(f"kl = {final.kl:.6g} after {final.iteration} steps ({trace.stop_reason.value})")
    if not report.passed:
        print(f"certification FAILED at step {report.first_violation}")
        return EXIT_UNCERTIFIED
    print("certification passed")
    return EXIT_OK


def cmd_simulate(channel_path: Path, theta_true_path: Path, n: int, seed: int, output_dir: Path) -> int:
    c = load_channel(channel_path)
    theta = read_dist(theta_true_path)
    result = sample_run(c, theta, n, seed)
    write_atomic(output_dir / "run.json", result.to_json() + "\n")
    write_atomic(output_dir / "observations.txt", result.ys_text())
    tau = observed_tau(result, c.m)
    print(f"sampled n={n} seed={seed}; kl(tau || C(theta*)) = {kl_divergence(tau, push_forward(c, theta)):.6g}")
    return EXIT_OK


def cmd_verify(trace_path: Path, channel_path: Path | None = None) -> int:
    text = trace_path.read_text()
    if trace_path.suffix.lower() == ".csv":
        trace = Trace.from_csv(text, load_channel(channel_path) if channel_path else None)
    else:
        trace = Trace.from_jsonl(text)
    if not trace.records:
        raise ValidationError(f"{trace_path}: trace has no records")
    report = certify_monotone(trace)
    if report.passed:
        print(f"PASS: {report.steps_checked} steps, max kl increase {report.max_kl_increase:.3g}")
        return EXIT_OK
    v = report.violations[0]
    print(f"FAIL: first violation at step {v.index} ({v.kind}, magnitude {v.magnitude:.6g})")
    return EXIT_UNCERTIFIED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jeffrey", description="Jeffrey's-rule estimation over discrete channels")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="estimate the input distribution from observations")
    e.add_argument("--channel", type=Path, required=True, help="channel file (.json or .csv)")
    obs = e.add_mutually_exclusive_group(required=True)
    obs.add_argument("--tau", type=Path, help="JSON array of observed output frequencies")
    obs.add_argument("--samples", type=Path, help="text file of observed output indices, one per line")
    e.add_argument("--theta0", default="uniform", help='"uniform" or a JSON array file')
    e.add_argument("--max-iters", type=int, default=StopCriteria.max_iterations)
    e.add_argument("--theta-tol", type=float, default=StopCriteria.theta_l1_tol)
    e.add_argument("--delta-l-tol", type=float, default=StopCriteria.delta_l_tol)
    e.add_argument("--out", type=Path, required=True)
    e.add_argument("--seed", type=int, help="recorded for provenance; estimation is deterministic")
    e.add_argument("--plot-data", action="store_true", help="also write plot.csv (iteration, kl, log_lik)")

    s = sub.add_parser("simulate", help="sample synthetic observations")
    s.add_argument("--channel", type=Path, required=True)
    s.add_argument("--theta-true", type=Path, required=True, help="JSON array of the true input distribution")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path, required=True)

    v = sub.add_parser("verify", help="certify that a trace never increases the KL divergence")
    v.add_argument("trace", type=Path)
    v.add_argument("--channel", type=Path, help="channel for recomputing predictions from a CSV trace")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "estimate":
            cfg = RunConfig(
                channel_path=args.channel,
                output_dir=args.out,
                tau_path=args.tau,
                samples_path=args.samples,
                theta0=args.theta0,
                stop=StopCriteria(args.max_iters, args.theta_tol, args.delta_l_tol),
                seed=args.seed,
                emit_plot_data=args.plot_data,
            )
            return cmd_estimate(cfg)
        if args.command == "simulate":
            return cmd_simulate(args.channel, args.theta_true, args.n, args.seed, args.out)
        return cmd_verify(args.trace, args.channel)
    except PlausibilityError as exc:
        print(f"error: {exc} (implausible outputs: {list(exc.outputs)})", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
