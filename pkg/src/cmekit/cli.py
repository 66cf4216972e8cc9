"""Config-driven experiment runner: verification suites, truncation and
empirical sweeps, Gaussian-bridge diagnostics, and the random-matrix
spectrum experiment, all emitting machine-readable reports.

Joint specifications are JSON (see :func:`parse_joint_spec`), reports are
JSON, tables are CSV with fixed header order.  Identical command lines
with identical seeds produce byte-identical outputs; the optional timing
field stays null unless explicitly requested, precisely to keep reports
diffable.

Exit codes: 0 when every check passes, 1 when a check fails, 2 on an
invalid specification or invalid usage.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cme import (
    check_assumptions,
    classical_cme,
    fit_centered,
    fit_uncentered,
    centered_projection_floor,
    marginal_consistency,
    truncation_sweep,
    weak_identity_check,
)
from .corpus import CORPUS_NAMES, DEFAULT_CORPUS_SEED, generate
from .discrete import EmbeddedJoint, FiniteJoint, embed_joint, mmd
from .empirical import EstimatorConfig, convergence_study, spectrum_experiment
from .errors import CmekitError, ValidationError
from .gaussian import (
    GaussianJoint,
    incompatible_example,
    is_compatible,
    oblique_projection,
    verify_bridge,
)
from .kernels import Kernel, kernel_hypothesis_report
from .linalg import Tolerance

__all__ = ["main", "console_main", "parse_joint_spec", "RunReport", "CheckResult"]

# Pass/fail thresholds pinned once for the whole verification suite.
ORACLE_TOL = 1e-8
WEAK_IDENTITY_TOL = 1e-10
MONOTONE_SLACK = 1e-12
BRIDGE_TOL = 1e-8
OBLIQUE_TOL = 1e-10
MARGINAL_TOL = 1e-10
PATHOLOGY_CLASSICAL_TOL = 1e-10
PATHOLOGY_CENTERED_TOL = 1e-12
MOMENT_IDENTITY_TOL = 1e-12
BLOCK_PSD_TOL = 1e-10
INDEPENDENT_CUTOFF = 1e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    residual: float | None = None
    tolerance: float | None = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"


@dataclass
class RunReport:
    """Machine-readable outcome of a verification suite."""

    suite: str
    checks: list[CheckResult] = field(default_factory=list)
    environment: dict = field(default_factory=dict)
    timing_seconds: float | None = None

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "checks": [
                {
                    "name": c.name,
                    "status": c.status,
                    "residual": c.residual,
                    "tolerance": c.tolerance,
                    "detail": c.detail,
                }
                for c in self.checks
            ],
            "environment": self.environment,
            "timing_seconds": self.timing_seconds,
        }


def _check(name: str, ok: bool, residual: float | None, tolerance: float | None, detail: str = "") -> CheckResult:
    return CheckResult(
        name=name,
        status="pass" if ok else "fail",
        residual=None if residual is None else float(residual),
        tolerance=None if tolerance is None else float(tolerance),
        detail=detail,
    )


def parse_joint_spec(spec: dict) -> tuple[FiniteJoint, Kernel, Kernel]:
    """Parse the JointSpec JSON format.

    Required keys: ``p`` (probability table), ``kernel_x``, ``kernel_y``
    (kernel sub-specs).  Optional: ``x_labels``, ``y_labels``,
    ``x_embeddings``, ``y_embeddings``.
    """
    if not isinstance(spec, dict):
        raise ValidationError("joint spec must be a JSON object")
    known = {"p", "kernel_x", "kernel_y", "x_labels", "y_labels", "x_embeddings", "y_embeddings"}
    extra = set(spec) - known
    if extra:
        raise ValidationError(f"unknown joint spec keys: {sorted(extra)}")
    for key in ("p", "kernel_x", "kernel_y"):
        if key not in spec:
            raise ValidationError(f"joint spec is missing required key {key!r}")
    joint = FiniteJoint.create(
        spec["p"],
        x_embeddings=spec.get("x_embeddings"),
        y_embeddings=spec.get("y_embeddings"),
        x_labels=spec.get("x_labels"),
        y_labels=spec.get("y_labels"),
    )
    return joint, Kernel.from_spec(spec["kernel_x"]), Kernel.from_spec(spec["kernel_y"])


def joint_spec_dict(embedded: EmbeddedJoint) -> dict:
    """Serialize an embedded joint back into the JointSpec format."""
    joint = embedded.joint
    return {
        "x_labels": list(joint.x_labels),
        "y_labels": list(joint.y_labels),
        "x_embeddings": [float(v) for v in np.atleast_1d(joint.x_embeddings)],
        "y_embeddings": [float(v) for v in np.atleast_1d(joint.y_embeddings)],
        "p": [[float(v) for v in row] for row in joint.p],
        "kernel_x": embedded.kernel_x.to_spec(),
        "kernel_y": embedded.kernel_y.to_spec(),
    }


def _load_embedded(args, tol: Tolerance) -> EmbeddedJoint:
    if args.corpus is not None:
        return generate(args.corpus, args.seed, tol)
    if args.spec is None:
        raise ValidationError("provide a joint spec file or --corpus NAME")
    try:
        raw = json.loads(Path(args.spec).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read spec file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"spec file is not valid JSON: {exc}") from exc
    joint, kernel_x, kernel_y = parse_joint_spec(raw)
    return embed_joint(joint, kernel_x, kernel_y, tol)


def verify_suite(embedded: EmbeddedJoint, tol: Tolerance) -> list[CheckResult]:
    """All population-level checks for one embedded joint.

    Checks whose hypotheses fail structurally (for example pointwise
    oracle equivalence under a rank-deficient kernel) are skipped rather
    than reported as failures; the assumption flags that gated them are
    part of the report.
    """
    joint, moments, oracle = embedded.joint, embedded.moments, embedded.oracle
    checks: list[CheckResult] = []

    identity_residual = max(
        float(np.max(np.abs(moments.cov_x - (moments.ucov_x - np.outer(moments.mean_x, moments.mean_x))))),
        float(np.max(np.abs(moments.cov_y - (moments.ucov_y - np.outer(moments.mean_y, moments.mean_y))))),
        float(np.max(np.abs(moments.cov_xy - (moments.ucov_xy - np.outer(moments.mean_x, moments.mean_y))))),
    )
    checks.append(
        _check("moment_centering_identity", identity_residual <= MOMENT_IDENTITY_TOL,
               identity_residual, MOMENT_IDENTITY_TOL)
    )

    block = moments.block_cov()
    min_eig = float(np.linalg.eigvalsh(0.5 * (block + block.T))[0])
    checks.append(_check("block_covariance_psd", min_eig >= -BLOCK_PSD_TOL, min_eig, -BLOCK_PSD_TOL))

    report = kernel_hypothesis_report(embedded.basis_x.gram, joint.p_x, tol)
    assumptions = check_assumptions(moments, report, tol)
    checks.append(
        _check(
            "assumption_hierarchy",
            not assumptions.hierarchy_violations,
            None,
            None,
            detail="; ".join(assumptions.hierarchy_violations),
        )
    )
    checks.append(
        _check("centered_range_inclusion", assumptions.assumption_c,
               assumptions.centered_range.residual, assumptions.centered_range.threshold)
    )
    checks.append(
        _check("uncentered_range_inclusion", assumptions.assumption_c_uncentered,
               assumptions.uncentered_range.residual, assumptions.uncentered_range.threshold)
    )

    phi = embedded.basis_x.coordinates
    support = np.flatnonzero(oracle.on_support)
    centered_op = fit_centered(moments, tol) if assumptions.assumption_c else None
    uncentered_op = fit_uncentered(moments, tol) if assumptions.assumption_c_uncentered else None

    if assumptions.functions_in_h_centered and centered_op is not None:
        worst = max(mmd(centered_op.predict(phi[:, i]), oracle.means[i]) for i in support)
        checks.append(_check("oracle_equivalence_centered", worst <= ORACLE_TOL, worst, ORACLE_TOL))
    if assumptions.functions_in_h and uncentered_op is not None:
        worst = max(mmd(uncentered_op.predict(phi[:, i]), oracle.means[i]) for i in support)
        checks.append(_check("oracle_equivalence_uncentered", worst <= ORACLE_TOL, worst, ORACLE_TOL))

    if centered_op is not None:
        weak = weak_identity_check(moments, oracle, centered_op)
        checks.append(_check("weak_identity_centered", weak <= WEAK_IDENTITY_TOL, weak, WEAK_IDENTITY_TOL))
    if uncentered_op is not None:
        weak = weak_identity_check(moments, oracle, uncentered_op)
        checks.append(_check("weak_identity_uncentered", weak <= WEAK_IDENTITY_TOL, weak, WEAK_IDENTITY_TOL))
        marginal = marginal_consistency(uncentered_op, moments)
        if assumptions.functions_in_h:
            checks.append(_check("marginal_consistency", marginal <= MARGINAL_TOL, marginal, MARGINAL_TOL))

    sweep = truncation_sweep(moments, oracle, variant="centered", tol=tol)
    errors = [point.error for point in sweep]
    worst_increase = max(
        (errors[i + 1] - errors[i] for i in range(len(errors) - 1)), default=0.0
    )
    checks.append(_check("truncation_monotone", worst_increase <= MONOTONE_SLACK, worst_increase, MONOTONE_SLACK))
    floor = centered_projection_floor(moments, oracle)
    plateau_gap = abs(errors[-1] - floor)
    checks.append(_check("truncation_plateau_least_squares", plateau_gap <= ORACLE_TOL, plateau_gap, ORACLE_TOL))
    if assumptions.functions_in_h_centered:
        checks.append(_check("truncation_final_error", errors[-1] <= ORACLE_TOL, errors[-1], ORACLE_TOL))
        unc_sweep = truncation_sweep(moments, oracle, variant="uncentered", tol=tol)
        final = unc_sweep[-1].error
        checks.append(_check("truncation_final_error_uncentered", final <= ORACLE_TOL, final, ORACLE_TOL))

    bridge = verify_bridge(moments, oracle, tol)
    checks.append(
        _check(
            "bridge_compatibility_matches_assumption",
            bridge.flags_agree,
            bridge.compatibility.residual,
            bridge.compatibility.threshold,
            detail=f"centered range residual {bridge.centered_range.residual:.3e}",
        )
    )
    if assumptions.functions_in_h_centered:
        checks.append(_check("bridge_conditional_mean", bridge.max_mean_error <= BRIDGE_TOL,
                             bridge.max_mean_error, BRIDGE_TOL))
        checks.append(_check("bridge_conditional_covariance", bridge.cov_error <= BRIDGE_TOL,
                             bridge.cov_error, BRIDGE_TOL))
    if bridge.compatibility:
        from .gaussian import bridge_from_moments

        projection = oblique_projection(bridge_from_moments(moments), tol)
        worst = max(projection.residuals.values())
        checks.append(_check("oblique_projection_identities", worst <= OBLIQUE_TOL, worst, OBLIQUE_TOL))

    cross_norm = float(np.linalg.norm(moments.cov_xy))
    mean_y_norm = float(np.linalg.norm(moments.mean_y))
    if cross_norm <= INDEPENDENT_CUTOFF and mean_y_norm >= 0.1:
        worst_classical = 0.0
        worst_centered = 0.0
        for i in support:
            classical = classical_cme(moments, phi[:, i], tol)
            worst_classical = max(worst_classical, float(np.linalg.norm(classical.embedding)))
            if centered_op is not None:
                worst_centered = max(worst_centered, mmd(centered_op.predict(phi[:, i]), moments.mean_y))
        checks.append(
            _check(
                "classical_pathology_zero_output",
                worst_classical <= PATHOLOGY_CLASSICAL_TOL,
                worst_classical,
                PATHOLOGY_CLASSICAL_TOL,
                detail="expected-failure demonstration: the classical formula returns 0, not mean_y",
            )
        )
        checks.append(
            _check("classical_pathology_centered_recovers_mean",
                   worst_centered <= PATHOLOGY_CENTERED_TOL, worst_centered, PATHOLOGY_CENTERED_TOL)
        )
    return checks


def _environment(args, tol: Tolerance) -> dict:
    return {
        "seed": args.seed,
        "version": __version__,
        "tolerance": {"rtol": tol.rtol, "atol": tol.atol},
    }


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _report_text(report: RunReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def _table_text(header: list[str], rows: list[list], fmt: str) -> str:
    if fmt == "json":
        records = [dict(zip(header, row)) for row in rows]
        return json.dumps(records, sort_keys=True, indent=2) + "\n"
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def cmd_verify(args, tol: Tolerance) -> int:
    started = time.perf_counter()
    embedded = _load_embedded(args, tol)
    checks = verify_suite(embedded, tol)
    report = RunReport(
        suite=f"verify:{args.corpus or args.spec}",
        checks=checks,
        environment=_environment(args, tol),
        timing_seconds=round(time.perf_counter() - started, 3) if args.timing else None,
    )
    _emit(_report_text(report), args.out)
    return 0 if report.passed else 1


def cmd_convergence(args, tol: Tolerance) -> int:
    embedded = _load_embedded(args, tol)
    sweep = truncation_sweep(embedded.moments, embedded.oracle, variant=args.variant, tol=tol)
    rows = [[p.rank, p.error, p.range_residual] for p in sweep]
    _emit(_table_text(["n", "error", "range_residual"], rows, args.format), args.out)
    return 0


def cmd_empirical(args, tol: Tolerance) -> int:
    embedded = _load_embedded(args, tol)
    config = EstimatorConfig(kind=args.estimator, epsilon=args.epsilon, rank=args.rank)
    counts = [int(v) for v in args.samples.split(",") if v]
    seeds = list(range(args.seed, args.seed + args.seeds))
    rows = [
        [r.sample_count, r.seed, r.error, r.schedule_value]
        for r in convergence_study(embedded, config, counts, seeds, tol)
    ]
    _emit(_table_text(["J", "seed", "error", "schedule_value"], rows, args.format), args.out)
    return 0


def cmd_gaussian(args, tol: Tolerance) -> int:
    if args.mode == "example":
        _, diagnostics = incompatible_example(args.n, tol)
        rows = [
            [k + 1, diagnostics.norm_trend[k], diagnostics.block_min_eigenvalue]
            for k in range(args.n)
        ]
        _emit(_table_text(["n", "q_hat_norm", "block_min_eigenvalue"], rows, args.format), args.out)
        return 0
    if args.mode == "incompatible":
        # Deliberately non-PSD synthetic block: finite-dimensional PSD
        # blocks are always compatible, so a false verdict needs an
        # illegitimate covariance.
        joint = GaussianJoint.create(
            mean_u=np.zeros(1),
            mean_v=np.zeros(2),
            cov_u=np.eye(1),
            cov_v=np.diag([1.0, 0.0]),
            cov_uv=np.array([[0.0, 1.0]]),
            validate=False,
        )
        compat = is_compatible(joint, tol)
        report = RunReport(
            suite="gaussian:incompatible-synthetic",
            checks=[
                _check(
                    "compatibility_false_recorded",
                    not compat.included,
                    compat.residual,
                    compat.threshold,
                    detail="synthetic block violates PSD; compatibility must be rejected",
                )
            ],
            environment=_environment(args, tol),
        )
        _emit(_report_text(report), args.out)
        return 0 if report.passed else 1
    started = time.perf_counter()
    embedded = _load_embedded(args, tol)
    bridge = verify_bridge(embedded.moments, embedded.oracle, tol)
    checks = [
        _check("bridge_conditional_mean", bridge.max_mean_error <= BRIDGE_TOL,
               bridge.max_mean_error, BRIDGE_TOL),
        _check("bridge_conditional_covariance", bridge.cov_error <= BRIDGE_TOL,
               bridge.cov_error, BRIDGE_TOL),
        _check("bridge_compatibility_matches_assumption", bridge.flags_agree,
               bridge.compatibility.residual, bridge.compatibility.threshold),
    ]
    report = RunReport(
        suite=f"gaussian:bridge:{args.corpus or args.spec}",
        checks=checks,
        environment=_environment(args, tol),
        timing_seconds=round(time.perf_counter() - started, 3) if args.timing else None,
    )
    _emit(_report_text(report), args.out)
    return 0 if report.passed else 1


def cmd_spectrum(args, tol: Tolerance) -> int:
    del tol
    gamma = args.n / args.samples
    rows: list[list] = []
    minima, maxima = [], []
    for seed in range(args.seed, args.seed + args.seeds):
        lam_min, lam_max = spectrum_experiment(args.n, args.samples, seed, args.distribution)
        minima.append(lam_min)
        maxima.append(lam_max)
        rows.append([seed, lam_min, lam_max])
    rows.append(["mean", float(np.mean(minima)), float(np.mean(maxima))])
    rows.append(["limit", (1.0 - gamma**0.5) ** 2, (1.0 + gamma**0.5) ** 2])
    _emit(_table_text(["seed", "lambda_min", "lambda_max"], rows, args.format), args.out)
    return 0


def cmd_gen(args, tol: Tolerance) -> int:
    embedded = generate(args.corpus, args.seed, tol)
    _emit(json.dumps(joint_spec_dict(embedded), sort_keys=True, indent=2) + "\n", args.out)
    return 0


def _default_seed() -> int:
    raw = os.environ.get("CMEKIT_SEED")
    if raw is None:
        return DEFAULT_CORPUS_SEED
    try:
        return int(raw)
    except ValueError as exc:
        raise ValidationError(f"CMEKIT_SEED must be an integer, got {raw!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-rtol", type=float, default=None,
                        help="relative tolerance for rank/range decisions "
                             "(default: max(rows, cols) * machine epsilon)")
    common.add_argument("--tol-atol", type=float, default=1e-12,
                        help="absolute tolerance floor (default: 1e-12)")
    common.add_argument("--seed", type=int, default=None,
                        help="base seed (default: CMEKIT_SEED or 1729)")
    common.add_argument("--out", type=str, default=None,
                        help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="table output format (reports are always JSON)")
    common.add_argument("--timing", action="store_true",
                        help="include wall-clock timing in reports "
                             "(off by default to keep outputs byte-deterministic)")

    spec_source = argparse.ArgumentParser(add_help=False)
    spec_source.add_argument("spec", nargs="?", default=None, help="joint spec JSON file")
    spec_source.add_argument("--corpus", choices=CORPUS_NAMES, default=None,
                             help="use a built-in corpus entry instead of a spec file")

    parser = argparse.ArgumentParser(
        prog="cmekit",
        description="Verify conditional mean embedding formulas on exactly "
                    "computable finite joints.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("verify", parents=[common, spec_source],
                   help="run the full verification suite on a joint")

    conv = sub.add_parser("convergence", parents=[common, spec_source],
                          help="truncation-error sweep e(n)")
    conv.add_argument("--variant", choices=("centered", "uncentered"), default="centered")

    emp = sub.add_parser("empirical", parents=[common, spec_source],
                         help="empirical-estimator convergence study")
    emp.add_argument("--estimator", choices=("regularized", "truncated", "naive"),
                     default="regularized")
    emp.add_argument("--epsilon", type=float, default=None,
                     help="fixed ridge parameter (default: schedule J^-1/2)")
    emp.add_argument("--rank", type=int, default=None,
                     help="fixed truncation rank (default: schedule ceil(J^1/3))")
    emp.add_argument("--samples", "-J", type=str, default="100,400,1600",
                     help="comma-separated sample counts")
    emp.add_argument("--seeds", type=int, default=5, help="number of seeds (base..base+count-1)")

    gauss = sub.add_parser("gaussian", parents=[common, spec_source],
                           help="Gaussian conditioning: bridge checks or diagonal example")
    gauss.add_argument("--mode", choices=("bridge", "example", "incompatible"), default="bridge")
    gauss.add_argument("--n", type=int, default=8, help="size for --mode example")

    spec_cmd = sub.add_parser("spectrum", parents=[common],
                              help="extreme eigenvalues of the whitened sample covariance")
    spec_cmd.add_argument("--n", type=int, default=500, help="matrix dimension")
    spec_cmd.add_argument("--samples", "-J", type=int, default=2000, help="sample count J")
    spec_cmd.add_argument("--seeds", type=int, default=5, help="number of seeds")
    spec_cmd.add_argument("--distribution", choices=("gaussian", "rademacher"),
                          default="gaussian")

    gen = sub.add_parser("gen", parents=[common],
                         help="write a built-in corpus entry as a JointSpec JSON file")
    gen.add_argument("--corpus", choices=CORPUS_NAMES, required=True)
    return parser


_COMMANDS = {
    "verify": cmd_verify,
    "convergence": cmd_convergence,
    "empirical": cmd_empirical,
    "gaussian": cmd_gaussian,
    "spectrum": cmd_spectrum,
    "gen": cmd_gen,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.seed is None:
            args.seed = _default_seed()
        tol = Tolerance(rtol=args.tol_rtol, atol=args.tol_atol)
        return _COMMANDS[args.command](args, tol)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CmekitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())
