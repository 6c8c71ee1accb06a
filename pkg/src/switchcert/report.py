"""Full-pipeline analysis reports and their serialized forms.

``run_certify`` chains validation, the invariant measure, the requested
lift/template bounds, the side spectral checks, and the Monte Carlo
cross-check into one report with a final verdict.  The verdict claims
stability only when some lift-adjusted certified bound is below one and
its certificate re-verifies from stored parameters alone.
"""

from __future__ import annotations

import csv
import datetime
import io
from dataclasses import dataclass, field

from . import __version__
from .certify import (PatternSearchOptions, SubgradientOptions,
                      hierarchical_bound, verify_certificate)
from .description import SystemDescription
from .graph import invariant_measure, is_strongly_connected
from .montecarlo import ExponentEstimate, estimate_lyapunov_exponent
from .system import (averaged_matrix, mean_square_operator_radius,
                     spectral_radius)
from .util import canonical_json

CERTIFIED = "almost-surely-stable (certified)"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class AnalysisReport:
    """Everything one certification run established, in plain data."""

    digest: str
    validation: dict
    invariant: dict
    bounds: dict                      # template kind -> BoundReport
    verifications: tuple
    mean_square_radius: float
    averaged_spectral_radius: float
    monte_carlo: ExponentEstimate | None
    verdict: str
    evidence: tuple
    options: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict == CERTIFIED

    def best_bound(self):
        bounds = [br.best_bound for br in self.bounds.values()]
        return min(bounds) if bounds else None

    def to_dict(self) -> dict:
        return {
            "input_digest": self.digest,
            "validation": dict(self.validation),
            "invariant_measure": dict(self.invariant),
            "bounds": {kind: br.to_dict() for kind, br in self.bounds.items()},
            "verifications": [dict(v) for v in self.verifications],
            "mean_square_radius": self.mean_square_radius,
            "averaged_spectral_radius": self.averaged_spectral_radius,
            "monte_carlo": self.monte_carlo.to_dict() if self.monte_carlo else None,
            "best_bound": self.best_bound(),
            "verdict": self.verdict,
            "evidence": list(self.evidence),
            "options": dict(self.options),
        }


def run_certify(desc: SystemDescription, templates=("copositive",),
                steps=(1,), paths=(), horizon=None, trials=None, seed=None,
                subgradient: SubgradientOptions | None = None,
                pattern: PatternSearchOptions | None = None,
                monte_carlo: bool = True, tol: float = 1e-9) -> AnalysisReport:
    """Run the full certification pipeline on a parsed description.

    ``horizon``, ``trials`` and ``seed`` fall back to the description's
    ``defaults`` block, then to 10000/100/0.  The result is deterministic
    given the description and options.
    """
    defaults = desc.defaults or {}
    horizon = int(horizon if horizon is not None else defaults.get("horizon", 10_000))
    trials = int(trials if trials is not None else defaults.get("trials", 100))
    seed = int(seed if seed is not None else defaults.get("seed", 0))

    system = desc.system()
    g = system.graph
    validation = {
        "nodes": len(g.nodes),
        "edges": len(g.edges),
        "alphabet": g.alphabet_size,
        "dimension": system.dimension,
        "strongly_connected": is_strongly_connected(g),
    }
    evidence = [
        "validated: {nodes} nodes, {edges} edges, alphabet {alphabet}, "
        "dimension {dimension}".format(**validation)
    ]
    xi = invariant_measure(g)
    invariant = {node: xi.of(node) for node in g.nodes}

    bounds = {}
    verifications = []
    best = None
    for kind in templates:
        br = hierarchical_bound(system, kind, steps=steps, paths=paths,
                                subgradient=subgradient, pattern=pattern)
        bounds[kind] = br
        for entry in br.entries:
            ok, margin = verify_certificate(system, entry.certificate, tol=tol)
            verifications.append({
                "template": kind,
                "lift": f"{entry.lift_kind}-{entry.lift_param}",
                "raw_rho": entry.raw_rho,
                "adjusted_rho": entry.adjusted_rho,
                "verified": bool(ok),
                "margin": margin,
            })
            if ok and (best is None or entry.adjusted_rho < best[0]):
                best = (entry.adjusted_rho, kind, entry)
        evidence.append(
            f"{kind} template: best lift-adjusted bound {br.best_bound:.6f} "
            f"on {br.best.lift_kind}-{br.best.lift_param} lift"
        )

    ms_radius = mean_square_operator_radius(system)
    avg_radius = spectral_radius(averaged_matrix(system, xi))
    evidence.append(f"mean-square radius {ms_radius:.6f}; "
                    f"averaged-matrix spectral radius {avg_radius:.6f}")

    estimate = None
    if monte_carlo:
        estimate = estimate_lyapunov_exponent(system, xi, T=horizon, N=trials,
                                              seed=seed, keep_trajectories=8)
        evidence.append(
            f"Monte Carlo: lambda = {estimate.mean:.6f} "
            f"+/- {estimate.half_width:.6f} (95% CI over {trials} trials, "
            f"horizon {horizon}); growth factor {estimate.radius:.6f}"
        )

    if best is not None and best[0] < 1.0:
        verdict = CERTIFIED
        evidence.append(
            f"verdict: certified almost-sure stability; {best[1]} certificate "
            f"on {best[2].lift_kind}-{best[2].lift_param} lift re-verified "
            f"with lift-adjusted bound {best[0]:.6f} < 1"
        )
    else:
        verdict = INCONCLUSIVE
        evidence.append("verdict: no verified certificate below one; "
                        "stability not decided")

    return AnalysisReport(
        digest=desc.digest,
        validation=validation,
        invariant=invariant,
        bounds=bounds,
        verifications=tuple(verifications),
        mean_square_radius=ms_radius,
        averaged_spectral_radius=avg_radius,
        monte_carlo=estimate,
        verdict=verdict,
        evidence=tuple(evidence),
        options={
            "templates": list(templates),
            "steps": [int(k) for k in steps],
            "paths": [int(r) for r in paths],
            "horizon": horizon,
            "trials": trials,
            "seed": seed,
        },
    )


def exit_code(report: AnalysisReport) -> int:
    """0 when certified stable, 2 when inconclusive (1 is reserved for
    errors raised before a report exists)."""
    return 0 if report.certified else 2


def bounds_rows(report: AnalysisReport):
    """Flat (lift, template, raw, adjusted) rows of the bounds tables."""
    rows = []
    for kind, br in report.bounds.items():
        for entry in br.entries:
            rows.append((f"{entry.lift_kind}-{entry.lift_param}", kind,
                         entry.raw_rho, entry.adjusted_rho))
    return rows


def emit_report(report: AnalysisReport, format: str = "json",
                no_meta: bool = False) -> bytes:
    """Serialize a report; ``json`` is canonical and lossless, ``csv`` is
    the bounds table, ``text`` is a human summary.  Metadata (timestamp,
    generator version) is omitted under ``no_meta`` so equal runs emit
    byte-identical output."""
    if format == "json":
        data = report.to_dict()
        if not no_meta:
            data["meta"] = {
                "generator": f"switchcert {__version__}",
                "created": datetime.datetime.now(datetime.timezone.utc)
                .isoformat(timespec="seconds"),
            }
        return canonical_json(data)
    if format == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["lift", "template", "raw_rho", "adjusted_rho"])
        for lift, kind, raw, adjusted in bounds_rows(report):
            writer.writerow([lift, kind, repr(raw), repr(adjusted)])
        return out.getvalue().encode()
    if format == "text":
        lines = [f"input digest: {report.digest}"]
        lines.append("invariant measure: " + ", ".join(
            f"{node}={w:.6f}" for node, w in report.invariant.items()))
        if bounds_rows(report):
            lines.append("bounds (lift, template, raw, adjusted):")
            for lift, kind, raw, adjusted in bounds_rows(report):
                lines.append(f"  {lift:<8} {kind:<10} {raw:.6f}  {adjusted:.6f}")
        lines.append(f"mean-square radius: {report.mean_square_radius:.6f}")
        lines.append(f"averaged-matrix spectral radius: "
                     f"{report.averaged_spectral_radius:.6f}")
        if report.monte_carlo is not None:
            est = report.monte_carlo
            lines.append(f"Monte Carlo: lambda {est.mean:.6f} "
                         f"+/- {est.half_width:.6f}, growth {est.radius:.6f}")
        lines.append(f"verdict: {report.verdict}")
        return ("\n".join(lines) + "\n").encode()
    raise ValueError(f"unknown format {format!r}")
