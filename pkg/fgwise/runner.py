"""
Run orchestration module for fgwise.

This module provides the batch driver behind the command line: it builds
boundary data from a validated configuration, runs the requested mode,
writes field dumps, decay tables and a JSON report into the output
directory, and maps engine failures to exit codes.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import sympy

from fgwise.config import ConfigError, RunConfig
from fgwise.fg_recursion import BoundaryData, ExpansionResult, FeffermanGrahamExpander, ParityError, obstruction_tensor, validate_boundary_data
from fgwise.grid_geometry import SpatialField, trace
from fgwise.indicial import LAMBDA, SolvabilityError, gauge_propagation_roots, gauged_indicial, indicial_roots, ricci_indicial
from fgwise.utils.field_io import dump_field, top_fourier_modes
from fgwise.verify import VerificationError, frame_vs_oracle, random_block_metric, residual_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_SOLVABILITY = 3
EXIT_VERIFICATION = 4

ORACLE_TOLERANCE = 1e-6
# Fitted decay must reach N + margin
DECAY_MARGIN = 0.5


@dataclass(frozen=True)
class RunReport:
    """
    Outcome of one run.

    Attributes:
        config_hash: Hash of the configuration that produced the report.
        mode: Mode that ran.
        status: ``ok``, ``solvability_violation``, ``parity_violation`` or ``verification_failure``.
        exit_code: Process exit code for the status.
        payload: Report body as written to ``report.json`` (without the hash).
        report_hash: SHA-256 of the canonical report body.
        output_dir: Directory holding the report and its files.
    """

    config_hash: str
    mode: str
    status: str
    exit_code: int
    payload: Dict[str, Any]
    report_hash: str
    output_dir: Path

    @property
    def error(self) -> Optional[Dict[str, Any]]:
        return self.payload.get("error")

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.payload, report_hash=self.report_hash)


def _plain_number(value: Any) -> Any:
    """JSON-friendly form of an exact number: int when integral, else a fraction string."""
    rational = Fraction(str(value))
    return rational.numerator if rational.denominator == 1 else str(rational)


def roots_table(n: int) -> Dict[str, Any]:
    """
    Indicial data for one dimension.

    Returns:
        Gauged-operator roots and determinant, the factorized Ricci-indicial
        entries with their generic and root ranks, and the gauge-propagation roots.
    """
    gauged = gauged_indicial(n)
    ricci = ricci_indicial(n)
    roots = indicial_roots(n)
    entries = {f"{i + 1},{j + 1}": str(sympy.factor(ricci.matrix[i, j])) for i in range(ricci.rows) for j in range(ricci.cols) if ricci.matrix[i, j] != 0}
    return {
        "n": n,
        "gauged_roots": [_plain_number(root) for root in roots],
        "gauged_determinant": str(sympy.factor(gauged.det())),
        "ricci_indicial": {
            "entries": entries,
            "generic_rank": int(ricci.matrix.rank()),
            "rank_at_roots": {str(_plain_number(root)): ricci.rank_at(root) for root in sorted(set(roots), key=float)},
        },
        "gauge_propagation_roots": [_plain_number(root) for root in gauge_propagation_roots(n)],
        "variable": str(LAMBDA),
    }


def _field_summary(field: SpatialField, config: RunConfig, g0_trace: Optional[SpatialField] = None) -> Dict[str, Any]:
    summary: Dict[str, Any] = {"sup_norm": field.sup_norm(), "top_modes": top_fourier_modes(field, config.top_modes)}
    if g0_trace is not None:
        summary["trace_norm"] = g0_trace.sup_norm()
    return summary


def _write_report(output_dir: Path, payload: Dict[str, Any]) -> str:
    body = json.dumps(payload, indent=2, sort_keys=True)
    report_hash = hashlib.sha256(body.encode()).hexdigest()
    document = dict(payload, report_hash=report_hash)
    (output_dir / "report.json").write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
    return report_hash


def _boundary_data(config: RunConfig) -> BoundaryData:
    try:
        data = config.boundary_data()
    except ValueError as e:
        raise ConfigError([f"boundary data: {e}"]) from e
    problems = [
        f"boundary data fails the {defect.name} check ({defect.value:.3e} > {defect.tolerance:.3e})"
        for defect in validate_boundary_data(data)
        if not defect.passed and defect.name != "divergence"
    ]
    if problems:
        raise ConfigError(problems)
    return data


def _expansion_section(result: ExpansionResult, config: RunConfig, output_dir: Optional[Path]) -> Dict[str, Any]:
    g0 = result.data.g0
    coefficients: List[Dict[str, Any]] = []
    for (i, m), coeff in result.coeffs.items():
        entry = {"order": i, "log_power": m, **_field_summary(coeff, config, trace(g0, coeff))}
        if output_dir is not None:
            data_path, _ = dump_field(coeff, output_dir / "coefficients" / f"{i}_{m}", {"order": i, "log_power": m})
            entry["file"] = data_path.relative_to(output_dir).as_posix()
        coefficients.append(entry)
    section: Dict[str, Any] = {
        "coefficients": coefficients,
        "max_coefficient_norm": max((c.sup_norm() for c in result.coeffs.values()), default=0.0),
        "final_residual_norm": result.final_residual_norm,
        "diagnostics": [
            {
                "order": d.order,
                "log_level": d.log_level,
                "action": d.action,
                "forcing_norms": list(d.forcing_norms),
                "compatibility_defects": dict(sorted(d.compatibility_defects.items())),
            }
            for d in result.diagnostics
        ],
        "divergence_correction_norm": result.divergence_correction.sup_norm() if result.divergence_correction is not None else None,
    }
    if result.divergence_correction is not None:
        effective = {"correction_norm": result.divergence_correction.sup_norm(), **_field_summary(result.effective_gn, config)}
        if output_dir is not None:
            data_path, _ = dump_field(result.effective_gn, output_dir / "coefficients" / "gn_effective", {"order": result.n, "corrected": True})
            effective["file"] = data_path.relative_to(output_dir).as_posix()
        section["effective_gn"] = effective
    if result.obstruction is not None:
        section["obstruction"] = _field_summary(result.obstruction, config)
    return section


def _run_expand(config: RunConfig, output_dir: Path, section: Dict[str, Any]) -> None:
    data = _boundary_data(config)
    result = FeffermanGrahamExpander(fix_even_divergence=config.fix_even_divergence).expand(data)
    section.update(_expansion_section(result, config, output_dir))


def _run_obstruction(config: RunConfig, output_dir: Path, section: Dict[str, Any]) -> None:
    data = _boundary_data(config)
    obstruction = obstruction_tensor(data.g0, data.n, data.tolerances)
    data_path, _ = dump_field(obstruction, output_dir / "obstruction", {"n": data.n})
    section["obstruction"] = {"file": data_path.name, "norm": obstruction.sup_norm(), **_field_summary(obstruction, config)}


def _run_verify(config: RunConfig, output_dir: Path, section: Dict[str, Any]) -> None:
    data = _boundary_data(config)
    result = FeffermanGrahamExpander(fix_even_divergence=config.fix_even_divergence).expand(data)
    section.update(_expansion_section(result, config, None))

    decay = residual_report(result, config.s_samples)
    decay.write_csv(output_dir / "decay.csv")
    section["decay"] = {
        "file": "decay.csv",
        "fitted_slope": decay.fitted_slope,
        "exact_zero": decay.exact_zero,
        "log_correction_used": decay.log_correction_used,
        "solved_order_residual": decay.solved_order_residual,
        "threshold": config.order + DECAY_MARGIN,
    }

    oracle = frame_vs_oracle(result.metric, config.oracle_s, tol=ORACLE_TOLERANCE)
    section["oracle"] = {"s": config.oracle_s, "max_relative_difference": oracle.max_relative_difference, "passed": oracle.passed}

    rng = np.random.default_rng(config.seed)
    chart = config.chart()
    varying_axes = tuple(axis for axis, points in enumerate(chart.resolution) if points >= 3)
    random_differences = []
    for _ in range(config.random_checks):
        metric = random_block_metric(chart, rng, varying_axes=varying_axes)
        random_differences.append(frame_vs_oracle(metric, config.oracle_s, tol=ORACLE_TOLERANCE).max_relative_difference)
    section["random_checks"] = {"seed": config.seed, "max_relative_differences": random_differences}

    # checks run in order; the first failure is reported
    if not decay.exact_zero and decay.fitted_slope is not None and decay.fitted_slope < config.order + DECAY_MARGIN:
        raise VerificationError("decay_slope", decay.fitted_slope, config.order + DECAY_MARGIN)
    if not oracle.passed:
        raise VerificationError("oracle", oracle.max_relative_difference, ORACLE_TOLERANCE)
    for difference in random_differences:
        if difference > ORACLE_TOLERANCE:
            raise VerificationError("random_oracle", difference, ORACLE_TOLERANCE)


_MODES: Dict[str, Callable[[RunConfig, Path, Dict[str, Any]], None]] = {"expand": _run_expand, "obstruction": _run_obstruction, "verify": _run_verify}


def run(config: RunConfig) -> RunReport:
    """
    Execute a configured run and write its report.

    Engine failures are caught and recorded in the report with the first
    violated order and defect; invalid boundary data is a configuration error.

    Args:
        config: Validated configuration.

    Returns:
        The run report.

    Raises:
        ConfigError: If the boundary data built from the configuration is unusable.
    """
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f"Running {config.mode} for n={config.n}, N={config.order} into {output_dir}")

    payload: Dict[str, Any] = {"config_hash": config.config_hash(), "config": config.to_dict(), "mode": config.mode, "error": None}
    status, exit_code = "ok", EXIT_OK
    partial: Dict[str, Any] = {}
    try:
        if config.mode == "roots":
            partial["roots"] = roots_table(config.n)
            (output_dir / "roots.json").write_text(json.dumps(partial["roots"], indent=2, sort_keys=True) + "\n")
        else:
            _MODES[config.mode](config, output_dir, partial)
    except SolvabilityError as e:
        status, exit_code = "solvability_violation", EXIT_SOLVABILITY
        payload["error"] = {"type": "solvability", "order": _plain_number(e.order), "defect": e.defect, "kind": e.kind, "message": str(e)}
    except ParityError as e:
        status, exit_code = "parity_violation", EXIT_SOLVABILITY
        payload["error"] = {"type": "parity", "order": e.order, "defect": e.defect, "message": str(e)}
    except VerificationError as e:
        status, exit_code = "verification_failure", EXIT_VERIFICATION
        payload["error"] = {"type": "verification", "check": e.check, "value": e.value, "threshold": e.threshold, "message": str(e)}
    if payload["error"] is not None:
        logger.warning(payload["error"]["message"])
    payload.update(partial)
    payload["status"] = status
    payload["exit_code"] = exit_code
    report_hash = _write_report(output_dir, payload)
    return RunReport(config.config_hash(), config.mode, status, exit_code, payload, report_hash, output_dir)
