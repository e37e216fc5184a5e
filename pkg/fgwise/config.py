"""
Run configuration module for fgwise.

This module provides the JSON run configuration: validation against the
shipped schema (fgwise/schemas/run_config.schema.json) that reports every
violated constraint at once, the checks that relate fields to each other,
serialization back to a dictionary, a canonical hash, and construction of
the chart and boundary data a run needs.

Only ``n`` is required. A Fourier mode is {"component": [i, j],
"wavenumbers": [k1, ..., kn], "amplitude": a, "phase": p}.
"""

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from jsonschema import Draft202012Validator, ValidationError

from fgwise.data_sources.fourier import FourierMode, build_boundary_metric, build_symmetric_field
from fgwise.fg_recursion import BoundaryData, Tolerances
from fgwise.grid_geometry import Chart, tt_part
from fgwise.verify import StencilSpec

SCHEMA_PATH = Path(__file__).resolve().parent / "schemas" / "run_config.schema.json"
SCHEMA: Dict[str, Any] = json.loads(SCHEMA_PATH.read_text())
_VALIDATOR = Draft202012Validator(SCHEMA)

MODES = tuple(SCHEMA["properties"]["mode"]["enum"])
DEFAULT_S_SAMPLES = tuple(SCHEMA["properties"]["s_samples"]["default"])
_TOLERANCE_KEYS = ("compatibility", "parity", "zero_coefficient")


class ConfigError(ValueError):
    """Configuration violates one or more constraints."""

    def __init__(self, errors: List[str]):
        self.errors = errors
        super().__init__("Invalid configuration:\n  - " + "\n  - ".join(errors))


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration."""

    n: int
    order: int
    resolution: Tuple[int, ...]
    period: Tuple[float, ...]
    g0_modes: Tuple[FourierMode, ...] = ()
    gn_modes: Tuple[FourierMode, ...] = ()
    mode: str = "expand"
    s_samples: Tuple[float, ...] = DEFAULT_S_SAMPLES
    tolerances: Tolerances = field(default_factory=Tolerances)
    tol_scale: float = 1.0
    output_dir: str = "fgwise-out"
    tt_project: bool = False
    fix_even_divergence: bool = True
    oracle_s: float = 0.05
    random_checks: int = 0
    seed: int = 0
    top_modes: int = 5

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "order": self.order,
            "resolution": list(self.resolution),
            "period": list(self.period),
            "g0_modes": [mode.to_dict() for mode in self.g0_modes],
            "gn_modes": [mode.to_dict() for mode in self.gn_modes],
            "mode": self.mode,
            "s_samples": list(self.s_samples),
            "tolerances": {
                "compatibility": self.tolerances.compatibility,
                "parity": self.tolerances.parity,
                "zero_coefficient": self.tolerances.zero_coefficient,
            },
            "tol_scale": self.tol_scale,
            "output_dir": self.output_dir,
            "tt_project": self.tt_project,
            "fix_even_divergence": self.fix_even_divergence,
            "oracle_s": self.oracle_s,
            "random_checks": self.random_checks,
            "seed": self.seed,
            "top_modes": self.top_modes,
        }

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form, independent of the output directory."""
        data = self.to_dict()
        data.pop("output_dir")
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()

    def with_overrides(
        self, mode: Optional[str] = None, output_dir: Optional[str] = None, tol_scale: Optional[float] = None, seed: Optional[int] = None
    ) -> "RunConfig":
        """Apply command-line overrides and revalidate."""
        data = self.to_dict()
        for key, value in (("mode", mode), ("output_dir", output_dir), ("tol_scale", tol_scale), ("seed", seed)):
            if value is not None:
                data[key] = value
        return config_from_dict(data)

    def chart(self) -> Chart:
        return Chart(self.n, self.resolution, self.period)

    def scaled_tolerances(self) -> Tolerances:
        return self.tolerances.scaled(self.tol_scale)

    def boundary_data(self) -> BoundaryData:
        """Build g0 and gn from the configured modes."""
        chart = self.chart()
        g0 = build_boundary_metric(chart, self.g0_modes)
        gn = build_symmetric_field(chart, self.gn_modes)
        if self.tt_project:
            gn = tt_part(g0, gn)
        return BoundaryData(g0, gn, self.order, self.scaled_tolerances())


def _schema_message(error: ValidationError) -> str:
    location = "".join(f"[{part}]" if isinstance(part, int) else f".{part}" for part in error.absolute_path).lstrip(".")
    return f"'{location}': {error.message}" if location else error.message


def _mode_errors(raw: List[Dict[str, Any]], name: str, n: int) -> List[str]:
    errors = []
    for index, entry in enumerate(raw):
        label = f"{name}[{index}]"
        if not all(c <= n for c in entry["component"]):
            errors.append(f"{label}.component {entry['component']} outside 1..{n}")
        if len(entry["wavenumbers"]) != n:
            errors.append(f"{label}.wavenumbers needs {n} entries, got {len(entry['wavenumbers'])}")
    return errors


def _to_modes(raw: List[Dict[str, Any]]) -> Tuple[FourierMode, ...]:
    return tuple(
        FourierMode(
            (int(entry["component"][0]), int(entry["component"][1])),
            tuple(int(k) for k in entry["wavenumbers"]),
            float(entry["amplitude"]),
            float(entry.get("phase", 0.0)),
        )
        for entry in raw
    )


def _symmetry_errors(modes: Tuple[FourierMode, ...], name: str) -> List[str]:
    """Off-diagonal modes must appear on both (i, j) and (j, i) with identical parameters."""
    errors = []
    signatures: Dict[Tuple[int, int], List[Tuple[Tuple[int, ...], float, float]]] = {}
    for mode in modes:
        signatures.setdefault(mode.component, []).append((mode.wavenumbers, mode.amplitude, mode.phase))
    for (i, j), entries in sorted(signatures.items()):
        if i < j and sorted(entries) != sorted(signatures.get((j, i), [])):
            errors.append(f"'{name}' is not symmetric: modes on component ({i}, {j}) differ from ({j}, {i})")
        if i > j and (j, i) not in signatures:
            errors.append(f"'{name}' is not symmetric: modes on component ({i}, {j}) differ from ({j}, {i})")
    return errors


def config_from_dict(data: Dict[str, Any]) -> RunConfig:
    """
    Validate a configuration dictionary.

    Schema violations are collected first. Checks relating fields to each
    other run on every field the schema accepted, so independent problems
    are reported together.

    Raises:
        ConfigError: Listing every violated constraint.
    """
    schema_errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: [str(part) for part in e.absolute_path])
    errors = [_schema_message(error) for error in schema_errors]
    rejected = {str(error.absolute_path[0]) for error in schema_errors if error.absolute_path}
    if "n" not in data:
        rejected.add("n")

    def value(key: str, default: Any) -> Any:
        return default if key in rejected else data.get(key, default)

    n: Optional[int] = None if "n" in rejected else int(data["n"])
    mode = value("mode", "expand")
    order = int(value("order", n + 2 if n is not None else 0))
    if n is not None and "order" not in rejected and order < n and mode != "roots":
        errors.append(f"'order' ({order}) must be at least n ({n}) in {mode} mode")
    if n is not None and mode == "obstruction" and n % 2 == 1:
        errors.append(f"obstruction mode needs an even n, got {n}")

    resolution: Tuple[int, ...] = ()
    period: Tuple[float, ...] = ()
    if n is not None:
        raw_resolution = value("resolution", [1] * n)
        if len(raw_resolution) != n:
            errors.append(f"'resolution' needs {n} entries, got {len(raw_resolution)}")
        else:
            resolution = tuple(int(r) for r in raw_resolution)
        raw_period = value("period", [2.0 * np.pi] * n)
        if len(raw_period) != n:
            errors.append(f"'period' needs {n} entries, got {len(raw_period)}")
        else:
            period = tuple(float(p) for p in raw_period)

    modes: Dict[str, Tuple[FourierMode, ...]] = {}
    for name in ("g0_modes", "gn_modes"):
        raw_modes = value(name, [])
        mode_errors = _mode_errors(raw_modes, name, n) if n is not None else []
        errors.extend(mode_errors)
        modes[name] = () if mode_errors else _to_modes(raw_modes)
        errors.extend(_symmetry_errors(modes[name], name))
        for entry in modes[name] if resolution else ():
            for axis, k in enumerate(entry.wavenumbers):
                if k and 2 * abs(k) >= resolution[axis]:
                    errors.append(f"'{name}' wavenumber {k} is not resolved on axis {axis + 1} ({resolution[axis]} points)")

    s_samples = tuple(float(s) for s in value("s_samples", list(DEFAULT_S_SAMPLES)))
    if any(b >= a for a, b in zip(s_samples, s_samples[1:])):
        errors.append("'s_samples' must be strictly decreasing")

    oracle_s = float(value("oracle_s", 0.05))
    if "oracle_s" not in rejected and not StencilSpec().fits(oracle_s):
        errors.append(f"'oracle_s' ({oracle_s}) puts the oracle stencil outside (0, 1)")

    if errors:
        raise ConfigError(errors)
    assert n is not None
    raw_tolerances = data.get("tolerances", {})
    return RunConfig(
        n=n,
        order=order,
        resolution=resolution,
        period=period,
        g0_modes=modes["g0_modes"],
        gn_modes=modes["gn_modes"],
        mode=mode,
        s_samples=s_samples,
        tolerances=replace(Tolerances(), **{key: float(raw_tolerances[key]) for key in _TOLERANCE_KEYS if key in raw_tolerances}),
        tol_scale=float(data.get("tol_scale", 1.0)),
        output_dir=data.get("output_dir", "fgwise-out"),
        tt_project=data.get("tt_project", False),
        fix_even_divergence=data.get("fix_even_divergence", True),
        oracle_s=oracle_s,
        random_checks=int(data.get("random_checks", 0)),
        seed=int(data.get("seed", 0)),
        top_modes=int(data.get("top_modes", 5)),
    )


def parse_config(path: Union[str, Path]) -> RunConfig:
    """
    Read and validate a JSON run configuration.

    Raises:
        ConfigError: If the file is missing, not JSON, or violates constraints.
    """
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError([f"config file not found: {config_path}"])
    try:
        data = json.loads(config_path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError([f"config file is not valid JSON: {e}"]) from e
    if not isinstance(data, dict):
        raise ConfigError(["config must be a JSON object"])
    return config_from_dict(data)
