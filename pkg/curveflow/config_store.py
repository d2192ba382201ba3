"""Scenario loading, validation and overrides.

A scenario is a nested mapping ``section -> key -> value`` read from INI,
YAML or JSON. File content is deep-merged over :data:`DEFAULT_SCENARIO`,
validated, and turned into a :class:`ScenarioConfig`.
"""

from __future__ import annotations

import configparser
import copy
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

try:
    import yaml  # type: ignore
except Exception:  # pragma: no cover - optional dependency
    yaml = None

from .core.errors import InvalidCurveError, ScenarioError
from .core.models import BACKENDS, FLOW_LAWS, SPATIAL_SCHEMES, STEPPERS, StepperConfig
from .initial_curves import parse_curve_id

SCENARIO_CONFIG_VERSION = 1
OUT_DIR_ENV = "CURVEFLOW_OUT_DIR"
DEFAULT_OUT_DIR = "out"

DEFAULT_SCENARIO: Dict[str, Dict[str, Any]] = {
    "scenario": {"name": "scenario", "law": "gapf", "backend": "polar"},
    "curve": {"initial": "circle(1)", "file": "", "n": 256, "m": 256, "scheme": "spectral"},
    "solver": {
        "stepper": "rk4",
        "cfl": 0.4,
        "dt_max": 1e-2,
        "t_end": 10.0,
        "record_count": 200,
        "tol_circle": 1e-4,
        "tol_convex": None,
        "r_floor": None,
        "kappa_ceiling": None,
    },
    "outputs": {"csv": "timeseries.csv", "frames": "", "report": "report.json", "metrics": ""},
    "analysis": {"bounds": True, "decay_field": "qs2", "decay_window": "", "compare": False},
}

# keys whose default is None hold optional positive floats
_OPTIONAL_FLOATS = {"tol_convex", "r_floor", "kappa_ceiling"}


def _is_yaml_path(path: Path) -> bool:
    return path.suffix.lower() in {".yaml", ".yml"}


def _is_ini_path(path: Path) -> bool:
    return path.suffix.lower() in {".ini", ".cfg"}


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged: Dict[str, Any] = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(merged.get(key), dict) and isinstance(value, dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _atomic_write(path: Path, payload: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    try:
        with tmp_path.open("w", encoding="utf-8", newline="") as handle:
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_path, path)
    finally:
        if tmp_path.exists():
            tmp_path.unlink()


def _read_raw(path: Path) -> Dict[str, Any]:
    text = path.read_text(encoding="utf-8")
    if _is_ini_path(path):
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ScenarioError(f"Archivo INI inválido: {exc}") from exc
        return {section: dict(parser.items(section)) for section in parser.sections()}
    if _is_yaml_path(path):
        if yaml is None:
            raise ScenarioError("Formato YAML no soportado: faltan dependencias")
        loaded = yaml.safe_load(text)
    else:
        try:
            loaded = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"JSON inválido: {exc}") from exc
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ScenarioError("El archivo de escenario debe ser un objeto")
    return loaded


def _coerce(section: str, key: str, value: Any, default: Any) -> Any:
    label = f"{section}.{key}"
    if key in _OPTIONAL_FLOATS:
        if value is None or (isinstance(value, str) and value.strip().lower() in {"", "auto", "none"}):
            return None
        default = 0.0
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in {"1", "true", "yes", "si", "sí", "on"}:
            return True
        if text in {"0", "false", "no", "off"}:
            return False
        raise ScenarioError(f"{label} debe ser booleano")
    if isinstance(default, int):
        if isinstance(value, bool):
            raise ScenarioError(f"{label} debe ser entero")
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise ScenarioError(f"{label} debe ser entero") from None
        if number != int(number):
            raise ScenarioError(f"{label} debe ser entero")
        return int(number)
    if isinstance(default, float):
        if isinstance(value, bool):
            raise ScenarioError(f"{label} debe ser numérico")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ScenarioError(f"{label} debe ser numérico") from None
    if value is None:
        return ""
    if not isinstance(value, (str, int, float)):
        raise ScenarioError(f"{label} debe ser string")
    return str(value).strip()


def normalize_scenario(raw: Mapping[str, Any]) -> Dict[str, Dict[str, Any]]:
    """Merge over the defaults and coerce every value to the type of its default."""

    if not isinstance(raw, Mapping):
        raise ScenarioError("El escenario debe ser un objeto")
    unknown_sections = sorted(set(raw) - set(DEFAULT_SCENARIO))
    if unknown_sections:
        raise ScenarioError(f"Secciones desconocidas: {', '.join(unknown_sections)}")
    for section, values in raw.items():
        if not isinstance(values, Mapping):
            raise ScenarioError(f"La sección [{section}] debe ser un objeto")
        unknown_keys = sorted(set(values) - set(DEFAULT_SCENARIO[section]))
        if unknown_keys:
            raise ScenarioError(f"Claves desconocidas en [{section}]: {', '.join(unknown_keys)}")

    merged = _deep_merge(DEFAULT_SCENARIO, {section: dict(values) for section, values in raw.items()})
    return {
        section: {key: _coerce(section, key, value, DEFAULT_SCENARIO[section][key]) for key, value in values.items()}
        for section, values in merged.items()
    }


def _parse_window(text: str) -> Optional[Tuple[float, float]]:
    text = text.strip().lower()
    if text in {"", "auto"}:
        return None
    parts = [part.strip() for part in text.split(",")]
    try:
        start, end = (float(part) for part in parts)
    except ValueError:
        raise ScenarioError("analysis.decay_window debe ser 'auto' o 't0, t1'") from None
    if not end > start:
        raise ScenarioError("analysis.decay_window requiere t1 > t0")
    return start, end


def validate_scenario_schema(scenario: Mapping[str, Any]) -> None:
    """Check a normalized scenario; raises :class:`ScenarioError` with the failing key."""

    head, curve, solver = scenario["scenario"], scenario["curve"], scenario["solver"]
    analysis = scenario["analysis"]
    if not head["name"]:
        raise ScenarioError("scenario.name debe ser string no vacío")
    if head["law"] not in FLOW_LAWS:
        raise ScenarioError(f"scenario.law debe ser uno de {', '.join(FLOW_LAWS)}")
    if head["backend"] not in BACKENDS:
        raise ScenarioError(f"scenario.backend debe ser uno de {', '.join(BACKENDS)}")
    if curve["scheme"] not in SPATIAL_SCHEMES:
        raise ScenarioError(f"curve.scheme debe ser uno de {', '.join(SPATIAL_SCHEMES)}")
    if solver["stepper"] not in STEPPERS:
        raise ScenarioError(f"solver.stepper debe ser uno de {', '.join(STEPPERS)}")
    if not curve["file"]:
        try:
            builtin = parse_curve_id(curve["initial"])
        except InvalidCurveError as exc:
            raise ScenarioError(f"curve.initial inválida: {exc}") from exc
        if builtin.backend == "marker" and head["backend"] != "marker":
            raise ScenarioError(f"curve.initial {builtin.name} requiere scenario.backend = marker")
    size_key = "n" if head["backend"] == "polar" else "m"
    if curve[size_key] < 8:
        raise ScenarioError(f"curve.{size_key} es demasiado chico")
    if analysis["decay_field"] not in {"q2", "qs2"}:
        raise ScenarioError("analysis.decay_field debe ser q2 o qs2")
    _parse_window(analysis["decay_window"])
    if analysis["compare"] and (head["backend"] != "polar" or head["law"] != "gapf"):
        raise ScenarioError("analysis.compare requiere backend polar y law gapf")


@dataclass(frozen=True)
class OutputsConfig:
    csv: str = "timeseries.csv"
    frames: str = ""
    report: str = "report.json"
    metrics: str = ""


@dataclass(frozen=True)
class AnalysisConfig:
    bounds: bool = True
    decay_field: str = "qs2"
    decay_window: Optional[Tuple[float, float]] = None
    compare: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    law: str
    backend: str
    initial: str
    curve_file: Optional[Path]
    size: int
    scheme: str
    solver: StepperConfig
    outputs: OutputsConfig
    analysis: AnalysisConfig

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["curve_file"] = str(self.curve_file) if self.curve_file else None
        return payload


def build_scenario_config(raw: Mapping[str, Any], base_dir: Optional[Path] = None) -> ScenarioConfig:
    """Normalize, validate and freeze a raw scenario mapping."""

    scenario = normalize_scenario(raw)
    validate_scenario_schema(scenario)
    head, curve, solver = scenario["scenario"], scenario["curve"], scenario["solver"]
    outputs, analysis = scenario["outputs"], scenario["analysis"]

    try:
        stepper = StepperConfig(**solver)
    except ValueError as exc:
        raise ScenarioError(f"[solver] inválido: {exc}") from exc

    curve_file = None
    if curve["file"]:
        curve_file = Path(curve["file"])
        if not curve_file.is_absolute() and base_dir is not None:
            curve_file = base_dir / curve_file

    return ScenarioConfig(
        name=head["name"],
        law=head["law"],
        backend=head["backend"],
        initial=curve["initial"],
        curve_file=curve_file,
        size=curve["n"] if head["backend"] == "polar" else curve["m"],
        scheme=curve["scheme"],
        solver=stepper,
        outputs=OutputsConfig(**outputs),
        analysis=AnalysisConfig(
            bounds=analysis["bounds"],
            decay_field=analysis["decay_field"],
            decay_window=_parse_window(analysis["decay_window"]),
            compare=analysis["compare"],
        ),
    )


def apply_overrides(raw: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Set ``section.key`` values, e.g. ``{"solver.cfl": "0.3"}``, on a copy of ``raw``."""

    patched: Dict[str, Any] = {section: dict(values) for section, values in (raw or {}).items()}
    for dotted, value in overrides.items():
        section, _, key = dotted.partition(".")
        if not key or section not in DEFAULT_SCENARIO or key not in DEFAULT_SCENARIO[section]:
            raise ScenarioError(f"Parámetro desconocido: {dotted}")
        patched.setdefault(section, {})[key] = value
    return patched


def read_scenario_file(path: Path) -> Dict[str, Any]:
    try:
        return _read_raw(path)
    except OSError as exc:
        raise ScenarioError(f"No se pudo leer el escenario {path}: {exc}") from exc


def load_scenario(path: Path, overrides: Optional[Mapping[str, Any]] = None) -> ScenarioConfig:
    path = Path(path)
    raw = read_scenario_file(path)
    if overrides:
        raw = apply_overrides(raw, overrides)
    return build_scenario_config(raw, base_dir=path.parent)


def resolve_out_dir(cli_value: Optional[str] = None) -> Path:
    return Path(cli_value or os.getenv(OUT_DIR_ENV) or DEFAULT_OUT_DIR)


def ensure_writable(directory: Path) -> Path:
    """Create ``directory`` and prove it accepts files before any run starts."""

    directory = Path(directory)
    probe = directory / ".curveflow-write-probe"
    try:
        directory.mkdir(parents=True, exist_ok=True)
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise ScenarioError(f"No se puede escribir en {directory}: {exc}") from exc
    return directory


__all__ = [
    "DEFAULT_SCENARIO",
    "OUT_DIR_ENV",
    "AnalysisConfig",
    "OutputsConfig",
    "ScenarioConfig",
    "apply_overrides",
    "build_scenario_config",
    "ensure_writable",
    "load_scenario",
    "normalize_scenario",
    "read_scenario_file",
    "resolve_out_dir",
    "validate_scenario_schema",
]
