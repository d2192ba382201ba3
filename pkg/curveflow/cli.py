"""Command line entry point: ``run``, ``verify`` and ``sweep``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .config_store import load_scenario, resolve_out_dir
from .core.errors import ScenarioError
from .observability import log_event, set_log_level
from .outputs import write_report
from .runtime.runner import run_scenario, sweep
from .runtime.verify import format_table, verify_suite

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_VERIFY_FAILED = 2


def _parse_pairs(items: Sequence[str], option: str) -> Dict[str, str]:
    pairs: Dict[str, str] = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ScenarioError(f"{option} espera clave=valor, recibido {item!r}")
        pairs[key.strip()] = value.strip()
    return pairs


def _parse_sweep_param(text: str) -> Tuple[str, List[str]]:
    key, sep, raw_values = text.partition("=")
    values = [value.strip() for value in raw_values.split(",") if value.strip()]
    if not sep or not key.strip() or not values:
        raise ScenarioError(f"--param espera clave=v1,v2,..., recibido {text!r}")
    return key.strip(), values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", help="Directorio de salida (por defecto $CURVEFLOW_OUT_DIR o ./out)")
    common.add_argument("--quiet", action="store_true", help="Solo registra advertencias y errores")

    ap = argparse.ArgumentParser(prog="curveflow", description="Simulador de flujos de curvas planas (GAPF / CSF)")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="Ejecuta un escenario")
    run.add_argument("scenario", help="Archivo de escenario (.ini, .yaml, .json)")
    run.add_argument("--set", action="append", dest="overrides", default=[], help="Sobrescribe seccion.clave=valor (puede repetirse)")

    verify = sub.add_parser("verify", parents=[common], help="Corre la suite de aceptación")
    verify.add_argument("--tolerance", action="append", default=[], help="Ajusta una tolerancia nombre=valor (puede repetirse)")
    verify.add_argument("--workers", type=int, default=4, help="Corridas concurrentes")

    sweep_cmd = sub.add_parser("sweep", parents=[common], help="Barrido de un parámetro")
    sweep_cmd.add_argument("scenario", help="Archivo de escenario base")
    sweep_cmd.add_argument("--param", required=True, help="seccion.clave=v1,v2,...")
    sweep_cmd.add_argument("--workers", type=int, default=None, help="Corridas concurrentes")
    return ap


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_scenario(Path(args.scenario), _parse_pairs(args.overrides, "--set"))
    out_dir = resolve_out_dir(args.out_dir)
    outcome = run_scenario(cfg, out_dir)
    terminal = outcome.terminal
    print(
        f"[RUN] {cfg.name}: terminal={terminal.kind} t={terminal.t_event:.6g} · "
        f"pasos={outcome.final.step_index} · registros={len(outcome.history)} · salida={out_dir}"
    )
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace) -> int:
    tolerances = {name: float(value) for name, value in _parse_pairs(args.tolerance, "--tolerance").items()}
    snapshot = verify_suite(tolerances, max_workers=args.workers)
    print(format_table(snapshot))
    if args.out_dir:
        write_report(Path(args.out_dir) / "verify_report.json", snapshot)
    return EXIT_OK if snapshot["passed"] else EXIT_VERIFY_FAILED


def _cmd_sweep(args: argparse.Namespace) -> int:
    key, values = _parse_sweep_param(args.param)
    out_dir = resolve_out_dir(args.out_dir)
    results = sweep(Path(args.scenario), key, values, out_dir, max_workers=args.workers)
    for result in results:
        terminal = result["terminal"]
        print(f"[SWEEP] {key}={result['value']}: terminal={terminal['kind']} t={terminal['t_event']:.6g}")
    print(f"Resumen en {out_dir / 'sweep_summary.json'}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "verify": _cmd_verify, "sweep": _cmd_sweep}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.quiet:
        set_log_level("WARNING")
    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, ValueError, OSError) as exc:
        log_event("config.invalid", command=args.command, error=str(exc))
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
