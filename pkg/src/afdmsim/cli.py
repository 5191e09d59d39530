"""Command-line front end: ``afdmsim simulate|analyze``.

Configs are INI files with [sweep], [snr], [hwi] and [stopping] sections whose
keys mirror the SweepConfig fields (see README); command-line flags override
file values.  Exit code 0 on success, 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .hwi import HwiConfig, hwi_preset
from .sweep import (SCHEME_PRESETS, ConfigError, SweepConfig, analyze,
                    default_workers, emit_results, figure_recipes, run_sweep)

_SWEEP_FIELDS = {
    "waveform": str, "n": int, "m": int, "j": int, "p": int,
    "constellation": str, "detector": str, "velocity_kmh": float,
    "k_max": float, "k_nu": int, "l_max": int, "delta_f": float,
    "f_c": float, "doppler_model": str, "csi_knowledge": str,
    "frames_per_link": int, "rv_frames": int, "rv_mode": str,
    "theory": bool, "theory_links": int, "pair_budget": int,
    "ml_cap": int, "seed": int,
}

_HWI_FIELDS = {
    "pn_enabled": bool, "psi_t": float, "psi_r": float, "pn_mode": str,
    "cfo": float, "dac_bits": int, "iqi_lambda": float, "iqi_beta": float,
    "iqi_beta_deg": float, "nu_clip_db": float, "p_s": float, "dco": complex,
}


def _coerce(raw: str, kind):
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    if kind is complex:
        return complex(raw)
    try:
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r}: {exc}") from exc


def load_config(path) -> SweepConfig:
    """Parse an INI sweep configuration."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    updates = {}
    if parser.has_section("sweep"):
        for key, raw in parser.items("sweep"):
            if key == "csi":
                if raw.strip().lower() == "perfect":
                    updates["csi_mode"] = "perfect"
                    updates["sigma_h2"] = 0.0
                else:
                    updates["csi_mode"] = "gaussian-error"
                    updates["sigma_h2"] = _coerce(raw, float)
            elif key in _SWEEP_FIELDS:
                updates[key] = _coerce(raw, _SWEEP_FIELDS[key])
            else:
                raise ConfigError(f"unknown [sweep] key {key!r}")
    if parser.has_section("snr"):
        for key, raw in parser.items("snr"):
            if key not in ("start", "stop", "step"):
                raise ConfigError(f"unknown [snr] key {key!r}")
            updates[f"snr_db_{key}"] = _coerce(raw, float)
    if parser.has_section("stopping"):
        for key, raw in parser.items("stopping"):
            if key not in ("max_frames", "min_bit_errors"):
                raise ConfigError(f"unknown [stopping] key {key!r}")
            updates[key] = _coerce(raw, int)
    if parser.has_section("hwi"):
        items = dict(parser.items("hwi"))
        preset = items.pop("preset", None)
        hwi = hwi_preset(preset) if preset else HwiConfig()
        hwi_updates = {}
        for key, raw in items.items():
            if key not in _HWI_FIELDS:
                raise ConfigError(f"unknown [hwi] key {key!r}")
            value = _coerce(raw, _HWI_FIELDS[key])
            if key == "iqi_beta_deg":
                key, value = "iqi_beta", float(np.deg2rad(value))
            hwi_updates[key] = value
        try:
            updates["hwi"] = replace(hwi, **hwi_updates)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    try:
        return replace(SweepConfig(), **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="afdmsim",
        description="Chirp-multicarrier MIMO link simulator with hardware impairments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (("simulate", "Monte-Carlo BER/SINR sweep"),
                       ("analyze", "analytic curves only, no Monte Carlo")):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", help="INI sweep configuration file")
        p.add_argument("--preset",
                       help="figure recipe (fig3..fig12) or HWI scheme "
                            "(ideal, scheme1, scheme2, scheme1-additive)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help="output path (default results.<format>)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--workers", type=int,
                       help="worker process count (default AFDMSIM_WORKERS or 1)")
    return parser


def _resolve_runs(args):
    """-> list of (label or None, SweepConfig)."""
    base = load_config(args.config) if args.config else SweepConfig()
    preset = args.preset
    if preset is None:
        runs = [(None, base)]
    else:
        key = preset.strip().lower()
        recipes = figure_recipes()
        if key in recipes:
            runs = list(recipes[key])
        elif key.replace("-", "").replace("_", "") in (
                s.replace("-", "") for s in SCHEME_PRESETS):
            runs = [(None, replace(base, hwi=hwi_preset(key)))]
        else:
            raise ConfigError(f"unknown preset {preset!r}")
    if args.seed is not None:
        runs = [(label, replace(cfg, seed=args.seed)) for label, cfg in runs]
    return runs


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        runs = _resolve_runs(args)
        workers = args.workers if args.workers is not None else default_workers()
        out = Path(args.out) if args.out else Path(f"results.{args.format}")
        for label, cfg in runs:
            result = (analyze if args.command == "analyze" else run_sweep)(
                cfg, workers=workers)
            path = out if label is None or len(runs) == 1 else out.with_name(
                f"{out.stem}__{label}{out.suffix}")
            emit_results(result, args.format, path)
            print(f"wrote {path}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
