"""Command-line interface: scenario-driven simulations with CSV/JSON output.

Every subcommand reads one scenario configuration (YAML; defaults apply when
no file is given), accepts ``--set section.key=value`` overrides, and writes
its results plus a JSON provenance sidecar into the configured output
directory.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, HerqtError
from .heralding import herald_kernel, heralded_purity, heralding_efficiency
from .jsa import jsi, schmidt_decompose
from .phasematching import FrequencyScan, PhasematchConfig, build_map
from .sweeps import (
    ScenarioConfig,
    SweepResult,
    _fmt,
    _provenance,
    fidelity_map,
    her_spec,
    heralding_scan,
    length_sweep,
    operating_jsa,
    operating_kernel,
    phasematch_config,
)
from .teleport import QubitSpec, run_protocol


def _parse_override(text: str):
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {raw!r}: "
                          f"{exc}") from exc
    return key, value


def _load_config(args) -> ScenarioConfig:
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"configuration file {path} does not exist")
        cfg = ScenarioConfig.from_yaml(path.read_text())
    else:
        cfg = ScenarioConfig()
    for item in args.set or []:
        key, value = _parse_override(item)
        cfg = cfg.with_override(key, value)
    if args.out_dir is not None:
        cfg = cfg.with_override("output_dir", str(args.out_dir))
    return cfg


def _out_dir(cfg: ScenarioConfig) -> Path:
    path = Path(cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True,
                               default=float) + "\n")


def _emit(result: SweepResult, out: Path, stem: str) -> None:
    result.write_csv(out / f"{stem}.csv")
    result.write_provenance(out / f"{stem}.json")
    print(out / f"{stem}.csv")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_phasematch_map(cfg: ScenarioConfig) -> int:
    started = time.time()
    out = _out_dir(cfg)
    base = phasematch_config(cfg)
    scan = cfg.map_scan
    from .constants import wavelength_to_omega

    pump_hi = wavelength_to_omega(scan.pump_lambda_min)
    pump_lo = wavelength_to_omega(scan.pump_lambda_max)
    pm = PhasematchConfig(
        model=base.model,
        pump_scan=FrequencyScan(pump_lo, pump_hi, scan.pump_points),
        detuning_scan=FrequencyScan(scan.detuning_min, scan.detuning_max,
                                    scan.detuning_points),
        phi_nl=base.phi_nl,
    )
    result = build_map(pm, cfg.fiber.length)
    from .constants import omega_to_wavelength

    lines = ["# herqt phasematch map",
             f"# config_hash: {cfg.config_hash()}",
             "pump_wavelength_nm,detuning_Trad_s,delta_k_per_m,theta_si_deg"]
    for j, wp in enumerate(result.pump_axis):
        lam_nm = omega_to_wavelength(wp) * 1e9
        for i, det in enumerate(result.detuning_axis):
            lines.append(",".join([
                _fmt(lam_nm), _fmt(det / 1e12),
                _fmt(result.delta_k[i, j]), _fmt(result.theta_si[i, j])]))
    (out / "phasematch_map.csv").write_text("\n".join(lines) + "\n")

    clines = ["# herqt phasematch contours (delta_k = 0)",
              f"# config_hash: {cfg.config_hash()}",
              "contour_id,pump_wavelength_nm,detuning_Trad_s"]
    for cid, poly in enumerate(result.contours):
        for wp, det in poly:
            clines.append(",".join([
                str(cid), _fmt(omega_to_wavelength(wp) * 1e9),
                _fmt(det / 1e12)]))
    (out / "phasematch_contours.csv").write_text("\n".join(clines) + "\n")
    _write_json(out / "phasematch_map.json",
                _provenance(cfg, "phasematch_map", started,
                            n_contours=len(result.contours),
                            degenerate=result.degenerate_contour))
    print(out / "phasematch_map.csv")
    return 0


def _cmd_jsa(cfg: ScenarioConfig) -> int:
    started = time.time()
    out = _out_dir(cfg)
    F = operating_jsa(cfg)
    intensity = jsi(F)
    g = F.grid
    lines = ["# herqt joint spectral intensity "
             "(retained arm first, herald arm second)",
             f"# config_hash: {cfg.config_hash()}",
             f"# axis omega_retained_rad_s: {g.axis_s.size} points "
             f"[{_fmt(g.axis_s[0])}, {_fmt(g.axis_s[-1])}]",
             f"# axis omega_herald_rad_s: {g.axis_i.size} points "
             f"[{_fmt(g.axis_i[0])}, {_fmt(g.axis_i[-1])}]",
             "omega_retained_rad_s,omega_herald_rad_s,jsi"]
    for j, ws in enumerate(g.axis_s):
        for k, wi in enumerate(g.axis_i):
            lines.append(",".join([_fmt(ws), _fmt(wi),
                                   _fmt(intensity[j, k])]))
    (out / "jsi.csv").write_text("\n".join(lines) + "\n")
    _write_json(out / "jsi.json", _provenance(cfg, "jsi", started,
                                              length_m=cfg.fiber.length))
    print(out / "jsi.csv")
    return 0


def _cmd_schmidt(cfg: ScenarioConfig) -> int:
    started = time.time()
    out = _out_dir(cfg)
    F = operating_jsa(cfg)
    res = schmidt_decompose(F)
    lines = ["# herqt Schmidt coefficients (descending)",
             f"# config_hash: {cfg.config_hash()}",
             "index,coefficient"]
    for i, lam in enumerate(res.coefficients):
        lines.append(f"{i},{_fmt(lam)}")
    (out / "schmidt.csv").write_text("\n".join(lines) + "\n")
    _write_json(out / "schmidt.json",
                _provenance(cfg, "schmidt", started, K=res.K,
                            purity=res.purity))
    print(out / "schmidt.csv")
    return 0


def _cmd_herald(cfg: ScenarioConfig) -> int:
    started = time.time()
    out = _out_dir(cfg)
    F = operating_jsa(cfg)
    detector = cfg.herald_filter.build()
    kernel = herald_kernel(F, detector)
    eff = heralding_efficiency(F, complex(cfg.her.alpha) * np.sqrt(2.0),
                               detector=detector)
    payload = _provenance(cfg, "herald", started,
                          purity=heralded_purity(kernel),
                          herald_weight=kernel.herald_weight,
                          p_h_over_eta=eff.p_h_over_eta)
    _write_json(out / "herald.json", payload)
    print(out / "herald.json")
    return 0


def _cmd_herald_scan(cfg: ScenarioConfig) -> int:
    out = _out_dir(cfg)
    _emit(heralding_scan(cfg), out, "herald_scan")
    return 0


def _cmd_teleport(cfg: ScenarioConfig) -> int:
    started = time.time()
    out = _out_dir(cfg)
    kernel = operating_kernel(cfg)
    qubit = QubitSpec(center_wavelength=cfg.qubit.center_wavelength,
                      sigma=cfg.qubit.sigma)
    her = her_spec(cfg, kernel, qubit)
    meas = cfg.measurement.build(cfg.her.alpha)
    res = run_protocol(her, qubit, meas,
                       theta_samples=cfg.numerics.theta_samples,
                       cutoff=cfg.numerics.cutoff)
    payload = _provenance(
        cfg, "teleport", started,
        avg_fidelity=res.avg_fidelity,
        success_probability=res.success_probability,
        truncation_flag=res.truncation_flag,
        mode_leakage=res.mode_leakage,
        theta_grid=[float(t) for t in res.theta_grid],
        per_theta_fidelity=[float(f) for f in res.per_theta_fidelity])
    _write_json(out / "teleport.json", payload)
    print(out / "teleport.json")
    return 0


def _cmd_fidelity_map(cfg: ScenarioConfig) -> int:
    out = _out_dir(cfg)
    result = fidelity_map(cfg, progress_path=out / "fidelity_map.partial")
    _emit(result, out, "fidelity_map")
    (out / "fidelity_map.partial").unlink(missing_ok=True)
    return 0


def _cmd_length_sweep(cfg: ScenarioConfig) -> int:
    out = _out_dir(cfg)
    result = length_sweep(cfg, progress_path=out / "length_sweep.partial")
    _emit(result, out, "length_sweep")
    (out / "length_sweep.partial").unlink(missing_ok=True)
    return 0


_COMMANDS = {
    "phasematch-map": _cmd_phasematch_map,
    "jsa": _cmd_jsa,
    "schmidt": _cmd_schmidt,
    "herald": _cmd_herald,
    "herald-scan": _cmd_herald_scan,
    "teleport": _cmd_teleport,
    "fidelity-map": _cmd_fidelity_map,
    "length-sweep": _cmd_length_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="herqt",
        description="Heralded quantum-state and teleportation simulations.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} computation")
        p.add_argument("--config", help="scenario configuration YAML file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a configuration entry "
                            "(e.g. --set fiber.length=0.5)")
        p.add_argument("--out-dir", help="override the output directory")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except HerqtError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
