"""Parameter-sweep engine: scenario configuration, deterministic CSV/JSON
output, and the fidelity-map / length-sweep / heralding-scan drivers.

A :class:`ScenarioConfig` pins every physical and numerical knob of one
simulation scenario.  Sweep drivers evaluate a grid of derived scenarios,
record per-point diagnostics, and never abort on a failed point (the point
becomes NaN with a note).  CSV output is byte-deterministic for a given
configuration hash, and interrupted sweeps resume from a progress file.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from . import __version__
from .constants import wavelength_to_omega
from .dispersion import (
    CALIBRATED_AIR_FILL,
    CALIBRATED_CORE_RADIUS,
    CALIBRATED_WAVELENGTH_RANGE,
    DispersionModel,
    OMEGA_IDLER_0,
    OMEGA_SIGNAL_0,
)
from .errors import ConfigError, HerqtError
from .heralding import (
    DetectorFilter,
    HeraldKernel,
    herald_kernel,
    heralded_purity,
    heralding_efficiency,
)
from .jsa import (
    JointAmplitude,
    PumpEnvelope,
    build_jsa,
    default_grid,
    swap_arms,
)
from .phasematching import FrequencyScan, PhasematchConfig
from .teleport import (
    HerSpec,
    HerVariant,
    MeasurementSpec,
    QubitSpec,
    SuperpositionSign,
    run_protocol,
)

SCHEMA_VERSION = 1

# wavelength of the retained (teleported) arm; the herald detector sees the
# other generation arm
RETAINED_WAVELENGTH = 1.593e-6


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class FiberConfig:
    core_radius: float = CALIBRATED_CORE_RADIUS
    air_fill: float = CALIBRATED_AIR_FILL
    length: float = 0.8  # m


@dataclass(frozen=True)
class PumpConfig:
    center_wavelength: float = 751.1e-9
    fwhm_wavelength: float = 0.5e-9


@dataclass(frozen=True)
class HeraldFilterConfig:
    kind: str = "flat"  # "flat" | "gaussian"
    center_wavelength: Optional[float] = None
    fwhm_wavelength: Optional[float] = None

    def build(self) -> DetectorFilter:
        if self.kind == "flat":
            return DetectorFilter.flat()
        if self.kind == "gaussian":
            if self.center_wavelength is None or self.fwhm_wavelength is None:
                raise ConfigError("gaussian herald filter needs "
                                  "center_wavelength and fwhm_wavelength")
            return DetectorFilter.gaussian(self.center_wavelength,
                                           self.fwhm_wavelength)
        raise ConfigError(f"unknown herald filter kind {self.kind!r}")


@dataclass(frozen=True)
class HerConfig:
    variant: str = "pd"  # "pd" | "pa"
    sign: str = "minus"  # "minus" | "plus"
    alpha: float = 0.0  # per-arm coherent amplitude, alpha = alpha0/sqrt(2)
    n_schmidt_modes: int = 5

    def variant_enum(self) -> HerVariant:
        try:
            return HerVariant(self.variant)
        except ValueError as exc:
            raise ConfigError(f"unknown HER variant {self.variant!r}") from exc

    def sign_enum(self) -> SuperpositionSign:
        try:
            return SuperpositionSign(self.sign)
        except ValueError as exc:
            raise ConfigError(f"unknown HER sign {self.sign!r}") from exc


@dataclass(frozen=True)
class QubitConfig:
    """Fixed qubit used by single runs and the length sweep."""

    center_wavelength: float = RETAINED_WAVELENGTH
    sigma: float = 1.003e12  # rad/s


@dataclass(frozen=True)
class QubitScanConfig:
    lambda_min: float = 1.5895e-6
    lambda_max: float = 1.5965e-6
    lambda_points: int = 41
    sigma_min: float = 0.2e12
    sigma_max: float = 2.6e12
    sigma_points: int = 41

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.lambda_points < 1 or self.sigma_points < 1:
            raise ConfigError("qubit scan needs at least one point per axis")
        if self.lambda_max < self.lambda_min or self.sigma_max < self.sigma_min:
            raise ConfigError("qubit scan ranges must be ordered")
        return (np.linspace(self.lambda_min, self.lambda_max,
                            self.lambda_points),
                np.linspace(self.sigma_min, self.sigma_max,
                            self.sigma_points))


@dataclass(frozen=True)
class MeasurementConfig:
    tau: float = 0.5
    detector_center_wavelength: Optional[float] = RETAINED_WAVELENGTH
    detector_fwhm_wavelength: Optional[float] = 10e-9

    def build(self, alpha: float) -> MeasurementSpec:
        center = fwhm = None
        if self.detector_center_wavelength is not None \
                and self.detector_fwhm_wavelength is not None:
            center = wavelength_to_omega(self.detector_center_wavelength)
            fwhm = (2.0 * np.pi * 2.99792458e8
                    * self.detector_fwhm_wavelength
                    / self.detector_center_wavelength ** 2)
        return MeasurementSpec.for_alpha(alpha, tau=self.tau,
                                         detector_center=center,
                                         detector_fwhm=fwhm)


@dataclass(frozen=True)
class MapScanConfig:
    """Grid for the phasematching map subcommand."""

    pump_lambda_min: float = 735e-9
    pump_lambda_max: float = 765e-9
    pump_points: int = 61
    detuning_min: float = 1.0e15
    detuning_max: float = 1.6e15
    detuning_points: int = 61


@dataclass(frozen=True)
class NumericsConfig:
    grid_points: int = 256
    cutoff: int = 3
    theta_samples: int = 32
    span_sigmas: float = 6.0
    workers: int = 4
    length_points: int = 60
    alpha0_points: int = 21


@dataclass(frozen=True)
class ScenarioConfig:
    schema_version: int = SCHEMA_VERSION
    fiber: FiberConfig = field(default_factory=FiberConfig)
    pump: PumpConfig = field(default_factory=PumpConfig)
    herald_filter: HeraldFilterConfig = field(
        default_factory=HeraldFilterConfig)
    her: HerConfig = field(default_factory=HerConfig)
    qubit: QubitConfig = field(default_factory=QubitConfig)
    qubit_scan: QubitScanConfig = field(default_factory=QubitScanConfig)
    measurement: MeasurementConfig = field(default_factory=MeasurementConfig)
    map_scan: MapScanConfig = field(default_factory=MapScanConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    output_dir: str = "out"

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(
                f"schema_version {self.schema_version} is not supported "
                f"(expected {SCHEMA_VERSION})")

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration root must be a mapping")
        sections = {
            "fiber": FiberConfig,
            "pump": PumpConfig,
            "herald_filter": HeraldFilterConfig,
            "her": HerConfig,
            "qubit": QubitConfig,
            "qubit_scan": QubitScanConfig,
            "measurement": MeasurementConfig,
            "map_scan": MapScanConfig,
            "numerics": NumericsConfig,
        }
        kwargs = {}
        for key, value in data.items():
            if key in sections:
                klass = sections[key]
                if not isinstance(value, dict):
                    raise ConfigError(f"section {key!r} must be a mapping")
                known = klass.__dataclass_fields__
                bad = sorted(set(value) - set(known))
                if bad:
                    raise ConfigError(f"unknown keys in {key}: {bad}")
                try:
                    kwargs[key] = klass(**value)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"bad section {key!r}: {exc}") from exc
            elif key in ("schema_version", "output_dir"):
                kwargs[key] = value
            else:
                raise ConfigError(f"unknown configuration key {key!r}")
        return cls(**kwargs)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def from_yaml(cls, text: str) -> "ScenarioConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse configuration: {exc}") from exc
        return cls.from_dict(data if data is not None else {})

    def with_override(self, dotted_key: str, value) -> "ScenarioConfig":
        """Return a copy with ``section.key`` (or a top-level key) replaced."""
        parts = dotted_key.split(".")
        data = self.to_dict()
        node = data
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(f"unknown configuration key {dotted_key!r}")
            node = node[part]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ConfigError(f"unknown configuration key {dotted_key!r}")
        node[parts[-1]] = value
        return type(self).from_dict(data)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# scenario materialization


def phasematch_config(cfg: ScenarioConfig) -> PhasematchConfig:
    model = DispersionModel.step_index_strand(
        cfg.fiber.core_radius,
        air_fill=cfg.fiber.air_fill,
        wavelength_range=CALIBRATED_WAVELENGTH_RANGE,
    )
    pump0 = wavelength_to_omega(cfg.pump.center_wavelength)
    return PhasematchConfig(
        model=model,
        pump_scan=FrequencyScan(pump0 - 1e12, pump0 + 1e12, 3),
        detuning_scan=FrequencyScan(-1e12, 1e12, 3),
    )


def pump_envelope(cfg: ScenarioConfig) -> PumpEnvelope:
    return PumpEnvelope(center_wavelength=cfg.pump.center_wavelength,
                        fwhm_wavelength=cfg.pump.fwhm_wavelength)


def operating_jsa(cfg: ScenarioConfig,
                  length: Optional[float] = None) -> JointAmplitude:
    """Joint amplitude with the retained (teleported) arm on the first axis."""
    length = cfg.fiber.length if length is None else length
    pm = phasematch_config(cfg)
    pump = pump_envelope(cfg)
    grid = default_grid(pm, pump, length, OMEGA_SIGNAL_0, OMEGA_IDLER_0,
                        n=cfg.numerics.grid_points,
                        span_sigmas=cfg.numerics.span_sigmas)
    return swap_arms(build_jsa(pm, pump, length, grid))


def operating_kernel(cfg: ScenarioConfig,
                     length: Optional[float] = None) -> HeraldKernel:
    return herald_kernel(operating_jsa(cfg, length),
                         cfg.herald_filter.build())


def her_spec(cfg: ScenarioConfig, kernel: HeraldKernel,
             qubit: QubitSpec) -> HerSpec:
    """HER recipe at one sweep point; the coherent envelope tracks the
    qubit envelope unless the amplitude is zero."""
    envelope = None
    if cfg.her.alpha != 0.0:
        envelope = qubit.envelope(kernel.axis, kernel.weights)
    return HerSpec(herald=kernel,
                   variant=cfg.her.variant_enum(),
                   sign=cfg.her.sign_enum(),
                   alpha=cfg.her.alpha,
                   coherent_envelope=envelope,
                   n_schmidt_modes=cfg.her.n_schmidt_modes)


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class SweepResult:
    """Long-format sweep table: axis columns, value columns, diagnostics."""

    axis_names: Tuple[str, ...]
    axes: Tuple[np.ndarray, ...]
    columns: Dict[str, np.ndarray]  # each flat, C-ordered over the axes
    notes: Tuple[str, ...]  # per-point diagnostic, "" when clean
    provenance: Dict[str, object]

    def __post_init__(self):
        n = int(np.prod([ax.size for ax in self.axes]))
        for name, col in self.columns.items():
            if col.shape != (n,):
                raise ConfigError(f"column {name!r} has wrong length")
        if len(self.notes) != n:
            raise ConfigError("diagnostics must cover every point")
        for name, col in self.columns.items():
            if col.dtype.kind == "f":
                for idx in np.flatnonzero(~np.isfinite(col)):
                    if not self.notes[idx]:
                        raise ConfigError(
                            f"non-finite {name!r} at point {idx} lacks a "
                            "diagnostic note")

    def matrix(self, name: str) -> np.ndarray:
        shape = tuple(ax.size for ax in self.axes)
        return self.columns[name].reshape(shape)

    def write_csv(self, path) -> None:
        path = Path(path)
        lines = [f"# herqt sweep: {self.provenance.get('kind', 'sweep')}"]
        lines.append(f"# config_hash: {self.provenance['config_hash']}")
        for name, ax in zip(self.axis_names, self.axes):
            lines.append(f"# axis {name}: {ax.size} points "
                         f"[{_fmt(ax[0])}, {_fmt(ax[-1])}]")
        header = list(self.axis_names) + list(self.columns) + ["note"]
        lines.append(",".join(header))
        grids = np.meshgrid(*self.axes, indexing="ij")
        flat_axes = [g.ravel() for g in grids]
        n = flat_axes[0].size if flat_axes else 0
        for i in range(n):
            row = [_fmt(a[i]) for a in flat_axes]
            row += [_fmt(self.columns[c][i]) for c in self.columns]
            row.append(self.notes[i])
            lines.append(",".join(row))
        path.write_text("\n".join(lines) + "\n")

    def write_provenance(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.provenance, indent=2, sort_keys=True,
                       default=float) + "\n")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _provenance(cfg: ScenarioConfig, kind: str, started: float,
                **extra) -> dict:
    prov = {
        "kind": kind,
        "schema_version": cfg.schema_version,
        "config_hash": cfg.config_hash(),
        "tool_version": __version__,
        "wall_time_s": time.time() - started,
    }
    prov.update(extra)
    return prov


# ---------------------------------------------------------------------------
# resumable parallel evaluation


def _load_progress(path: Optional[Path], config_hash: str
                   ) -> Dict[int, List[str]]:
    if path is None or not path.exists():
        return {}
    done = {}
    lines = path.read_text().splitlines()
    if not lines or lines[0] != f"# config_hash: {config_hash}":
        return {}  # stale progress from a different configuration
    for line in lines[1:]:
        idx, _, rest = line.partition(",")
        try:
            done[int(idx)] = rest.split(",")
        except ValueError:
            continue  # torn final line from an interrupted run
    return done


def _evaluate_points(n_points: int, worker: Callable[[int], List[str]],
                     workers: int, progress_path: Optional[Path],
                     config_hash: str) -> List[List[str]]:
    """Evaluate every missing point, streaming progress rows to disk."""
    done = _load_progress(progress_path, config_hash)
    missing = [i for i in range(n_points) if i not in done]
    results: Dict[int, List[str]] = dict(done)
    handle = None
    if progress_path is not None:
        progress_path.parent.mkdir(parents=True, exist_ok=True)
        fresh = not done
        handle = open(progress_path, "w" if fresh else "a")
        if fresh:
            handle.write(f"# config_hash: {config_hash}\n")
            for idx in sorted(done):
                handle.write(",".join([str(idx)] + done[idx]) + "\n")
    try:
        if workers > 1 and len(missing) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for idx, row in zip(missing, pool.map(worker, missing)):
                    results[idx] = row
                    if handle is not None:
                        handle.write(",".join([str(idx)] + row) + "\n")
                        handle.flush()
        else:
            for idx in missing:
                row = worker(idx)
                results[idx] = row
                if handle is not None:
                    handle.write(",".join([str(idx)] + row) + "\n")
                    handle.flush()
    finally:
        if handle is not None:
            handle.close()
    return [results[i] for i in range(n_points)]


# ---------------------------------------------------------------------------
# sweep drivers


def fidelity_map(cfg: ScenarioConfig,
                 progress_path=None) -> SweepResult:
    """Average teleportation fidelity over the (lambda_beta, sigma_beta)
    qubit grid; emits the argmax point in the provenance block."""
    started = time.time()
    lam_axis, sig_axis = cfg.qubit_scan.axes()
    kernel = operating_kernel(cfg)
    meas = cfg.measurement.build(cfg.her.alpha)
    n_points = lam_axis.size * sig_axis.size

    def worker(idx: int) -> List[str]:
        lam = lam_axis[idx // sig_axis.size]
        sig = sig_axis[idx % sig_axis.size]
        try:
            qubit = QubitSpec(center_wavelength=float(lam), sigma=float(sig))
            her = her_spec(cfg, kernel, qubit)
            res = run_protocol(her, qubit, meas,
                               theta_samples=cfg.numerics.theta_samples,
                               cutoff=cfg.numerics.cutoff,
                               check_convergence=False)
            return [_fmt(res.avg_fidelity), _fmt(res.success_probability),
                    _fmt(res.truncation_flag), _fmt(res.mode_leakage), ""]
        except HerqtError as exc:
            return ["nan", "nan", "1", "nan", type(exc).__name__]

    rows = _evaluate_points(
        n_points, worker, cfg.numerics.workers,
        None if progress_path is None else Path(progress_path),
        cfg.config_hash())

    columns = {
        "avg_fidelity": np.array([float(r[0]) for r in rows]),
        "success_probability": np.array([float(r[1]) for r in rows]),
        "truncation_flag": np.array([int(r[2]) for r in rows]),
        "mode_leakage": np.array([float(r[3]) for r in rows]),
    }
    notes = tuple(r[4] for r in rows)
    fid = columns["avg_fidelity"]
    if np.all(np.isnan(fid)):
        argmax = None
    else:
        best = int(np.nanargmax(fid))
        argmax = {"lambda_beta": float(lam_axis[best // sig_axis.size]),
                  "sigma_beta": float(sig_axis[best % sig_axis.size]),
                  "avg_fidelity": float(fid[best])}
    prov = _provenance(cfg, "fidelity_map", started, argmax=argmax,
                       variant=cfg.her.variant)
    return SweepResult(axis_names=("lambda_beta_m", "sigma_beta_rad_s"),
                       axes=(lam_axis, sig_axis), columns=columns,
                       notes=notes, provenance=prov)


def length_sweep(cfg: ScenarioConfig,
                 l_range: Optional[Sequence[float]] = None,
                 progress_path=None) -> SweepResult:
    """Fidelity, heralded purity, and joint-measurement probability vs
    fiber length, with the qubit fixed at the configured optimum."""
    started = time.time()
    if l_range is None:
        lengths = np.geomspace(0.01, 1.0, cfg.numerics.length_points)
    else:
        lengths = np.asarray(list(l_range), dtype=float)
    if lengths.size == 0:
        raise ConfigError("length sweep needs at least one length")
    if np.any(lengths <= 0.0) or np.any(lengths > 2.0):
        raise ConfigError("lengths must lie in (0, 2] m")
    qubit = QubitSpec(center_wavelength=cfg.qubit.center_wavelength,
                      sigma=cfg.qubit.sigma)
    meas = cfg.measurement.build(cfg.her.alpha)

    def worker(idx: int) -> List[str]:
        try:
            kernel = operating_kernel(cfg, length=float(lengths[idx]))
            her = her_spec(cfg, kernel, qubit)
            res = run_protocol(her, qubit, meas,
                               theta_samples=cfg.numerics.theta_samples,
                               cutoff=cfg.numerics.cutoff,
                               check_convergence=False)
            return [_fmt(res.avg_fidelity), _fmt(heralded_purity(kernel)),
                    _fmt(res.success_probability),
                    _fmt(res.truncation_flag), _fmt(res.mode_leakage), ""]
        except HerqtError as exc:
            return ["nan", "nan", "nan", "1", "nan", type(exc).__name__]

    rows = _evaluate_points(
        lengths.size, worker, cfg.numerics.workers,
        None if progress_path is None else Path(progress_path),
        cfg.config_hash())
    columns = {
        "avg_fidelity": np.array([float(r[0]) for r in rows]),
        "purity": np.array([float(r[1]) for r in rows]),
        "joint_probability": np.array([float(r[2]) for r in rows]),
        "truncation_flag": np.array([int(r[3]) for r in rows]),
        "mode_leakage": np.array([float(r[4]) for r in rows]),
    }
    notes = tuple(r[5] for r in rows)
    prov = _provenance(cfg, "length_sweep", started,
                       qubit_center_wavelength=cfg.qubit.center_wavelength,
                       qubit_sigma=cfg.qubit.sigma)
    return SweepResult(axis_names=("length_m",), axes=(lengths,),
                       columns=columns, notes=notes, provenance=prov)


def heralding_scan(cfg: ScenarioConfig,
                   alpha0_range: Optional[Sequence[float]] = None
                   ) -> SweepResult:
    """Heralding efficiency P_H/eta against the seed amplitude alpha0."""
    started = time.time()
    if alpha0_range is None:
        alpha0s = np.linspace(0.0, 2.0, cfg.numerics.alpha0_points)
    else:
        alpha0s = np.asarray(list(alpha0_range), dtype=float)
    if alpha0s.size == 0:
        raise ConfigError("heralding scan needs at least one amplitude")
    F = operating_jsa(cfg)
    detector = cfg.herald_filter.build()
    rows = []
    notes = []
    for a0 in alpha0s:
        try:
            res = heralding_efficiency(F, complex(a0), detector=detector)
            rows.append((res.p_a, res.p_ab, res.p_h_over_eta))
            notes.append("")
        except HerqtError as exc:
            rows.append((np.nan, np.nan, np.nan))
            notes.append(type(exc).__name__)
    arr = np.array(rows)
    columns = {
        "p_a": arr[:, 0],
        "p_ab": arr[:, 1],
        "p_h_over_eta": arr[:, 2],
    }
    prov = _provenance(cfg, "heralding_scan", started)
    return SweepResult(axis_names=("alpha0",), axes=(alpha0s,),
                       columns=columns, notes=tuple(notes), provenance=prov)
