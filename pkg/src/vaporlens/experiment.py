"""Virtual frequency scans: on-axis intensity and pinhole transmission.

A scan steps the probe detuning across the two resonances.  At each point
the on-axis intensity ratio is the Beer-Lambert factor exp(-k0*chi''*L);
the pinhole branch additionally pushes the probe through the induced-lens
slice, propagates it to the pinhole plane and integrates the power inside
the aperture.

Normalization convention: ``pinhole_raw`` is the fraction of the *input*
probe power that passes the pinhole (it contains the net gain or loss),
while ``pinhole_norm`` divides the net total-power gain factor back out,
i.e. it is the fraction of the beam's own power at the pinhole plane.
Because the gain profile is transversely Gaussian, dividing out any
scalar cannot undo the slight reshaping of the beam; that residual is
exposed in the ``gain_shaping`` diagnostic (total-power gain over the
on-axis-column factor exp(-alpha0*L), exactly 1 for a flat profile).

Noise is multiplicative, (1 + sigma*xi), with xi drawn from a per-point
counter-based generator so results do not depend on evaluation order or
on how many workers computed the scan.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import beam as beam_mod
from . import lineshape
from .fitting import SpectrumData
from .medium import VaporScenario, build_model, default_scenario

__all__ = [
    "PinholeConfig",
    "NoiseConfig",
    "GridConfig",
    "ScanConfig",
    "ScanRecord",
    "run_intensity_scan",
    "run_pinhole_scan",
    "synthesize_dataset",
    "save_scan_csv",
    "SCAN_CSV_COLUMNS",
]

SCAN_CSV_COLUMNS = (
    "delta_mhz",
    "intensity_ratio",
    "pinhole_raw",
    "pinhole_norm",
    "chi_re",
    "chi_im",
    "gain_shaping",
)


@dataclass(frozen=True)
class PinholeConfig:
    enabled: bool = False
    radius_um: float = 75.0
    distance_m: float = 2.5

    def __post_init__(self):
        if self.radius_um <= 0 or self.distance_m < 0:
            raise ValueError("pinhole radius must be > 0 and distance >= 0")


@dataclass(frozen=True)
class NoiseConfig:
    relative_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.relative_sigma < 0:
            raise ValueError("relative_sigma must be >= 0")


@dataclass(frozen=True)
class GridConfig:
    n: int = 1024
    pitch_um: float = 15.0

    def __post_init__(self):
        if self.n < 2 or (self.n & (self.n - 1)) != 0:
            raise ValueError("grid n must be a power of two")
        if self.pitch_um <= 0:
            raise ValueError("grid pitch must be positive")


@dataclass(frozen=True)
class ScanConfig:
    """One scan: scenario, frequency window, pinhole and noise settings."""

    scenario: VaporScenario = field(default_factory=default_scenario)
    freq_start_mhz: float = -1.0
    freq_stop_mhz: float = 1.0
    n_points: int = 201
    pinhole: PinholeConfig = field(default_factory=PinholeConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    beam: beam_mod.GaussianBeam = field(default_factory=beam_mod.GaussianBeam)
    grid: GridConfig = field(default_factory=GridConfig)

    def __post_init__(self):
        if not self.freq_start_mhz < self.freq_stop_mhz:
            raise ValueError("freq_start must be below freq_stop")
        if self.n_points < 2:
            raise ValueError("n_points must be at least 2")

    def deltas(self) -> np.ndarray:
        return np.linspace(self.freq_start_mhz, self.freq_stop_mhz, self.n_points)


@dataclass(frozen=True)
class ScanRecord:
    """One scan point; pinhole fields are None for intensity-only scans.

    ``chi_re``/``chi_im`` are model truth carried for diagnostics; they
    are not observables of the simulated measurement.
    """

    delta_mhz: float
    intensity_ratio: float
    pinhole_raw: float | None
    pinhole_norm: float | None
    chi_re: float
    chi_im: float
    gain_shaping: float | None = None


def _noise_factor(noise: NoiseConfig, index: int, stream: int) -> float:
    """Counter-based multiplicative noise factor for one scan point."""
    if noise.relative_sigma == 0.0:
        return 1.0
    rng = np.random.default_rng((noise.seed, stream, index))
    return 1.0 + noise.relative_sigma * float(rng.standard_normal())


def _k0_per_m(config: ScanConfig) -> float:
    return 2.0 * math.pi / (config.beam.wavelength_nm * 1e-9)


def run_intensity_scan(config: ScanConfig) -> list[ScanRecord]:
    """On-axis intensity ratio versus probe detuning."""
    model = build_model(config.scenario)
    deltas = config.deltas()
    chi = lineshape.chi_at(model, deltas)
    k0_l = _k0_per_m(config) * config.scenario.cell.length_m
    ratios = np.exp(-k0_l * chi.imag)
    records = []
    for i, d in enumerate(deltas):
        records.append(ScanRecord(
            delta_mhz=float(d),
            intensity_ratio=float(ratios[i]) * _noise_factor(config.noise, i, 0),
            pinhole_raw=None,
            pinhole_norm=None,
            chi_re=float(chi.real[i]),
            chi_im=float(chi.imag[i]),
        ))
    return records


def run_pinhole_scan(config: ScanConfig, workers: int | None = None) -> list[ScanRecord]:
    """Full pipeline scan: intensity plus pinhole transmission columns.

    Points are independent; ``workers`` > 1 evaluates them in a thread
    pool.  The output is ordered by grid index and bit-identical however
    many workers ran it.
    """
    if not config.pinhole.enabled:
        raise ValueError("pinhole scan requested but pinhole.enabled is false")
    model = build_model(config.scenario)
    deltas = config.deltas()
    chi = lineshape.chi_at(model, deltas)
    k0 = _k0_per_m(config)
    cell_cm = config.scenario.cell.length_cm
    cell_m = config.scenario.cell.length_m
    control_waist = config.scenario.gain_control.waist_mm
    probe = beam_mod.gaussian_field(config.beam, config.grid.n, config.grid.pitch_um)
    p_in = probe.power

    def one(i: int) -> ScanRecord:
        c_re, c_im = float(chi.real[i]), float(chi.imag[i])
        lens = beam_mod.InducedLens(
            delta_n0=c_re / 2.0,
            control_waist_mm=control_waist,
            cell_length_cm=cell_cm,
            alpha0_per_m=k0 * c_im,
        )
        after = beam_mod.apply_medium(probe, lens)
        g_total = after.power / p_in
        at_pinhole = beam_mod.propagate(after, config.pinhole.distance_m)
        t_self = beam_mod.pinhole_transmission(at_pinhole, config.pinhole.radius_um)
        raw = t_self * g_total * _noise_factor(config.noise, i, 1)
        on_axis = math.exp(-k0 * c_im * cell_m)
        return ScanRecord(
            delta_mhz=float(deltas[i]),
            intensity_ratio=on_axis * _noise_factor(config.noise, i, 0),
            pinhole_raw=raw,
            pinhole_norm=raw / g_total,
            chi_re=c_re,
            chi_im=c_im,
            gain_shaping=g_total / on_axis,
        )

    if workers is None or workers <= 1:
        return [one(i) for i in range(len(deltas))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(len(deltas))))


def synthesize_dataset(config: ScanConfig) -> SpectrumData:
    """Package an intensity scan as fit-ready spectrum data.

    Per-point sigmas are relative_sigma * value (unit weights for a
    noiseless scan).  Deterministic under a fixed seed.
    """
    records = run_intensity_scan(config)
    freqs = np.array([r.delta_mhz for r in records])
    values = np.array([r.intensity_ratio for r in records])
    if config.noise.relative_sigma > 0:
        sigmas = config.noise.relative_sigma * np.abs(values)
    else:
        sigmas = None
    return SpectrumData(freqs, values, sigmas)


def _cell(value) -> str:
    return "" if value is None else repr(float(value))


def save_scan_csv(records, path):
    """Write scan records with full float round-tripping."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SCAN_CSV_COLUMNS) + "\n")
        for r in records:
            fh.write(",".join([
                _cell(r.delta_mhz),
                _cell(r.intensity_ratio),
                _cell(r.pinhole_raw),
                _cell(r.pinhole_norm),
                _cell(r.chi_re),
                _cell(r.chi_im),
                _cell(r.gain_shaping),
            ]) + "\n")
