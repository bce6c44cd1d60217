"""Map experimental knobs onto a two-resonance susceptibility model.

A driven natural-abundance Rb cell hosts one gain line (driven in the
minority isotope) and one absorption line (majority isotope).  Line
strengths follow a deliberately simple bilinear rule,

    S = kappa * total_density * isotope_fraction * pumping_efficiency * power,

with a single calibration constant ``kappa`` anchored to a target on-axis
peak index change.  Hyperfine intervals and the single-photon detuning are
carried as metadata only; they never enter the MHz-scale lineshape math.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import lineshape
from .errors import PhysicsError
from .lineshape import Kind, Resonance, SusceptibilityModel

__all__ = [
    "VaporCellConfig",
    "ControlLaserConfig",
    "VaporScenario",
    "IndexEstimate",
    "default_scenario",
    "swapped_kinds",
    "build_model",
    "calibrate_kappa",
    "peak_delta_n",
    "max_index_estimate",
    "DegenerateGeometryError",
    "NoZeroCrossingError",
    "HYPERFINE_SPLITTING_87_GHZ",
    "HYPERFINE_SPLITTING_85_GHZ",
]

# Ground-state hyperfine intervals of the two isotopes (GHz); provenance
# metadata echoed in reports, not used in any calculation.
HYPERFINE_SPLITTING_87_GHZ = 6.834
HYPERFINE_SPLITTING_85_GHZ = 3.035

# Density at which the phase index of an alkali vapor saturates near 2.
_MAX_INDEX_ANCHOR_DENSITY = 1e15


class DegenerateGeometryError(PhysicsError):
    """The two resonance offsets coincide; calibration is undefined."""


class NoZeroCrossingError(PhysicsError):
    """chi'' has no zero crossing between the resonance centers."""


@dataclass(frozen=True)
class VaporCellConfig:
    """Vapor cell geometry and composition."""

    length_cm: float = 7.5
    temperature_c: float = 90.0
    total_density_per_cm3: float = 2.4e12
    fraction_87: float = 0.28
    fraction_85: float = 0.72
    buffer_gas_torr: float = 10.0  # metadata only

    def __post_init__(self):
        if self.length_cm <= 0 or self.total_density_per_cm3 <= 0:
            raise ValueError("cell length and density must be positive")
        if not (0 <= self.fraction_87 <= 1 and 0 <= self.fraction_85 <= 1):
            raise ValueError("isotope fractions must lie in [0, 1]")
        if abs(self.fraction_87 + self.fraction_85 - 1.0) > 1e-9:
            raise ValueError("isotope fractions must sum to 1")

    @property
    def length_m(self) -> float:
        return self.length_cm * 1e-2


@dataclass(frozen=True)
class ControlLaserConfig:
    """One control laser: power, geometry and the line it drives."""

    power_mw: float = 100.0
    waist_mm: float = 1.2
    raman_offset_mhz: float = 0.0
    hwhm_mhz: float = 0.1
    single_photon_detuning_ghz: float = 16.0  # metadata only

    def __post_init__(self):
        if self.power_mw < 0:
            raise ValueError("power must be >= 0")
        if self.waist_mm <= 0 or self.hwhm_mhz <= 0:
            raise ValueError("waist and hwhm must be positive")


@dataclass(frozen=True)
class VaporScenario:
    """Full experiment parameterization.

    ``gain_control`` drives the gain line in the 28% isotope and
    ``loss_control`` the absorption line in the 72% isotope.  ``kappa``
    converts (density * fraction * pumping * power) into a line strength.
    """

    cell: VaporCellConfig = field(default_factory=VaporCellConfig)
    gain_control: ControlLaserConfig = field(default_factory=ControlLaserConfig)
    loss_control: ControlLaserConfig = field(default_factory=ControlLaserConfig)
    pumping_efficiency: float = 0.1
    kappa: float = 1.0

    def __post_init__(self):
        if not 0 <= self.pumping_efficiency <= 1:
            raise ValueError("pumping_efficiency must lie in [0, 1]")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")

    @property
    def gain_strength(self) -> float:
        return (
            self.kappa
            * self.cell.total_density_per_cm3
            * self.cell.fraction_87
            * self.pumping_efficiency
            * self.gain_control.power_mw
        )

    @property
    def loss_strength(self) -> float:
        return (
            self.kappa
            * self.cell.total_density_per_cm3
            * self.cell.fraction_85
            * self.pumping_efficiency
            * self.loss_control.power_mw
        )


def default_scenario(
    gain_offset_mhz: float = -0.1,
    loss_offset_mhz: float = +0.1,
    target_peak_delta_n: float = 1e-6,
) -> VaporScenario:
    """Reference scenario with the gain line at lower detuning.

    The gain control keeps its nominal 100 mW while the loss-control power
    is scaled by the isotope abundance ratio so the two lines have equal
    strength (the balanced interference configuration the calibration is
    defined at).  ``kappa`` is then set so the peak index change at the
    chi'' zero crossing equals ``target_peak_delta_n``.
    """
    cell = VaporCellConfig()
    gain = ControlLaserConfig(raman_offset_mhz=gain_offset_mhz)
    loss = ControlLaserConfig(
        power_mw=100.0 * cell.fraction_87 / cell.fraction_85,
        raman_offset_mhz=loss_offset_mhz,
    )
    scenario = VaporScenario(cell=cell, gain_control=gain, loss_control=loss)
    kappa = calibrate_kappa(scenario, target_peak_delta_n)
    return replace(scenario, kappa=kappa)


def swapped_kinds(scenario: VaporScenario) -> VaporScenario:
    """Exchange the gain/loss ordering on the detuning axis.

    Retunes the two controls so each line appears where the other used to
    sit (the loss line now comes first): the reduced-index ordering.  In
    the equal-strength case this negates chi pointwise.
    """
    return replace(
        scenario,
        gain_control=replace(
            scenario.gain_control,
            raman_offset_mhz=scenario.loss_control.raman_offset_mhz,
            hwhm_mhz=scenario.loss_control.hwhm_mhz,
        ),
        loss_control=replace(
            scenario.loss_control,
            raman_offset_mhz=scenario.gain_control.raman_offset_mhz,
            hwhm_mhz=scenario.gain_control.hwhm_mhz,
        ),
    )


def build_model(scenario: VaporScenario) -> SusceptibilityModel:
    """Two-resonance susceptibility model for a scenario."""
    gain = Resonance(
        center=scenario.gain_control.raman_offset_mhz,
        hwhm=scenario.gain_control.hwhm_mhz,
        strength=scenario.gain_strength,
        kind=Kind.GAIN,
    )
    loss = Resonance(
        center=scenario.loss_control.raman_offset_mhz,
        hwhm=scenario.loss_control.hwhm_mhz,
        strength=scenario.loss_strength,
        kind=Kind.ABSORPTION,
    )
    return SusceptibilityModel((gain, loss))


def _check_balanced(scenario: VaporScenario):
    """Calibration is defined for the equal-strength symmetric pair."""
    s = abs(
        scenario.loss_control.raman_offset_mhz - scenario.gain_control.raman_offset_mhz
    )
    if s == 0.0:
        raise DegenerateGeometryError("the two resonance offsets coincide (s = 0)")
    g_prod = scenario.cell.fraction_87 * scenario.gain_control.power_mw
    l_prod = scenario.cell.fraction_85 * scenario.loss_control.power_mw
    scale = max(abs(g_prod), abs(l_prod))
    if scale > 0 and abs(g_prod - l_prod) > 1e-9 * scale:
        raise ValueError(
            "calibration requires equal line strengths: fraction*power is "
            f"{g_prod:g} (gain) vs {l_prod:g} (loss)"
        )
    if abs(scenario.gain_control.hwhm_mhz - scenario.loss_control.hwhm_mhz) > 1e-12:
        raise ValueError("calibration requires equal line widths")
    return s


def calibrate_kappa(scenario: VaporScenario, target_peak_delta_n: float) -> float:
    """Calibration constant giving the requested peak index change.

    At the midpoint of the balanced pair chi is purely real with the
    closed form chi'(mid) = S*s/(gamma**2 + s**2/4).  The strength is
    chosen so that sqrt(1 + chi'(mid)) - 1 equals the target exactly
    (the quadratic term matters at the 1e-9 round-trip tolerance), then
    inverted through the bilinear strength rule.
    """
    if target_peak_delta_n < 0:
        raise ValueError("target_peak_delta_n must be >= 0")
    if target_peak_delta_n == 0.0:
        return 0.0
    s = _check_balanced(scenario)
    gamma = scenario.gain_control.hwhm_mhz
    chi_needed = 2.0 * target_peak_delta_n + target_peak_delta_n**2
    strength = chi_needed * (gamma**2 + s**2 / 4.0) / s
    per_kappa = (
        scenario.cell.total_density_per_cm3
        * scenario.cell.fraction_87
        * scenario.pumping_efficiency
        * scenario.gain_control.power_mw
    )
    if per_kappa == 0.0:
        raise ValueError("strength rule is identically zero (check density, "
                         "pumping efficiency and control power)")
    return strength / per_kappa


def peak_delta_n(scenario: VaporScenario):
    """Index change at the chi'' zero crossing between the two lines.

    Returns ``(delta_mhz, delta_n)`` where ``delta_n = Re(n) - 1``
    evaluated at the crossing.  When several crossings exist, the one
    nearest the midpoint of the two centers is used.
    """
    model = build_model(scenario)
    c1 = scenario.gain_control.raman_offset_mhz
    c2 = scenario.loss_control.raman_offset_mhz
    lo, hi = min(c1, c2), max(c1, c2)
    if lo == hi:
        raise DegenerateGeometryError("the two resonance offsets coincide (s = 0)")
    step = model.min_hwhm / 20.0
    roots = lineshape.im_zero_crossings(model, (lo, hi), step)
    if not roots:
        raise NoZeroCrossingError(
            f"chi'' has no zero crossing between the centers ({lo}, {hi}) MHz"
        )
    mid = 0.5 * (lo + hi)
    root = min(roots, key=lambda r: abs(r - mid))
    chi = lineshape.chi_at(model, root)
    return root, lineshape.refractive_index(chi).real - 1.0


@dataclass(frozen=True)
class IndexEstimate:
    """Output of :func:`max_index_estimate`."""

    n: float
    clamped: bool
    note: str = "indicative scaling helper, not a physical model"


def max_index_estimate(density_per_cm3: float) -> IndexEstimate:
    """Indicative achievable phase index at a given atomic density.

    Linear-in-density extrapolation anchored to n = 2 at 1e15 atoms/cm^3,
    clamped (with a flag) above the anchor where collisional broadening
    caps the index.  Order-of-magnitude guidance only.
    """
    if density_per_cm3 <= 0:
        raise ValueError("density must be positive")
    delta_n = density_per_cm3 / _MAX_INDEX_ANCHOR_DENSITY
    clamped = delta_n > 1.0
    return IndexEstimate(n=1.0 + min(delta_n, 1.0), clamped=clamped)
