"""Virtual two-resonance Raman vapor experiment.

A driven alkali vapor hosts an amplifying and an absorbing line whose
interference enhances the refractive index where the absorption cancels.
This package models the complex susceptibility of that pair, propagates a
Gaussian probe through the induced transverse lens to a far pinhole, and
fits Lorentzian line models to the resulting spectra.
"""

__version__ = "0.1.0"

from .beam import (
    ComplexField,
    GaussianBeam,
    InducedLens,
    abcd_spot_size,
    apply_medium,
    gaussian_field,
    pinhole_transmission,
    propagate,
    second_moment_radius,
    thin_lens_focal_length,
)
from .errors import ConfigError, FitError, PhysicsError, VaporlensError
from .experiment import (
    GridConfig,
    NoiseConfig,
    PinholeConfig,
    ScanConfig,
    ScanRecord,
    run_intensity_scan,
    run_pinhole_scan,
    synthesize_dataset,
)
from .fitting import (
    FitParams,
    FitResonance,
    FitResult,
    SpectrumData,
    fit,
    forward_model,
    initial_guess,
    jacobian,
    predict_chi_prime,
)
from .lineshape import (
    ComplexChi,
    Kind,
    Resonance,
    SusceptibilityModel,
    chi_at,
    im_zero_crossings,
    intensity_absorption,
    kk_reconstruct_re,
    re_extremum_near,
    refractive_index,
)
from .medium import (
    ControlLaserConfig,
    VaporCellConfig,
    VaporScenario,
    build_model,
    calibrate_kappa,
    default_scenario,
    max_index_estimate,
    peak_delta_n,
    swapped_kinds,
)
