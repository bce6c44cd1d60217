"""Complex susceptibility of superposed gain and absorption Lorentzians.

Conventions
-----------
Fields evolve as ``exp(i(kz - wt))``, so a positive imaginary part of the
susceptibility means loss: the intensity decays as ``exp(-k0 * chi'' * z)``.
Each resonance contributes

    sigma * S / ((delta - delta_0) + i * gamma)

with ``sigma = +1`` for gain and ``-1`` for absorption.  An isolated
absorption line therefore has ``chi''(delta_0) = +S/gamma > 0`` and an
isolated gain line ``chi''(delta_0) = -S/gamma < 0``.  Widths ``gamma``
are half widths at half maximum (HWHM); detunings are in MHz relative to
an arbitrary scan origin, so absolute optical frequencies never appear.

For the canonical equal-strength gain/absorption pair separated by ``s``
the midpoint value is purely real,

    chi(mid) = S * s / (gamma**2 + s**2 / 4),

which is the enhanced-dispersion operating point: chi'' vanishes there
while chi' is extremal (a maximum whenever ``s/2 < sqrt(3) * gamma``).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import hilbert

from .errors import PhysicsError

__all__ = [
    "Kind",
    "Resonance",
    "SusceptibilityModel",
    "ComplexChi",
    "Extremum",
    "chi_at",
    "refractive_index",
    "intensity_absorption",
    "im_zero_crossings",
    "re_extremum_near",
    "kk_reconstruct_re",
    "GridTooCoarseError",
    "NoExtremumError",
    "NarrowWindowWarning",
]

# Bisection targets: roots of chi'' are polished until |chi''| falls below
# 1e-12 of the natural peak scale max(S/gamma); extremum abscissae are
# polished to 1e-9 MHz.  Both are deterministic (no iteration-count or
# tolerance heuristics).
ROOT_RTOL = 1e-12
EXTREMUM_ATOL_MHZ = 1e-9


class GridTooCoarseError(PhysicsError):
    """Scan grid step does not resolve the narrowest resonance."""


class NoExtremumError(PhysicsError):
    """No extremum of chi' within the search window."""


class NarrowWindowWarning(UserWarning):
    """Sampling window is too narrow for an accurate Hilbert transform."""


class Kind(enum.Enum):
    GAIN = "gain"
    ABSORPTION = "absorption"

    @property
    def sign(self) -> int:
        return +1 if self is Kind.GAIN else -1


@dataclass(frozen=True)
class Resonance:
    """One complex Lorentzian line.

    Parameters
    ----------
    center : float
        Line center on the probe-detuning axis, MHz.
    hwhm : float
        Half width at half maximum, MHz.  Must be positive.
    strength : float
        Dimensionless*MHz line strength; the peak ``|chi''|`` equals
        ``strength / hwhm``.  Must be non-negative; the sign of the
        response is carried by `kind`, never by `strength`.
    kind : Kind
        Gain or absorption.
    """

    center: float
    hwhm: float
    strength: float
    kind: Kind

    def __post_init__(self):
        if self.hwhm <= 0:
            raise ValueError(f"hwhm must be > 0, got {self.hwhm}")
        if self.strength < 0:
            raise ValueError(f"strength must be >= 0, got {self.strength}")
        if not isinstance(self.kind, Kind):
            raise TypeError("kind must be a lineshape.Kind")


@dataclass(frozen=True)
class SusceptibilityModel:
    """Ordered collection of resonances plus a real background offset.

    Evaluation is exactly the sum of the per-resonance terms plus the
    background; an empty model with zero background evaluates to zero.
    """

    resonances: tuple[Resonance, ...] = ()
    background: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "resonances", tuple(self.resonances))

    @property
    def max_peak_im(self) -> float:
        """Natural scale of chi'': the largest single-line S/gamma."""
        if not self.resonances:
            return 0.0
        return max(r.strength / r.hwhm for r in self.resonances)

    @property
    def max_hwhm(self) -> float:
        return max((r.hwhm for r in self.resonances), default=0.0)

    @property
    def min_hwhm(self) -> float:
        return min((r.hwhm for r in self.resonances), default=0.0)


@dataclass(frozen=True)
class ComplexChi:
    """Complex susceptibility value chi = chi' + i*chi''."""

    re: float
    im: float

    def as_complex(self) -> complex:
        return complex(self.re, self.im)


@dataclass(frozen=True)
class Extremum:
    """Local extremum of chi': abscissa, value and curvature sign."""

    delta: float
    chi_re: float
    curvature_sign: int

    @property
    def is_maximum(self) -> bool:
        return self.curvature_sign < 0


def chi_at(model: SusceptibilityModel, delta):
    """Evaluate chi at one or many detunings (MHz).

    Scalar input returns a :class:`ComplexChi`; array input returns a
    complex ndarray.  Total over all valid models: the Lorentzian
    denominators cannot vanish for hwhm > 0.
    """
    d = np.asarray(delta, dtype=float)
    chi = np.full(d.shape, complex(model.background, 0.0))
    for res in model.resonances:
        chi = chi + res.kind.sign * res.strength / ((d - res.center) + 1j * res.hwhm)
    if np.ndim(delta) == 0:
        c = complex(chi)
        return ComplexChi(c.real, c.imag)
    return chi


def _chi_im(model, d):
    """Imaginary part of chi on an array of detunings."""
    out = np.zeros_like(np.asarray(d, dtype=float))
    for res in model.resonances:
        u = np.asarray(d, dtype=float) - res.center
        out = out - res.kind.sign * res.strength * res.hwhm / (u * u + res.hwhm**2)
    return out


def _chi_re_deriv(model, d):
    """Analytic d(chi')/d(delta) on an array of detunings."""
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    for res in model.resonances:
        u = d - res.center
        den = u * u + res.hwhm**2
        out = out + res.kind.sign * res.strength * (res.hwhm**2 - u * u) / (den * den)
    return out


def _chi_re_deriv2(model, d):
    """Analytic d^2(chi')/d(delta)^2 at a scalar detuning."""
    out = 0.0
    for res in model.resonances:
        u = d - res.center
        den = u * u + res.hwhm**2
        out += res.kind.sign * res.strength * 2.0 * u * (u * u - 3.0 * res.hwhm**2) / den**3
    return out


def refractive_index(chi: ComplexChi) -> complex:
    """Principal-branch complex refractive index n = sqrt(1 + chi).

    ``Re(n)`` is the phase index, ``Im(n)`` drives intensity attenuation.
    For |chi| << 1 this reduces to 1 + chi/2 with error <= |chi|**2 / 2.
    """
    return complex(np.sqrt(complex(1.0 + chi.re, chi.im)))


def intensity_absorption(chi: ComplexChi, wavelength_nm: float) -> float:
    """Intensity absorption coefficient alpha = 2*k0*Im(n), in 1/m.

    Negative values signal gain.  Reduces to (2*pi/lambda0)*chi'' in the
    weak-response limit.
    """
    if wavelength_nm <= 0:
        raise ValueError("wavelength must be positive")
    k0 = 2.0 * np.pi / (wavelength_nm * 1e-9)
    return 2.0 * k0 * refractive_index(chi).imag


def im_zero_crossings(model: SusceptibilityModel, window, grid_step: float):
    """Locate all zero crossings of chi'' inside ``window = (lo, hi)``.

    Sign changes are bracketed on a uniform grid of spacing ``grid_step``
    and polished by bisection until ``|chi''|`` falls below
    ``1e-12 * max(S/gamma)``.  Returned sorted ascending.

    Raises
    ------
    GridTooCoarseError
        If ``grid_step`` is not smaller than the narrowest hwhm.
    """
    lo, hi = window
    if not lo < hi:
        raise ValueError(f"window must satisfy lo < hi, got {window}")
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    if not model.resonances or model.max_peak_im == 0.0:
        return []  # chi'' identically zero: no sign changes
    if grid_step >= model.min_hwhm:
        raise GridTooCoarseError(
            f"grid_step {grid_step} MHz does not resolve the narrowest "
            f"hwhm {model.min_hwhm} MHz"
        )

    n = int(np.ceil((hi - lo) / grid_step)) + 1
    grid = np.linspace(lo, hi, n)
    vals = _chi_im(model, grid)
    tol = ROOT_RTOL * model.max_peak_im

    roots = []
    for i in range(n - 1):
        a, b = grid[i], grid[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(a)
            continue
        if fa * fb < 0.0:
            roots.append(_bisect_to_tol(lambda x: float(_chi_im(model, x)), a, b, fa, tol))
    if vals[-1] == 0.0:
        roots.append(grid[-1])

    # Dedupe roots that bisection found twice from adjacent brackets.
    roots.sort()
    out = []
    for r in roots:
        if not out or r - out[-1] > grid_step * 1e-6:
            out.append(float(r))
    return out


def _bisect_to_tol(f, a, b, fa, tol, max_iter=200):
    """Bisection on a sign-change bracket, stopping on |f| < tol."""
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if abs(fm) < tol or (b - a) < 1e-15 * max(1.0, abs(mid)):
            return mid
        if fa * fm < 0.0:
            b = mid
        else:
            a, fa = mid, fm
    return 0.5 * (a + b)


def re_extremum_near(model: SusceptibilityModel, guess: float) -> Extremum:
    """Find the local extremum of chi' nearest ``guess``.

    Brackets sign changes of the analytic derivative d(chi')/d(delta) on
    a fine grid spanning +-5 * max(hwhm) around the guess, polishes each
    bracket by bisection to 1e-9 MHz, and returns the root closest to
    the guess together with the curvature sign (-1 for a maximum).

    Raises
    ------
    NoExtremumError
        If the derivative does not change sign within the window.
    """
    if not model.resonances or model.max_peak_im == 0.0:
        raise NoExtremumError("chi' is constant for this model")
    half = 5.0 * model.max_hwhm
    step = model.min_hwhm / 50.0
    n = int(np.ceil(2.0 * half / step)) + 1
    grid = np.linspace(guess - half, guess + half, n)
    dvals = _chi_re_deriv(model, grid)

    candidates = []
    for i in range(n - 1):
        fa, fb = dvals[i], dvals[i + 1]
        if fa == 0.0:
            candidates.append(grid[i])
        elif fa * fb < 0.0:
            a, b = grid[i], grid[i + 1]
            while (b - a) > EXTREMUM_ATOL_MHZ:
                mid = 0.5 * (a + b)
                fm = float(_chi_re_deriv(model, mid))
                if fm == 0.0:
                    a = b = mid
                elif fa * fm < 0.0:
                    b = mid
                else:
                    a, fa = mid, fm
            candidates.append(0.5 * (a + b))
    if dvals[-1] == 0.0:
        candidates.append(grid[-1])
    if not candidates:
        raise NoExtremumError(
            f"d(chi')/d(delta) has no sign change within +-{half} MHz of {guess}"
        )

    best = min(candidates, key=lambda x: abs(x - guess))
    curv = _chi_re_deriv2(model, best)
    chi = chi_at(model, best)
    return Extremum(float(best), chi.re, -1 if curv < 0 else +1)


def kk_reconstruct_re(im_samples, window_halfwidth_mhz=None, max_hwhm_mhz=None):
    """Reconstruct chi' - background from uniform samples of chi''.

    Uses an FFT Hilbert transform after extending the samples oddly about
    the window edges, which suppresses the periodization step that a bare
    transform of a truncated one-signed trace would see.  The residual
    truncation error scales like O(S*gamma/W) for window half-width W, so
    the window should span at least +-50 half-widths around every line.

    Parameters
    ----------
    im_samples : array
        chi'' on a uniform detuning grid.
    window_halfwidth_mhz, max_hwhm_mhz : float, optional
        When both are given, a :class:`NarrowWindowWarning` is emitted if
        the window is narrower than +-20 half-widths.
    """
    x = np.asarray(im_samples, dtype=float)
    if x.ndim != 1:
        raise ValueError("im_samples must be one-dimensional")
    if window_halfwidth_mhz is not None and max_hwhm_mhz is not None:
        if window_halfwidth_mhz < 20.0 * max_hwhm_mhz:
            warnings.warn(
                "sampling window narrower than +-20 half-widths; Hilbert "
                "reconstruction may be inaccurate",
                NarrowWindowWarning,
                stacklevel=2,
            )
    n = x.size
    if n == 0:
        return x.copy()
    extended = np.concatenate([x, -x[::-1]])
    analytic = hilbert(extended)
    return -np.imag(analytic)[:n]
