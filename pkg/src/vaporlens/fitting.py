"""Nonlinear least-squares fitting of gain/absorption line spectra.

The measured quantity is an intensity ratio, modeled in Beer-Lambert form

    value(delta) = baseline + exp(-depth * chi''(delta)),

where chi'' is the imaginary susceptibility of the resonance set (gain
lines push the ratio above one, absorption lines below) and ``depth``
folds k0*L into intensity space.  Minimization uses damped least squares
on the normal equations with an adaptive damping factor: accepted steps
shrink the damping by 0.3, rejected ones double it, starting from 1e-3.
Positive quantities (widths, strengths, depth) are fitted in log space,
which keeps them positive without constraint machinery and keeps the
analytic Jacobian exact.

Everything here is deterministic: same data and start point, same result.
Noise synthesis lives with the scan orchestration, not in the fitter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import medfilt

from .errors import FitError
from .lineshape import Kind, Resonance, SusceptibilityModel, chi_at

__all__ = [
    "SpectrumData",
    "FitResonance",
    "FitParams",
    "FitResult",
    "forward_model",
    "jacobian",
    "initial_guess",
    "fit",
    "predict_chi_prime",
    "format_fit_report",
    "load_spectrum_csv",
    "save_spectrum_csv",
    "PeakNotFoundError",
    "SingularNormalMatrixError",
    "NotConvergedError",
]

_DAMPING_START = 1e-3
_DAMPING_ACCEPT = 0.3
_DAMPING_REJECT = 2.0
_DAMPING_MAX = 1e12
_SSE_RTOL = 1e-10
_GRAD_TOL = 1e-10
_MAX_ITER = 200


class PeakNotFoundError(FitError):
    """No local extremum of the required sign in the trace."""


class SingularNormalMatrixError(FitError):
    """Normal equations unsolvable even under heavy damping."""


class NotConvergedError(FitError):
    """Operation requires a converged fit."""


@dataclass(frozen=True)
class SpectrumData:
    """Frequency-sampled intensity-ratio (or transmission) data."""

    freqs: np.ndarray
    values: np.ndarray
    sigmas: np.ndarray = None

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        v = np.asarray(self.values, dtype=float)
        s = np.ones_like(v) if self.sigmas is None else np.asarray(self.sigmas, float)
        if not (f.ndim == 1 and f.shape == v.shape == s.shape):
            raise ValueError("freqs, values and sigmas must be equal-length 1-D")
        if f.size < 2 or np.any(np.diff(f) <= 0):
            raise ValueError("freqs must be strictly increasing")
        if np.any(s <= 0):
            raise ValueError("sigmas must be positive")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "sigmas", s)

    def __len__(self):
        return self.freqs.size


@dataclass(frozen=True)
class FitResonance:
    """One fitted line; kind is fixed during the fit."""

    center: float
    hwhm: float
    strength: float
    kind: Kind

    def __post_init__(self):
        if self.hwhm <= 0 or self.strength <= 0:
            raise ValueError("hwhm and strength must be positive for fitting")


@dataclass(frozen=True)
class FitParams:
    """Model parameters: resonances + baseline + optical-depth scale.

    ``depth_fixed`` keeps the depth at its given value during fitting;
    leaving it free is possible but degenerate with the strengths, so the
    result flags it.
    """

    resonances: tuple[FitResonance, ...]
    baseline: float = 0.0
    depth: float = 1.0
    depth_fixed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "resonances", tuple(self.resonances))
        if not self.resonances:
            raise ValueError("at least one resonance is required")
        if self.depth <= 0:
            raise ValueError("depth must be positive")

    @property
    def n_free(self) -> int:
        return 3 * len(self.resonances) + 1 + (0 if self.depth_fixed else 1)


@dataclass(frozen=True)
class FitResult:
    """Fit output; covariance spans the free parameters in pack order."""

    params: FitParams
    covariance: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    freqs: np.ndarray
    covariance_degenerate: bool = False


def _pack(params: FitParams) -> np.ndarray:
    """Free vector: per resonance (center, log hwhm, log strength), then
    baseline, then log depth when the depth is free."""
    x = []
    for r in params.resonances:
        x += [r.center, math.log(r.hwhm), math.log(r.strength)]
    x.append(params.baseline)
    if not params.depth_fixed:
        x.append(math.log(params.depth))
    return np.array(x, dtype=float)


def _unpack(x: np.ndarray, template: FitParams) -> FitParams:
    res = []
    for j, r in enumerate(template.resonances):
        c, lg, lsv = x[3 * j : 3 * j + 3]
        res.append(replace(r, center=float(c), hwhm=math.exp(lg),
                           strength=math.exp(lsv)))
    k = 3 * len(res)
    baseline = float(x[k])
    depth = template.depth if template.depth_fixed else math.exp(x[k + 1])
    return replace(template, resonances=tuple(res), baseline=baseline, depth=depth)


def _chi_im_terms(params: FitParams, freqs):
    """Per-resonance chi'' contributions, shape (n_res, n_freq)."""
    d = np.asarray(freqs, dtype=float)
    terms = np.empty((len(params.resonances), d.size))
    for j, r in enumerate(params.resonances):
        u = d - r.center
        terms[j] = -r.kind.sign * r.strength * r.hwhm / (u * u + r.hwhm**2)
    return terms


def forward_model(params: FitParams, freqs) -> np.ndarray:
    """Predicted intensity ratio on ``freqs``."""
    chi_im = _chi_im_terms(params, freqs).sum(axis=0)
    return params.baseline + np.exp(-params.depth * chi_im)


def jacobian(params: FitParams, freqs) -> np.ndarray:
    """Analytic derivatives of :func:`forward_model` w.r.t. the free
    parameters, columns in pack order (see :func:`_pack`)."""
    d = np.asarray(freqs, dtype=float)
    terms = _chi_im_terms(params, d)
    chi_im = terms.sum(axis=0)
    expo = np.exp(-params.depth * chi_im)
    cols = []
    for j, r in enumerate(params.resonances):
        u = d - r.center
        den = u * u + r.hwhm**2
        sgn = -r.kind.sign
        # chi'' derivatives, then the chain through exp(-depth * chi'')
        d_center = sgn * r.strength * r.hwhm * 2.0 * u / den**2
        d_log_hwhm = sgn * r.strength * r.hwhm * (u * u - r.hwhm**2) / den**2
        d_log_strength = terms[j]
        for dchi in (d_center, d_log_hwhm, d_log_strength):
            cols.append(expo * (-params.depth) * dchi)
    cols.append(np.ones_like(d))
    if not params.depth_fixed:
        cols.append(expo * (-params.depth * chi_im))
    return np.stack(cols, axis=1)


def initial_guess(data: SpectrumData, n_resonances: int, kinds,
                  depth: float = 1.0, depth_fixed: bool = True) -> FitParams:
    """Starting parameters from the extrema of a median-smoothed trace.

    Centers sit at the most extreme local maximum (gain) / minimum
    (absorption); for two same-kind lines the two most prominent extrema
    are used.  Widths come from half-prominence crossings, strengths from
    the single-line closed form at the peak, the baseline from the trace
    edges.

    Raises
    ------
    PeakNotFoundError
        If the trace has no local extremum of a required sign.
    """
    kinds = tuple(kinds)
    if n_resonances not in (1, 2) or len(kinds) != n_resonances:
        raise ValueError("n_resonances must be 1 or 2 and match kinds")
    f, v = data.freqs, data.values
    smooth = medfilt(v, kernel_size=5) if v.size >= 5 else v.copy()
    edge = min(3, v.size)
    baseline = float(np.mean(np.concatenate([smooth[:edge], smooth[-edge:]]))) - 1.0
    level = baseline + 1.0

    interior = slice(1, -1)
    is_max = (smooth[interior] > smooth[:-2]) & (smooth[interior] >= smooth[2:])
    is_min = (smooth[interior] < smooth[:-2]) & (smooth[interior] <= smooth[2:])
    maxima = [i + 1 for i in np.nonzero(is_max)[0]]
    minima = [i + 1 for i in np.nonzero(is_min)[0]]

    def take(pool, want, kind):
        pool = sorted(pool, key=lambda i: -abs(smooth[i] - level))
        if len(pool) < want:
            raise PeakNotFoundError(
                f"needed {want} local {'maxima' if kind is Kind.GAIN else 'minima'}, "
                f"found {len(pool)}"
            )
        return pool[:want]

    picks = []
    for kind in (Kind.GAIN, Kind.ABSORPTION):
        want = sum(1 for k in kinds if k is kind)
        if want == 0:
            continue
        pool = [i for i in (maxima if kind is Kind.GAIN else minima)
                if (smooth[i] > level if kind is Kind.GAIN else smooth[i] < level)]
        picks.extend((i, kind) for i in take(pool, want, kind))

    by_kind = {Kind.GAIN: [], Kind.ABSORPTION: []}
    for i, kind in picks:
        by_kind[kind].append(i)
    grid = float(np.median(np.diff(f)))
    resonances = []
    for kind in kinds:
        i = by_kind[kind].pop(0)
        height = smooth[i] - level
        half = level + 0.5 * height
        j_left = i
        while j_left > 0 and (smooth[j_left] - half) * np.sign(height) > 0:
            j_left -= 1
        j_right = i
        while j_right < v.size - 1 and (smooth[j_right] - half) * np.sign(height) > 0:
            j_right += 1
        hwhm = max(0.5 * (f[j_right] - f[j_left]), grid)
        ratio = max(smooth[i] - baseline, 1e-12)
        strength = max(abs(hwhm * math.log(ratio) / depth), 1e-9 * hwhm)
        resonances.append(FitResonance(float(f[i]), hwhm, strength, kind))
    return FitParams(tuple(resonances), baseline=baseline, depth=depth,
                     depth_fixed=depth_fixed)


def fit(data: SpectrumData, init: FitParams) -> FitResult:
    """Damped least squares from ``init``; see the module docstring.

    Converges when the relative SSE decrease or the gradient infinity
    norm falls below 1e-10; gives up (with the best point so far and
    ``converged=False``) after 200 step proposals.

    Raises
    ------
    SingularNormalMatrixError
        If the damped normal equations stay unsolvable (fully degenerate
        or overlapping resonances).
    """
    y, sig = data.values, data.sigmas
    n, p = len(data), init.n_free
    if n < p + 1:
        raise ValueError(f"need at least {p + 1} points for {p} free parameters")

    x = _pack(init)
    template = init

    def weighted(xvec):
        params = _unpack(xvec, template)
        r = (forward_model(params, data.freqs) - y) / sig
        return params, r

    params, r = weighted(x)
    sse = float(r @ r)
    lam = _DAMPING_START
    converged = False
    iterations = 0
    consecutive_failures = 0

    while iterations < _MAX_ITER:
        iterations += 1
        J = jacobian(params, data.freqs) / sig[:, None]
        g = J.T @ r
        if np.max(np.abs(g)) < _GRAD_TOL:
            converged = True
            break
        A = J.T @ J
        damp = np.maximum(np.diag(A), 1e-14 * max(np.max(np.diag(A)), 1e-300))
        try:
            step = np.linalg.solve(A + lam * np.diag(damp), -g)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError("non-finite step")
        except np.linalg.LinAlgError:
            consecutive_failures += 1
            lam *= _DAMPING_REJECT
            if consecutive_failures > 60 or lam > _DAMPING_MAX:
                raise SingularNormalMatrixError(
                    "normal equations unsolvable; resonances degenerate?"
                ) from None
            continue
        consecutive_failures = 0
        params_new, r_new = weighted(x + step)
        sse_new = float(r_new @ r_new)
        if sse_new < sse:
            x = x + step
            params, r = params_new, r_new
            drop = (sse - sse_new) / max(sse, 1e-300)
            sse = sse_new
            lam = max(lam * _DAMPING_ACCEPT, 1e-300)
            if drop < _SSE_RTOL:
                converged = True
                break
        else:
            lam *= _DAMPING_REJECT
            if lam > _DAMPING_MAX:
                break

    J = jacobian(params, data.freqs) / sig[:, None]
    A = J.T @ J
    scale = sse / (n - p)
    degenerate = False
    try:
        cov = scale * np.linalg.inv(A)
    except np.linalg.LinAlgError:
        cov = scale * np.linalg.pinv(A)
        degenerate = True
    return FitResult(params=params, covariance=cov, residual_norm=sse,
                     iterations=iterations, converged=converged,
                     freqs=data.freqs.copy(), covariance_degenerate=degenerate)


def predict_chi_prime(result: FitResult):
    """chi' (and the index change chi'/2) implied by a converged fit.

    Requires two resonances of opposite kind; rebuilds the susceptibility
    model from the fitted parameters and evaluates it on the data grid.
    Returns ``(freqs, chi_re, delta_n)``.
    """
    if not result.converged:
        raise NotConvergedError("fit did not converge")
    kinds = {r.kind for r in result.params.resonances}
    if len(result.params.resonances) != 2 or len(kinds) != 2:
        raise FitError("chi' prediction needs one gain and one absorption line")
    model = SusceptibilityModel(tuple(
        Resonance(r.center, r.hwhm, r.strength, r.kind)
        for r in result.params.resonances
    ))
    chi = chi_at(model, result.freqs)
    return result.freqs.copy(), chi.real, chi.real / 2.0


def _stderr(result: FitResult):
    """Natural-space standard errors in pack order (delta method for the
    log-space parameters)."""
    var = np.clip(np.diag(result.covariance), 0.0, None)
    err = np.sqrt(var)
    out = []
    k = 0
    for r in result.params.resonances:
        out += [err[k], r.hwhm * err[k + 1], r.strength * err[k + 2]]
        k += 3
    out.append(err[k])
    if not result.params.depth_fixed:
        out.append(result.params.depth * err[k + 1])
    return out


def format_fit_report(result: FitResult) -> str:
    """Key=value fit report (documented in the README)."""
    p = result.params
    err = _stderr(result)
    lines = [
        f"converged = {str(result.converged).lower()}",
        f"iterations = {result.iterations}",
        f"residual_norm = {result.residual_norm!r}",
        f"n_points = {result.freqs.size}",
        f"n_resonances = {len(p.resonances)}",
        f"baseline = {p.baseline!r}",
        f"baseline_stderr = {float(err[3 * len(p.resonances)])!r}",
        f"depth = {p.depth!r}",
        f"depth_fixed = {str(p.depth_fixed).lower()}",
        f"covariance_degenerate = {str(result.covariance_degenerate).lower()}",
    ]
    for j, r in enumerate(p.resonances, start=1):
        k = 3 * (j - 1)
        lines += [
            f"resonance{j}.kind = {r.kind.value}",
            f"resonance{j}.center_mhz = {r.center!r}",
            f"resonance{j}.center_stderr_mhz = {float(err[k])!r}",
            f"resonance{j}.hwhm_mhz = {r.hwhm!r}",
            f"resonance{j}.hwhm_stderr_mhz = {float(err[k + 1])!r}",
            f"resonance{j}.strength = {r.strength!r}",
            f"resonance{j}.strength_stderr = {float(err[k + 2])!r}",
        ]
    if not p.depth_fixed:
        lines.append(f"depth_stderr = {float(err[-1])!r}")
    return "\n".join(lines) + "\n"


def load_spectrum_csv(path) -> SpectrumData:
    """Read (freq_mhz, value[, sigma]) CSV with a header row."""
    rows = np.genfromtxt(path, delimiter=",", names=True)
    names = rows.dtype.names
    if names is None or "freq_mhz" not in names or "value" not in names:
        raise ValueError(f"{path}: expected columns freq_mhz,value[,sigma]")
    freqs = np.atleast_1d(rows["freq_mhz"])
    values = np.atleast_1d(rows["value"])
    sigmas = np.atleast_1d(rows["sigma"]) if "sigma" in names else None
    return SpectrumData(freqs, values, sigmas)


def save_spectrum_csv(data: SpectrumData, path):
    """Write (freq_mhz, value, sigma) CSV with full float round-tripping."""
    with open(path, "w", newline="") as fh:
        fh.write("freq_mhz,value,sigma\n")
        for f, v, s in zip(data.freqs, data.values, data.sigmas):
            fh.write(f"{float(f)!r},{float(v)!r},{float(s)!r}\n")
