"""Two-photon (Hong-Ou-Mandel) interference: dip model, counting simulation
and dip fitting.

The normalized coincidence rate as a function of the optical path difference
dz between the interferometer arms is

    N_c(dz) = 1 - V exp( -(pi^2/ln 2) [dz * dl / lambda^2]^2 )

with V the visibility, lambda the degeneracy wavelength and dl the FWHM
spectral intensity width of the photons. Uncoated facets of reflectivity R
add twice-reflected photon paths that never overlap the direct ones, which
caps the visibility at V = 1 / (1 + 2 R^2).

Scans are simulated with independent Poisson draws per position for the
total and the (flat) accidental coincidences; fits run weighted nonlinear
least squares on accidental-subtracted, baseline-normalized counts with
Poisson error bars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .efficiency import DetectionChain, expected_counts
from .errors import DegenerateScan, NoConvergence

_LN2 = math.log(2.0)
_SHAPE = math.pi**2 / _LN2  # exponent prefactor of the dip model

NM_PER_MM = 1e6


@dataclass(frozen=True)
class DipModel:
    visibility: float
    wavelength_nm: float
    delta_lambda_nm: float

    def __post_init__(self):
        if not (0.0 <= self.visibility <= 1.0):
            raise ValueError(f"visibility must lie in [0, 1], got {self.visibility}")
        if self.delta_lambda_nm <= 0 or self.wavelength_nm <= 0:
            raise ValueError("wavelength and spectral width must be positive")


def dip_value(m: DipModel, delta_z_mm):
    """Normalized coincidence rate at path difference delta_z (mm)."""
    dz_nm = np.asarray(delta_z_mm, dtype=float) * NM_PER_MM
    u = dz_nm * m.delta_lambda_nm / m.wavelength_nm**2
    val = 1.0 - m.visibility * np.exp(-_SHAPE * u * u)
    return float(val) if np.isscalar(delta_z_mm) else val


def dip_half_width_mm(wavelength_nm: float, delta_lambda_nm: float) -> float:
    """|dz| where the dip has half its depth: (lambda^2/dl) ln2/pi."""
    return (wavelength_nm**2 / delta_lambda_nm) * (_LN2 / math.pi) / NM_PER_MM


def dip_fwhm_mm(wavelength_nm: float, delta_lambda_nm: float) -> float:
    return 2.0 * dip_half_width_mm(wavelength_nm, delta_lambda_nm)


def visibility_from_reflectivity(reflectance: float) -> float:
    """V = 1 / (1 + 2 R^2) for facet intensity reflectance R in [0, 1)."""
    if not (0.0 <= reflectance < 1.0):
        raise ValueError(f"facet reflectance must lie in [0, 1), got {reflectance}")
    return 1.0 / (1.0 + 2.0 * reflectance**2)


@dataclass
class HomScan:
    """One coincidence scan: positions, total and accidental counts."""

    delta_z_mm: np.ndarray
    total_counts: np.ndarray
    accidental_counts: np.ndarray
    dwell_s: float
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        dz = np.asarray(self.delta_z_mm, dtype=float)
        tot = np.asarray(self.total_counts)
        acc = np.asarray(self.accidental_counts)
        if not (dz.ndim == 1 and tot.shape == dz.shape and acc.shape == dz.shape):
            raise ValueError("scan arrays must be matching 1D arrays")
        if np.any(np.diff(dz) <= 0):
            raise ValueError("delta_z positions must be strictly increasing")
        for name, arr in (("total", tot), ("accidental", acc)):
            if np.any(arr < 0) or not np.issubdtype(arr.dtype, np.integer):
                raise ValueError(f"{name} counts must be non-negative integers")
        if self.dwell_s <= 0:
            raise ValueError("dwell time must be positive")
        self.delta_z_mm = dz
        self.total_counts = tot.astype(np.int64)
        self.accidental_counts = acc.astype(np.int64)

    @property
    def net_counts(self) -> np.ndarray:
        return self.total_counts - self.accidental_counts


def simulate_scan(
    m: DipModel,
    chain: DetectionChain,
    positions_mm,
    dwell_s: float,
    seed: int,
) -> HomScan:
    """Poisson-sampled coincidence scan, reproducible for a given seed.

    Per position the expected totals are dwell * (true_rate * N_c(dz) +
    accidental_rate); the accidental channel is an independent measurement of
    dwell * accidental_rate (delayed-window style), drawn independently.
    """
    positions = np.asarray(positions_mm, dtype=float)
    if positions.ndim != 1 or np.any(np.diff(positions) <= 0):
        raise ValueError("positions must be strictly increasing")
    if dwell_s <= 0:
        raise ValueError("dwell time must be positive")
    budget = expected_counts(chain)
    rng = np.random.default_rng(seed)
    mean_total = dwell_s * (
        budget.true_coincidence_rate_hz * dip_value(m, positions)
        + budget.accidental_rate_hz
    )
    mean_acc = np.full_like(positions, dwell_s * budget.accidental_rate_hz)
    total = rng.poisson(mean_total)
    acc = rng.poisson(mean_acc)
    return HomScan(
        delta_z_mm=positions,
        total_counts=total,
        accidental_counts=acc,
        dwell_s=dwell_s,
        seed=seed,
        metadata={
            "model": {
                "visibility": m.visibility,
                "wavelength_nm": m.wavelength_nm,
                "delta_lambda_nm": m.delta_lambda_nm,
            },
            "true_rate_hz": budget.true_coincidence_rate_hz,
            "accidental_rate_hz": budget.accidental_rate_hz,
        },
    )


@dataclass(frozen=True)
class FitResult:
    visibility: float
    delta_lambda_nm: float
    visibility_err: float
    delta_lambda_err: float
    residual_norm: float
    converged: bool
    iterations: int
    baseline_counts: float


def _dip_shape(dz_nm, delta_lambda, wavelength):
    u = dz_nm * delta_lambda / wavelength**2
    return np.exp(-_SHAPE * u * u)


def fit_dip(
    scan: HomScan,
    wavelength_nm: float,
    delta_lambda_grid=None,
    max_iterations: int = 200,
) -> FitResult:
    """Weighted least-squares fit of (V, delta_lambda) to a scan.

    Accidentals are subtracted, the net counts are normalized by the mean of
    the points farther than three dip half-widths from zero (at least three
    such points required), and the two parameters are refined by damped
    Gauss-Newton from a coarse-grid initialization. Convergence requires the
    relative parameter change to stay below 1e-8 for three consecutive
    iterations. Poisson weights: sigma^2(net) = total + accidental.
    """
    if len(scan.delta_z_mm) < 8:
        raise DegenerateScan("need at least 8 scan points")
    dz_nm = scan.delta_z_mm * NM_PER_MM
    net = scan.net_counts.astype(float)
    sigma = np.sqrt(np.maximum(scan.total_counts + scan.accidental_counts, 1.0))

    # coarse initialization over a spectral-width grid
    if delta_lambda_grid is None:
        delta_lambda_grid = np.geomspace(0.1, 2.0, 25)
    best = None
    for dl in delta_lambda_grid:
        outside = np.abs(scan.delta_z_mm) > 3.0 * dip_half_width_mm(wavelength_nm, dl)
        if outside.sum() < 3:
            continue
        baseline = float(net[outside].mean())
        if baseline <= 0:
            continue
        y = net / baseline
        sy = sigma / baseline
        g = _dip_shape(dz_nm, dl, wavelength_nm)
        w = 1.0 / sy**2
        denom = float(np.sum(w * g * g))
        v = float(np.sum(w * g * (1.0 - y)) / denom) if denom > 0 else 0.0
        v = min(max(v, 0.0), 1.0)
        chi2 = float(np.sum(w * (y - (1.0 - v * g)) ** 2))
        if best is None or chi2 < best[0]:
            chi2_flat = float(np.sum(w * (y - 1.0) ** 2))
            best = (chi2, v, dl, baseline, chi2_flat)
    if best is None:
        raise DegenerateScan(
            "no spectral-width candidate leaves >= 3 baseline points outside the dip"
        )
    chi2_0, v0, dl0, baseline, chi2_flat = best
    if chi2_flat - chi2_0 < 9.0:
        raise DegenerateScan("no dip resolvable above the noise (< 3 sigma)")
    span = scan.delta_z_mm[-1] - scan.delta_z_mm[0]
    if span < dip_fwhm_mm(wavelength_nm, dl0):
        raise DegenerateScan("scan span must cover at least one dip width")

    def refine(p0, y, sy):
        def residuals(v, dl):
            g = _dip_shape(dz_nm, dl, wavelength_nm)
            return (y - (1.0 - v * g)) / sy, g

        p = np.array(p0, dtype=float)
        r, g = residuals(*p)
        chi2 = float(r @ r)
        streak = 0
        for iterations in range(1, max_iterations + 1):
            v, dl = p
            jac = np.empty((len(y), 2))
            jac[:, 0] = g / sy
            jac[:, 1] = -2.0 * _SHAPE * v * g * (dz_nm / wavelength_nm**2) ** 2 * dl / sy
            jtj = jac.T @ jac
            jtr = jac.T @ r
            try:
                step = -np.linalg.solve(jtj, jtr)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(jtj, jtr, rcond=None)[0]
            scale = 1.0
            for _ in range(30):
                cand = p + scale * step
                if 0.0 <= cand[0] <= 1.2 and 1e-3 <= cand[1] <= 100.0:
                    r_new, g_new = residuals(*cand)
                    chi2_new = float(r_new @ r_new)
                    if chi2_new <= chi2 + 1e-12:
                        break
                scale *= 0.5
            else:
                raise NoConvergence("step search exhausted without improving the fit")
            rel = float(np.max(np.abs(scale * step) / (np.abs(p) + 1e-30)))
            p, r, g, chi2 = cand, r_new, g_new, chi2_new
            streak = streak + 1 if rel < 1e-8 else 0
            if streak >= 3:
                return p, chi2, iterations
        raise NoConvergence(f"no convergence after {max_iterations} iterations")

    # the baseline points still sit ~0.1% inside the dip, so correct the
    # normalization with the fitted model and re-run until it is a fixed point
    p = np.array([v0, dl0])
    iterations = 0
    for _ in range(6):
        outside = np.abs(scan.delta_z_mm) > 3.0 * dip_half_width_mm(wavelength_nm, p[1])
        if outside.sum() < 3:
            raise DegenerateScan("fitted width leaves < 3 baseline points outside the dip")
        model_out = 1.0 - p[0] * _dip_shape(dz_nm[outside], p[1], wavelength_nm)
        new_baseline = float(np.mean(net[outside] / model_out))
        converged_baseline = abs(new_baseline - baseline) <= 1e-12 * abs(baseline)
        baseline = new_baseline
        y = net / baseline
        sy = sigma / baseline
        p, chi2, its = refine(p, y, sy)
        iterations += its
        if converged_baseline:
            break

    v, dl = p
    g = _dip_shape(dz_nm, dl, wavelength_nm)
    jac = np.empty((len(y), 2))
    jac[:, 0] = g / sy
    jac[:, 1] = -2.0 * _SHAPE * v * g * (dz_nm / wavelength_nm**2) ** 2 * dl / sy
    cov = np.linalg.inv(jac.T @ jac)
    return FitResult(
        visibility=float(v),
        delta_lambda_nm=float(dl),
        visibility_err=float(math.sqrt(max(cov[0, 0], 0.0))),
        delta_lambda_err=float(math.sqrt(max(cov[1, 1], 0.0))),
        residual_norm=float(math.sqrt(chi2)),
        converged=True,
        iterations=iterations,
        baseline_counts=baseline,
    )
