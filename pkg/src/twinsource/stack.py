"""One-dimensional transfer-matrix engine over the epitaxial layer stack.

Conventions
-----------
* Depth axis points downward; depth 0 is the top (air) surface.
* Incidence angle ``theta`` is measured in the ambient medium, in degrees.
* Time convention exp(-i w t): forward waves go as exp(+i k z), absorbing
  media have Im(n) >= 0.
* The characteristic-matrix (admittance) formulation is used: per layer
  ``M = [[cos d, -i sin d / eta], [-i eta sin d, cos d]]`` with phase
  thickness ``d = k0 n t cos(theta_layer)`` and tilted admittance
  ``eta = n cos(theta)`` for TE, ``n / cos(theta)`` for TM (free-space
  admittance factored out).
* For lossless stacks R + T = 1; the substrate may be absorbing (complex
  index), in which case T is the flux entering it.

All lengths in nanometres unless a name says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from . import materials
from .errors import (
    InvalidDesignParams,
    MultipleResonances,
    NoResonanceInWindow,
)
from .materials import Composition, DispersionModel

TE = "TE"
TM = "TM"


@dataclass(frozen=True)
class Layer:
    """One epitaxial layer: alloy composition, thickness, and the sign of its
    effective second-order nonlinearity (bookkeeping for the QPM pattern)."""

    composition: Composition
    thickness_nm: float
    nonlinear_sign: int = 0

    def __post_init__(self):
        if self.thickness_nm <= 0:
            raise ValueError(f"layer thickness must be > 0, got {self.thickness_nm}")
        if self.nonlinear_sign not in (-1, 0, 1):
            raise ValueError(f"nonlinear_sign must be -1, 0 or +1, got {self.nonlinear_sign}")


@dataclass(frozen=True)
class Region:
    """Named contiguous slice of the layer list (half-open [start, stop))."""

    name: str
    start: int
    stop: int
    periods: float


@dataclass(frozen=True)
class LayerStack:
    """Ordered layers (top to bottom) between the ambient and the substrate.

    ``substrate=None`` continues the ambient medium below the layers (useful
    for free-standing test cases). Regions, when present, must partition the
    layer list top to bottom; a region named ``core`` must carry a strictly
    alternating +1/-1 nonlinear-sign pattern.
    """

    layers: tuple
    substrate: Composition | None = Composition(0.0)
    ambient_index: float = 1.0
    regions: tuple = ()

    def __post_init__(self):
        if self.ambient_index < 1.0:
            raise ValueError("ambient index below vacuum")
        if self.regions:
            pos = 0
            for reg in self.regions:
                if reg.start != pos or reg.stop <= reg.start:
                    raise ValueError("regions must partition the layer list in order")
                pos = reg.stop
                if reg.periods <= 0 or round(2 * reg.periods) != 2 * reg.periods:
                    raise ValueError(f"region '{reg.name}' has invalid period count {reg.periods}")
                n_layers = reg.stop - reg.start
                if n_layers != round(2 * reg.periods):
                    raise ValueError(
                        f"region '{reg.name}' declares {reg.periods} periods but "
                        f"holds {n_layers} layers"
                    )
            if pos != len(self.layers):
                raise ValueError("regions do not cover the whole layer list")
        core = self.region("core")
        if core is not None:
            signs = [ly.nonlinear_sign for ly in self.layers[core.start : core.stop]]
            if any(s == 0 for s in signs) or any(
                signs[i] == signs[i + 1] for i in range(len(signs) - 1)
            ):
                raise ValueError("core region must alternate nonlinear_sign +1/-1")

    def region(self, name: str) -> Region | None:
        for reg in self.regions:
            if reg.name == name:
                return reg
        return None

    def region_layers(self, name: str) -> tuple:
        reg = self.region(name)
        if reg is None:
            raise KeyError(f"stack has no region named '{name}'")
        return self.layers[reg.start : reg.stop]

    def total_thickness(self) -> float:
        return sum(ly.thickness_nm for ly in self.layers)


@dataclass(frozen=True)
class StackResponse:
    """Plane-wave response at one (wavelength, angle, polarization) point."""

    r: complex
    t: complex
    reflectance: float
    transmittance: float
    wavelength_nm: float
    theta_deg: float
    polarization: str


@dataclass(frozen=True)
class FieldProfile:
    """Tangential field amplitude vs depth for unit incident amplitude."""

    depth_nm: np.ndarray
    amplitude: np.ndarray
    wavelength_nm: float
    theta_deg: float
    polarization: str


@dataclass(frozen=True)
class ResonanceResult:
    wavelength_nm: float
    finesse: float
    t_up: float
    t_down: float
    reflectance_min: float
    fwhm_nm: float
    fsr_nm: float


# ---------------------------------------------------------------------------
# low-level engine on raw index arrays
# ---------------------------------------------------------------------------


def _cos_theta(n, n0_sin):
    """Cosine of the propagation angle inside a medium of index n."""
    return np.sqrt(1.0 - (n0_sin / n) ** 2 + 0j)


def _admittance(n, cos_t, pol):
    return n * cos_t if pol == TE else n / cos_t


def _char_matrix(n_list, t_list, n0_sin, wavelength, pol):
    """Product of per-layer characteristic matrices, top to bottom."""
    k0 = 2.0 * math.pi / wavelength
    m00, m01, m10, m11 = 1.0 + 0j, 0j, 0j, 1.0 + 0j
    for n, t in zip(n_list, t_list):
        ct = _cos_theta(n, n0_sin)
        eta = _admittance(n, ct, pol)
        d = k0 * n * ct * t
        c, s = np.cos(d), np.sin(d)
        a00, a01 = c, -1j * s / eta
        a10, a11 = -1j * eta * s, c
        m00, m01, m10, m11 = (
            m00 * a00 + m01 * a10,
            m00 * a01 + m01 * a11,
            m10 * a00 + m11 * a10,
            m10 * a01 + m11 * a11,
        )
    return np.array([[m00, m01], [m10, m11]])


def raw_response(n0, n_list, t_list, n_sub, wavelength, theta_deg, pol):
    """Fresnel response of an arbitrary index profile (low-level entry point)."""
    n0_sin = n0 * math.sin(math.radians(theta_deg))
    eta0 = _admittance(n0, _cos_theta(n0, n0_sin), pol)
    eta_sub = _admittance(n_sub, _cos_theta(n_sub, n0_sin), pol)
    m = _char_matrix(n_list, t_list, n0_sin, wavelength, pol)
    b = m[0, 0] + m[0, 1] * eta_sub
    c = m[1, 0] + m[1, 1] * eta_sub
    denom = eta0 * b + c
    r = (eta0 * b - c) / denom
    t = 2.0 * eta0 / denom
    reflectance = float(abs(r) ** 2)
    transmittance = float(4.0 * eta0.real * eta_sub.real / abs(denom) ** 2)
    return complex(r), complex(t), reflectance, transmittance


# ---------------------------------------------------------------------------
# stack-level operations
# ---------------------------------------------------------------------------


def layer_indices(s: LayerStack, wavelength, model: DispersionModel | None = None):
    """Per-layer refractive indices (below-gap real) at one wavelength."""
    cache = {}
    out = []
    for ly in s.layers:
        key = ly.composition.x
        if key not in cache:
            cache[key] = materials.refractive_index(ly.composition, wavelength, model)
        out.append(cache[key])
    return np.array(out)


def substrate_index(s: LayerStack, wavelength, model: DispersionModel | None = None):
    """Substrate index; complex above the gap (the substrate may absorb)."""
    if s.substrate is None:
        return complex(s.ambient_index)
    m = model or materials.DEFAULT_MODEL
    try:
        return complex(m.evaluate(s.substrate.x, wavelength))
    except materials.AboveBandgap:
        return m.evaluate_complex(s.substrate.x, wavelength)


def stack_response(
    s: LayerStack,
    wavelength: float,
    theta_deg: float = 0.0,
    pol: str = TE,
    model: DispersionModel | None = None,
) -> StackResponse:
    n_list = layer_indices(s, wavelength, model)
    t_list = [ly.thickness_nm for ly in s.layers]
    n_sub = substrate_index(s, wavelength, model)
    r, t, R, T = raw_response(s.ambient_index, n_list, t_list, n_sub, wavelength, theta_deg, pol)
    return StackResponse(r, t, R, T, wavelength, theta_deg, pol)


def characteristic_matrix(
    s: LayerStack,
    wavelength: float,
    theta_deg: float = 0.0,
    pol: str = TE,
    layer_slice: slice | None = None,
    model: DispersionModel | None = None,
):
    """2x2 characteristic matrix of the stack (or a slice of its layers)."""
    n_list = layer_indices(s, wavelength, model)
    t_list = np.array([ly.thickness_nm for ly in s.layers])
    if layer_slice is not None:
        n_list = n_list[layer_slice]
        t_list = t_list[layer_slice]
    n0_sin = s.ambient_index * math.sin(math.radians(theta_deg))
    return _char_matrix(n_list, t_list, n0_sin, wavelength, pol)


def layer_amplitudes(
    s: LayerStack,
    wavelength: float,
    theta_deg: float = 0.0,
    pol: str = TE,
    model: DispersionModel | None = None,
):
    """Forward/backward wave amplitudes (A, B) at the top of every medium.

    Returns a list of (A, B, kz, eta) tuples for ambient, each layer, and the
    substrate (B = 0 there), normalized to unit incident amplitude. The net
    downward flux Re(eta) (|A|^2 - |B|^2) is conserved through lossless media.
    """
    k0 = 2.0 * math.pi / wavelength
    n_list = layer_indices(s, wavelength, model)
    t_list = [ly.thickness_nm for ly in s.layers]
    n_sub = substrate_index(s, wavelength, model)
    n0_sin = s.ambient_index * math.sin(math.radians(theta_deg))
    r, _, _, _ = raw_response(s.ambient_index, n_list, t_list, n_sub, wavelength, theta_deg, pol)

    ct0 = _cos_theta(s.ambient_index, n0_sin)
    eta0 = _admittance(s.ambient_index + 0j, ct0, pol)
    out = [(1.0 + 0j, complex(r), k0 * s.ambient_index * ct0, eta0)]
    a_prev, b_prev, eta_prev = 1.0 + 0j, complex(r), eta0
    for n, t_nm in zip(n_list, t_list):
        ct = _cos_theta(n, n0_sin)
        eta = _admittance(n, ct, pol)
        # tangential (F, G) continuity across the interface
        f = a_prev + b_prev
        g = eta_prev * (a_prev - b_prev)
        a = 0.5 * (f + g / eta)
        b = 0.5 * (f - g / eta)
        kz = k0 * n * ct
        out.append((a, b, kz, eta))
        a_prev = a * np.exp(1j * kz * t_nm)
        b_prev = b * np.exp(-1j * kz * t_nm)
        eta_prev = eta
    ct_sub = _cos_theta(n_sub, n0_sin)
    eta_sub = _admittance(n_sub, ct_sub, pol)
    f = a_prev + b_prev
    g = eta_prev * (a_prev - b_prev)
    out.append((0.5 * (f + g / eta_sub), 0j, k0 * n_sub * ct_sub, eta_sub))
    return out


def field_profile(
    s: LayerStack,
    wavelength: float,
    theta_deg: float = 0.0,
    pol: str = TE,
    model: DispersionModel | None = None,
    points_per_layer: int = 12,
    pad_nm: float = 200.0,
) -> FieldProfile:
    """Tangential field amplitude through the stack for unit incident amplitude.

    Per-layer forward/backward amplitudes come from the same matrix cascade as
    the reflectivity; each layer is sampled at >= ``points_per_layer`` points
    including both of its boundaries, plus evanescent/propagating tails of
    ``pad_nm`` in the ambient and substrate.
    """
    amps_per_medium = layer_amplitudes(s, wavelength, theta_deg, pol, model)
    t_list = [ly.thickness_nm for ly in s.layers]

    depths, amps = [], []
    a0, b0, kz0, _ = amps_per_medium[0]
    if pad_nm > 0:
        x = np.linspace(-pad_nm, 0.0, max(2, points_per_layer))
        depths.append(x)
        amps.append(a0 * np.exp(1j * kz0 * x) + b0 * np.exp(-1j * kz0 * x))

    z = 0.0
    for (a, b, kz, _), t_nm in zip(amps_per_medium[1:-1], t_list):
        x_local = np.linspace(0.0, t_nm, max(points_per_layer, 2))
        depths.append(z + x_local)
        amps.append(a * np.exp(1j * kz * x_local) + b * np.exp(-1j * kz * x_local))
        z += t_nm

    a_sub, _, kz_sub, _ = amps_per_medium[-1]
    if pad_nm > 0:
        x = np.linspace(0.0, pad_nm, max(2, points_per_layer))
        depths.append(z + x)
        amps.append(a_sub * np.exp(1j * kz_sub * x))

    return FieldProfile(
        depth_nm=np.concatenate(depths),
        amplitude=np.concatenate(amps),
        wavelength_nm=wavelength,
        theta_deg=theta_deg,
        polarization=pol,
    )


def core_intensity(
    s: LayerStack,
    wavelength: float,
    theta_deg: float = 0.0,
    pol: str = TE,
    model: DispersionModel | None = None,
) -> float:
    """Peak |field|^2 inside the core region for unit incident intensity."""
    reg = s.region("core")
    if reg is None:
        raise KeyError("stack has no region named 'core'")
    start = sum(ly.thickness_nm for ly in s.layers[: reg.start])
    stop = start + sum(ly.thickness_nm for ly in s.layers[reg.start : reg.stop])
    prof = field_profile(s, wavelength, theta_deg, pol, model, pad_nm=0.0)
    mask = (prof.depth_nm >= start) & (prof.depth_nm <= stop)
    return float(np.max(np.abs(prof.amplitude[mask]) ** 2))


# ---------------------------------------------------------------------------
# resonance search
# ---------------------------------------------------------------------------


def _golden_minimize(fun, a, b, xtol):
    """Golden-section minimum of a unimodal scalar function on [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while (b - a) > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return (a + b) / 2.0


def _core_mean_index(s: LayerStack, wavelength, model):
    core = s.region_layers("core")
    num = sum(
        materials.refractive_index(ly.composition, wavelength, model) * ly.thickness_nm
        for ly in core
    )
    return num / sum(ly.thickness_nm for ly in core)


def _mirror_reflection(s, reg_name, wavelength, theta_deg, pol, model, from_core):
    """Complex r of one DBR sub-stack as seen from the cavity core or from outside."""
    reg = s.region(reg_name)
    layers = s.layers[reg.start : reg.stop]
    n_list = [materials.refractive_index(ly.composition, wavelength, model) for ly in layers]
    t_list = [ly.thickness_nm for ly in layers]
    n_core = _core_mean_index(s, wavelength, model)
    n0_sin = s.ambient_index * math.sin(math.radians(theta_deg))
    # incidence angle is defined in air; convert to the local medium via
    # conserved transverse momentum (n0 sin(theta) fixed)
    if reg_name == "top_dbr":
        if from_core:
            n_in, n_out = n_core, complex(s.ambient_index)
            n_list, t_list = n_list[::-1], t_list[::-1]
        else:
            n_in, n_out = s.ambient_index, n_core
    else:
        n_in = n_core if from_core else substrate_index(s, wavelength, model)
        n_out = substrate_index(s, wavelength, model) if from_core else n_core
        if not from_core:
            n_list, t_list = n_list[::-1], t_list[::-1]
    theta_local = math.degrees(math.asin(n0_sin / abs(n_in))) if abs(n_in) else 0.0
    r, t, R, T = raw_response(n_in, n_list, t_list, n_out, wavelength, theta_local, pol)
    return r, T


def _round_trip_phase(s, wavelength, theta_deg, pol, model):
    core = s.region_layers("core")
    k0 = 2.0 * math.pi / wavelength
    n0_sin = s.ambient_index * math.sin(math.radians(theta_deg))
    opl = sum(
        (
            materials.refractive_index(ly.composition, wavelength, model)
            * ly.thickness_nm
            * _cos_theta(
                materials.refractive_index(ly.composition, wavelength, model), n0_sin
            ).real
        )
        for ly in core
    )
    r_up, _ = _mirror_reflection(s, "top_dbr", wavelength, theta_deg, pol, model, from_core=True)
    r_dn, _ = _mirror_reflection(s, "bottom_dbr", wavelength, theta_deg, pol, model, from_core=True)
    return 2.0 * k0 * opl, r_up, r_dn


def find_resonance(
    s: LayerStack,
    lambda_window: tuple,
    theta_deg: float = 0.0,
    pol: str = TE,
    model: DispersionModel | None = None,
    scan_step_nm: float = 0.05,
    prominence: float = 5e-4,
) -> ResonanceResult:
    """Locate the cavity resonance in a window holding exactly one R dip.

    The resonance wavelength is the reflectance minimum (golden-section
    refined to 1e-3 nm). The finesse is FSR / FWHM where the FWHM is read off
    the core field-intensity resonance curve and the free spectral range comes
    from the slope of the cavity round-trip phase at resonance (the window
    holds a single dip, so peak-to-peak spacing is not available). T_up and
    T_down are the transmittances of the two DBR sub-stacks evaluated alone at
    the resonance wavelength.
    """
    lo, hi = lambda_window
    if not (hi > lo):
        raise ValueError("empty wavelength window")
    lams = np.arange(lo, hi + scan_step_nm / 2, scan_step_nm)
    refl = np.array([stack_response(s, lam, theta_deg, pol, model).reflectance for lam in lams])
    idx, _ = find_peaks(-refl, prominence=prominence)
    if len(idx) == 0:
        raise NoResonanceInWindow(f"no reflectance dip in [{lo}, {hi}] nm")
    if len(idx) > 1:
        raise MultipleResonances(f"{len(idx)} reflectance dips in [{lo}, {hi}] nm")
    i = int(idx[0])

    def refl_at(lam):
        return stack_response(s, lam, theta_deg, pol, model).reflectance

    lam_res = _golden_minimize(refl_at, lams[max(i - 1, 0)], lams[min(i + 1, len(lams) - 1)], 1e-3)
    r_min = refl_at(lam_res)

    # FWHM of the core intensity resonance
    def intensity(lam):
        return core_intensity(s, lam, theta_deg, pol, model)

    peak = intensity(lam_res)
    half = peak / 2.0

    def crossing(direction):
        step = 0.1 * direction
        lam_in, lam_out = lam_res, lam_res + step
        while intensity(lam_out) > half:
            lam_in = lam_out
            lam_out += step
            if abs(lam_out - lam_res) > (hi - lo):
                raise NoResonanceInWindow("core resonance half-width exceeds the window")
        for _ in range(40):
            mid = 0.5 * (lam_in + lam_out)
            if intensity(mid) > half:
                lam_in = mid
            else:
                lam_out = mid
        return 0.5 * (lam_in + lam_out)

    fwhm = crossing(+1.0) - crossing(-1.0)

    # FSR from the round-trip phase slope (central difference, wrap-safe)
    h = 0.05
    prop_p, up_p, dn_p = _round_trip_phase(s, lam_res + h, theta_deg, pol, model)
    prop_m, up_m, dn_m = _round_trip_phase(s, lam_res - h, theta_deg, pol, model)
    dphi = (prop_p - prop_m) + np.angle(up_p / up_m) + np.angle(dn_p / dn_m)
    fsr = 2.0 * math.pi / abs(dphi / (2.0 * h))

    _, t_up = _mirror_reflection(s, "top_dbr", lam_res, theta_deg, pol, model, from_core=True)
    _, t_down = _mirror_reflection(s, "bottom_dbr", lam_res, theta_deg, pol, model, from_core=True)

    return ResonanceResult(
        wavelength_nm=float(lam_res),
        finesse=float(fsr / fwhm),
        t_up=float(t_up),
        t_down=float(t_down),
        reflectance_min=float(r_min),
        fwhm_nm=float(fwhm),
        fsr_nm=float(fsr),
    )


# ---------------------------------------------------------------------------
# nominal device
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DesignParams:
    """Nominal device recipe: two quarter-wave DBRs around a QPM core.

    DBR unit cells are listed top to bottom as (low, high) so that the layer
    adjacent to the core is the high-index one for the top mirror and the
    low-index one for the bottom mirror; with the default quarter-wave rule
    this parity puts the cavity resonance at the design wavelength.
    """

    pump_wavelength_nm: float = 760.0
    top_periods: float = 18
    core_periods: float = 4.5
    bottom_periods: float = 41
    dbr_low: Composition = Composition(0.90)
    dbr_high: Composition = Composition(0.35)
    core_a: Composition = Composition(0.25)
    core_b: Composition = Composition(0.80)
    substrate: Composition = Composition(0.0)
    core_thickness_nm: float | None = None  # None -> quarter-wave at mean core index


def quarter_wave_thickness(c: Composition, design_wavelength: float, model=None) -> float:
    return design_wavelength / (4.0 * materials.refractive_index(c, design_wavelength, model))


def build_paper_stack(
    params: DesignParams = DesignParams(), model: DispersionModel | None = None
) -> LayerStack:
    """Assemble the nominal structure: upper DBR, QPM core, lower DBR, substrate."""
    p = params
    for label, periods in (
        ("top", p.top_periods),
        ("core", p.core_periods),
        ("bottom", p.bottom_periods),
    ):
        if periods <= 0 or round(2 * periods) != 2 * periods:
            raise InvalidDesignParams(f"{label} period count {periods} is not a half-integer > 0")
    if p.pump_wavelength_nm <= 0:
        raise InvalidDesignParams("pump design wavelength must be positive")
    if p.dbr_low == p.dbr_high or p.core_a == p.core_b:
        raise InvalidDesignParams("paired compositions must differ")

    lam = p.pump_wavelength_nm
    try:
        t_low = quarter_wave_thickness(p.dbr_low, lam, model)
        t_high = quarter_wave_thickness(p.dbr_high, lam, model)
        n_core = 0.5 * (
            materials.refractive_index(p.core_a, lam, model)
            + materials.refractive_index(p.core_b, lam, model)
        )
    except (materials.OutOfValidityWindow, materials.AboveBandgap) as exc:
        raise InvalidDesignParams(f"dispersion model rejects the design point: {exc}") from exc
    t_core = p.core_thickness_nm if p.core_thickness_nm is not None else lam / (4.0 * n_core)

    def repeat(cell, periods):
        full = int(periods)
        out = list(cell) * full
        if periods != full:  # trailing half period = first layer of the cell
            out.append(cell[0])
        return out

    top = repeat([Layer(p.dbr_low, t_low), Layer(p.dbr_high, t_high)], p.top_periods)
    core = repeat([Layer(p.core_a, t_core, +1), Layer(p.core_b, t_core, -1)], p.core_periods)
    bottom = repeat([Layer(p.dbr_low, t_low), Layer(p.dbr_high, t_high)], p.bottom_periods)

    layers = tuple(top + core + bottom)
    regions = (
        Region("top_dbr", 0, len(top), p.top_periods),
        Region("core", len(top), len(top) + len(core), p.core_periods),
        Region(
            "bottom_dbr",
            len(top) + len(core),
            len(top) + len(core) + len(bottom),
            p.bottom_periods,
        ),
    )
    return LayerStack(layers=layers, substrate=p.substrate, regions=regions)
