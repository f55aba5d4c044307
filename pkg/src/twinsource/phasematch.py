"""Energy and longitudinal-momentum conservation for the counterpropagating
geometry.

A pump photon impinging at angle ``theta`` (in air, degrees) splits into a
guided signal photon copropagating with the in-plane pump momentum and a
counterpropagating guided idler. The emitted wavelengths satisfy

    1/lambda_s + 1/lambda_i = 1/lambda_p                     (energy)
    k_p sin(theta) = n_s k_s - n_i k_i                       (momentum, z)

with vacuum wavenumbers k = 2 pi / lambda and the signal/idler effective
indices taken at their own wavelengths. Two type-II interactions exist:
interaction 1 has a TE copropagating photon (TM counterpropagating),
interaction 2 the reverse. theta > 0 tilts the pump momentum toward +z.

Effective indices are evaluated per candidate wavelength inside the root
loop through a dense spline table of direct mode solves (exact at 2 nm
knots, interpolation error orders of magnitude below the momentum residual
tolerance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import materials
from .errors import NoSolutionInWindow
from .modes import EffectiveIndexTable
from .stack import TE, TM, LayerStack

MOMENTUM_RTOL = 1e-9  # residual bound, relative to k_p
SEARCH_HALF_WINDOW_NM = 150.0
TABLE_STEP_NM = 2.0
TABLE_PAD_NM = 40.0


@dataclass(frozen=True)
class Interaction:
    """One of the two equally probable type-II polarization assignments."""

    id: int
    copropagating_pol: str
    counterpropagating_pol: str

    def __post_init__(self):
        valid = {(1, TE, TM), (2, TM, TE)}
        if (self.id, self.copropagating_pol, self.counterpropagating_pol) not in valid:
            raise ValueError(
                "interaction 1 copropagates TE, interaction 2 copropagates TM"
            )


INTERACTION_1 = Interaction(1, TE, TM)
INTERACTION_2 = Interaction(2, TM, TE)


def interaction(id_: int) -> Interaction:
    if id_ == 1:
        return INTERACTION_1
    if id_ == 2:
        return INTERACTION_2
    raise ValueError(f"interaction id must be 1 or 2, got {id_}")


@dataclass(frozen=True)
class PhaseMatchPoint:
    """One solved operating point: pump angle/wavelength and the pair it emits."""

    theta_deg: float
    lambda_p_nm: float
    interaction: Interaction
    lambda_s_nm: float
    lambda_i_nm: float
    n_s: float
    n_i: float

    @property
    def momentum_residual(self) -> float:
        """k_p sin(theta) - (n_s k_s - n_i k_i), in rad/nm."""
        k_p = 2.0 * math.pi / self.lambda_p_nm
        return (
            k_p * math.sin(math.radians(self.theta_deg))
            - self.n_s * 2.0 * math.pi / self.lambda_s_nm
            + self.n_i * 2.0 * math.pi / self.lambda_i_nm
        )


def conjugate_wavelength(lambda_p: float, lambda_s):
    """Idler wavelength paired with lambda_s by energy conservation."""
    inv = 1.0 / lambda_p - 1.0 / np.asarray(lambda_s, dtype=float)
    if np.any(inv <= 0):
        raise ValueError(f"signal {lambda_s} nm carries more energy than the pump")
    return float(1.0 / inv) if np.isscalar(lambda_s) else 1.0 / inv


class PhaseMatcher:
    """Caches per-polarization effective-index tables for one stack."""

    def __init__(
        self,
        s: LayerStack,
        model=None,
        substrate_policy: str = "auto",
        table_step_nm: float = TABLE_STEP_NM,
    ):
        self.stack = s
        self.model = model
        self.substrate_policy = substrate_policy
        self.table_step_nm = table_step_nm
        self._tables: dict[str, EffectiveIndexTable] = {}

    def _ensure(self, pol: str, lo: float, hi: float) -> EffectiveIndexTable:
        tab = self._tables.get(pol)
        if tab is None or lo < tab.lambda_min or hi > tab.lambda_max:
            new_lo = min(lo, tab.lambda_min if tab else lo) - TABLE_PAD_NM
            new_hi = max(hi, tab.lambda_max if tab else hi) + TABLE_PAD_NM
            tab = EffectiveIndexTable(
                self.stack,
                pol,
                new_lo,
                new_hi,
                step_nm=self.table_step_nm,
                model=self.model,
                substrate_policy=self.substrate_policy,
            )
            self._tables[pol] = tab
        return tab

    def n_eff(self, pol: str, wavelength):
        lam = np.asarray(wavelength, dtype=float)
        tab = self._ensure(pol, float(lam.min()), float(lam.max()))
        return tab.n_eff(wavelength)

    def n_group(self, pol: str, wavelength):
        lam = np.asarray(wavelength, dtype=float)
        tab = self._ensure(pol, float(lam.min()), float(lam.max()))
        return tab.n_group(wavelength)

    # -- momentum mismatch ---------------------------------------------------

    def delta_k(self, lambda_s, theta_deg: float, lambda_p: float, inter: Interaction):
        """Longitudinal mismatch k_p sin(theta) - (n_s k_s - n_i k_i), rad/nm.

        Vanishes at the phase-matched signal wavelength; accepts arrays.
        """
        lam_s = np.asarray(lambda_s, dtype=float)
        lam_i = 1.0 / (1.0 / lambda_p - 1.0 / lam_s)
        if np.any(lam_i <= 0):
            raise ValueError("signal wavelength(s) above the pump photon energy")
        n_s = self.n_eff(inter.copropagating_pol, lam_s)
        n_i = self.n_eff(inter.counterpropagating_pol, lam_i)
        k_p = 2.0 * math.pi / lambda_p
        dk = (
            k_p * math.sin(math.radians(theta_deg))
            - n_s * 2.0 * math.pi / lam_s
            + n_i * 2.0 * math.pi / lam_i
        )
        return float(dk) if np.isscalar(lambda_s) else dk

    def solve_pair(
        self,
        theta_deg: float,
        lambda_p: float,
        inter: Interaction,
        half_window_nm: float = SEARCH_HALF_WINDOW_NM,
    ) -> PhaseMatchPoint:
        """Solve momentum conservation for the signal wavelength at one angle.

        Brackets the (monotone) mismatch over +/- half_window_nm around the
        degeneracy wavelength 2 lambda_p, widening once on failure.
        """
        if not abs(theta_deg) < 90.0:
            raise ValueError("pump incidence angle must satisfy |theta| < 90 deg")
        k_p = 2.0 * math.pi / lambda_p
        center = 2.0 * lambda_p
        half = half_window_nm
        for attempt in range(2):
            lo = max(center - half, 1.05 * lambda_p)
            hi = center + half
            # reserve the whole bracket (and its energy conjugate) up front so
            # the index tables are built once, not grown per evaluation
            self._ensure(inter.copropagating_pol, lo, hi)
            self._ensure(
                inter.counterpropagating_pol,
                conjugate_wavelength(lambda_p, hi),
                conjugate_wavelength(lambda_p, lo),
            )
            f_lo = self.delta_k(lo, theta_deg, lambda_p, inter)
            f_hi = self.delta_k(hi, theta_deg, lambda_p, inter)
            if f_lo == 0.0:
                lam_s = lo
                break
            if f_hi == 0.0:
                lam_s = hi
                break
            if (f_lo < 0) != (f_hi < 0):
                lam_s = brentq(
                    lambda x: self.delta_k(x, theta_deg, lambda_p, inter),
                    lo,
                    hi,
                    xtol=1e-10,
                    rtol=8.9e-16,
                )
                break
            half *= 2.0
        else:
            raise NoSolutionInWindow(
                f"no phase-matched signal within +/-{half / 2:.0f} nm of "
                f"{center:.1f} nm (theta={theta_deg} deg, interaction {inter.id})"
            )
        residual = self.delta_k(lam_s, theta_deg, lambda_p, inter)
        if abs(residual) > MOMENTUM_RTOL * k_p:
            raise NoSolutionInWindow(
                f"root polish stalled: |residual| = {abs(residual):.3e} rad/nm"
            )
        lam_i = conjugate_wavelength(lambda_p, lam_s)
        return PhaseMatchPoint(
            theta_deg=theta_deg,
            lambda_p_nm=lambda_p,
            interaction=inter,
            lambda_s_nm=float(lam_s),
            lambda_i_nm=float(lam_i),
            n_s=float(self.n_eff(inter.copropagating_pol, lam_s)),
            n_i=float(self.n_eff(inter.counterpropagating_pol, lam_i)),
        )

    def degeneracy_angle(self, inter: Interaction, lambda_p: float) -> float:
        """Angle at which the pair degenerates to 2 lambda_p, in degrees.

        At degeneracy k_s = k_i = k_p/2, so sin(theta) = (n_s - n_i)/2
        directly from the momentum equation (no iteration).
        """
        lam_deg = 2.0 * lambda_p
        n_s = self.n_eff(inter.copropagating_pol, lam_deg)
        n_i = self.n_eff(inter.counterpropagating_pol, lam_deg)
        return math.degrees(math.asin((n_s - n_i) / 2.0))

    def tuning_curve(self, theta_deg_values, lambda_p: float):
        """solve_pair swept over angles for both interactions.

        Per-point failures are recorded and the sweep continues. Returns
        (points, failures) where failures is a list of
        (theta_deg, interaction_id, message).
        """
        points, failures = [], []
        for inter in (INTERACTION_1, INTERACTION_2):
            for theta in theta_deg_values:
                try:
                    points.append(self.solve_pair(float(theta), lambda_p, inter))
                except Exception as exc:  # noqa: BLE001 - per-point error capture
                    failures.append((float(theta), inter.id, str(exc)))
        return points, failures


# ---------------------------------------------------------------------------
# module-level convenience wrappers (one cached matcher per stack)
# ---------------------------------------------------------------------------

_MATCHERS: dict = {}


def matcher_for(s: LayerStack, model=None, substrate_policy: str = "auto") -> PhaseMatcher:
    # models are registry singletons, so the name identifies one faithfully
    key = (s, (model or materials.DEFAULT_MODEL).name, substrate_policy)
    if key not in _MATCHERS:
        if len(_MATCHERS) > 8:
            _MATCHERS.clear()
        _MATCHERS[key] = PhaseMatcher(s, model, substrate_policy)
    return _MATCHERS[key]


def solve_pair(theta_deg, lambda_p, inter: Interaction, s: LayerStack, **kw) -> PhaseMatchPoint:
    return matcher_for(s, **kw).solve_pair(theta_deg, lambda_p, inter)


def degeneracy_angle(inter: Interaction, lambda_p, s: LayerStack, **kw) -> float:
    return matcher_for(s, **kw).degeneracy_angle(inter, lambda_p)


def tuning_curve(theta_deg_values, lambda_p, s: LayerStack, **kw):
    return matcher_for(s, **kw).tuning_curve(theta_deg_values, lambda_p)


def delta_k(lambda_s, theta_deg, lambda_p, inter: Interaction, s: LayerStack, **kw):
    return matcher_for(s, **kw).delta_k(lambda_s, theta_deg, lambda_p, inter)
