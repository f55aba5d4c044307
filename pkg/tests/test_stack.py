import math

import numpy as np
import pytest

from twinsource.errors import (
    InvalidDesignParams,
    MultipleResonances,
    NoResonanceInWindow,
)
from twinsource.materials import Composition, refractive_index
from twinsource.stack import (
    TE,
    TM,
    DesignParams,
    Layer,
    LayerStack,
    build_paper_stack,
    characteristic_matrix,
    core_intensity,
    field_profile,
    find_resonance,
    layer_amplitudes,
    quarter_wave_thickness,
    raw_response,
    stack_response,
)


def quarter_wave_oracle_reflectance(n_h, n_l, n_sub, pairs):
    """Closed-form reflectance of an ideal (H L)^N quarter-wave mirror from air."""
    y = (n_h / n_l) ** (2 * pairs) * n_sub
    return ((1.0 - y) / (1.0 + y)) ** 2


def test_fresnel_single_interface_normal_incidence():
    s = LayerStack(layers=(), substrate=Composition(0.0))
    resp = stack_response(s, 1520.0)
    n2 = refractive_index(Composition(0.0), 1520.0)
    assert resp.r == pytest.approx((1 - n2) / (1 + n2), abs=1e-12)


def test_quarter_wave_mirror_against_closed_form():
    lam = 760.0
    n_h = refractive_index(Composition(0.35), lam)
    n_l = refractive_index(Composition(0.90), lam)
    for pairs in (1, 3, 10, 25, 41):
        n_list = [n_h, n_l] * pairs
        t_list = [lam / (4 * n_h), lam / (4 * n_l)] * pairs
        _, _, refl, _ = raw_response(1.0, n_list, t_list, 3.5, lam, 0.0, TE)
        assert refl == pytest.approx(
            quarter_wave_oracle_reflectance(n_h, n_l, 3.5, pairs), abs=1e-9
        )


@pytest.mark.parametrize("pol", [TE, TM])
@pytest.mark.parametrize("theta", [0.0, 13.0, 41.0])
def test_energy_conservation_lossless(paper_stack, pol, theta):
    resp = stack_response(paper_stack, 1520.0, theta, pol)
    assert resp.reflectance + resp.transmittance == pytest.approx(1.0, abs=1e-9)


def test_energy_conservation_with_absorbing_substrate(paper_stack):
    # at the pump the GaAs substrate absorbs; layers stay lossless so the
    # flux entering the substrate still closes the budget
    resp = stack_response(paper_stack, 760.0, 0.0, TE)
    assert resp.reflectance + resp.transmittance == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("pol", [TE, TM])
def test_reciprocity_of_transmittance(pol):
    n_list = [3.2, 2.9, 3.4, 3.0]
    t_list = [120.0, 260.0, 90.0, 300.0]
    theta = 23.0
    _, _, _, t_fwd = raw_response(1.0, n_list, t_list, 3.3, 1520.0, theta, pol)
    theta_back = math.degrees(math.asin(math.sin(math.radians(theta)) / 3.3))
    _, _, _, t_back = raw_response(3.3, n_list[::-1], t_list[::-1], 1.0, 1520.0, theta_back, pol)
    assert t_fwd == pytest.approx(t_back, abs=1e-12)


def test_characteristic_matrix_cascades(paper_stack):
    whole = characteristic_matrix(paper_stack, 1520.0, 7.0, TM)
    top = characteristic_matrix(paper_stack, 1520.0, 7.0, TM, layer_slice=slice(0, 50))
    rest = characteristic_matrix(paper_stack, 1520.0, 7.0, TM, layer_slice=slice(50, None))
    assert np.allclose(whole, top @ rest, rtol=1e-12, atol=1e-12)


# --- nominal structure ------------------------------------------------------


def test_paper_stack_layer_count(paper_stack):
    assert len(paper_stack.layers) == 127  # 2*18 + 2*4.5 + 2*41


def test_paper_stack_core_signs_alternate(paper_stack):
    signs = [ly.nonlinear_sign for ly in paper_stack.region_layers("core")]
    assert len(signs) == 9
    assert signs == [1, -1, 1, -1, 1, -1, 1, -1, 1]


def test_quarter_wave_rule_thickness_ordering(paper_stack):
    top = paper_stack.region_layers("top_dbr")
    low = {ly.thickness_nm for ly in top if ly.composition.x == 0.90}
    high = {ly.thickness_nm for ly in top if ly.composition.x == 0.35}
    assert len(low) == len(high) == 1
    assert low.pop() > high.pop()  # lower index -> thicker quarter wave


def test_quarter_wave_thickness_value():
    t = quarter_wave_thickness(Composition(0.35), 760.0)
    assert t == pytest.approx(760.0 / (4 * 3.4751169612138712), abs=1e-9)


def test_invalid_design_params():
    with pytest.raises(InvalidDesignParams):
        build_paper_stack(DesignParams(top_periods=0))
    with pytest.raises(InvalidDesignParams):
        build_paper_stack(DesignParams(core_periods=1.3))
    with pytest.raises(InvalidDesignParams):
        build_paper_stack(DesignParams(pump_wavelength_nm=-5.0))
    with pytest.raises(InvalidDesignParams):
        build_paper_stack(DesignParams(dbr_low=Composition(0.35)))


def test_region_invariants_enforced():
    good = build_paper_stack()
    with pytest.raises(ValueError):
        LayerStack(layers=good.layers[:-1], regions=good.regions)  # uncovered tail
    bad_core = tuple(
        Layer(ly.composition, ly.thickness_nm, 1) for ly in good.layers
    )
    with pytest.raises(ValueError):
        LayerStack(layers=bad_core, regions=good.regions)  # signs not alternating


# --- fields -----------------------------------------------------------------


def test_field_profile_free_space_is_uniform():
    s = LayerStack(layers=(), substrate=None)
    prof = field_profile(s, 1520.0)
    assert np.allclose(np.abs(prof.amplitude), 1.0, atol=1e-12)


def test_field_profile_continuous_at_interfaces(paper_stack, resonance):
    prof = field_profile(paper_stack, resonance.wavelength_nm)
    dup = np.nonzero(np.diff(prof.depth_nm) == 0)[0]
    assert len(dup) >= len(paper_stack.layers)
    jumps = np.abs(prof.amplitude[dup + 1] - prof.amplitude[dup])
    assert jumps.max() < 1e-8


def test_core_intensity_enhancement_at_resonance(paper_stack, resonance):
    enhancement = core_intensity(paper_stack, resonance.wavelength_nm)
    assert enhancement > 10.0
    # regression pin for the nominal design
    assert enhancement == pytest.approx(18.6, rel=0.05)


def test_net_flux_constant_through_lossless_stack(paper_stack):
    amps = layer_amplitudes(paper_stack, 1520.0, 17.0, TE)
    fluxes = [(eta.real * (abs(a) ** 2 - abs(b) ** 2)) for a, b, _, eta in amps]
    assert np.allclose(fluxes, fluxes[0], rtol=1e-9, atol=1e-12)


# --- resonance --------------------------------------------------------------


def test_resonance_near_design_wavelength(resonance):
    assert abs(resonance.wavelength_nm - 760.0) < 5.0
    assert resonance.finesse > 1.0
    assert resonance.fwhm_nm > 0
    assert resonance.fsr_nm > resonance.fwhm_nm


def test_mirror_transmissions_ordering(resonance):
    # 41 bottom pairs vs 18 top pairs
    assert resonance.t_down < resonance.t_up
    assert 0.0 < resonance.t_down < 0.01
    assert 0.05 < resonance.t_up < 0.5


def test_resonance_stable_under_window_widening(paper_stack, resonance):
    wider = find_resonance(paper_stack, (745.0, 775.0))
    assert wider.wavelength_nm == pytest.approx(resonance.wavelength_nm, abs=1e-3)


def test_no_resonance_in_flat_window():
    # a single DBR has no cavity dip
    mirror = build_paper_stack(DesignParams(top_periods=1, core_periods=0.5, bottom_periods=20))
    with pytest.raises((NoResonanceInWindow, MultipleResonances)):
        find_resonance(mirror, (755.0, 765.0))


def test_multiple_resonances_detected(paper_stack):
    # widening into the stopband edges brings the band-edge dips into view
    with pytest.raises(MultipleResonances):
        find_resonance(paper_stack, (728.0, 815.0))
