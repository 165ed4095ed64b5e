import math

import pytest

from slitloops import ConfigError, ErrorBudget, MaterialDefaults, error_budget, preset, validate
from slitloops.errorbudget import fraunhofer_error, metal_transmission_error, stationary_phase_error


def test_metal_plug_in():
    assert metal_transmission_error(1.0, 1.0) == pytest.approx(math.exp(-2 * math.pi), rel=1e-15)
    assert metal_transmission_error(2.61, 0.0) == 1.0


@pytest.mark.parametrize("alpha, zeta", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.5)])
def test_metal_domain(alpha, zeta):
    with pytest.raises(ConfigError):
        metal_transmission_error(alpha, zeta)


def test_photon_components(photon):
    # hand values: zeta = 1 um / 810 nm; k = 2 pi / 810 nm; extent = d + w/2
    zeta = 1e-6 / 810e-9
    k = 2 * math.pi / 810e-9
    b = error_budget(photon)
    assert b.metal_transmission_rel == pytest.approx(math.exp(-2 * math.pi * 2.61 * zeta), rel=1e-12)
    assert b.metal_transmission_rel == pytest.approx(1.61e-9, rel=1e-2)
    assert b.stationary_phase_rel == pytest.approx(3 / (0.18 * k), rel=1e-12)
    assert b.fraunhofer_rel == pytest.approx(115e-6 / 0.18, rel=1e-12)
    assert b.kappa_rel_leading == b.fraunhofer_rel
    assert b.leading_source == "fraunhofer"
    assert b.warnings() == []


def test_component_functions_agree(photon):
    b = error_budget(photon)
    assert stationary_phase_error(photon) == b.stationary_phase_rel
    assert fraunhofer_error(photon) == b.fraunhofer_rel


def test_microwave_is_dominated_by_thin_plate(microwave):
    b = error_budget(microwave)
    assert b.metal_transmission_rel > 0.99
    assert b.leading_source == "metal_transmission"
    assert any("metal_transmission_rel" in w for w in b.warnings())


def test_thicker_plate_lowers_metal_term(photon):
    thin = error_budget(photon).metal_transmission_rel
    thick = error_budget(photon, MaterialDefaults(thickness_m=2e-6)).metal_transmission_rel
    assert thick == pytest.approx(thin**2, rel=1e-10)


def test_budget_invariants():
    with pytest.raises(ValueError):
        ErrorBudget(-1e-3, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        ErrorBudget(1e-3, 2e-3, 0.0, 1e-3)
    assert ErrorBudget(1e-3, 2e-3, 0.0, 2e-3).as_dict()["leading_source"] == "stationary_phase"


def test_material_validation():
    with pytest.raises(ConfigError):
        MaterialDefaults(attenuation=0.0)
    with pytest.raises(ConfigError):
        MaterialDefaults(thickness_m=-1.0)


def test_needs_validated_setup():
    with pytest.raises(TypeError):
        error_budget(preset("photon"))
