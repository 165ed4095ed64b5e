"""Analytic error estimates for kappa.

Each source is estimated separately as a relative error on the kernels, one
function per source.  The leading error on kappa is taken as the largest.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import ConfigError
from .experiment import require_validated

# a far-field component above this is reported as a warning
LARGE_COMPONENT = 1e-2


@dataclass(frozen=True)
class MaterialDefaults:
    """Optical constants of the slit plate (defaults: steel, 1 um thick).

    The complex refractive index is ``refractive_index + i*attenuation``;
    only the imaginary part enters the transmission estimate.
    """

    refractive_index: float = 2.29
    attenuation: float = 2.61
    thickness_m: float = 1e-6

    def __post_init__(self):
        if not (math.isfinite(self.attenuation) and self.attenuation > 0):
            raise ConfigError(f"attenuation must be positive, got {self.attenuation!r}")
        if not (math.isfinite(self.thickness_m) and self.thickness_m >= 0):
            raise ConfigError(f"thickness_m must be non-negative, got {self.thickness_m!r}")

    def thickness_in_wavelengths(self, wavelength: float) -> float:
        return self.thickness_m / wavelength


STEEL = MaterialDefaults()


@dataclass(frozen=True)
class ErrorBudget:
    metal_transmission_rel: float
    stationary_phase_rel: float
    fraunhofer_rel: float
    kappa_rel_leading: float

    def __post_init__(self):
        parts = (self.metal_transmission_rel, self.stationary_phase_rel, self.fraunhofer_rel)
        if any(not v >= 0 for v in parts):
            raise ValueError(f"error components must be non-negative, got {parts}")
        if self.kappa_rel_leading != max(parts):
            raise ValueError("kappa_rel_leading must equal the largest component")

    @property
    def leading_source(self) -> str:
        named = {
            "metal_transmission": self.metal_transmission_rel,
            "stationary_phase": self.stationary_phase_rel,
            "fraunhofer": self.fraunhofer_rel,
        }
        return max(named, key=named.get)

    def warnings(self) -> list[str]:
        out = []
        for name in ("metal_transmission_rel", "stationary_phase_rel", "fraunhofer_rel"):
            value = getattr(self, name)
            if value > LARGE_COMPONENT:
                out.append(f"{name} = {value:.3g} exceeds {LARGE_COMPONENT:g}; the estimate is not small")
        return out

    def as_dict(self) -> dict:
        d = asdict(self)
        d["leading_source"] = self.leading_source
        return d


def metal_transmission_error(attenuation: float, thickness_wavelengths: float) -> float:
    """Amplitude fraction exp(-2 pi alpha zeta) left after crossing the plate."""
    if attenuation <= 0:
        raise ConfigError(f"attenuation must be positive, got {attenuation!r}")
    if thickness_wavelengths < 0:
        raise ConfigError(f"thickness must be non-negative, got {thickness_wavelengths!r}")
    return math.exp(-2.0 * math.pi * attenuation * thickness_wavelengths)


def stationary_phase_error(setup) -> float:
    """|g4| / (g2^2 k) for the source leg, which reduces to 3 / (L k)."""
    vs = require_validated(setup)
    return 3.0 / (vs.source_distance * vs.k)


def fraunhofer_error(setup) -> float:
    """Largest transverse slit coordinate over the shorter longitudinal distance."""
    vs = require_validated(setup)
    return vs.geometry.extent / min(vs.source_distance, vs.screen_distance)


def error_budget(setup, material_defaults: MaterialDefaults = STEEL) -> ErrorBudget:
    vs = require_validated(setup)
    metal = metal_transmission_error(
        material_defaults.attenuation,
        material_defaults.thickness_in_wavelengths(vs.beam.wavelength),
    )
    sp = stationary_phase_error(vs)
    ff = fraunhofer_error(vs)
    return ErrorBudget(metal, sp, ff, max(metal, sp, ff))
