"""Physical configuration of a multi-slit setup and its model flags.

All lengths are SI meters and wavenumbers are in rad/m.  Slit centers lie on
the slit plane's y axis; the source sits at ``(-L, y_S, 0)`` and the detector
at ``(D, y_D, 0)``.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError, GeometryError

INFINITE_HEIGHT = math.inf
"""Sentinel for a slit whose height is effectively unbounded."""

FRAUNHOFER_WARN_RATIO = 1e-2


class FraunhoferWarning(UserWarning):
    """The slit extent is not small compared with the source/screen distance."""


class Particle(str, enum.Enum):
    photon = "photon"
    electron = "electron"
    other = "other"


@dataclass(frozen=True)
class SlitGeometry:
    centers: tuple[float, ...]
    width: float
    height_half: float = INFINITE_HEIGHT

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))

    @property
    def n_slits(self) -> int:
        return len(self.centers)

    def bounds(self, index: int) -> tuple[float, float]:
        c = self.centers[index]
        return c - 0.5 * self.width, c + 0.5 * self.width

    @property
    def extent(self) -> float:
        """Largest transverse distance of any open point from the axis."""
        return max(abs(c) for c in self.centers) + 0.5 * self.width

    @property
    def spacing(self) -> float:
        """Largest center-to-center distance between neighbouring slits."""
        return max(b - a for a, b in zip(self.centers, self.centers[1:]))

    def is_mirror_symmetric(self, rtol: float = 1e-12) -> bool:
        c = self.centers
        scale = max(abs(x) for x in c) or 1.0
        return all(abs(a + b) <= rtol * scale for a, b in zip(c, reversed(c)))


@dataclass(frozen=True)
class BeamParameters:
    wavenumber: float
    particle: Particle = Particle.photon

    @classmethod
    def from_wavelength(cls, wavelength: float, particle: Particle | str = Particle.photon):
        if not wavelength > 0:
            raise ConfigError(f"wavelength must be positive, got {wavelength!r}")
        return cls(2.0 * math.pi / wavelength, Particle(particle))

    @property
    def wavelength(self) -> float:
        return 2.0 * math.pi / self.wavenumber


@dataclass(frozen=True)
class ExperimentSetup:
    geometry: SlitGeometry
    beam: BeamParameters
    source_distance: float
    screen_distance: float
    source_offset: float = 0.0
    apply_inclination_factor: bool = True
    include_z_factor: bool = False
    include_global_prefactor: bool = False
    notes: tuple[str, ...] = field(default=(), compare=False)

    @property
    def k(self) -> float:
        return self.beam.wavenumber

    def replace(self, **changes) -> "ExperimentSetup":
        return dataclasses.replace(self, **changes)

    def with_wavelength(self, wavelength: float) -> "ExperimentSetup":
        return self.replace(beam=BeamParameters.from_wavelength(wavelength, self.beam.particle))

    def with_centers(self, centers) -> "ExperimentSetup":
        return self.replace(geometry=dataclasses.replace(self.geometry, centers=tuple(centers)))


@dataclass(frozen=True)
class ValidatedSetup:
    """An :class:`ExperimentSetup` that passed :func:`validate`.

    Attribute access falls through to the wrapped setup, so kernel code can
    read ``vs.geometry``, ``vs.k`` and friends directly.
    """

    setup: ExperimentSetup
    diagnostics: Mapping[str, float]
    warnings: tuple[str, ...] = ()

    def __getattr__(self, name):
        # only reached for names not defined on the wrapper itself
        if name.startswith("__") or name == "setup":
            raise AttributeError(name)
        return getattr(self.setup, name)

    def replace(self, **changes) -> "ValidatedSetup":
        return validate(self.setup.replace(**changes))

    @property
    def is_symmetric(self) -> bool:
        """Mirror-symmetric slits and an on-axis source."""
        return self.geometry.is_mirror_symmetric() and self.source_offset == 0.0


def _positive(name, value, errors):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        errors.append(f"{name} must be a positive finite number, got {value!r}")


def validate(setup: ExperimentSetup | ValidatedSetup) -> ValidatedSetup:
    """Check a setup and attach diagnostic ratios.

    Raises :class:`ConfigError` listing every non-positive or malformed
    dimension, or :class:`GeometryError` when slits overlap or are unordered.
    A large slit-extent to distance ratio only produces a warning, since it is
    reported by the error budget instead.
    """
    if isinstance(setup, ValidatedSetup):
        setup = setup.setup
    errors: list[str] = []
    geo = setup.geometry
    _positive("slit width", geo.width, errors)
    if not (geo.height_half == INFINITE_HEIGHT or (math.isfinite(geo.height_half) and geo.height_half > 0)):
        errors.append(f"slit half-height must be positive or infinite, got {geo.height_half!r}")
    _positive("wavenumber", setup.beam.wavenumber, errors)
    _positive("source distance", setup.source_distance, errors)
    _positive("screen distance", setup.screen_distance, errors)
    if not math.isfinite(setup.source_offset):
        errors.append("source offset must be finite")
    if not 2 <= geo.n_slits <= 3:
        errors.append(f"need 2 or 3 slits, got {geo.n_slits}")
    if not all(math.isfinite(c) for c in geo.centers):
        errors.append("slit centers must be finite")
    if errors:
        raise ConfigError("; ".join(errors), errors)

    geo_errors = []
    for i, (a, b) in enumerate(zip(geo.centers, geo.centers[1:])):
        if b <= a:
            geo_errors.append(f"slit centers must be strictly increasing (index {i}: {a!r} >= {b!r})")
        elif b - a <= geo.width:
            geo_errors.append(f"slits {i} and {i + 1} overlap: spacing {b - a:g} m <= width {geo.width:g} m")
    if geo_errors:
        raise GeometryError("; ".join(geo_errors), geo_errors)

    lam = setup.beam.wavelength
    near = min(setup.source_distance, setup.screen_distance)
    if lam >= near:
        raise ConfigError(f"wavelength {lam:g} m is not small compared with the distances ({near:g} m)")

    diagnostics = {
        "d_over_L": geo.spacing / setup.source_distance,
        "extent_over_distance": geo.extent / near,
        "wavelength_over_width": lam / geo.width,
        "wavelength_over_L": lam / setup.source_distance,
    }
    notes = []
    if diagnostics["d_over_L"] > FRAUNHOFER_WARN_RATIO or diagnostics["extent_over_distance"] > FRAUNHOFER_WARN_RATIO:
        msg = (
            f"far-field approximation is marginal: d/L = {diagnostics['d_over_L']:.3g}, "
            f"extent/min(L, D) = {diagnostics['extent_over_distance']:.3g}"
        )
        notes.append(msg)
        warnings.warn(msg, FraunhoferWarning, stacklevel=2)
    if diagnostics["wavelength_over_width"] > 0.1:
        notes.append(f"wavelength is not small compared with the slit width (lambda/w = {diagnostics['wavelength_over_width']:.3g})")
    return ValidatedSetup(setup, diagnostics, tuple(notes))


def require_validated(setup) -> ValidatedSetup:
    if not isinstance(setup, ValidatedSetup):
        raise TypeError("expected a ValidatedSetup; pass the setup through validate() first")
    return setup


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

_PRESETS = {
    # name: (wavelength, width, spacing, L, D, particle)
    "photon": (810e-9, 30e-6, 100e-6, 0.18, 0.18, Particle.photon),
    "electron": (50e-12, 62e-9, 272e-9, 0.305, 0.24, Particle.electron),
    "microwave": (0.04, 1.2, 4.0, 40.0, 40.0, Particle.photon),
}

_PRESET_NOTES = {
    "microwave": ("source and screen distances L = D = 40 m are assumed values, not taken from the source literature",),
}

PRESET_NAMES = tuple(_PRESETS)


def preset(name: str) -> ExperimentSetup:
    """Triple-slit configuration with centers ``(-d, 0, d)`` and an on-axis source."""
    try:
        lam, w, d, L, D, particle = _PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(_PRESETS)}") from None
    return ExperimentSetup(
        geometry=SlitGeometry((-d, 0.0, d), w),
        beam=BeamParameters.from_wavelength(lam, particle),
        source_distance=L,
        screen_distance=D,
        notes=_PRESET_NOTES.get(name, ()),
    )


# ---------------------------------------------------------------------------
# configuration files
# ---------------------------------------------------------------------------

CONFIG_KEYS = (
    "wavelength_m", "wavenumber_per_m", "particle", "slit_centers_m", "slit_spacing_m",
    "slit_count", "slit_width_m", "slit_half_height_m", "source_distance_m",
    "screen_distance_m", "source_offset_m", "apply_inclination_factor",
    "include_z_factor", "include_global_prefactor",
)


def _as_float(key, value):
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity", ".inf"):
        return math.inf
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _as_bool(key, value):
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.strip().lower() in ("true", "yes", "1", "false", "no", "0"):
        return value.strip().lower() in ("true", "yes", "1")
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def setup_from_mapping(cfg: Mapping[str, Any]) -> ExperimentSetup:
    """Build a setup from configuration keys (see ``CONFIG_KEYS``)."""
    missing = [k for k in ("slit_width_m", "source_distance_m", "screen_distance_m") if k not in cfg]
    if "wavelength_m" not in cfg and "wavenumber_per_m" not in cfg:
        missing.append("wavelength_m")
    if "slit_centers_m" not in cfg and "slit_spacing_m" not in cfg:
        missing.append("slit_centers_m")
    if missing:
        raise ConfigError(f"missing configuration keys: {', '.join(missing)}")

    particle = Particle(cfg.get("particle", "photon"))
    if "wavenumber_per_m" in cfg:
        beam = BeamParameters(_as_float("wavenumber_per_m", cfg["wavenumber_per_m"]), particle)
    else:
        beam = BeamParameters.from_wavelength(_as_float("wavelength_m", cfg["wavelength_m"]), particle)

    if "slit_centers_m" in cfg:
        raw = cfg["slit_centers_m"]
        if not isinstance(raw, (list, tuple)):
            raise ConfigError("slit_centers_m must be a list")
        centers = tuple(_as_float("slit_centers_m", c) for c in raw)
    else:
        d = _as_float("slit_spacing_m", cfg["slit_spacing_m"])
        count = int(cfg.get("slit_count", 3))
        centers = tuple((i - 0.5 * (count - 1)) * d for i in range(count))

    height = _as_float("slit_half_height_m", cfg.get("slit_half_height_m", "inf"))
    return ExperimentSetup(
        geometry=SlitGeometry(centers, _as_float("slit_width_m", cfg["slit_width_m"]), height),
        beam=beam,
        source_distance=_as_float("source_distance_m", cfg["source_distance_m"]),
        screen_distance=_as_float("screen_distance_m", cfg["screen_distance_m"]),
        source_offset=_as_float("source_offset_m", cfg.get("source_offset_m", 0.0)),
        apply_inclination_factor=_as_bool("apply_inclination_factor", cfg.get("apply_inclination_factor", True)),
        include_z_factor=_as_bool("include_z_factor", cfg.get("include_z_factor", False)),
        include_global_prefactor=_as_bool("include_global_prefactor", cfg.get("include_global_prefactor", False)),
        notes=tuple(cfg.get("notes", ())),
    )


def setup_to_mapping(setup: ExperimentSetup | ValidatedSetup) -> dict[str, Any]:
    """Inverse of :func:`setup_from_mapping`; floats survive a JSON round trip."""
    if isinstance(setup, ValidatedSetup):
        setup = setup.setup
    geo = setup.geometry
    out = {
        "wavelength_m": setup.beam.wavelength,
        "wavenumber_per_m": setup.beam.wavenumber,
        "particle": setup.beam.particle.value,
        "slit_centers_m": list(geo.centers),
        "slit_width_m": geo.width,
        "slit_half_height_m": "inf" if math.isinf(geo.height_half) else geo.height_half,
        "source_distance_m": setup.source_distance,
        "screen_distance_m": setup.screen_distance,
        "source_offset_m": setup.source_offset,
        "apply_inclination_factor": setup.apply_inclination_factor,
        "include_z_factor": setup.include_z_factor,
        "include_global_prefactor": setup.include_global_prefactor,
    }
    if setup.notes:
        out["notes"] = list(setup.notes)
    return out


def read_config(path) -> dict[str, Any]:
    """Parse a YAML (or JSON) configuration file into a plain mapping.

    A run-metadata sidecar is accepted too: its ``config`` section is lifted
    to the top level and the remaining run settings are kept alongside.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must contain a mapping at top level")
    if isinstance(data.get("config"), dict):
        merged = dict(data["config"])
        for key in ("quadrature", "scan", "point", "normalization", "disable_nonclassical", "material"):
            if key in data:
                merged[key] = data[key]
        data = merged
    return data


def load_setup(path) -> ExperimentSetup:
    return setup_from_mapping(read_config(path))
