"""Third-order interference term epsilon and the normalized kappa.

Slits 0, 1, 2 are called A, B, C.  Intensities are kernel moduli squared at
a fixed detector position; epsilon is their seven-term inclusion-exclusion
combination, which vanishes identically for purely classical kernels.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError, ConvergenceError, DegenerateNormalizationError, DomainError
from .experiment import ValidatedSetup, require_validated, setup_to_mapping
from .kernels import KernelBundle, KernelEvaluator, OrderedSlitPair, SlitSubset
from .quadrature import DEFAULT_SPEC, QuadratureSpec

A, B, C = 0, 1, 2
ABC = SlitSubset.of(A, B, C)
_PAIRS = (SlitSubset.of(A, B), SlitSubset.of(B, C), SlitSubset.of(A, C))
_SINGLES = (SlitSubset.of(A), SlitSubset.of(B), SlitSubset.of(C))

# interference_sum normalizer counts as zero below this fraction of the
# central single-slit intensity scale
DEGENERATE_RTOL = 1e-6
TWO_SLIT_DEGENERATE_RTOL = 1e-14
WORKERS_ENV = "SLITLOOPS_WORKERS"


class Normalization(str, enum.Enum):
    central_max = "central_max"
    interference_sum = "interference_sum"


def _require_three(vs: ValidatedSetup):
    if vs.geometry.n_slits != 3:
        raise ConfigError(
            f"epsilon needs exactly 3 slits, setup has {vs.geometry.n_slits}; "
            "use two_slit_loop_deviation for a double slit"
        )


# ---------------------------------------------------------------------------
# bundle-level formulas
# ---------------------------------------------------------------------------

def exact_intensity(bundle: KernelBundle, subset: SlitSubset) -> Fraction:
    """|K^subset|^2 evaluated exactly from the stored double-precision amplitudes.

    The amplitude is the sum of the single-slit classical values and the
    looped values of every ordered pair inside the subset.
    """
    parts = [bundle.k1[SlitSubset.of(i)] for i in subset]
    parts += [bundle.k2_pairs[p] for p in subset.pairs()]
    re = sum((Fraction(z.real) for z in parts), Fraction(0))
    im = sum((Fraction(z.imag) for z in parts), Fraction(0))
    return re * re + im * im


def epsilon_from_bundle(bundle: KernelBundle) -> float:
    """|K^ABC|^2 - |K^AB|^2 - |K^BC|^2 - |K^CA|^2 + |K^A|^2 + |K^B|^2 + |K^C|^2.

    The classical parts of the seven intensities cancel, leaving a remainder
    some six orders of magnitude below each term.  Evaluating the sum in
    rational arithmetic makes that cancellation exact, so the only error left
    is the single rounding of the result.
    """
    total = exact_intensity(bundle, ABC)
    total -= sum(exact_intensity(bundle, s) for s in _PAIRS)
    total += sum(exact_intensity(bundle, s) for s in _SINGLES)
    return float(total)


def epsilon_linear_from_bundle(bundle: KernelBundle) -> float:
    """Epsilon to first order in the looped amplitudes.

    Each single-slit classical amplitude multiplies the looped amplitudes of
    the opposite pair in both directions.
    """
    k1 = bundle.k1_of
    k2 = bundle.k2_pairs
    total = (
        k1(SlitSubset.of(C)).conjugate() * (k2[OrderedSlitPair(A, B)] + k2[OrderedSlitPair(B, A)])
        + k1(SlitSubset.of(A)).conjugate() * (k2[OrderedSlitPair(B, C)] + k2[OrderedSlitPair(C, B)])
        + k1(SlitSubset.of(B)).conjugate() * (k2[OrderedSlitPair(A, C)] + k2[OrderedSlitPair(C, A)])
    )
    return 2.0 * total.real


def interference_terms(bundle: KernelBundle) -> tuple[float, float, float]:
    """Two-slit interference terms I_AB, I_BC, I_CA (exact, like epsilon)."""
    out = []
    for pair in _PAIRS:
        i, j = sorted(pair.open)
        value = exact_intensity(bundle, pair) - exact_intensity(bundle, SlitSubset.of(i)) - exact_intensity(bundle, SlitSubset.of(j))
        out.append(float(value))
    return tuple(out)


def _bundle(ev: KernelEvaluator, y_d: float, k2_scale: float) -> KernelBundle:
    b = ev.bundle(y_d, include_k2=bool(k2_scale))
    return b if k2_scale in (0.0, 1.0) else b.with_k2_scale(k2_scale)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def epsilon_full(setup, y_d: float, spec: QuadratureSpec = DEFAULT_SPEC, k2_scale: float = 1.0) -> float:
    vs = require_validated(setup)
    _require_three(vs)
    return epsilon_from_bundle(_bundle(KernelEvaluator(vs, spec), y_d, k2_scale))


def epsilon_linear(setup, y_d: float, spec: QuadratureSpec = DEFAULT_SPEC, k2_scale: float = 1.0) -> float:
    vs = require_validated(setup)
    _require_three(vs)
    return epsilon_linear_from_bundle(_bundle(KernelEvaluator(vs, spec), y_d, k2_scale))


def _default_hint(vs: ValidatedSetup) -> np.ndarray:
    # one fringe period either side of the axis
    period = vs.beam.wavelength * vs.screen_distance / vs.geometry.spacing
    return np.linspace(-period, period, 401)


def central_maximum(ev: KernelEvaluator, k2_scale: float = 1.0, scan_hint: Sequence[float] | None = None) -> tuple[float, float]:
    """(|K^ABC|^2 at the central maximum, its detector position).

    Symmetric setups put the maximum at y = 0; otherwise the largest value
    over ``scan_hint`` is used.
    """
    if ev.vs.is_symmetric:
        return _bundle(ev, 0.0, k2_scale).intensity(ABC), 0.0
    ys = np.asarray(_default_hint(ev.vs) if scan_hint is None else scan_hint, dtype=float)
    values = [_bundle(ev, y, k2_scale).intensity(ABC) for y in ys]
    i = int(np.argmax(values))
    return float(values[i]), float(ys[i])


def _interference_sum(ev: KernelEvaluator, y_d: float, k2_scale: float, reference: float) -> float:
    value = math.fsum(abs(t) for t in interference_terms(_bundle(ev, y_d, k2_scale)))
    if not value > DEGENERATE_RTOL * reference:
        raise DegenerateNormalizationError(
            f"sum of two-slit interference terms at y = {y_d:g} m is {value:.3e}, "
            f"below {DEGENERATE_RTOL:g} of the central intensity scale {reference:.3e}"
        )
    return value


def _single_slit_scale(ev: KernelEvaluator, y_c: float) -> float:
    b = ev.bundle(y_c, include_k2=False)
    return math.fsum(b.intensity(s) for s in _SINGLES)


def delta(
    setup,
    mode: Normalization | str = Normalization.central_max,
    scan_hint=None,
    spec: QuadratureSpec = DEFAULT_SPEC,
    k2_scale: float = 1.0,
) -> float:
    """Normalizer for epsilon.

    ``central_max``: |K^ABC|^2 at the central maximum (``scan_hint`` is an
    optional grid of detector positions, used for asymmetric setups).
    ``interference_sum``: |I_AB| + |I_BC| + |I_CA| at detector position
    ``scan_hint``; raises DegenerateNormalizationError where it vanishes.
    """
    vs = require_validated(setup)
    _require_three(vs)
    mode = Normalization(mode)
    ev = KernelEvaluator(vs, spec)
    if mode is Normalization.central_max:
        value, _ = central_maximum(ev, k2_scale, scan_hint)
        if not value > 0:
            raise DegenerateNormalizationError("central intensity is zero")
        return value
    if scan_hint is None or not np.isscalar(scan_hint):
        raise DomainError("interference_sum needs the detector position as scan_hint")
    _, y_c = central_maximum(ev, 0.0)
    return _interference_sum(ev, float(scan_hint), k2_scale, _single_slit_scale(ev, y_c))


@dataclass
class SorkinScan:
    """kappa and its ingredients over a line of detector positions."""

    y_values: list[float]
    intensity_normalized: list[float]
    epsilon_full: list[float]
    epsilon_linear: list[float]
    delta: float
    kappa_full: list[float]
    kappa_linear: list[float]
    point_valid: list[bool]
    metadata: dict[str, Any] = field(default_factory=dict)
    delta_per_point: list[float] | None = None

    def __len__(self):
        return len(self.y_values)

    def to_dict(self) -> dict[str, Any]:
        def clean(xs):
            return [x if math.isfinite(x) else None for x in xs]

        out = {
            "y_values": list(self.y_values),
            "intensity_normalized": clean(self.intensity_normalized),
            "epsilon_full": clean(self.epsilon_full),
            "epsilon_linear": clean(self.epsilon_linear),
            "delta": self.delta,
            "kappa_full": clean(self.kappa_full),
            "kappa_linear": clean(self.kappa_linear),
            "point_valid": list(self.point_valid),
            "metadata": self.metadata,
        }
        if self.delta_per_point is not None:
            out["delta_per_point"] = clean(self.delta_per_point)
        return out


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def scan_positions(y_min: float, y_max: float, n_points: int) -> np.ndarray:
    """Evenly spaced positions; a range symmetric about 0 gives exactly mirrored values."""
    if n_points < 2:
        raise ConfigError(f"a scan needs at least 2 points, got {n_points}")
    if not y_min < y_max:
        raise ConfigError(f"scan range must satisfy y_min < y_max, got {y_min!r}, {y_max!r}")
    ys = np.linspace(y_min, y_max, n_points)
    if y_min == -y_max:
        ys = 0.5 * (ys - ys[::-1])
    return ys


def kappa_scan(
    setup,
    y_min: float,
    y_max: float,
    n_points: int,
    mode: Normalization | str = Normalization.central_max,
    spec: QuadratureSpec = DEFAULT_SPEC,
    k2_scale: float = 1.0,
    workers: int | None = None,
    evaluator: KernelEvaluator | None = None,
) -> SorkinScan:
    """kappa = epsilon / delta at ``n_points`` evenly spaced detector positions.

    A point whose quadrature fails to converge (or whose interference-sum
    normalizer vanishes) is marked invalid and filled with NaN; the scan
    carries on.  Points are independent, so they may be computed on several
    threads; the output order never depends on the schedule.
    """
    ys = scan_positions(y_min, y_max, n_points)
    return kappa_at_positions(setup, ys, mode, spec, k2_scale, workers, evaluator)


def kappa_at_positions(
    setup,
    ys: Sequence[float],
    mode: Normalization | str = Normalization.central_max,
    spec: QuadratureSpec = DEFAULT_SPEC,
    k2_scale: float = 1.0,
    workers: int | None = None,
    evaluator: KernelEvaluator | None = None,
) -> SorkinScan:
    """Like :func:`kappa_scan` but at arbitrary positions (a single one is fine)."""
    vs = require_validated(setup)
    _require_three(vs)
    mode = Normalization(mode)
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    if ys.size == 0 or not np.all(np.isfinite(ys)):
        raise ConfigError("detector positions must be a non-empty list of finite numbers")
    ev = evaluator if evaluator is not None else KernelEvaluator(vs, spec)

    central, y_c = central_maximum(ev, k2_scale, ys if ys.size >= 2 else None)
    if not central > 0:
        raise DegenerateNormalizationError("central intensity is zero")
    reference = _single_slit_scale(ev, y_c) if mode is Normalization.interference_sum else None

    def point(y):
        try:
            b = _bundle(ev, y, k2_scale)
            d = _interference_sum(ev, y, k2_scale, reference) if reference is not None else central
            return (b.intensity(ABC), epsilon_from_bundle(b), epsilon_linear_from_bundle(b), d, None)
        except (ConvergenceError, DegenerateNormalizationError) as exc:
            return (math.nan, math.nan, math.nan, math.nan, f"{type(exc).__name__}: {exc}")

    n_workers = worker_count() if workers is None else max(1, int(workers))
    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as pool:
            rows = list(pool.map(point, ys))
    else:
        rows = [point(y) for y in ys]

    intensity, eps_f, eps_l, deltas, problems = (list(col) for col in zip(*rows))
    invalid = {i: msg for i, msg in enumerate(problems) if msg is not None}
    scan = SorkinScan(
        y_values=[float(y) for y in ys],
        intensity_normalized=[v / central for v in intensity],
        epsilon_full=eps_f,
        epsilon_linear=eps_l,
        delta=central,
        kappa_full=[e / d for e, d in zip(eps_f, deltas)],
        kappa_linear=[e / d for e, d in zip(eps_l, deltas)],
        point_valid=[i not in invalid for i in range(len(ys))],
        delta_per_point=deltas if mode is Normalization.interference_sum else None,
        metadata={
            "setup": setup_to_mapping(vs),
            "diagnostics": dict(vs.diagnostics),
            "warnings": list(vs.warnings),
            "assumptions": list(vs.notes),
            "normalization": mode.value,
            "central_maximum_y_m": y_c,
            "central_maximum_located_by": (
                "symmetry" if vs.is_symmetric else "scan maximum" if ys.size >= 2 else "one-fringe window maximum"
            ),
            "k2_scale": k2_scale,
            "quadrature": spec.as_dict(),
            "backend": _kernels.BACKEND,
            "invalid_points": {str(i): msg for i, msg in invalid.items()},
        },
    )
    return scan


def two_slit_loop_deviation(setup, y_d: float, spec: QuadratureSpec = DEFAULT_SPEC, k2_scale: float = 1.0) -> float:
    """|psi_L| / |psi_A + psi_B| for a double slit.

    psi_L is the looped amplitude in both directions between the two slits;
    psi_A + psi_B is the classical two-slit amplitude.
    """
    vs = require_validated(setup)
    if vs.geometry.n_slits != 2:
        raise ConfigError(f"two_slit_loop_deviation needs exactly 2 slits, setup has {vs.geometry.n_slits}")
    ev = KernelEvaluator(vs, spec)
    both = SlitSubset.of(0, 1)
    classical = ev.k1(both, y_d)
    scale = abs(ev.k1(both, 0.0))
    if abs(classical) < TWO_SLIT_DEGENERATE_RTOL * scale:
        raise DegenerateNormalizationError(f"classical two-slit amplitude vanishes at y = {y_d:g} m")
    if not k2_scale:
        return 0.0
    looped = k2_scale * (ev.k2_pair(OrderedSlitPair(0, 1), y_d) + ev.k2_pair(OrderedSlitPair(1, 0), y_d))
    return abs(looped) / abs(classical)
