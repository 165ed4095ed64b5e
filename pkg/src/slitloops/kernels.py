"""Propagators and slit kernels.

``k1`` is the single-crossing (classical) amplitude, a sum of closed-form
Fresnel segments.  ``k2_pair`` is the two-crossing amplitude for an ordered
pair of distinct slits, after the transverse z-integral between the two
crossings has been done by stationary phase.  Both are reduced 1d amplitudes:
the z-factor and the ``exp(ik(L+D))/(LD)`` prefactor are common to every
kernel and multiply in only when the corresponding setup flags are on.

Within a pair the phase is separable, because the path length between the
crossings is ``|y2 - y1|`` and the slits do not overlap.  Only the
``|y2 - y1|**-0.5`` amplitude couples the two integrals, so the y1 integral is
computed once per mesh level as a function of y2 and reused for every
detector position.
"""

from __future__ import annotations

import cmath
import itertools
import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import _kernels
from .errors import BudgetError, DomainError
from .experiment import INFINITE_HEIGHT, BeamParameters, ValidatedSetup, require_validated, validate
from .quadrature import (
    DEFAULT_SPEC,
    TWO_PI,
    PhaseMesh,
    QuadratureSpec,
    composite_rule,
    fresnel_segment,
    gaussian_phase_integral,
    refine_until_converged,
    roundoff_floor,
)

INCLINATION_FACTOR = 0.25
SLIT_NAMES = "ABC"


@dataclass(frozen=True)
class SlitSubset:
    """Non-empty set of open slits, by index into the slit centers."""

    open: frozenset

    def __post_init__(self):
        indices = frozenset(int(i) for i in self.open)
        if not indices:
            raise DomainError("a slit subset needs at least one open slit")
        if min(indices) < 0:
            raise DomainError(f"slit indices must be non-negative, got {sorted(indices)}")
        object.__setattr__(self, "open", indices)

    @classmethod
    def of(cls, *indices: int) -> "SlitSubset":
        return cls(frozenset(indices))

    def check(self, n_slits: int) -> "SlitSubset":
        if max(self.open) >= n_slits:
            raise DomainError(f"slit index {max(self.open)} out of range for {n_slits} slits")
        return self

    def pairs(self) -> list["OrderedSlitPair"]:
        return [OrderedSlitPair(i, j) for i, j in itertools.permutations(sorted(self.open), 2)]

    def __iter__(self):
        return iter(sorted(self.open))

    def __len__(self):
        return len(self.open)

    def __str__(self):
        return "".join(SLIT_NAMES[i] if i < len(SLIT_NAMES) else f"[{i}]" for i in self)


def all_subsets(n_slits: int) -> list[SlitSubset]:
    return [
        SlitSubset(frozenset(c))
        for r in range(1, n_slits + 1)
        for c in itertools.combinations(range(n_slits), r)
    ]


@dataclass(frozen=True, order=True)
class OrderedSlitPair:
    """Slit crossed first and slit crossed second by a looped path."""

    first: int
    second: int

    def __post_init__(self):
        if self.first == self.second:
            raise DomainError("a looped path must visit two different slits")

    def check(self, n_slits: int) -> "OrderedSlitPair":
        if not (0 <= self.first < n_slits and 0 <= self.second < n_slits):
            raise DomainError(f"pair {self} out of range for {n_slits} slits")
        return self

    def mirrored(self, n_slits: int) -> "OrderedSlitPair":
        return OrderedSlitPair(n_slits - 1 - self.first, n_slits - 1 - self.second)

    def __str__(self):
        return f"{SLIT_NAMES[self.first]}{SLIT_NAMES[self.second]}"


def all_pairs(n_slits: int) -> list[OrderedSlitPair]:
    return [OrderedSlitPair(i, j) for i, j in itertools.permutations(range(n_slits), 2)]


@dataclass(frozen=True)
class KernelBundle:
    """Kernel values at one detector position.

    ``k1`` holds the classical amplitude of every single slit and
    ``k2_pairs`` the looped amplitude of every ordered pair.  Amplitudes of a
    larger subset are assembled from these on demand.
    """

    k1: Mapping[SlitSubset, complex]
    k2_pairs: Mapping[OrderedSlitPair, complex]
    y_detector: float
    n_slits: int = field(default=3)

    def k1_of(self, subset: SlitSubset) -> complex:
        if subset in self.k1:
            return self.k1[subset]
        return sum(self.k1[SlitSubset.of(i)] for i in subset)

    def k2_of(self, subset: SlitSubset) -> complex:
        return sum((self.k2_pairs[p] for p in subset.pairs()), 0j)

    def total(self, subset: SlitSubset) -> complex:
        return self.k1_of(subset) + self.k2_of(subset)

    def intensity(self, subset: SlitSubset) -> float:
        return abs(self.total(subset)) ** 2

    def scaled(self, factor: complex) -> "KernelBundle":
        """Every amplitude multiplied by the same constant."""
        return KernelBundle(
            {s: factor * v for s, v in self.k1.items()},
            {p: factor * v for p, v in self.k2_pairs.items()},
            self.y_detector,
            self.n_slits,
        )

    def with_k2_scale(self, scale: float) -> "KernelBundle":
        """Looped amplitudes multiplied by ``scale`` (0 switches them off)."""
        return KernelBundle(
            dict(self.k1),
            {p: scale * v for p, v in self.k2_pairs.items()},
            self.y_detector,
            self.n_slits,
        )


# ---------------------------------------------------------------------------
# free-space pieces
# ---------------------------------------------------------------------------

def free_propagator(r1, r2, k: float) -> complex:
    """(k / 2 pi i) exp(ik|r1 - r2|) / |r1 - r2|, a raw kernel in 1/m^2."""
    sep = math.dist(tuple(map(float, r1)), tuple(map(float, r2)))
    if sep == 0.0:
        raise DomainError("free propagator is singular for coincident points")
    return k / (TWO_PI * 1j) * cmath.exp(1j * k * sep) / sep


def _transverse_p(vs: ValidatedSetup) -> float:
    return vs.k * (0.5 / vs.source_distance + 0.5 / vs.screen_distance)


def z_factor(setup: ValidatedSetup, slit_height: float | None = None) -> complex:
    """Integral of exp(ik z^2 (1/2L + 1/2D)) over the slit height.

    ``slit_height`` is the half-height h; by default the setup's value.  An
    infinite height gives the full-line value sqrt(i pi / p).
    """
    vs = require_validated(setup)
    h = vs.geometry.height_half if slit_height is None else float(slit_height)
    if not h > 0:
        raise DomainError(f"slit half-height must be positive, got {h!r}")
    p = _transverse_p(vs)
    if h == INFINITE_HEIGHT:
        return gaussian_phase_integral(p)
    return fresnel_segment(p, 0.0, -h, h)


def common_factor(setup: ValidatedSetup) -> complex:
    """Factor shared by every kernel: z-factor and exp(ik(L+D))/(LD), per flags."""
    vs = require_validated(setup)
    factor = 1.0 + 0j
    if vs.include_z_factor:
        factor *= z_factor(vs)
    if vs.include_global_prefactor:
        L, D = vs.source_distance, vs.screen_distance
        factor *= cmath.exp(1j * vs.k * (L + D)) / (L * D)
    return factor


# ---------------------------------------------------------------------------
# classical kernel
# ---------------------------------------------------------------------------

def _k1_slit(vs: ValidatedSetup, index: int, y_d: float) -> complex:
    k, L, D, ys = vs.k, vs.source_distance, vs.screen_distance, vs.source_offset
    p = _transverse_p(vs)
    q = -k * (ys / L + y_d / D)
    const = k * (ys * ys / (2.0 * L) + y_d * y_d / (2.0 * D))
    lo, hi = vs.geometry.bounds(index)
    return -((k / TWO_PI) ** 2) * cmath.exp(1j * const) * fresnel_segment(p, q, lo, hi)


def k1(setup: ValidatedSetup, slits: SlitSubset, y_d: float) -> complex:
    """Single-crossing amplitude through the open slits, detector at ``y_d``."""
    vs = require_validated(setup)
    slits.check(vs.geometry.n_slits)
    total = sum((_k1_slit(vs, i, float(y_d)) for i in slits), 0j)
    return total * common_factor(vs)


# ---------------------------------------------------------------------------
# looped kernel
# ---------------------------------------------------------------------------

def _slit_mesh(vs: ValidatedSetup, k: float, spec: QuadratureSpec) -> PhaseMesh:
    """Mesh in the slit-local coordinate u = y - center, shared by all slits.

    The panel size is set by the largest phase rate a looped path can have
    inside a slit: k from the inter-slit leg plus the far-field terms.
    """
    geo = vs.geometry
    near = min(vs.source_distance, vs.screen_distance)
    rate = k * (1.0 + (geo.extent + abs(vs.source_offset)) / near)
    return PhaseMesh(-0.5 * geo.width, 0.5 * geo.width, rate, spec)


def _symmetrized(u: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return 0.5 * (u - u[::-1]), 0.5 * (w + w[::-1])


class _PairGeometry:
    def __init__(self, vs: ValidatedSetup, pair: OrderedSlitPair, k: float):
        pair.check(vs.geometry.n_slits)
        c = vs.geometry.centers
        self.c1, self.c2 = c[pair.first], c[pair.second]
        self.sign = 1.0 if self.c2 > self.c1 else -1.0
        self.gap = abs(self.c2 - self.c1)
        if not self.gap > vs.geometry.width:
            raise DomainError(f"slits of pair {pair} overlap")
        self.k = k
        self.L, self.D, self.ys = vs.source_distance, vs.screen_distance, vs.source_offset
        self.min_sep = self.gap - vs.geometry.width

    def first_leg(self, u1, w1):
        """Weights times the source-leg phase, with the linear inter-slit phase split off."""
        k, s = self.k, self.sign
        return w1 * np.exp(1j * k * ((self.c1 + u1 - self.ys) ** 2 / (2.0 * self.L) - s * u1))

    def last_leg(self, u2, w2, y_d):
        k, s = self.k, self.sign
        return w2 * np.exp(1j * k * ((y_d - self.c2 - u2) ** 2 / (2.0 * self.D) + s * u2))

    def gap_phase(self) -> complex:
        return cmath.exp(1j * self.k * self.gap)


class PairIntegral:
    """Looped amplitude for one ordered slit pair, reusable across detector positions.

    The y1 partial sums are cached per mesh level; each detector position then
    costs one pass over the y2 nodes.  Results are identical whether the
    instance is fresh or has been used before.
    """

    def __init__(self, setup: ValidatedSetup, pair: OrderedSlitPair, spec: QuadratureSpec = DEFAULT_SPEC):
        self.vs = require_validated(setup)
        self.pair = pair
        self.spec = spec
        self.geom = _PairGeometry(self.vs, pair, self.vs.k)
        self.mesh = _slit_mesh(self.vs, self.vs.k, spec)
        k = self.vs.k
        scale = (1j ** 1.5) * (k / TWO_PI) ** 2.5
        if self.vs.apply_inclination_factor:
            scale *= INCLINATION_FACTOR
        self.prefactor = scale * self.geom.gap_phase() * common_factor(self.vs)
        self._levels: dict[int, tuple] = {}
        self._lock = threading.Lock()

    def partial(self, level: int):
        """(u2 nodes, u2 weights, y1 partial sums, absolute mass) on ``level``."""
        with self._lock:
            if level not in self._levels:
                u, w = _symmetrized(*self.mesh.level(level))
                g, s = self.geom, self.geom.sign
                b = g.first_leg(u, w)
                partial = _kernels.inverse_sqrt_sums(b, s * u, s * u, g.gap)
                mass = float(np.abs(w).sum()) ** 2 / math.sqrt(g.min_sep)
                self._levels[level] = (u, w, partial, mass)
            return self._levels[level]

    def raw(self, y_d: float) -> complex:
        """The double integral alone, without any prefactor."""
        y_d = float(y_d)

        def evaluate(level):
            u, w, partial, mass = self.partial(level)
            val = complex(np.dot(self.geom.last_leg(u, w, y_d), partial))
            return val, roundoff_floor(u.size * u.size, mass)

        return refine_until_converged(evaluate, self.spec, f"looped kernel {self.pair}")

    def __call__(self, y_d: float) -> complex:
        return self.prefactor * self.raw(y_d)


def k2_pair(setup: ValidatedSetup, pair: OrderedSlitPair, y_d: float, spec: QuadratureSpec = DEFAULT_SPEC) -> complex:
    """Two-crossing amplitude for paths through ``pair.first`` then ``pair.second``."""
    return PairIntegral(setup, pair, spec)(y_d)


# ---------------------------------------------------------------------------
# direct (pre-stationary-phase) looped kernel, used as an oracle
# ---------------------------------------------------------------------------

CONTOUR_NODES = 40
CONTOUR_DECAY = 36.0  # exp(-36) ~ 2e-16


def _contour_rule(k: float, n: int = CONTOUR_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Nodes tau^2 and coefficients for the transverse inter-slit integral.

    With r = sep + i tau^2 on the steepest-descent path, the integral over
    the transverse offset s of exp(ik sqrt(sep^2 + s^2)) / sqrt(sep^2 + s^2)
    equals exp(ik sep) * sum_m coeff_m / sqrt(2i sep - tau_m^2).
    """
    tau_max = math.sqrt(CONTOUR_DECAY / k)
    tau, wt = composite_rule(np.array([0.0, tau_max]), n)
    coeffs = 4j * wt * np.exp(-k * tau * tau)
    return tau * tau, coeffs


def transverse_leg_integral(sep: float, k: float, n: int = CONTOUR_NODES) -> complex:
    """Integral over s of exp(ik sqrt(sep^2+s^2)) / sqrt(sep^2+s^2), s over the real line.

    Exact value is i pi H0^(1)(k sep); stationary phase gives
    sqrt(2 pi / (k sep)) exp(i(k sep + pi/4)).
    """
    if not sep > 0:
        raise DomainError("transverse leg integral needs a positive separation")
    tau2, coeffs = _contour_rule(k, n)
    return cmath.exp(1j * k * sep) * complex(np.sum(coeffs / np.sqrt(2j * sep - tau2)))


def k2_pair_direct(
    setup: ValidatedSetup,
    pair: OrderedSlitPair,
    y_d: float,
    k_override: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
    node_budget: float = 1e8,
) -> complex:
    """Looped amplitude with the inter-slit z-integral done numerically.

    Evaluated at wavenumber ``k_override`` (everything else from ``setup``),
    so it should be compared with ``k2_pair`` on the same setup rescaled to
    that wavenumber.  The transverse integral runs along its steepest-descent
    contour, which converges exponentially; the detector-leg z-offset is taken
    at the stationary point, as in the far-field kernels.
    """
    vs = require_validated(setup)
    if not k_override > 0:
        raise DomainError("k_override must be positive")
    pair.check(vs.geometry.n_slits)
    vk = validate(vs.setup.replace(beam=BeamParameters(float(k_override), vs.beam.particle)))
    k = vk.k
    geom = _PairGeometry(vk, pair, k)
    mesh = _slit_mesh(vk, k, spec)
    tau2, coeffs = _contour_rule(k)

    n_fine = mesh.n_panels * 2 * spec.nodes_per_panel
    estimate = float(n_fine) ** 2 * tau2.size
    if estimate > node_budget:
        raise BudgetError(f"direct looped kernel needs ~{estimate:.3g} nodes, budget is {node_budget:.3g}")

    y_d = float(y_d)
    s = geom.sign

    def evaluate(level):
        u, w = _symmetrized(*mesh.level(level))
        if float(u.size) ** 2 * tau2.size > node_budget:
            raise BudgetError(f"direct looped kernel level {level} exceeds the node budget {node_budget:.3g}")
        partial = _kernels.contour_kernel_sums(geom.first_leg(u, w), s * u, s * u, geom.gap, coeffs, tau2)
        val = complex(np.dot(geom.last_leg(u, w, y_d), partial))
        mass = float(np.abs(w).sum()) ** 2 * math.sqrt(TWO_PI / (k * geom.min_sep))
        return val, roundoff_floor(u.size * u.size * tau2.size, mass)

    raw = refine_until_converged(evaluate, spec, f"direct looped kernel {pair}")
    scale = 1j * (k / TWO_PI) ** 3
    if vk.apply_inclination_factor:
        scale *= INCLINATION_FACTOR
    return scale * geom.gap_phase() * common_factor(vk) * raw


# ---------------------------------------------------------------------------
# assembled kernels
# ---------------------------------------------------------------------------

class KernelEvaluator:
    """Memoizing front end for one setup: pair integrals are built once."""

    def __init__(self, setup: ValidatedSetup, spec: QuadratureSpec = DEFAULT_SPEC):
        self.vs = require_validated(setup)
        self.spec = spec
        self.n_slits = self.vs.geometry.n_slits
        self._pairs: dict[OrderedSlitPair, PairIntegral] = {}
        self._lock = threading.Lock()

    def pair_integral(self, pair: OrderedSlitPair) -> PairIntegral:
        with self._lock:
            if pair not in self._pairs:
                self._pairs[pair] = PairIntegral(self.vs, pair, self.spec)
            return self._pairs[pair]

    def k1(self, slits: SlitSubset, y_d: float) -> complex:
        return k1(self.vs, slits, y_d)

    def k2_pair(self, pair: OrderedSlitPair, y_d: float) -> complex:
        return self.pair_integral(pair.check(self.n_slits))(y_d)

    def bundle(self, y_d: float, include_k2: bool = True) -> KernelBundle:
        y_d = float(y_d)
        singles = {SlitSubset.of(i): k1(self.vs, SlitSubset.of(i), y_d) for i in range(self.n_slits)}
        pairs = {
            p: (self.k2_pair(p, y_d) if include_k2 else 0j)
            for p in all_pairs(self.n_slits)
        }
        return KernelBundle(singles, pairs, y_d, self.n_slits)

    def k_total(self, slits: SlitSubset, y_d: float, k2_scale: float = 1.0) -> complex:
        slits.check(self.n_slits)
        looped = sum((self.k2_pair(p, y_d) for p in slits.pairs()), 0j) if k2_scale else 0j
        return self.k1(slits, y_d) + k2_scale * looped


def k_total(
    setup: ValidatedSetup,
    slits: SlitSubset,
    y_d: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
    k2_scale: float = 1.0,
) -> complex:
    """Classical plus two-crossing amplitude for the open ``slits``.

    ``k2_scale`` multiplies the looped part; 0 gives the classical kernel.
    """
    return KernelEvaluator(setup, spec).k_total(slits, y_d, k2_scale)


# ---------------------------------------------------------------------------
# Huygens composition
# ---------------------------------------------------------------------------

MIN_FRESNEL_ZONES = 10


def fresnel_zones(r1, r3, plane_x: float, half_window: float, k: float) -> float:
    """Number of Fresnel zones inside ``half_window`` of the crossing point."""
    a = plane_x - float(r1[0])
    b = float(r3[0]) - plane_x
    return k * half_window ** 2 * (1.0 / a + 1.0 / b) / TWO_PI


def _taper(t: np.ndarray, flat: float, edge: float) -> np.ndarray:
    """Smooth (C-infinity) window: 1 for |t| <= flat, 0 at |t| = edge."""
    x = np.clip((edge - np.abs(t)) / (edge - flat), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        g = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return f / (f + g)


def huygens_compose(
    r1,
    r3,
    plane_x: float,
    half_window: float,
    k: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> complex:
    """Compose two free propagators through the plane x = ``plane_x``.

    The plane is integrated over a square window centred on the straight
    line from ``r1`` to ``r3``.  The outer half of the window is rolled off
    with a smooth taper, which suppresses the edge diffraction a hard cut-off
    would add.  Needs at least ``MIN_FRESNEL_ZONES`` zones in the window.
    """
    r1 = np.asarray(r1, dtype=float)
    r3 = np.asarray(r3, dtype=float)
    lo, hi = sorted((r1[0], r3[0]))
    if not lo < plane_x < hi:
        raise DomainError("the composition plane must lie strictly between the two points")
    if r1[0] > r3[0]:
        r1, r3 = r3, r1
    zones = fresnel_zones(r1, r3, plane_x, half_window, k) if half_window > 0 else 0.0
    if zones < MIN_FRESNEL_ZONES:
        raise DomainError(f"window holds {zones:.3g} Fresnel zones, need at least {MIN_FRESNEL_ZONES}")

    a, b = plane_x - r1[0], r3[0] - plane_x
    t = a / (a + b)
    yc, zc = r1[1] + t * (r3[1] - r1[1]), r1[2] + t * (r3[2] - r1[2])
    curvature = k * (1.0 / a + 1.0 / b)
    flat = 0.5 * half_window

    def rate(offset):
        return lambda y: curvature * np.abs(y - offset) + 1.0 / half_window

    my = PhaseMesh(yc - half_window, yc + half_window, rate(yc), spec)
    mz = PhaseMesh(zc - half_window, zc + half_window, rate(zc), spec)

    def evaluate(level):
        y, wy = my.level(level)
        z, wz = mz.level(level)
        wy = wy * _taper(y - yc, flat, half_window)
        wz = wz * _taper(z - zc, flat, half_window)
        val = _kernels.plane_propagator_sum(r1, r3, plane_x, y, wy, z, wz, k)
        mass = float(np.abs(wy).sum() * np.abs(wz).sum()) / (a * b)
        return val, roundoff_floor(y.size * z.size, mass)

    raw = refine_until_converged(evaluate, spec, "huygens_compose")
    return (k / (TWO_PI * 1j)) ** 2 * raw
