"""Quadrature for the complex oscillatory integrals the kernels reduce to.

Two routes are provided:

* closed forms for Gaussian (Fresnel) phases, through the complex error
  function, and
* composite Gauss-Legendre rules on a mesh whose panels each span at most one
  local oscillation, refined by halving every panel until two successive
  levels agree.

The sampled rules are deterministic; the same call always produces the same
bits.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special

from .errors import ConfigError, ConvergenceError, DomainError

TWO_PI = 2.0 * math.pi
_EIGHTH_TURN = cmath.exp(-0.25j * math.pi)
_EPS = np.finfo(float).eps
_RATE_SAMPLES = 257


@dataclass(frozen=True)
class QuadratureSpec:
    """Sampling density and stopping rule for the phase-adapted rules.

    points_per_cycle
        Gauss-Legendre nodes per panel; each panel covers at most one cycle
        of the local phase on the coarsest level.
    rel_tolerance
        Accept once two successive levels differ by less than this fraction
        of the result (plus a round-off floor).
    max_refinements
        Number of panel halvings tried before giving up.
    """

    points_per_cycle: float = 20.0
    rel_tolerance: float = 1e-9
    max_refinements: int = 8

    def __post_init__(self):
        problems = []
        if not self.points_per_cycle >= 4:
            problems.append(f"points_per_cycle must be >= 4, got {self.points_per_cycle!r}")
        if not self.rel_tolerance > 0:
            problems.append(f"rel_tolerance must be > 0, got {self.rel_tolerance!r}")
        if not (isinstance(self.max_refinements, int) and self.max_refinements >= 1):
            problems.append(f"max_refinements must be an integer >= 1, got {self.max_refinements!r}")
        if problems:
            raise ConfigError("; ".join(problems), problems)

    @property
    def nodes_per_panel(self) -> int:
        return max(4, math.ceil(self.points_per_cycle))

    def as_dict(self) -> dict:
        return {
            "points_per_cycle": self.points_per_cycle,
            "rel_tolerance": self.rel_tolerance,
            "max_refinements": self.max_refinements,
        }


DEFAULT_SPEC = QuadratureSpec()


def _finite(value: complex, what: str) -> complex:
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise ArithmeticError(f"{what} produced a non-finite value {value!r}")
    return value


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def complex_erf(z: complex) -> complex:
    """Error function of a complex argument.

    Raises OverflowError where the result is not representable (e.g. far
    along the imaginary axis) instead of returning an infinity.
    """
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"complex_erf needs a finite argument, got {z!r}")
    with np.errstate(all="ignore"):
        val = complex(special.erf(z))
    if not (math.isfinite(val.real) and math.isfinite(val.imag)):
        raise OverflowError(f"erf({z!r}) overflows double precision")
    return val


def _w(z: complex) -> complex:
    return complex(special.wofz(z))


def fresnel_segment(p: float, q: float, a: float, b: float) -> complex:
    """Exact value of the integral of exp(i(p y^2 + q y)) over [a, b].

    For ``p != 0`` the result is written with the scaled complementary error
    function so that segments far from the stationary point ``-q/2p`` do not
    lose digits to cancellation between two error-function values near +-1.
    """
    if not a < b:
        raise DomainError(f"need a < b, got a={a!r}, b={b!r}")
    if not all(math.isfinite(v) for v in (p, q, a, b)):
        raise DomainError("fresnel_segment arguments must be finite")
    if p == 0.0:
        if q == 0.0:
            return complex(b - a)
        half = 0.5 * q * (b - a)
        return cmath.exp(0.5j * q * (a + b)) * (b - a) * (math.sin(half) / half if half else 1.0)
    if p < 0.0:
        return fresnel_segment(-p, -q, a, b).conjugate()

    s = math.sqrt(p)
    if s * (b - a) <= _NARROW:
        return _finite(_narrow_segment(p, q, a, b), "fresnel_segment")
    # endpoints measured from the stationary point -q/2p, scaled by sqrt(p);
    # written this way so a tiny p cannot overflow the stationary point
    shift = q / (2.0 * s)
    xa, xb = s * a + shift, s * b + shift
    if max(abs(xa), abs(xb)) <= 2.0:
        # near the stationary point the plain erf difference is well
        # conditioned, while the scaled form below would cancel
        pref = math.sqrt(math.pi) / (2.0 * s * _EIGHTH_TURN)
        diff = complex_erf(_EIGHTH_TURN * xb) - complex_erf(_EIGHTH_TURN * xa)
        return _finite(cmath.exp(-1j * shift * shift) * pref * diff, "fresnel_segment")
    za, zb = _EIGHTH_TURN * xa, _EIGHTH_TURN * xb
    pref = math.sqrt(math.pi) / (2.0 * s * _EIGHTH_TURN)
    ea = cmath.exp(1j * (p * a * a + q * a))
    eb = cmath.exp(1j * (p * b * b + q * b))
    if xa >= 0.0:
        diff = ea * _w(1j * za) - eb * _w(1j * zb)
    elif xb <= 0.0:
        diff = eb * _w(-1j * zb) - ea * _w(-1j * za)
    else:
        diff = 2.0 * cmath.exp(-1j * shift * shift) - eb * _w(1j * zb) - ea * _w(-1j * za)
    return _finite(pref * diff, "fresnel_segment")



# s*(b - a) at or below this counts as a narrow segment: the quadratic phase
# changes by at most 1e-4 rad across it about the midpoint
_NARROW = 0.02
_NARROW_TERMS = 5


def _cos_sin_moments(beta: float, h: float, m_max: int) -> tuple[list[float], list[float]]:
    """C_m, S_m = integrals of t^m cos(beta t), t^m sin(beta t) over [0, h]."""
    x = abs(beta) * h
    if x <= m_max:
        # power series; every term is bounded by e^x h^(m+1)
        cos_m, sin_m = [], []
        for m in range(m_max + 1):
            c = sn = 0.0
            term = 1.0  # (beta h)^j / j!
            for j in range(60):
                value = term * h ** (m + 1) / (m + j + 1)
                if j % 4 == 0:
                    c += value
                elif j % 4 == 1:
                    sn += value
                elif j % 4 == 2:
                    c -= value
                else:
                    sn -= value
                term *= x / (j + 1)
                if term < 1e-18 * max(abs(c), abs(sn), 1e-300) / h ** (m + 1):
                    break
            cos_m.append(c)
            sin_m.append(math.copysign(sn, beta) if beta else 0.0)
        return cos_m, sin_m
    # integration by parts, stable once beta h exceeds m
    cb, sb = math.cos(beta * h), math.sin(beta * h)
    cos_m, sin_m = [sb / beta], [(1.0 - cb) / beta]
    for m in range(1, m_max + 1):
        hm = h ** m
        cos_m.append(hm * sb / beta - m / beta * sin_m[-1])
        sin_m.append(-hm * cb / beta + m / beta * cos_m[-2])
    return cos_m, sin_m


def _narrow_segment(p: float, q: float, a: float, b: float) -> complex:
    """Series in p about the midpoint, for segments narrow on the Gaussian scale.

    There every closed form subtracts two nearly equal antiderivative values;
    here the linear part is exact and the quadratic part a rapidly converging
    correction.
    """
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    beta = q + 2.0 * p * c
    cos_m, _ = _cos_sin_moments(beta, h, 2 * _NARROW_TERMS)
    total = 0j
    coeff = 1 + 0j
    for n in range(_NARROW_TERMS + 1):
        # the odd (sine) parts integrate to zero over [-h, h]
        total += coeff * 2.0 * cos_m[2 * n]
        coeff *= 1j * p / (n + 1)
    return cmath.exp(1j * (p * c * c + q * c)) * total


def gaussian_phase_integral(p: float) -> complex:
    """Integral of exp(i p y^2) over the whole real line, sqrt(i pi / p)."""
    if p == 0.0:
        raise DomainError("the full-line Fresnel integral diverges for p = 0")
    val = cmath.sqrt(1j * math.pi / abs(p))
    return val if p > 0 else val.conjugate()


def stationary_phase_1d(f0: complex, g0: float, g2: float, k: float) -> complex:
    """Leading stationary-phase value of the integral of f(y) exp(i k g(y)).

    ``g2`` is g'' at the (non-degenerate, minimum) stationary point; the
    Gaussian normalization sqrt(2 pi / (k g'')) is used.
    """
    if not g2 > 0:
        raise DomainError(f"stationary_phase_1d needs g'' > 0, got {g2!r}")
    if not k > 0:
        raise DomainError(f"stationary_phase_1d needs k > 0, got {k!r}")
    return complex(f0) * cmath.exp(1j * (k * g0 + 0.25 * math.pi)) * math.sqrt(TWO_PI / (k * g2))


# ---------------------------------------------------------------------------
# phase-adapted composite Gauss-Legendre
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _reference_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    # enforce exact mirror symmetry so mirrored slits get mirrored nodes
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_rule(edges: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre with ``n`` nodes on every panel delimited by ``edges``."""
    x, w = _reference_rule(n)
    lo = edges[:-1, None]
    half = 0.5 * np.diff(edges)[:, None]
    nodes = (lo + half) + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


class PhaseMesh:
    """Nested meshes on ``[a, b]`` sized by a local phase rate.

    Level 0 has panels that each hold one cycle (2 pi) of accumulated phase,
    at least one panel overall.  Level ``n`` halves every panel ``n`` times.
    """

    def __init__(self, a: float, b: float, phase_rate: Callable | float, spec: QuadratureSpec = DEFAULT_SPEC):
        if not a < b:
            raise DomainError(f"need a < b, got a={a!r}, b={b!r}")
        self.a, self.b, self.spec = float(a), float(b), spec
        self._levels: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self.base_edges = self._base_edges(phase_rate)

    def _base_edges(self, phase_rate):
        a, b = self.a, self.b
        if not callable(phase_rate):
            n0 = max(1, math.ceil(abs(float(phase_rate)) * (b - a) / TWO_PI))
            return np.linspace(a, b, n0 + 1)
        y = np.linspace(a, b, _RATE_SAMPLES)
        rate = np.abs(np.broadcast_to(np.asarray(phase_rate(y), dtype=float), y.shape))
        if not np.all(np.isfinite(rate)):
            raise DomainError("phase_rate returned non-finite values")
        # strictly increasing accumulated phase, so it can be inverted
        rate = rate + 1e-9 * (rate.max() + 1.0 / (b - a))
        phase = np.concatenate(([0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(y))))
        n0 = max(1, math.ceil(phase[-1] / TWO_PI))
        edges = np.interp(np.linspace(0.0, phase[-1], n0 + 1), phase, y)
        edges[0], edges[-1] = a, b
        return edges

    @property
    def n_panels(self) -> int:
        return self.base_edges.size - 1

    def level(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        if n not in self._levels:
            sub = 1 << n
            base = self.base_edges
            frac = np.arange(sub) / sub
            edges = np.empty(self.n_panels * sub + 1)
            edges[:-1] = (base[:-1, None] + np.diff(base)[:, None] * frac[None, :]).ravel()
            edges[-1] = base[-1]
            self._levels[n] = composite_rule(edges, self.spec.nodes_per_panel)
        return self._levels[n]


def roundoff_floor(n_terms: int, magnitude_sum: float) -> float:
    """Absolute error expected from summing ``n_terms`` terms in floating point."""
    return 4.0 * math.sqrt(max(n_terms, 1)) * _EPS * magnitude_sum


def accept(previous: complex, current: complex, spec: QuadratureSpec, floor: float = 0.0) -> bool:
    return abs(current - previous) <= spec.rel_tolerance * abs(current) + floor


def refine_until_converged(evaluate: Callable[[int], tuple[complex, float]], spec: QuadratureSpec, what: str) -> complex:
    """Run ``evaluate(level)`` on successive levels until two agree.

    ``evaluate`` returns the estimate and its round-off floor.
    """
    previous, _ = evaluate(0)
    for level in range(1, spec.max_refinements + 1):
        current, floor = evaluate(level)
        if accept(previous, current, spec, floor):
            return _finite(complex(current), what)
        if level < spec.max_refinements:
            previous = current
    raise ConvergenceError(
        f"{what} did not converge after {spec.max_refinements} refinements "
        f"(last change {abs(current - previous):.3e}, value {abs(current):.3e})",
        previous,
        current,
    )


def oscillatory_integrate_1d(
    integrand: Callable[[np.ndarray], np.ndarray],
    phase_rate: Callable | float,
    interval: tuple[float, float],
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> complex:
    """Integrate a vectorized complex ``integrand`` over ``interval``.

    ``phase_rate`` (callable or constant) gives the magnitude of the local
    phase derivative and sets the panel sizes.
    """
    mesh = PhaseMesh(interval[0], interval[1], phase_rate, spec)

    def evaluate(level):
        x, w = mesh.level(level)
        f = np.asarray(integrand(x), dtype=complex)
        terms = w * f
        return complex(terms.sum()), roundoff_floor(x.size, float(np.abs(terms).sum()))

    return refine_until_converged(evaluate, spec, "oscillatory_integrate_1d")


def oscillatory_integrate_2d(
    integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
    phase_rates: tuple,
    region: tuple[tuple[float, float], tuple[float, float]],
    spec: QuadratureSpec = DEFAULT_SPEC,
    exclude_diagonal: bool = False,
) -> complex:
    """Tensor-product version of :func:`oscillatory_integrate_1d`.

    ``integrand(y1, y2)`` receives broadcastable column/row arrays.  With
    ``exclude_diagonal`` the region must stay clear of ``y1 == y2``, where
    the looped-path amplitude is singular.
    """
    (a1, b1), (a2, b2) = region
    if exclude_diagonal and not (b1 < a2 or b2 < a1):
        raise DomainError(f"region [{a1}, {b1}] x [{a2}, {b2}] touches the diagonal y1 == y2")
    m1 = PhaseMesh(a1, b1, phase_rates[0], spec)
    m2 = PhaseMesh(a2, b2, phase_rates[1], spec)

    def evaluate(level):
        x1, w1 = m1.level(level)
        x2, w2 = m2.level(level)
        f = np.asarray(integrand(x1[:, None], x2[None, :]), dtype=complex)
        terms = w1[:, None] * f * w2[None, :]
        return complex(terms.sum()), roundoff_floor(terms.size, float(np.abs(terms).sum()))

    return refine_until_converged(evaluate, spec, "oscillatory_integrate_2d")
