"""Hot inner loops, with a numba build and a pure-numpy fallback.

The numba versions are used when numba imports cleanly and the environment
variable ``SLITLOOPS_DISABLE_NUMBA`` is unset (or ``0``).  Both versions are
always importable so they can be cross-checked and benchmarked against each
other; the public names at the bottom point at whichever backend is active.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("SLITLOOPS_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")
USE_NUMBA = numba is not None and not _DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"

# rows x columns per numpy block; keeps temporaries around 32 MB
_BLOCK_ELEMENTS = 1 << 21


def _blocks(n_rows, n_cols):
    step = max(1, _BLOCK_ELEMENTS // max(n_cols, 1))
    for start in range(0, n_rows, step):
        yield slice(start, min(start + step, n_rows))


# ---------------------------------------------------------------------------
# numpy fallbacks
# ---------------------------------------------------------------------------

def inverse_sqrt_sums_numpy(b, u1, u2, gap):
    """out[j] = sum_i b[i] / sqrt(gap + u2[j] - u1[i]).

    ``gap + u2 - u1`` must be positive for every pair (disjoint slits).
    """
    b = np.asarray(b, dtype=np.complex128)
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    out = np.empty(u2.size, dtype=np.complex128)
    for sl in _blocks(u2.size, u1.size):
        sep = (gap + u2[sl])[:, None] - u1[None, :]
        out[sl] = (b[None, :] / np.sqrt(sep)).sum(axis=1)
    return out


def contour_kernel_sums_numpy(b, u1, u2, gap, coeffs, tau2):
    """out[j] = sum_i b[i] * sum_m coeffs[m] / sqrt(2i*sep_ij - tau2[m]).

    ``sep_ij = gap + u2[j] - u1[i]``; the square root is the principal branch.
    """
    b = np.asarray(b, dtype=np.complex128)
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    tau2 = np.asarray(tau2, dtype=np.float64)
    out = np.empty(u2.size, dtype=np.complex128)
    for j in range(u2.size):
        sep = gap + u2[j] - u1
        inner = np.zeros(u1.size, dtype=np.complex128)
        for m in range(tau2.size):
            inner += coeffs[m] / np.sqrt(2j * sep - tau2[m])
        out[j] = np.dot(b, inner)
    return out


def plane_propagator_sum_numpy(r1, r3, plane_x, y, wy, z, wz, k):
    """Sum of w_y w_z exp(ik(l1 + l2)) / (l1 l2) over a tensor grid on a plane."""
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    wy = np.asarray(wy, dtype=np.float64)
    wz = np.asarray(wz, dtype=np.float64)
    dx1 = plane_x - r1[0]
    dx3 = r3[0] - plane_x
    total = 0j
    for sl in _blocks(y.size, z.size):
        yy = y[sl, None]
        l1 = np.sqrt(dx1 * dx1 + (yy - r1[1]) ** 2 + (z[None, :] - r1[2]) ** 2)
        l2 = np.sqrt(dx3 * dx3 + (r3[1] - yy) ** 2 + (r3[2] - z[None, :]) ** 2)
        vals = np.exp(1j * k * (l1 + l2)) / (l1 * l2)
        total += wy[sl] @ (vals @ wz)
    return total


# ---------------------------------------------------------------------------
# numba builds
# ---------------------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True, nogil=True)
    def inverse_sqrt_sums_numba(b, u1, u2, gap):
        n1 = u1.size
        out = np.empty(u2.size, dtype=np.complex128)
        b_re = b.real.copy()
        b_im = b.imag.copy()
        for j in range(u2.size):
            shift = gap + u2[j]
            acc_re = 0.0
            acc_im = 0.0
            for i in range(n1):
                s = 1.0 / np.sqrt(shift - u1[i])
                acc_re += b_re[i] * s
                acc_im += b_im[i] * s
            out[j] = complex(acc_re, acc_im)
        return out

    @numba.njit(cache=True, nogil=True)
    def contour_kernel_sums_numba(b, u1, u2, gap, coeffs, tau2):
        out = np.empty(u2.size, dtype=np.complex128)
        for j in range(u2.size):
            acc = 0j
            for i in range(u1.size):
                sep = gap + u2[j] - u1[i]
                inner = 0j
                for m in range(tau2.size):
                    inner += coeffs[m] / np.sqrt(complex(-tau2[m], 2.0 * sep))
                acc += b[i] * inner
            out[j] = acc
        return out

    @numba.njit(cache=True, nogil=True)
    def plane_propagator_sum_numba(r1, r3, plane_x, y, wy, z, wz, k):
        dx1 = plane_x - r1[0]
        dx3 = r3[0] - plane_x
        total = 0j
        for a in range(y.size):
            row = 0j
            ya1 = (y[a] - r1[1]) ** 2 + dx1 * dx1
            ya3 = (r3[1] - y[a]) ** 2 + dx3 * dx3
            for c in range(z.size):
                l1 = np.sqrt(ya1 + (z[c] - r1[2]) ** 2)
                l2 = np.sqrt(ya3 + (r3[2] - z[c]) ** 2)
                row += wz[c] * np.exp(1j * k * (l1 + l2)) / (l1 * l2)
            total += wy[a] * row
        return total

else:  # pragma: no cover
    inverse_sqrt_sums_numba = None
    contour_kernel_sums_numba = None
    plane_propagator_sum_numba = None


def _prepare(b, u1, u2):
    return (
        np.ascontiguousarray(b, dtype=np.complex128),
        np.ascontiguousarray(u1, dtype=np.float64),
        np.ascontiguousarray(u2, dtype=np.float64),
    )


if USE_NUMBA:

    def inverse_sqrt_sums(b, u1, u2, gap):
        return inverse_sqrt_sums_numba(*_prepare(b, u1, u2), float(gap))

    def contour_kernel_sums(b, u1, u2, gap, coeffs, tau2):
        return contour_kernel_sums_numba(
            *_prepare(b, u1, u2),
            float(gap),
            np.ascontiguousarray(coeffs, dtype=np.complex128),
            np.ascontiguousarray(tau2, dtype=np.float64),
        )

    def plane_propagator_sum(r1, r3, plane_x, y, wy, z, wz, k):
        f64 = np.float64
        return plane_propagator_sum_numba(
            np.asarray(r1, dtype=f64), np.asarray(r3, dtype=f64), float(plane_x),
            np.ascontiguousarray(y, dtype=f64), np.ascontiguousarray(wy, dtype=f64),
            np.ascontiguousarray(z, dtype=f64), np.ascontiguousarray(wz, dtype=f64),
            float(k),
        )

else:
    inverse_sqrt_sums = inverse_sqrt_sums_numpy
    contour_kernel_sums = contour_kernel_sums_numpy
    plane_propagator_sum = plane_propagator_sum_numpy
