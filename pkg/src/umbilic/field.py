"""Sampled function representations and exact Wirtinger differentiation.

Two grid-backed representations live here:

* :class:`PeriodicField` holds samples of a doubly periodic function on a
  torus lattice.  The samples are interpreted as a trigonometric
  interpolant, so differentiation (through the FFT) is exact for
  band-limited data and products are dealiased on a doubled grid.
* :class:`ChartGrid` holds samples on a square coordinate chart and is
  differentiated with 8th-order finite differences.

Wirtinger derivatives are written ``D = d/dz`` and ``Dbar = d/dzbar``.
On the torus all computation happens in lattice coordinates (s, t) with
z = s + t*omega; the Wirtinger operators are recovered from

    D    = (conj(omega) d/ds - d/dt) / (conj(omega) - omega)
    Dbar = (d/dt - omega d/ds)       / (conj(omega) - omega)

which keeps the fundamental domain a unit square for every lattice.

The formal power series representation lives in :mod:`umbilic.series`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import DomainError, UnderResolved

__all__ = [
    "TorusLattice",
    "PeriodicField",
    "ChartGrid",
    "periodic_derivative",
    "chart_derivative",
    "derivative",
    "pointwise_map",
]

_REAL_TOL = 1e-12
DEFAULT_TAIL_TOL = 1e-6

# Spectral bins below _DENOISE_FACTOR * n * eps * sup|f| are indistinguishable
# from sample rounding (an FFT spreads per-sample noise of size eps * sup into
# bins of size ~ n * eps * sup) and are zeroed before differentiation.  Without
# this, the fourth-order operator amplifies the rounding floor by ~1e10 and
# exact identities such as constant-shift invariance drown in noise.
_DENOISE_FACTOR = 16.0


# --------------------------------------------------------------------------
# lattice
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TorusLattice:
    """Lattice generated by 1 and omega (Im omega != 0)."""

    omega: complex

    def __post_init__(self):
        omega = complex(self.omega)
        object.__setattr__(self, "omega", omega)
        if omega.imag == 0.0 or not np.isfinite(omega.imag) or not np.isfinite(omega.real):
            raise ValueError(f"second lattice period must have Im(omega) != 0, got {omega}")

    @property
    def orientation(self) -> int:
        """+1 if (s, t) -> z is orientation preserving, else -1."""
        return 1 if self.omega.imag > 0 else -1

    @property
    def cell_area(self) -> float:
        """Euclidean area of the fundamental domain."""
        return abs(self.omega.imag)

    def st_to_z(self, s, t):
        return np.asarray(s) + np.asarray(t) * self.omega

    def z_to_st(self, z):
        """Inverse of st_to_z; returns real (s, t), not reduced mod 1."""
        z = np.asarray(z, dtype=complex)
        t = z.imag / self.omega.imag
        s = z.real - t * self.omega.real
        return s, t

    def torus_distance(self, z0: complex, z1: complex) -> float:
        """Distance between two points of C modulo the lattice."""
        d = z1 - z0
        shifts = [m + n * self.omega for m in (-1, 0, 1) for n in (-1, 0, 1)]
        return min(abs(d - sh) for sh in shifts)


# --------------------------------------------------------------------------
# spectral helpers (FFT layout: numpy fft2 on an n x n sample grid)
# --------------------------------------------------------------------------

def _int_freqs(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, d=1.0 / n)


def _extend_axis0(C: np.ndarray) -> np.ndarray:
    """Centered spectrum of even length n -> length n+1, splitting the
    Nyquist bin symmetrically into the +-n/2 entries."""
    n = C.shape[0]
    E = np.empty((n + 1,) + C.shape[1:], dtype=complex)
    E[0] = 0.5 * C[0]
    E[1:n] = C[1:n]
    E[n] = 0.5 * C[0]
    return E


def _fold_axis0(E: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`_extend_axis0`: length n+1 -> n, folding the
    +n/2 content back onto the single Nyquist bin."""
    n = E.shape[0] - 1
    C = np.empty((n,) + E.shape[1:], dtype=complex)
    C[0] = E[0] + E[n]
    C[1:n] = E[1:n]
    return C


def _extended_centered_spectrum(values: np.ndarray) -> np.ndarray:
    """(n+1) x (n+1) centered spectrum (divided by n^2) of the samples,
    with frequencies -n/2 .. n/2 on both axes."""
    n = values.shape[0]
    C = np.fft.fftshift(np.fft.fft2(values)) / (n * n)
    E = _extend_axis0(C)
    E = _extend_axis0(E.swapaxes(0, 1)).swapaxes(0, 1)
    return E


def trig_resample(values: np.ndarray, m: int) -> np.ndarray:
    """Resample an n x n periodic grid to m x m through the trigonometric
    interpolant.  Exact (up to rounding) whenever the retained band holds
    the full spectrum."""
    n = values.shape[0]
    if m == n:
        return np.array(values, dtype=complex)
    C = np.fft.fftshift(np.fft.fft2(values))
    if m > n:
        E = _extend_axis0(C)
        E = _extend_axis0(E.swapaxes(0, 1)).swapaxes(0, 1)
        P = np.zeros((m, m), dtype=complex)
        off = m // 2 - n // 2
        P[off:off + n + 1, off:off + n + 1] = E
        out = np.fft.ifft2(np.fft.ifftshift(P)) * (m * m) / (n * n)
    else:
        off = n // 2 - m // 2
        X = C[off:off + m + 1, off:off + m + 1]
        F = _fold_axis0(X)
        F = _fold_axis0(F.swapaxes(0, 1)).swapaxes(0, 1)
        out = np.fft.ifft2(np.fft.ifftshift(F)) * (m * m) / (n * n)
    return out


def _dealiased_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of two periodic sample grids formed on a doubled grid and
    truncated back, so that no retained mode is aliased."""
    n = a.shape[0]
    fa = trig_resample(a, 2 * n)
    fb = trig_resample(b, 2 * n)
    return trig_resample(fa * fb, n)


def _tail_energy_fraction(spectrum: np.ndarray) -> float:
    """Energy fraction carried by modes with max(|j|, |k|) >= ceil(n/3)."""
    n = spectrum.shape[0]
    k = np.abs(_int_freqs(n))
    band = np.maximum(k[:, None], k[None, :]) >= int(np.ceil(n / 3.0))
    power = np.abs(spectrum) ** 2
    total = power.sum()
    if total == 0.0:
        return 0.0
    return float(power[band].sum() / total)


# --------------------------------------------------------------------------
# periodic field
# --------------------------------------------------------------------------

class PeriodicField:
    """Doubly periodic field sampled on the n x n lattice grid
    (s, t) in [0,1)^2 with z = s + t*omega.

    values[i, j] = f(s_i, t_j), s_i = i/n, t_j = j/n.  The samples carry a
    trigonometric-interpolant interpretation: every derivative is the exact
    derivative of the interpolant, and products of fields are formed on a
    doubled grid and truncated back (see :func:`_dealiased_product`).
    """

    def __init__(self, lattice: TorusLattice, values: np.ndarray, real_tag: bool = False):
        values = np.asarray(values, dtype=complex)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("values must be a square n x n array")
        n = values.shape[0]
        if n < 8 or n % 2 != 0:
            raise ValueError(f"grid resolution must be even and >= 8, got {n}")
        if real_tag:
            scale = max(1.0, float(np.max(np.abs(values))) if values.size else 1.0)
            if float(np.max(np.abs(values.imag))) > _REAL_TOL * scale:
                raise ValueError("real_tag field has non-negligible imaginary part")
            values = values.real.astype(complex)
        self.lattice = lattice
        self.values = values
        self.real_tag = bool(real_tag)
        self._eval_spectrum = None  # lazy cache for off-grid evaluation

    # -- construction ------------------------------------------------------

    @classmethod
    def constant(cls, lattice: TorusLattice, n: int, value: complex) -> "PeriodicField":
        value = complex(value)
        return cls(lattice, np.full((n, n), value, dtype=complex),
                   real_tag=(value.imag == 0.0))

    @classmethod
    def from_function(cls, lattice: TorusLattice, n: int,
                      fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      real_tag: bool = False) -> "PeriodicField":
        """Sample fn(s, t) on the grid; fn receives meshgrid arrays."""
        s = np.arange(n) / n
        S, T = np.meshgrid(s, s, indexing="ij")
        return cls(lattice, np.asarray(fn(S, T), dtype=complex), real_tag=real_tag)

    @classmethod
    def from_modes(cls, lattice: TorusLattice, n: int,
                   modes: dict, real_tag: bool | None = None) -> "PeriodicField":
        """Build sum_{(j,k)} c_{jk} exp(2 pi i (j s + k t)) exactly."""
        s = np.arange(n) / n
        S, T = np.meshgrid(s, s, indexing="ij")
        vals = np.zeros((n, n), dtype=complex)
        for (j, k), c in sorted(modes.items()):
            if abs(j) >= n // 2 or abs(k) >= n // 2:
                raise ValueError(f"mode ({j},{k}) does not fit on an n={n} grid")
            vals += complex(c) * np.exp(2j * np.pi * (j * S + k * T))
        if real_tag is None:
            real_tag = _modes_are_hermitian(modes)
        return cls(lattice, vals, real_tag=real_tag)

    # -- basic data --------------------------------------------------------

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def grid_axes(self):
        s = np.arange(self.n) / self.n
        return s, s

    def z_grid(self) -> np.ndarray:
        s, t = self.grid_axes()
        S, T = np.meshgrid(s, t, indexing="ij")
        return self.lattice.st_to_z(S, T)

    def spectrum(self) -> np.ndarray:
        return np.fft.fft2(self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def min_modulus(self) -> float:
        return float(np.min(np.abs(self.values)))

    def with_values(self, values: np.ndarray, real_tag: bool = False) -> "PeriodicField":
        return PeriodicField(self.lattice, values, real_tag=real_tag)

    def real_part(self, validate: bool = True, tol: float = 1e-9) -> "PeriodicField":
        """Project onto the real part.  With validate=True the imaginary
        drift must be below tol relative to the field scale."""
        if validate:
            scale = max(1.0, self.sup_norm())
            drift = float(np.max(np.abs(self.values.imag)))
            if drift > tol * scale:
                raise ValueError(f"field is not real: imaginary drift {drift:.3e}")
        return PeriodicField(self.lattice, self.values.real.astype(complex), real_tag=True)

    # -- calculus ----------------------------------------------------------

    def check_resolution(self, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
        frac = _tail_energy_fraction(self.spectrum())
        if frac > tail_tol:
            raise UnderResolved(
                f"spectral tail carries {frac:.3e} of total energy "
                f"(tolerance {tail_tol:.1e}) on an n={self.n} grid")
        return frac

    def derivative(self, direction: str, tail_tol: float | None = DEFAULT_TAIL_TOL) -> "PeriodicField":
        """Exact Wirtinger derivative of the trigonometric interpolant.

        The ambiguous Nyquist bin is annihilated, and bins below the sample
        rounding floor are zeroed (see _DENOISE_FACTOR); fields passing the
        tail check carry no meaningful energy in either.
        """
        if direction not in ("D", "Dbar"):
            raise ValueError(f"direction must be 'D' or 'Dbar', got {direction!r}")
        # Centering before the transform is a mathematical no-op (the DC
        # multiplier is zero) but keeps the FFT's internal rounding at the
        # oscillation scale rather than the mean scale, so derivatives are
        # invariant under constant shifts down to the denoise floor.
        mean = complex(self.values.mean())
        C = np.fft.fft2(self.values - mean)
        if tail_tol is not None:
            frac = _tail_energy_fraction(C)
            if frac > tail_tol:
                raise UnderResolved(
                    f"spectral tail carries {frac:.3e} of total energy "
                    f"(tolerance {tail_tol:.1e}) on an n={self.n} grid")
        n = self.n
        floor = _DENOISE_FACTOR * n * np.finfo(float).eps * self.sup_norm()
        if floor > 0.0:
            C[np.abs(C) < floor] = 0.0
        k = _int_freqs(n)
        mult = 2j * np.pi * k
        mult[n // 2] = 0.0
        omega = self.lattice.omega
        denom = np.conj(omega) - omega
        ds = mult[:, None]
        dt = mult[None, :]
        if direction == "D":
            M = (np.conj(omega) * ds - dt) / denom
        else:
            M = (dt - omega * ds) / denom
        out = np.fft.ifft2(C * M)
        return PeriodicField(self.lattice, out, real_tag=False)

    def mul(self, other: "PeriodicField") -> "PeriodicField":
        self._check_same_grid(other)
        vals = _dealiased_product(self.values, other.values)
        return PeriodicField(self.lattice, vals, real_tag=self.real_tag and other.real_tag)

    def add(self, other: "PeriodicField") -> "PeriodicField":
        self._check_same_grid(other)
        return PeriodicField(self.lattice, self.values + other.values,
                             real_tag=self.real_tag and other.real_tag)

    def scale(self, c: complex) -> "PeriodicField":
        c = complex(c)
        return PeriodicField(self.lattice, self.values * c,
                             real_tag=self.real_tag and c.imag == 0.0)

    def shift(self, c: complex) -> "PeriodicField":
        c = complex(c)
        return PeriodicField(self.lattice, self.values + c,
                             real_tag=self.real_tag and c.imag == 0.0)

    def exp(self) -> "PeriodicField":
        return PeriodicField(self.lattice, np.exp(self.values), real_tag=self.real_tag)

    def log(self, floor: float = 1e-300) -> "PeriodicField":
        _domain_check(self.values, floor, "log")
        if self.real_tag and np.all(self.values.real > 0.0):
            return PeriodicField(self.lattice, np.log(self.values.real).astype(complex),
                                 real_tag=True)
        return PeriodicField(self.lattice, np.log(self.values), real_tag=False)

    def reciprocal(self, floor: float = 1e-300) -> "PeriodicField":
        _domain_check(self.values, floor, "reciprocal")
        return PeriodicField(self.lattice, 1.0 / self.values, real_tag=self.real_tag)

    def modulus(self) -> "PeriodicField":
        return PeriodicField(self.lattice, np.abs(self.values).astype(complex), real_tag=True)

    def conj(self) -> "PeriodicField":
        return PeriodicField(self.lattice, np.conj(self.values), real_tag=self.real_tag)

    # -- evaluation off the grid --------------------------------------------

    def evaluate_st(self, s, t) -> np.ndarray:
        """Evaluate the trigonometric interpolant at arbitrary (s, t)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        n = self.n
        if self._eval_spectrum is None:
            self._eval_spectrum = _extended_centered_spectrum(self.values)
        E = self._eval_spectrum
        freqs = np.arange(-(n // 2), n // 2 + 1)
        Es = np.exp(2j * np.pi * np.outer(s, freqs))
        Et = np.exp(2j * np.pi * np.outer(t, freqs))
        return np.einsum("pj,jk,pk->p", Es, E, Et, optimize=True)

    def evaluate_at(self, z) -> np.ndarray:
        """Evaluate the interpolant at complex points (periodic in the lattice)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        s, t = self.lattice.z_to_st(z)
        return self.evaluate_st(s, t)

    # -- operators -----------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, PeriodicField):
            return self.add(other)
        return self.shift(other)

    def __radd__(self, other):
        return self.shift(other)

    def __sub__(self, other):
        if isinstance(other, PeriodicField):
            return self.add(other.scale(-1.0))
        return self.shift(-other)

    def __neg__(self):
        return self.scale(-1.0)

    def __mul__(self, other):
        if isinstance(other, PeriodicField):
            return self.mul(other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def _check_same_grid(self, other: "PeriodicField"):
        if not isinstance(other, PeriodicField):
            raise TypeError("expected a PeriodicField")
        if other.n != self.n or other.lattice.omega != self.lattice.omega:
            raise ValueError("fields must share lattice and resolution")


def _modes_are_hermitian(modes: dict, tol: float = 1e-12) -> bool:
    for (j, k), c in modes.items():
        cc = modes.get((-j, -k))
        if cc is None or abs(np.conj(complex(cc)) - complex(c)) > tol * max(1.0, abs(c)):
            return False
    return True


def _domain_check(values: np.ndarray, floor: float, opname: str):
    m = float(np.min(np.abs(values)))
    if m <= floor:
        raise DomainError(f"{opname} requires samples bounded away from 0 "
                          f"(min modulus {m:.3e}, floor {floor:.3e})")


# --------------------------------------------------------------------------
# finite differences for charts (Fornberg weights, order 8)
# --------------------------------------------------------------------------

def fd_weights(x0: float, grid: Iterable[float], order: int) -> np.ndarray:
    """Finite-difference weights for the order-th derivative at x0 on the
    given nodes (Fornberg's recursion)."""
    grid = np.asarray(list(grid), dtype=float)
    npts = len(grid)
    W = np.zeros((npts, order + 1))
    W[0, 0] = 1.0
    c1 = 1.0
    for i in range(1, npts):
        c2 = 1.0
        mn = min(i, order)
        for j in range(i):
            c3 = grid[i] - grid[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    W[i, k] = c1 * (k * W[i - 1, k - 1] - (grid[i - 1] - x0) * W[i - 1, k]) / c2
                W[i, 0] = -c1 * (grid[i - 1] - x0) * W[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                W[j, k] = ((grid[i] - x0) * W[j, k] - k * W[j, k - 1]) / c3
            W[j, 0] = (grid[i] - x0) * W[j, 0] / c3
        c1 = c2
    return W[:, order]


_FD_STENCIL = 9  # 9-point stencils: interior order 8
_FD_ROWS = np.array([fd_weights(p, range(_FD_STENCIL), 1) for p in range(_FD_STENCIL)])
_FD_HALF = _FD_STENCIL // 2


def _fd_axis0(values: np.ndarray, h: float) -> np.ndarray:
    """First derivative along axis 0, 8th order, one-sided near the edges."""
    n = values.shape[0]
    if n < _FD_STENCIL:
        raise ValueError(f"need at least {_FD_STENCIL} samples per axis, got {n}")
    out = np.empty_like(values)
    c = _FD_ROWS[_FD_HALF]
    core = np.zeros_like(values[_FD_HALF:n - _FD_HALF])
    for o in range(_FD_STENCIL):
        w = c[o]
        if w != 0.0:
            core += w * values[o:n - _FD_STENCIL + 1 + o]
    out[_FD_HALF:n - _FD_HALF] = core
    for i in range(_FD_HALF):
        out[i] = np.tensordot(_FD_ROWS[i], values[:_FD_STENCIL], axes=(0, 0))
        out[n - 1 - i] = np.tensordot(_FD_ROWS[_FD_STENCIL - 1 - i],
                                      values[n - _FD_STENCIL:], axes=(0, 0))
    return out / h


# --------------------------------------------------------------------------
# chart grid
# --------------------------------------------------------------------------

class ChartGrid:
    """Field sampled on the square [-R, R]^2 of a coordinate chart.

    values[i, j] = f(x_i + i*y_j) with x, y = linspace(-R, R, n).  The mask
    marks the disk |z| <= R; an optional validity mask can exclude points
    (e.g. targets of a partial chart transition).  Derivatives are 8th-order
    finite differences, one-sided within four layers of the square edge, so
    quantitative claims should be restricted to an interior region.
    """

    def __init__(self, chart_id: str, radius: float, values: np.ndarray,
                 real_tag: bool = False, valid: np.ndarray | None = None):
        values = np.asarray(values, dtype=complex)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("values must be a square n x n array")
        if values.shape[0] < _FD_STENCIL:
            raise ValueError(f"chart grid needs n >= {_FD_STENCIL}")
        radius = float(radius)
        if radius <= 0.0:
            raise ValueError("chart radius must be positive")
        if real_tag:
            scale = max(1.0, float(np.max(np.abs(values))))
            if float(np.max(np.abs(values.imag))) > _REAL_TOL * scale:
                raise ValueError("real_tag field has non-negligible imaginary part")
            values = values.real.astype(complex)
        self.chart_id = str(chart_id)
        self.radius = radius
        self.values = values
        self.real_tag = bool(real_tag)
        self.valid = None if valid is None else np.asarray(valid, dtype=bool)
        self._spline_re = None
        self._spline_im = None

    @classmethod
    def from_function(cls, chart_id: str, radius: float, n: int,
                      fn: Callable[[np.ndarray], np.ndarray],
                      real_tag: bool = False,
                      clamp_radius: float | None = None) -> "ChartGrid":
        """Sample fn(z) on the chart square.  With clamp_radius set, samples
        with |z| > clamp_radius are taken at the radially clamped point,
        which keeps functions singular just outside the disk usable; the
        clamped band then only pollutes derivatives within a few stencil
        widths of |z| = clamp_radius."""
        x = np.linspace(-radius, radius, n)
        X, Y = np.meshgrid(x, x, indexing="ij")
        Z = X + 1j * Y
        if clamp_radius is not None:
            r = np.abs(Z)
            scal = np.where(r > clamp_radius, clamp_radius / np.maximum(r, 1e-300), 1.0)
            Z = Z * scal
        return cls(chart_id, radius, np.asarray(fn(Z), dtype=complex), real_tag=real_tag)

    # -- basic data ----------------------------------------------------------

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return 2.0 * self.radius / (self.n - 1)

    def axis(self) -> np.ndarray:
        return np.linspace(-self.radius, self.radius, self.n)

    def z_grid(self) -> np.ndarray:
        x = self.axis()
        X, Y = np.meshgrid(x, x, indexing="ij")
        return X + 1j * Y

    def mask(self, region_radius: float | None = None) -> np.ndarray:
        r = self.radius if region_radius is None else float(region_radius)
        m = np.abs(self.z_grid()) <= r
        if self.valid is not None:
            m &= self.valid
        return m

    def sup_norm(self, region_radius: float | None = None) -> float:
        m = self.mask(region_radius)
        if not m.any():
            return 0.0
        return float(np.max(np.abs(self.values[m])))

    def min_modulus(self, region_radius: float | None = None) -> float:
        m = self.mask(region_radius)
        if not m.any():
            return 0.0
        return float(np.min(np.abs(self.values[m])))

    def real_part(self, validate: bool = True, tol: float = 1e-9) -> "ChartGrid":
        if validate:
            scale = max(1.0, float(np.max(np.abs(self.values))))
            drift = float(np.max(np.abs(self.values.imag)))
            if drift > tol * scale:
                raise ValueError(f"field is not real: imaginary drift {drift:.3e}")
        return ChartGrid(self.chart_id, self.radius, self.values.real.astype(complex),
                         real_tag=True, valid=self.valid)

    # -- calculus -------------------------------------------------------------

    def derivative(self, direction: str, tail_tol: float | None = None) -> "ChartGrid":
        """Wirtinger derivative via D = (d/dx - i d/dy)/2.  The tail_tol
        argument is accepted for signature parity with PeriodicField and
        ignored: resolution control on charts is the caller's margin."""
        if direction not in ("D", "Dbar"):
            raise ValueError(f"direction must be 'D' or 'Dbar', got {direction!r}")
        h = self.spacing
        fx = _fd_axis0(self.values, h)
        fy = _fd_axis0(self.values.T, h).T
        if direction == "D":
            out = 0.5 * (fx - 1j * fy)
        else:
            out = 0.5 * (fx + 1j * fy)
        return ChartGrid(self.chart_id, self.radius, out, real_tag=False, valid=self.valid)

    def mul(self, other: "ChartGrid") -> "ChartGrid":
        self._check_same_grid(other)
        valid = _and_valid(self.valid, other.valid)
        return ChartGrid(self.chart_id, self.radius, self.values * other.values,
                         real_tag=self.real_tag and other.real_tag, valid=valid)

    def add(self, other: "ChartGrid") -> "ChartGrid":
        self._check_same_grid(other)
        valid = _and_valid(self.valid, other.valid)
        return ChartGrid(self.chart_id, self.radius, self.values + other.values,
                         real_tag=self.real_tag and other.real_tag, valid=valid)

    def scale(self, c: complex) -> "ChartGrid":
        c = complex(c)
        return ChartGrid(self.chart_id, self.radius, self.values * c,
                         real_tag=self.real_tag and c.imag == 0.0, valid=self.valid)

    def shift(self, c: complex) -> "ChartGrid":
        c = complex(c)
        return ChartGrid(self.chart_id, self.radius, self.values + c,
                         real_tag=self.real_tag and c.imag == 0.0, valid=self.valid)

    def exp(self) -> "ChartGrid":
        return ChartGrid(self.chart_id, self.radius, np.exp(self.values),
                         real_tag=self.real_tag, valid=self.valid)

    def log(self, floor: float = 1e-300) -> "ChartGrid":
        _domain_check(self.values, floor, "log")
        if self.real_tag and np.all(self.values.real > 0.0):
            return ChartGrid(self.chart_id, self.radius,
                             np.log(self.values.real).astype(complex),
                             real_tag=True, valid=self.valid)
        return ChartGrid(self.chart_id, self.radius, np.log(self.values),
                         real_tag=False, valid=self.valid)

    def reciprocal(self, floor: float = 1e-300) -> "ChartGrid":
        _domain_check(self.values, floor, "reciprocal")
        return ChartGrid(self.chart_id, self.radius, 1.0 / self.values,
                         real_tag=self.real_tag, valid=self.valid)

    def modulus(self) -> "ChartGrid":
        return ChartGrid(self.chart_id, self.radius, np.abs(self.values).astype(complex),
                         real_tag=True, valid=self.valid)

    def conj(self) -> "ChartGrid":
        return ChartGrid(self.chart_id, self.radius, np.conj(self.values),
                         real_tag=self.real_tag, valid=self.valid)

    # -- evaluation -------------------------------------------------------------

    def _splines(self):
        if self._spline_re is None:
            x = self.axis()
            self._spline_re = RectBivariateSpline(x, x, self.values.real, kx=3, ky=3, s=0)
            self._spline_im = RectBivariateSpline(x, x, self.values.imag, kx=3, ky=3, s=0)
        return self._spline_re, self._spline_im

    def evaluate_at(self, z) -> np.ndarray:
        """Bicubic interpolation at complex points inside the square."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        sre, sim = self._splines()
        return sre.ev(z.real, z.imag) + 1j * sim.ev(z.real, z.imag)

    def evaluate_st(self, x, y) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        sre, sim = self._splines()
        return sre.ev(x, y) + 1j * sim.ev(x, y)

    # -- operators ----------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, ChartGrid):
            return self.add(other)
        return self.shift(other)

    def __radd__(self, other):
        return self.shift(other)

    def __sub__(self, other):
        if isinstance(other, ChartGrid):
            return self.add(other.scale(-1.0))
        return self.shift(-other)

    def __neg__(self):
        return self.scale(-1.0)

    def __mul__(self, other):
        if isinstance(other, ChartGrid):
            return self.mul(other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def _check_same_grid(self, other: "ChartGrid"):
        if not isinstance(other, ChartGrid):
            raise TypeError("expected a ChartGrid")
        if other.n != self.n or other.radius != self.radius:
            raise ValueError("chart grids must share radius and resolution")


def _and_valid(a, b):
    if a is None:
        return None if b is None else b.copy()
    if b is None:
        return a.copy()
    return a & b


# --------------------------------------------------------------------------
# operation-style entry points
# --------------------------------------------------------------------------

def periodic_derivative(f: PeriodicField, direction: str,
                        tail_tol: float | None = DEFAULT_TAIL_TOL) -> PeriodicField:
    """Spectral Wirtinger derivative of a periodic field (see
    :meth:`PeriodicField.derivative`)."""
    if not isinstance(f, PeriodicField):
        raise TypeError("periodic_derivative expects a PeriodicField")
    return f.derivative(direction, tail_tol=tail_tol)


def chart_derivative(f: ChartGrid, direction: str) -> ChartGrid:
    if not isinstance(f, ChartGrid):
        raise TypeError("chart_derivative expects a ChartGrid")
    return f.derivative(direction)


def derivative(f, direction: str, tail_tol: float | None = DEFAULT_TAIL_TOL):
    """Representation-generic Wirtinger derivative."""
    if isinstance(f, PeriodicField):
        return f.derivative(direction, tail_tol=tail_tol)
    if isinstance(f, ChartGrid):
        return f.derivative(direction)
    raise TypeError(f"cannot differentiate {type(f).__name__}")


def pointwise_map(fields, fn: str, **kwargs):
    """Elementwise maps on one or more fields of a shared representation.

    fn is one of exp, log, mul, add, scale, reciprocal, modulus; mul on
    periodic fields is the dealiased product, everything else is plain
    sample arithmetic.  log and reciprocal take a ``floor`` keyword
    (default 1e-300) below which samples are rejected.
    """
    fields = list(fields)
    if not fields:
        raise ValueError("pointwise_map needs at least one field")
    head = fields[0]
    for other in fields[1:]:
        head._check_same_grid(other)
    if fn == "exp":
        _expect_arity(fields, 1, fn)
        return head.exp()
    if fn == "log":
        _expect_arity(fields, 1, fn)
        return head.log(floor=kwargs.get("floor", 1e-300))
    if fn == "reciprocal":
        _expect_arity(fields, 1, fn)
        return head.reciprocal(floor=kwargs.get("floor", 1e-300))
    if fn == "modulus":
        _expect_arity(fields, 1, fn)
        return head.modulus()
    if fn == "scale":
        _expect_arity(fields, 1, fn)
        return head.scale(kwargs["factor"])
    if fn == "add":
        out = head
        for other in fields[1:]:
            out = out.add(other)
        return out
    if fn == "mul":
        out = head
        for other in fields[1:]:
            out = out.mul(other)
        return out
    raise ValueError(f"unknown pointwise map {fn!r}")


def _expect_arity(fields, k, fn):
    if len(fields) != k:
        raise ValueError(f"pointwise map {fn!r} takes exactly {k} field(s)")
