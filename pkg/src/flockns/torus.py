"""Spectral toolbox on the periodic torus [-1, 1]^d.

Grids are uniform with ``n`` samples per axis (``n`` even, so the retained
mode set is symmetric). Transforms use the plane-wave basis exp(i*pi*k.x)
with integer wavevectors ``k``, hence spectral differentiation multiplies by
``i*pi*k`` per axis. Integrals carry the cell volume ``(2/n)**d``; the total
measure of the torus is ``2**d``.

The real eigenfunctions of the Laplacian (constant, cos(pi*k.x), sin(pi*k.x),
L2-orthonormal) are enumerated by increasing eigenvalue ``pi^2|k|^2`` with a
lexicographic tie-break, which makes the finite-mode projection a spectral
mask and gives the coefficient space used by the Galerkin velocity.

The unpaired Nyquist bins (k_axis = -n/2) carry no consistent derivative on a
real grid, so every differential operator annihilates them; the usable band
is the symmetric set |k_axis| <= n/2 - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "TorusGrid",
    "Field",
    "SpectralField",
    "GridMismatchError",
    "to_spectral",
    "from_spectral",
    "gradient",
    "divergence",
    "laplacian",
    "sym_gradient",
    "convolve",
    "dealias",
    "dprod",
    "mean",
    "average",
    "inner",
    "lp_norm",
    "inv_laplacian",
    "mode_capacity",
    "mode_table",
    "project_modes",
    "field_to_coeffs",
    "coeffs_to_field",
    "xm_norm",
    "reflect",
]


class GridMismatchError(ValueError):
    """Fields living on different grids were combined."""


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on [-1, 1]^d with faces identified."""

    d: int
    n: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"spatial dimension must be 1, 2 or 3, got {self.d}")
        if self.n < 4 or self.n % 2 != 0:
            raise ValueError(f"samples per axis must be even and >= 4, got {self.n}")

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def npoints(self) -> int:
        return self.n**self.d

    @property
    def cell_volume(self) -> float:
        return (2.0 / self.n) ** self.d

    @property
    def measure(self) -> float:
        return 2.0**self.d

    def axis_coords(self) -> np.ndarray:
        return -1.0 + 2.0 * np.arange(self.n) / self.n

    def coords(self) -> list:
        """Coordinate arrays (one per axis), each shaped like the grid."""
        x = self.axis_coords()
        return np.meshgrid(*([x] * self.d), indexing="ij")


@dataclass
class Field:
    """Real samples on a grid: scalar (grid shape) or vector ((c,) + grid shape)."""

    grid: TorusGrid
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        d = self.grid.d
        if self.data.shape[-d:] != self.grid.shape or self.data.ndim > d + 2:
            raise GridMismatchError(
                f"data shape {self.data.shape} incompatible with grid {self.grid.shape}"
            )

    @property
    def is_scalar(self) -> bool:
        return self.data.ndim == self.grid.d

    @property
    def components(self) -> int:
        return 1 if self.is_scalar else self.data.shape[0]

    def copy(self) -> "Field":
        return Field(self.grid, self.data.copy())

    def check_finite(self) -> "Field":
        if not np.all(np.isfinite(self.data)):
            raise FloatingPointError("field contains NaN/Inf samples")
        return self


@dataclass
class SpectralField:
    """Complex coefficients of the exp(i*pi*k.x) expansion, numpy fft layout."""

    grid: TorusGrid
    coef: np.ndarray

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        """Coefficients of k and -k are conjugate (field is real)."""
        d = self.grid.d
        axes = tuple(range(-d, 0))
        flipped = self.coef.copy()
        for ax in axes:
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        scale = max(np.abs(self.coef).max(), 1.0)
        return np.abs(self.coef - np.conj(flipped)).max() <= tol * scale


def _same_grid(*fields) -> TorusGrid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError("fields live on different grids")
    return grid


def _spatial_axes(grid: TorusGrid) -> tuple:
    return tuple(range(-grid.d, 0))


@lru_cache(maxsize=None)
def _wavevectors(grid: TorusGrid) -> tuple:
    """Integer wavevector array per axis, broadcastable to the grid shape."""
    k = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    out = []
    for a in range(grid.d):
        shape = [1] * grid.d
        shape[a] = grid.n
        out.append(k.reshape(shape))
    return tuple(out)


@lru_cache(maxsize=None)
def _ksq(grid: TorusGrid) -> np.ndarray:
    ksq = np.zeros(grid.shape)
    for ka in _wavevectors(grid):
        ksq = ksq + ka**2
    ksq.setflags(write=False)
    return ksq


@lru_cache(maxsize=None)
def _phase(grid: TorusGrid) -> np.ndarray:
    """(-1)^(k1+...+kd): relates fft bins (origin at x=-1) to exp(i*pi*k.x)."""
    tot = np.zeros(grid.shape)
    for ka in _wavevectors(grid):
        tot = tot + ka
    ph = np.where(np.round(tot).astype(int) % 2 == 0, 1.0, -1.0)
    ph.setflags(write=False)
    return ph


@lru_cache(maxsize=None)
def _deriv_mask(grid: TorusGrid) -> np.ndarray:
    """Symmetric-band mask: drops the unpaired Nyquist bins."""
    keep = np.ones(grid.shape, dtype=bool)
    for ka in _wavevectors(grid):
        keep &= ka > -(grid.n // 2)
    keep.setflags(write=False)
    return keep


@lru_cache(maxsize=None)
def _dealias_mask(grid: TorusGrid) -> np.ndarray:
    """2/3-rule mask: keep |k_axis| <= n//3 on every axis."""
    keep = np.ones(grid.shape, dtype=bool)
    kmax = grid.n // 3
    for ka in _wavevectors(grid):
        keep &= np.abs(ka) <= kmax
    keep.setflags(write=False)
    return keep


def to_spectral(f: Field) -> SpectralField:
    grid = f.grid
    coef = np.fft.fftn(f.data, axes=_spatial_axes(grid)) / grid.npoints
    return SpectralField(grid, coef * _phase(grid))


def from_spectral(sf: SpectralField) -> Field:
    grid = sf.grid
    data = np.fft.ifftn(sf.coef * _phase(grid) * grid.npoints, axes=_spatial_axes(grid))
    return Field(grid, np.real(data)).check_finite()


def _fft(f: Field) -> np.ndarray:
    return np.fft.fftn(f.data, axes=_spatial_axes(f.grid))


def _ifft(grid: TorusGrid, coef: np.ndarray) -> np.ndarray:
    return np.real(np.fft.ifftn(coef, axes=_spatial_axes(grid)))


def gradient(f: Field) -> Field:
    """Spectral gradient of a scalar field; returns a vector field."""
    if not f.is_scalar:
        raise ValueError("gradient expects a scalar field")
    grid = f.grid
    fh = _fft(f) * _deriv_mask(grid)
    parts = [_ifft(grid, 1j * math.pi * ka * fh) for ka in _wavevectors(grid)]
    return Field(grid, np.stack(parts)).check_finite()


def divergence(v: Field) -> Field:
    """Spectral divergence of a vector field; returns a scalar field."""
    grid = v.grid
    if v.is_scalar or v.components != grid.d:
        raise ValueError("divergence expects a d-component vector field")
    out = np.zeros(grid.shape)
    mask = _deriv_mask(grid)
    for a, ka in enumerate(_wavevectors(grid)):
        vh = np.fft.fftn(v.data[a], axes=_spatial_axes(grid)) * mask
        out += _ifft(grid, 1j * math.pi * ka * vh)
    return Field(grid, out).check_finite()


def laplacian(f: Field) -> Field:
    """Spectral Laplacian, componentwise for vector fields."""
    grid = f.grid
    mult = -(math.pi**2) * _ksq(grid) * _deriv_mask(grid)
    fh = _fft(f)
    return Field(grid, _ifft(grid, mult * fh)).check_finite()


def sym_gradient(v: Field) -> Field:
    """Symmetric part of the velocity gradient, shape (d, d) + grid shape."""
    grid = v.grid
    if v.is_scalar or v.components != grid.d:
        raise ValueError("sym_gradient expects a d-component vector field")
    d = grid.d
    ks = _wavevectors(grid)
    grads = np.empty((d, d) + grid.shape)
    for i in range(d):
        vh = np.fft.fftn(v.data[i], axes=_spatial_axes(grid)) * _deriv_mask(grid)
        for j in range(d):
            grads[j, i] = _ifft(grid, 1j * math.pi * ks[j] * vh)  # d_j v_i
    sym = 0.5 * (grads + np.swapaxes(grads, 0, 1))
    return Field(grid, sym).check_finite()


def convolve(f: Field, kernel: Field) -> Field:
    """Periodic convolution (kernel * f)(x) = integral kernel(x-y) f(y) dy.

    Computed as the exact circular quadrature sum with cell-volume weight;
    the kernel samples are rolled by half the domain because the grid origin
    sits at x = -1 while displacements x - y live around 0.
    """
    grid = _same_grid(f, kernel)
    if not kernel.is_scalar:
        raise ValueError("convolution kernel must be scalar")
    axes = _spatial_axes(grid)
    kh = np.fft.fftn(np.roll(kernel.data, (-(grid.n // 2),) * grid.d, axis=axes), axes=axes)
    fh = np.fft.fftn(f.data, axes=axes)
    out = np.real(np.fft.ifftn(kh * fh, axes=axes)) * grid.cell_volume
    return Field(grid, out).check_finite()


def dealias(f: Field) -> Field:
    """Zero every mode outside the 2/3 band (applied after products)."""
    grid = f.grid
    fh = _fft(f)
    fh *= _dealias_mask(grid)
    return Field(grid, _ifft(grid, fh))


def dprod(a: Field, b: Field, use_dealias: bool = True) -> Field:
    """Pointwise product of a scalar field with a scalar/vector field."""
    _same_grid(a, b)
    if not a.is_scalar:
        raise ValueError("dprod expects a scalar first factor")
    out = Field(a.grid, a.data * b.data)
    return dealias(out) if use_dealias else out


def mean(f: Field) -> float:
    """Torus integral of a scalar field (measure-weighted, mean(1) = 2^d)."""
    if not f.is_scalar:
        raise ValueError("mean expects a scalar field")
    return float(np.sum(f.data) * f.grid.cell_volume)


def average(f: Field) -> float:
    """Integral divided by the torus measure."""
    return mean(f) / f.grid.measure


def inner(f: Field, g: Field) -> float:
    """Discrete L2 inner product (summed over components for vectors)."""
    _same_grid(f, g)
    if f.data.shape != g.data.shape:
        raise ValueError("inner product needs matching component counts")
    return float(np.sum(f.data * g.data) * f.grid.cell_volume)


def lp_norm(f: Field, p: float) -> float:
    """L^p norm with cell-volume quadrature; vectors use pointwise |.|_2."""
    if p < 1:
        raise ValueError("p must be in [1, inf]")
    mag = np.abs(f.data) if f.is_scalar else np.sqrt(np.sum(f.data**2, axis=0))
    if np.isinf(p):
        return float(mag.max())
    return float((np.sum(mag**p) * f.grid.cell_volume) ** (1.0 / p))


def inv_laplacian(f: Field) -> Field:
    """Zero-mean inverse Laplacian of a scalar field (zero mode dropped)."""
    if not f.is_scalar:
        raise ValueError("inv_laplacian expects a scalar field")
    grid = f.grid
    mult = -(math.pi**2) * _ksq(grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(mult != 0.0, 1.0 / mult, 0.0) * _deriv_mask(grid)
    return Field(grid, _ifft(grid, inv * _fft(f))).check_finite()


# --- Laplacian eigenmode table and the m-mode projection ------------------

_KIND_CONST, _KIND_COS, _KIND_SIN = 0, 1, 2


@dataclass(frozen=True)
class _ModeTable:
    """Ordered real eigenmodes; parallel arrays indexed by mode number."""

    kind: np.ndarray        # const/cos/sin
    kvecs: np.ndarray       # (n_modes, d) canonical wavevector
    idx_plus: np.ndarray    # flat fft index of +k
    idx_minus: np.ndarray   # flat fft index of -k
    sign: np.ndarray        # (-1)^(sum k): fft-bin to true-coefficient phase
    eigenvalues: np.ndarray  # pi^2 |k|^2


@lru_cache(maxsize=None)
def mode_table(grid: TorusGrid) -> _ModeTable:
    n, d = grid.n, grid.d
    half = n // 2
    rng = range(-(half - 1), half)  # symmetric set, Nyquist excluded
    entries = []
    for kvec in np.ndindex(*((2 * half - 1,) * d)):
        k = tuple(ki - (half - 1) for ki in kvec)
        if all(ki == 0 for ki in k):
            entries.append((0.0, k, _KIND_CONST))
            continue
        first = next(ki for ki in k if ki != 0)
        if first < 0:
            continue  # canonical representative of the {k, -k} pair
        lam = float(sum(ki**2 for ki in k))
        entries.append((lam, k, _KIND_COS))
        entries.append((lam, k, _KIND_SIN))
    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    kind = np.array([e[2] for e in entries], dtype=np.int8)
    kvecs = np.array([e[1] for e in entries], dtype=int)
    idx_plus = np.ravel_multi_index((kvecs % n).T, grid.shape)
    idx_minus = np.ravel_multi_index(((-kvecs) % n).T, grid.shape)
    sign = np.where(kvecs.sum(axis=1) % 2 == 0, 1.0, -1.0)
    eig = (math.pi**2) * np.array([e[0] for e in entries])
    return _ModeTable(kind, kvecs, idx_plus, idx_minus, sign, eig)


def mode_capacity(grid: TorusGrid) -> int:
    """Number of retained real eigenmodes, (n-1)^d."""
    return (grid.n - 1) ** grid.d


def _check_m(grid: TorusGrid, m: int) -> None:
    if not 1 <= m <= mode_capacity(grid):
        raise ValueError(f"m={m} outside 1..{mode_capacity(grid)} for n={grid.n}, d={grid.d}")


def _coeffs_multi(grid: TorusGrid, data: np.ndarray, m: int) -> np.ndarray:
    """Eigenmode coefficients of a (c,) + grid batch, shape (m, c)."""
    tab = mode_table(grid)
    c = data.shape[0]
    fh = (np.fft.fftn(data, axes=_spatial_axes(grid)) / grid.npoints).reshape(c, -1)
    kind = tab.kind[:m]
    vals = tab.sign[:m] * fh[:, tab.idx_plus[:m]]  # (c, m)
    root = math.sqrt(grid.measure)
    out = np.where(
        kind == _KIND_CONST,
        root * np.real(vals),
        np.where(kind == _KIND_COS, 1.0, -1.0)
        * root
        * math.sqrt(2.0)
        * np.where(kind == _KIND_COS, np.real(vals), np.imag(vals)),
    )
    return out.T


def _field_multi(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`_coeffs_multi`: synthesize a (c,) + grid batch."""
    tab = mode_table(grid)
    m, c = coeffs.shape
    kind = tab.kind[:m]
    root = math.sqrt(grid.measure)
    amp = np.where(
        kind[:, None] == _KIND_CONST, coeffs / root, coeffs / (root * math.sqrt(2.0))
    ).T  # (c, m)
    sgn = tab.sign[:m]
    is_sin = kind == _KIND_SIN
    is_const = kind == _KIND_CONST
    plus = np.where(is_sin, -1j * amp, amp + 0j) * sgn
    minus = np.where(is_const, 0.0, np.where(is_sin, 1j * amp, amp + 0j) * sgn)
    fh = np.zeros((c, grid.npoints), dtype=complex)
    for comp in range(c):
        np.add.at(fh[comp], tab.idx_plus[:m], plus[comp])
        np.add.at(fh[comp], tab.idx_minus[:m], minus[comp])
    fh = fh.reshape((c,) + grid.shape) * grid.npoints
    return np.real(np.fft.ifftn(fh, axes=_spatial_axes(grid)))


def _coeffs_1c(grid: TorusGrid, data: np.ndarray, m: int) -> np.ndarray:
    """L2-orthonormal eigenmode coefficients of one scalar component."""
    return _coeffs_multi(grid, data[np.newaxis], m)[:, 0]


def _field_1c(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`_coeffs_1c`: synthesize one scalar component."""
    return _field_multi(grid, np.asarray(coeffs, dtype=float)[:, np.newaxis])[0]


def field_to_coeffs(f: Field, m: int) -> np.ndarray:
    """Coefficients in the first m eigenmodes; shape (m,) scalar, (m, c) vector."""
    grid = f.grid
    _check_m(grid, m)
    if f.is_scalar:
        return _coeffs_1c(grid, f.data, m)
    return _coeffs_multi(grid, f.data, m)


def coeffs_to_field(grid: TorusGrid, coeffs: np.ndarray) -> Field:
    """Synthesize the field with the given eigenmode coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    _check_m(grid, coeffs.shape[0])
    if coeffs.ndim == 1:
        return Field(grid, _field_1c(grid, coeffs))
    return Field(grid, _field_multi(grid, coeffs))


def project_modes(f: Field, m: int) -> Field:
    """Orthogonal projection onto the span of the first m eigenmodes."""
    return coeffs_to_field(f.grid, field_to_coeffs(f, m))


def xm_norm(coeffs: np.ndarray) -> float:
    """Euclidean coefficient norm = L2 norm of the represented field."""
    return float(np.linalg.norm(np.asarray(coeffs)))


def reflect(f: Field) -> Field:
    """Samples of x -> f(-x) on the same grid."""
    out = f.data
    for ax in _spatial_axes(f.grid):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return Field(f.grid, out)
