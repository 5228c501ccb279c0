"""Uniform periodic grid and FFT-based spectral operations.

Fields live on the torus [-half_width, half_width) with power-of-two
sampling.  Spectral coefficients are stored normalized so that

    u(x) = sum_k c(k) exp(i k x)

with wavenumbers k running over integer multiples of pi / half_width in
numpy FFT ordering.  With this normalization the quadrature L2 norm equals
(sum_k |c(k)|^2 * 2 * half_width)^(1/2) exactly (Parseval).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "GridSizeError",
    "SpectralState",
    "make_grid",
    "derivative",
    "sobolev_norm",
    "l2_norm",
    "mass",
    "interpolate",
    "dealias",
    "multiply",
    "inner_product",
    "edge_mass_fraction",
]


class GridSizeError(ValueError):
    """Raised for grid sizing that the spectral machinery cannot support."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-half_width, half_width).

    Derived arrays (nodes, wavenumbers, dealias mask) are computed once and
    shared read-only; the instance is safe to use across threads.
    """

    half_width: float
    num_points: int
    dx: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False)
    wavenumbers: np.ndarray = field(init=False, repr=False)
    dealias_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.half_width > 0:
            raise GridSizeError(f"half_width must be positive, got {self.half_width}")
        if not _is_power_of_two(self.num_points) or self.num_points < 16:
            raise GridSizeError(
                f"num_points must be a power of two >= 16, got {self.num_points}"
            )
        dx = 2.0 * self.half_width / self.num_points
        object.__setattr__(self, "dx", dx)
        object.__setattr__(
            self, "x", -self.half_width + dx * np.arange(self.num_points)
        )
        k = 2.0 * np.pi * np.fft.fftfreq(self.num_points, d=dx)
        object.__setattr__(self, "wavenumbers", k)
        kmax = np.abs(k).max()
        object.__setattr__(self, "dealias_mask", np.abs(k) <= (2.0 / 3.0) * kmax)

    @property
    def k_max(self) -> float:
        """Largest resolved wavenumber magnitude (Nyquist)."""
        return np.pi * self.num_points / (2.0 * self.half_width)

    @property
    def nyquist_index(self) -> int:
        return self.num_points // 2

    def fold(self, points: np.ndarray) -> np.ndarray:
        """Map arbitrary coordinates into [-half_width, half_width)."""
        L = self.half_width
        return np.mod(np.asarray(points, dtype=float) + L, 2.0 * L) - L

    def compatible_with(self, other: "Grid") -> bool:
        return (
            self.num_points == other.num_points
            and abs(self.half_width - other.half_width)
            <= 1e-14 * max(1.0, self.half_width)
        )


def make_grid(half_width: float, num_points: int) -> Grid:
    """Build a periodic grid; rejects non-power-of-two or non-positive sizing."""
    return Grid(float(half_width), int(num_points))


@dataclass
class SpectralState:
    """A scalar field stored by its normalized Fourier coefficients."""

    grid: Grid
    coefficients: np.ndarray
    is_real_field: bool = True

    @classmethod
    def from_physical(cls, grid: Grid, values: np.ndarray) -> "SpectralState":
        values = np.asarray(values)
        if values.shape != (grid.num_points,):
            raise ValueError(
                f"field shape {values.shape} does not match grid ({grid.num_points},)"
            )
        is_real = not np.iscomplexobj(values)
        coeffs = np.fft.fft(values) / grid.num_points
        return cls(grid=grid, coefficients=coeffs, is_real_field=is_real)

    @classmethod
    def zero(cls, grid: Grid) -> "SpectralState":
        return cls(grid, np.zeros(grid.num_points, dtype=complex), True)

    def physical(self) -> np.ndarray:
        vals = np.fft.ifft(self.coefficients * self.grid.num_points)
        return vals.real if self.is_real_field else vals

    def copy(self) -> "SpectralState":
        return SpectralState(self.grid, self.coefficients.copy(), self.is_real_field)

    def check_hermitian(self, rtol: float = 1e-12) -> bool:
        """Conjugate symmetry c(-k) = conj(c(k)) up to rtol (real fields)."""
        c = self.coefficients
        n = self.grid.num_points
        idx = np.arange(1, n)
        err = np.abs(c[idx] - np.conj(c[n - idx])).max()
        scale = max(np.abs(c).max(), 1e-300)
        return bool(err <= rtol * scale + 1e-300) and abs(c[0].imag) <= rtol * scale

    def __add__(self, other: "SpectralState") -> "SpectralState":
        self._check_same_grid(other)
        return SpectralState(
            self.grid,
            self.coefficients + other.coefficients,
            self.is_real_field and other.is_real_field,
        )

    def __sub__(self, other: "SpectralState") -> "SpectralState":
        self._check_same_grid(other)
        return SpectralState(
            self.grid,
            self.coefficients - other.coefficients,
            self.is_real_field and other.is_real_field,
        )

    def __rmul__(self, scalar: float) -> "SpectralState":
        return SpectralState(
            self.grid, scalar * self.coefficients, self.is_real_field
        )

    def _check_same_grid(self, other: "SpectralState") -> None:
        if not self.grid.compatible_with(other.grid):
            raise ValueError("states live on incompatible grids")


def derivative(state: SpectralState, order: int = 1) -> SpectralState:
    """Spectral derivative: multiply coefficients by (i k)^order.

    The unpaired Nyquist mode is zeroed for real fields so that odd-order
    derivatives stay real-valued.
    """
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    k = state.grid.wavenumbers
    coeffs = state.coefficients * (1j * k) ** order
    if state.is_real_field:
        coeffs = coeffs.copy()
        coeffs[state.grid.nyquist_index] = 0.0
    return SpectralState(state.grid, coeffs, state.is_real_field)


def sobolev_norm(state: SpectralState, s: float) -> float:
    """Discrete H^s norm: (sum_k (1+k^2)^s |c(k)|^2 * 2 half_width)^(1/2)."""
    k = state.grid.wavenumbers
    weights = (1.0 + k * k) ** s
    total = np.sum(weights * np.abs(state.coefficients) ** 2)
    return float(np.sqrt(total * 2.0 * state.grid.half_width))


def l2_norm(state: SpectralState) -> float:
    return sobolev_norm(state, 0.0)


def mass(state: SpectralState) -> float:
    """Integral of the field over the torus (zero-mode times domain length)."""
    return float((state.coefficients[0] * 2.0 * state.grid.half_width).real)


def inner_product(a: SpectralState, b: SpectralState) -> float:
    """L2 inner product of two real fields via Parseval."""
    a._check_same_grid(b)
    val = np.sum(a.coefficients * np.conj(b.coefficients))
    return float(val.real * 2.0 * a.grid.half_width)


def interpolate(state: SpectralState, query_points: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation at arbitrary points (folded periodically).

    Exact to round-off for band-limited fields; reproduces stored samples at
    grid nodes.
    """
    scalar = np.isscalar(query_points) or np.ndim(query_points) == 0
    y = state.grid.fold(np.atleast_1d(np.asarray(query_points, dtype=float)))
    k = state.grid.wavenumbers
    c = state.coefficients
    # stored coefficients are indexed from the first node, so evaluation
    # phases are taken relative to x = -half_width
    offset = y + state.grid.half_width
    out = np.empty(y.shape[0], dtype=complex)
    chunk = 512
    for start in range(0, y.shape[0], chunk):
        stop = min(start + chunk, y.shape[0])
        phases = np.exp(1j * np.outer(offset[start:stop], k))
        out[start:stop] = phases @ c
    if state.is_real_field:
        out = out.real
    return out[0] if scalar else out


def dealias(state: SpectralState) -> SpectralState:
    """Zero all modes with |k| above two thirds of the Nyquist wavenumber."""
    coeffs = np.where(state.grid.dealias_mask, state.coefficients, 0.0)
    return SpectralState(state.grid, coeffs, state.is_real_field)


def multiply(a: SpectralState, b: SpectralState, dealias_result: bool = True) -> SpectralState:
    """Pointwise product in physical space, optionally 2/3-rule dealiased."""
    a._check_same_grid(b)
    prod = a.physical() * b.physical()
    out = SpectralState.from_physical(a.grid, prod)
    return dealias(out) if dealias_result else out


def edge_mass_fraction(state: SpectralState, edge_fraction: float = 0.1) -> float:
    """Fraction of the squared field sitting in the outer part of the domain.

    Used to monitor that localized solutions stay away from the periodic
    wrap; values above ~1e-6 mean the domain is too small.
    """
    u = np.abs(state.physical()) ** 2
    L = state.grid.half_width
    outer = np.abs(state.grid.x) >= (1.0 - edge_fraction) * L
    total = u.sum()
    if total == 0.0:
        return 0.0
    return float(u[outer].sum() / total)
