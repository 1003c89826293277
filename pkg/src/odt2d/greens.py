"""Free-space Helmholtz Green's function operators on the sampling grid.

The outgoing 2-D Green's function of ``(laplacian + k_bg^2) g = -delta``
is ``g(x) = (i/4) H0^(1)(k_bg ||x||)``.  It is sampled at all pairwise
pixel offsets, weighted by the pixel area (midpoint quadrature), and
applied as an aperiodic convolution through a 2x zero-padded FFT.  The
singular offset-0 sample is replaced by the integral of ``g`` over an
equal-area disc (radius ``a = h / sqrt(pi)``), which is finite:

    integral_0^a H0^(1)(k r) r dr = (a/k) H1^(1)(k a) + 2i / (pi k^2)

The detector operator uses the same kernel at arbitrary detector-pixel
distances and is kept dense (the number of detectors is small).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import ComplexField, Grid2D, PhysicsParams
from .special import hankel0, hankel1

__all__ = [
    "GreenKernel",
    "DetectorGeometry",
    "DetectorOperator",
    "build_green_kernel",
    "padded_kernel_samples",
    "self_cell_value",
    "apply_G",
    "apply_G_adjoint",
    "build_detector_operator",
]


@dataclass(frozen=True)
class GreenKernel:
    """Precomputed spectrum of the area-weighted Green kernel on the
    2x zero-padded grid."""

    grid: Grid2D
    k_bg: float
    padded_spectrum: np.ndarray = field(repr=False)
    _adjoint_spectrum: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        two_n = 2 * self.grid.n_side
        if self.padded_spectrum.shape != (two_n, two_n):
            raise ValueError("padded spectrum must cover the 2x padded grid")
        for name in ("padded_spectrum", "_adjoint_spectrum"):
            arr = np.asarray(getattr(self, name), dtype=np.complex128)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def self_cell_value(pixel: float, k_bg: float) -> complex:
    """Integral of g over an equal-area disc replacing the singular cell."""
    a = pixel / math.sqrt(math.pi)
    radial = (a / k_bg) * hankel1(k_bg * a) + 2j / (math.pi * k_bg ** 2)
    return complex(0.5j * math.pi * radial)


def padded_kernel_samples(grid: Grid2D, k_bg: float) -> np.ndarray:
    """Area-weighted kernel at pixel offsets, laid out on the 2x padded
    grid with wraparound indexing (offset o at index ``o mod 2n``)."""
    n = grid.n_side
    h = grid.pixel
    offsets = np.arange(2 * n)
    offsets = np.where(offsets > n, offsets - 2 * n, offsets).astype(np.float64)
    oy, ox = np.meshgrid(offsets, offsets, indexing="ij")
    r = h * np.hypot(oy, ox)
    kern = np.empty((2 * n, 2 * n), dtype=np.complex128)
    nz = r > 0
    kern[nz] = 0.25j * hankel0(k_bg * r[nz]) * h * h
    kern[~nz] = self_cell_value(h, k_bg)
    return kern


def build_green_kernel(grid: Grid2D, phys: PhysicsParams) -> GreenKernel:
    """Sample the kernel on the padded grid and precompute its spectrum."""
    if grid.pixel > phys.wavelength / (4.0 * phys.n_b):
        warnings.warn(
            f"pixel {grid.pixel:.4g} exceeds lambda/(4 n_b) = "
            f"{phys.wavelength / (4 * phys.n_b):.4g}; kernel is undersampled",
            stacklevel=2,
        )
    kern = padded_kernel_samples(grid, phys.k_bg)
    spectrum = np.fft.fft2(kern)
    return GreenKernel(grid, phys.k_bg, spectrum, np.conj(spectrum))


def _convolve(kernel: GreenKernel, values: np.ndarray, spectrum: np.ndarray) -> np.ndarray:
    n = kernel.grid.n_side
    pad = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    pad[:n, :n] = values.reshape(n, n)
    out = np.fft.ifft2(np.fft.fft2(pad) * spectrum)
    return out[:n, :n].reshape(-1)


def _check_field(kernel: GreenKernel, v: ComplexField) -> None:
    if v.grid != kernel.grid:
        raise ValueError("field grid does not match kernel grid")


def apply_G(kernel: GreenKernel, v: ComplexField) -> ComplexField:
    """Aperiodic convolution with the sampled kernel, restricted to the grid."""
    _check_field(kernel, v)
    return ComplexField(kernel.grid, _convolve(kernel, v.values, kernel.padded_spectrum))


def apply_G_adjoint(kernel: GreenKernel, v: ComplexField) -> ComplexField:
    """Adjoint of :func:`apply_G` for the standard complex inner product."""
    _check_field(kernel, v)
    return ComplexField(kernel.grid, _convolve(kernel, v.values, kernel._adjoint_spectrum))


@dataclass(frozen=True)
class DetectorGeometry:
    """Detector sample positions (x, y) paired with the source grid."""

    positions: np.ndarray = field(repr=False)
    grid: Grid2D = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 1:
            raise ValueError("positions must be an (M, 2) array of points")
        if not np.all(np.isfinite(pos)):
            raise ValueError("non-finite detector positions")
        pos = pos.copy()
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)

    @property
    def n_detectors(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class DetectorOperator:
    """Dense map from grid sources to detector samples,
    entry (m, n) = pixel_area * g(y_m - x_n)."""

    entries: np.ndarray = field(repr=False)
    geometry: DetectorGeometry

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=np.complex128)
        if entries.shape != (self.geometry.n_detectors, self.geometry.grid.n_pixels):
            raise ValueError("entries shape inconsistent with geometry")
        entries = entries.copy()
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.entries @ np.asarray(v).reshape(-1)

    def apply_adjoint(self, w: np.ndarray) -> np.ndarray:
        return self.entries.conj().T @ np.asarray(w).reshape(-1)


def build_detector_operator(geom: DetectorGeometry, phys: PhysicsParams) -> DetectorOperator:
    """Assemble the dense detector operator; rejects detectors that
    coincide with a pixel center (the kernel is singular there)."""
    grid = geom.grid
    x, y = grid.meshgrid()
    dx = geom.positions[:, 0][:, None] - x.reshape(-1)[None, :]
    dy = geom.positions[:, 1][:, None] - y.reshape(-1)[None, :]
    r = np.hypot(dx, dy)
    if np.any(r <= 1e-12 * grid.pixel):
        raise ValueError("detector position coincides with a pixel center")
    entries = 0.25j * hankel0(phys.k_bg * r.reshape(-1)).reshape(r.shape)
    entries *= grid.pixel ** 2
    return DetectorOperator(entries, geom)
