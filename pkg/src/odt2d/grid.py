"""Domain geometry, fields, potentials, and contrast/SNR bookkeeping.

All lengths are expressed in wavelength units (the vacuum wavelength is
normalized to 1 internally); convert from physical units at the I/O
boundary.  Arrays are stored flat, length ``n_side**2``, in row-major
order.  Sample ``(i, j)`` sits at the pixel center
``((i + 0.5) * pixel - side_len / 2, (j + 0.5) * pixel - side_len / 2)``,
where axis 0 (``i``, rows) is the propagation axis ``y`` at normal
incidence and axis 1 (``j``, columns) is the lateral axis ``x``.

Every type here is an immutable value object: safe to share across
threads without synchronization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid2D",
    "PhysicsParams",
    "ScatteringPotential",
    "ComplexField",
    "RefractiveMap",
    "potential_from_ri",
    "ri_from_potential",
    "contrast",
    "snr_db",
]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Grid2D:
    """Square sampling lattice: ``n_side`` pixel centers per side over
    a physical side length ``side_len`` (wavelength units)."""

    n_side: int
    side_len: float

    def __post_init__(self) -> None:
        if self.n_side < 2:
            raise ValueError(f"n_side must be >= 2, got {self.n_side}")
        if not (self.side_len > 0 and math.isfinite(self.side_len)):
            raise ValueError(f"side_len must be positive, got {self.side_len}")

    @property
    def pixel(self) -> float:
        return self.side_len / self.n_side

    @property
    def n_pixels(self) -> int:
        return self.n_side * self.n_side

    def axis_coords(self) -> np.ndarray:
        """Pixel-center coordinates along one axis (identical for both)."""
        idx = np.arange(self.n_side)
        return (idx + 0.5) * self.pixel - self.side_len / 2.0

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) pixel-center coordinates, each shaped (n_side, n_side).

        Y varies along axis 0 (rows), X along axis 1 (columns).
        """
        c = self.axis_coords()
        y, x = np.meshgrid(c, c, indexing="ij")
        return x, y


@dataclass(frozen=True)
class PhysicsParams:
    """Background medium and free-space wavenumber ``k0 = 2 pi / wavelength``."""

    wavelength: float = 1.0
    n_b: float = 1.0

    def __post_init__(self) -> None:
        if not (self.wavelength > 0 and math.isfinite(self.wavelength)):
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not (self.n_b >= 1 and math.isfinite(self.n_b)):
            raise ValueError(f"n_b must be >= 1, got {self.n_b}")

    @property
    def k0(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def k_bg(self) -> float:
        """Background wavenumber ``k0 * n_b``."""
        return self.k0 * self.n_b


def _check_values(values: np.ndarray, grid: Grid2D, dtype: np.dtype) -> np.ndarray:
    values = np.asarray(values, dtype=dtype).reshape(-1)
    if values.size != grid.n_pixels:
        raise ValueError(
            f"expected {grid.n_pixels} samples for a {grid.n_side}x{grid.n_side} "
            f"grid, got {values.size}"
        )
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite sample values")
    return values


@dataclass(frozen=True)
class ScatteringPotential:
    """Real-valued potential ``f = k0^2 (n^2 - n_b^2)`` sampled on a grid."""

    grid: Grid2D
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "values", _freeze(_check_values(self.values, self.grid, np.float64))
        )

    @property
    def image(self) -> np.ndarray:
        return self.values.reshape(self.grid.n_side, self.grid.n_side)


@dataclass(frozen=True)
class ComplexField:
    """Complex field (total, incident, or scattered) sampled on a grid."""

    grid: Grid2D
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "values", _freeze(_check_values(self.values, self.grid, np.complex128))
        )

    @property
    def image(self) -> np.ndarray:
        return self.values.reshape(self.grid.n_side, self.grid.n_side)


@dataclass(frozen=True)
class RefractiveMap:
    """Per-pixel refractive index n(x) >= 1."""

    grid: Grid2D
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = _check_values(self.values, self.grid, np.float64)
        if np.any(values < 1.0):
            raise ValueError("refractive index below 1 is unphysical here")
        object.__setattr__(self, "values", _freeze(values))

    @property
    def image(self) -> np.ndarray:
        return self.values.reshape(self.grid.n_side, self.grid.n_side)


def potential_from_ri(n: RefractiveMap, phys: PhysicsParams) -> ScatteringPotential:
    """Scattering potential ``f = k0^2 (n^2 - n_b^2)`` of a refractive map."""
    f = phys.k0 ** 2 * (n.values ** 2 - phys.n_b ** 2)
    return ScatteringPotential(n.grid, f)


def ri_from_potential(f: ScatteringPotential, phys: PhysicsParams) -> RefractiveMap:
    """Inverse of :func:`potential_from_ri`: ``n = sqrt(f / k0^2 + n_b^2)``."""
    n2 = f.values / phys.k0 ** 2 + phys.n_b ** 2
    if np.any(n2 < 0):
        raise ValueError("potential implies imaginary refractive index")
    return RefractiveMap(f.grid, np.sqrt(n2))


def contrast(f: ScatteringPotential, phys: PhysicsParams) -> float:
    """Dimensionless scattering strength ``max|f| / (k0^2 n_b^2)``."""
    return float(np.max(np.abs(f.values)) / (phys.k0 ** 2 * phys.n_b ** 2))


def snr_db(estimate: ScatteringPotential, truth: ScatteringPotential) -> float:
    """``20 log10(||truth|| / ||estimate - truth||)`` on potentials.

    The reference literature reports SNRs without stating the formula,
    so values computed here are comparable only with themselves.
    Returns ``inf`` for an exact match.
    """
    if estimate.grid != truth.grid:
        raise ValueError("estimate and truth live on different grids")
    denom = np.linalg.norm(truth.values)
    if denom == 0.0:
        raise ValueError("snr_db undefined for an identically zero truth")
    err = np.linalg.norm(estimate.values - truth.values)
    if err == 0.0:
        return math.inf
    return float(20.0 * math.log10(denom / err))
