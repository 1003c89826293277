"""File formats and configuration.

Binary formats are little-endian and fixed so that checksums reproduce
across platforms:

* field file, magic ``ODTF``: version u32, kind u8 (0 = real64,
  1 = complex128 interleaved), nx u64, ny u64, payload row-major;
* measurement file, magic ``ODTM``: version u32, P u32, M u32, then per
  illumination angle f64, y complex128[M], u_in|_Gamma complex128[M],
  followed by a UTF-8 ``key=value`` metadata block describing the
  acquisition geometry.

Configuration files are flat UTF-8 ``key=value`` lines; every key has a
typed default below and unknown keys are rejected.
"""

from __future__ import annotations

import struct

import numpy as np

from .grid import Grid2D
from .sim import AngleRecord, MeasurementSet, SimProtocol
from .greens import DetectorGeometry

__all__ = [
    "ConfigError",
    "DataInconsistencyError",
    "CONFIG_KEYS",
    "default_config",
    "parse_config",
    "parse_config_file",
    "serialize_config",
    "write_field",
    "read_field",
    "write_measurements",
    "read_measurements",
    "write_pgm",
    "format_bytes",
]

_FIELD_MAGIC = b"ODTF"
_MEAS_MAGIC = b"ODTM"
_VERSION = 1


class ConfigError(ValueError):
    """Malformed or unknown configuration input."""


class DataInconsistencyError(ValueError):
    """Measurement data inconsistent with the requested geometry."""


# ----------------------------------------------------------------------
# configuration registry: key -> (type, default, help)
# ----------------------------------------------------------------------

CONFIG_KEYS: dict[str, tuple[type, object, str]] = {
    "wavelength": (float, 1.0, "vacuum wavelength (all lengths in these units)"),
    "n_background": (float, 1.333, "background refractive index"),
    # simulation protocol
    "sim_fine_n": (int, 256, "fine simulation grid samples per side"),
    "sim_side_len": (float, 16.0, "fine simulation grid physical side"),
    "sim_num_angles": (int, 31, "number of incidence angles"),
    "sim_angle_min_deg": (float, -60.0, "first incidence angle (degrees)"),
    "sim_angle_max_deg": (float, 60.0, "last incidence angle (degrees)"),
    "sim_source_distance": (float, 16.5, "source line distance below center"),
    "sim_detector_sides": (str, "bottom,top", "detector rows to record"),
    "sim_detector_samples": (int, 0, "samples read per detector row (0 = full row)"),
    "sim_downsample_to": (int, 0, "block-average detector records to this count (0 = off)"),
    "sim_forward_max_iters": (int, 1000, "simulation forward-solver iteration cap"),
    "sim_forward_tol": (float, 1e-7, "simulation forward-solver relative-change tolerance"),
    # phantom
    "phantom": (str, "shepp-logan", "phantom kind: shepp-logan | bead"),
    "phantom_contrast": (float, 0.2, "nominal phantom contrast"),
    "phantom_extent": (float, 0.0, "phantom bounding-box side (0 = full grid)"),
    "bead_radius": (float, 3.0, "bead radius"),
    "bead_center_x": (float, 0.0, "bead center, lateral"),
    "bead_center_y": (float, 0.0, "bead center, axial"),
    # reconstruction
    "recon_n": (int, 64, "reconstruction grid samples per side"),
    "recon_side_len": (float, 8.0, "reconstruction grid physical side"),
    "recon_gamma": (float, 5e-3, "descent step"),
    "recon_mu": (float, 3.3e-2, "regularization weight"),
    "recon_outer_iters": (int, 200, "outer iterations"),
    "recon_subset_size": (int, 8, "illuminations per stochastic gradient"),
    "recon_momentum": (str, "fista", "momentum rule: fista | constant | none"),
    "recon_momentum_parameter": (float, 0.0, "weight for constant momentum"),
    "recon_seed": (int, 0, "subset-schedule seed"),
    "recon_snapshot_every": (int, 0, "write iterate snapshots at this cadence (0 = off)"),
    "forward_max_iters": (int, 120, "reconstruction forward-solver iteration cap"),
    "forward_tol": (float, 1e-4, "reconstruction forward-solver tolerance"),
    "jac_max_iters": (int, 120, "Jacobian inner-solver iteration cap"),
    "jac_tol": (float, 1e-4, "Jacobian inner-solver tolerance"),
    "prox_rho1": (float, 1.0, "ADMM penalty on the gradient split"),
    "prox_rho2": (float, 1.0, "ADMM penalty on the nonnegativity split"),
    "prox_max_iters": (int, 200, "ADMM iteration cap"),
    "prox_tol": (float, 1e-5, "ADMM relative-change tolerance"),
    # forward subcommand
    "forward_angle_deg": (float, 0.0, "incidence angle for the forward subcommand"),
    # validate-mie subcommand
    "mie_contrasts": (str, "0.1,0.3,0.5,0.7,1.0", "bead contrasts to sweep"),
    "mie_radius": (float, 3.0, "bead radius for the sweep"),
    "mie_n": (int, 256, "grid samples per side for the sweep"),
    "mie_side_len": (float, 16.0, "grid physical side for the sweep"),
    "mie_angle_deg": (float, 0.0, "incidence angle for the sweep"),
    "mie_cg_max_iters": (int, 2000, "CG iteration cap for the sweep"),
    "mie_nagd_max_iters": (int, 8000, "NAGD iteration cap for the sweep"),
    "mie_epsilon0": (float, 1e-2, "relative-error threshold defining convergence"),
    # bench subcommand
    "bench_repeats": (int, 3, "repetitions per benchmark"),
}


def default_config() -> dict:
    return {k: spec[1] for k, spec in CONFIG_KEYS.items()}


def _parse_value(key: str, raw: str):
    kind = CONFIG_KEYS[key][0]
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for key {key!r}: {raw!r}") from exc


def parse_config(text: str) -> dict:
    """Parse flat key=value lines; unknown keys are rejected, missing
    keys take their documented defaults."""
    cfg = default_config()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        cfg[key] = _parse_value(key, raw.strip())
    return cfg


def parse_config_file(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(cfg: dict) -> str:
    """Canonical text form covering every key; parse(serialize(c)) == c."""
    unknown = set(cfg) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    lines = []
    for key in CONFIG_KEYS:
        value = cfg.get(key, CONFIG_KEYS[key][1])
        lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# field files
# ----------------------------------------------------------------------


def write_field(path, array: np.ndarray) -> None:
    array = np.asarray(array)
    if array.ndim != 2:
        raise ValueError("field files store 2-D arrays")
    if array.dtype == np.float64:
        kind = 0
    elif array.dtype == np.complex128:
        kind = 1
    else:
        raise ValueError(f"unsupported dtype {array.dtype}; use float64 or complex128")
    with open(path, "wb") as fh:
        fh.write(_FIELD_MAGIC)
        fh.write(struct.pack("<IBQQ", _VERSION, kind, array.shape[0], array.shape[1]))
        fh.write(np.ascontiguousarray(array).astype(
            "<f8" if kind == 0 else "<c16").tobytes())


def read_field(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _FIELD_MAGIC:
            raise ValueError(f"not a field file (magic {magic!r})")
        version, kind, nx, ny = struct.unpack("<IBQQ", fh.read(struct.calcsize("<IBQQ")))
        if version != _VERSION:
            raise ValueError(f"unsupported field file version {version}")
        if kind not in (0, 1):
            raise ValueError(f"unsupported field kind {kind}")
        dtype = np.dtype("<f8" if kind == 0 else "<c16")
        payload = fh.read(nx * ny * dtype.itemsize)
        if len(payload) != nx * ny * dtype.itemsize:
            raise ValueError("truncated field payload")
        arr = np.frombuffer(payload, dtype=dtype).reshape(nx, ny)
        return arr.astype(np.float64 if kind == 0 else np.complex128)


# ----------------------------------------------------------------------
# measurement files
# ----------------------------------------------------------------------


def write_measurements(path, ms: MeasurementSet) -> None:
    p = ms.n_illuminations
    m = ms.n_detectors
    with open(path, "wb") as fh:
        fh.write(_MEAS_MAGIC)
        fh.write(struct.pack("<III", _VERSION, p, m))
        for rec in ms.records:
            fh.write(struct.pack("<d", rec.angle))
            fh.write(rec.y.astype("<c16").tobytes())
            fh.write(rec.u_in_on_gamma.astype("<c16").tobytes())
        meta = dict(ms.metadata)
        meta["source_distance"] = repr(ms.source_distance)
        block = "".join(f"{k}={v}\n" for k, v in sorted(meta.items()))
        fh.write(block.encode("utf-8"))


def _geometry_from_metadata(meta: dict) -> DetectorGeometry:
    try:
        fine = Grid2D(int(meta["fine_n_side"]), float(meta["fine_side_len"]))
        proto = SimProtocol(
            angles=(0.0,),
            fine_grid=fine,
            source_distance=float(meta["source_distance"]),
            detector_sides=tuple(meta["detector_sides"].split(",")),
            detector_samples=int(meta["detector_samples"]),
            downsample_to=int(meta["downsample_to"]),
        )
    except KeyError as exc:
        raise DataInconsistencyError(f"measurement metadata missing {exc}") from exc
    return DetectorGeometry(proto.detector_positions(), fine)


def read_measurements(path) -> MeasurementSet:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MEAS_MAGIC:
            raise ValueError(f"not a measurement file (magic {magic!r})")
        version, p, m = struct.unpack("<III", fh.read(struct.calcsize("<III")))
        if version != _VERSION:
            raise ValueError(f"unsupported measurement file version {version}")
        records = []
        for _ in range(p):
            (angle,) = struct.unpack("<d", fh.read(8))
            y = np.frombuffer(fh.read(16 * m), dtype="<c16").astype(np.complex128)
            uin = np.frombuffer(fh.read(16 * m), dtype="<c16").astype(np.complex128)
            if y.size != m or uin.size != m:
                raise ValueError("truncated measurement payload")
            records.append(AngleRecord(angle, y, uin))
        meta: dict[str, str] = {}
        for line in fh.read().decode("utf-8").splitlines():
            if line.strip():
                key, _, value = line.partition("=")
                meta[key] = value
    geometry = _geometry_from_metadata(meta)
    return MeasurementSet(tuple(records), geometry,
                          float(meta["source_distance"]), meta)


# ----------------------------------------------------------------------
# images and formatting
# ----------------------------------------------------------------------


def write_pgm(path, image: np.ndarray) -> None:
    """8-bit min-max normalized P5 rendering of a real image."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError("PGM output needs a 2-D array")
    lo = float(image.min())
    hi = float(image.max())
    if hi > lo:
        scaled = np.round((image - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(image)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii"))
        fh.write(scaled.astype(np.uint8).tobytes())


def format_bytes(n: int) -> str:
    """Human-readable decimal size, e.g. 31457280 -> '31.5 MB'."""
    value = float(n)
    for unit in ("B", "kB", "MB", "GB", "TB"):
        if value < 1000.0 or unit == "TB":
            if unit == "B":
                return f"{int(value)} B"
            return f"{value:.1f} {unit}"
        value /= 1000.0
    raise AssertionError("unreachable")
