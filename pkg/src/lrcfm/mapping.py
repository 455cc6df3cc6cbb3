"""Per-pixel fitting into spatial maps, map statistics, and a seeded
synthetic multi-pixel dataset generator used as the test oracle.

Pixels that fail to fit (non-convergent or unidentifiable data) are
recorded as missing (NaN) and excluded from statistics, never imputed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pulse_fit
from .pulse_fit import TimeSeries, UnidentifiableDataError

QUANTITIES = ("pi_time", "t1", "t2", "custom")

# default per-model map quantity: rabi maps report the pi time, decay
# maps report the fitted time constant a2
_DEFAULT_DERIVE = {
    "rabi": ("pi_time", "s", pulse_fit.pi_time),
    "t1": ("t1", "s", lambda r: float(r.params[1])),
    "t2": ("t2", "s", lambda r: float(r.params[1])),
}


@dataclass(frozen=True)
class PixelMap:
    origin: tuple[float, float]  # (x, y) of pixel (ix=0, iy=0), meters
    pitch: float
    nx: int
    ny: int
    values: np.ndarray  # shape (ny, nx); NaN = missing pixel
    quantity: str
    units: str

    def __post_init__(self):
        if self.pitch <= 0:
            raise ValueError("pitch must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("nx and ny must be at least 1")
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.ny, self.nx):
            raise ValueError(f"values must have shape (ny={self.ny}, "
                             f"nx={self.nx}), got {values.shape}")
        if np.any(np.isinf(values)):
            raise ValueError("map values must be finite or NaN")
        if self.quantity not in QUANTITIES:
            raise ValueError(f"unknown quantity {self.quantity!r}")

    def coordinates(self, ix: int, iy: int) -> tuple[float, float]:
        return (self.origin[0] + ix * self.pitch,
                self.origin[1] + iy * self.pitch)


@dataclass(frozen=True)
class MapStats:
    mean: float
    std: float
    min: float
    max: float
    n_valid: int
    n_missing: int

    def to_json_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "min": self.min,
                "max": self.max, "n_valid": self.n_valid,
                "n_missing": self.n_missing}


def assemble(records, model: str, derive=None, pitch: float | None = None,
             quantity: str | None = None, units: str | None = None) -> PixelMap:
    """Fit every (x, y, TimeSeries) record and place the derived scalar on
    a regular grid.

    Coordinates must snap to a common grid (tolerance pitch/100); the
    pitch is inferred from coordinate spacing when not given. Failed fits
    leave their pixel missing.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to assemble")
    if derive is None:
        quantity, units, derive = _DEFAULT_DERIVE[model]
    else:
        quantity = quantity or "custom"
        units = units or ""
    xs = np.array([r[0] for r in records], dtype=float)
    ys = np.array([r[1] for r in records], dtype=float)
    if pitch is None:
        pitch = _infer_pitch(xs, ys)
    x0, y0 = float(np.min(xs)), float(np.min(ys))
    nx = int(round((np.max(xs) - x0) / pitch)) + 1
    ny = int(round((np.max(ys) - y0) / pitch)) + 1
    values = np.full((ny, nx), np.nan)
    seen = set()
    for x, y, series in records:
        ix = _snap((x - x0) / pitch, x, "x")
        iy = _snap((y - y0) / pitch, y, "y")
        if (ix, iy) in seen:
            raise ValueError(f"duplicate record at (x={x:g}, y={y:g})")
        seen.add((ix, iy))
        try:
            result = pulse_fit.fit(model, series)
        except UnidentifiableDataError:
            continue
        if not result.converged:
            continue
        try:
            values[iy, ix] = derive(result)
        except ValueError:
            continue
    return PixelMap(origin=(x0, y0), pitch=float(pitch), nx=nx, ny=ny,
                    values=values, quantity=quantity, units=units)


def _snap(index: float, coordinate: float, axis: str) -> int:
    nearest = round(index)
    if abs(index - nearest) > 0.01:  # grid tolerance pitch/100
        raise ValueError(f"record at {axis} = {coordinate:g} is off the "
                         "pixel grid")
    return int(nearest)


def _infer_pitch(xs, ys) -> float:
    deltas = np.concatenate([np.diff(np.unique(xs)), np.diff(np.unique(ys))])
    deltas = deltas[deltas > 0]
    if deltas.size == 0:
        raise ValueError("cannot infer pixel pitch from a single coordinate; "
                         "pass pitch explicitly")
    return float(np.min(deltas))


def stats(pixel_map: PixelMap) -> MapStats:
    """Mean, population standard deviation, min and max over valid pixels."""
    values = pixel_map.values
    valid = values[np.isfinite(values)]
    if valid.size == 0:
        raise ValueError("no valid pixels")
    return MapStats(
        mean=float(np.mean(valid)),
        std=float(np.std(valid)),  # population std, divisor n
        min=float(np.min(valid)),
        max=float(np.max(valid)),
        n_valid=int(valid.size),
        n_missing=int(values.size - valid.size),
    )


def synth_map(truth_params: np.ndarray, model: str, tau: np.ndarray,
              noise_sigma: float, seed: int,
              origin: tuple[float, float] = (0.0, 0.0),
              pitch: float = 50e-6) -> list[tuple[float, float, TimeSeries]]:
    """Generate one noisy TimeSeries per pixel from per-pixel true
    parameters of shape (ny, nx, arity).

    The noise stream of each pixel is keyed by (seed, iy, ix), so the
    output is deterministic and independent of generation order.
    """
    truth_params = np.asarray(truth_params, dtype=float)
    if truth_params.ndim != 3:
        raise ValueError("truth_params must have shape (ny, nx, arity)")
    ny, nx, arity = truth_params.shape
    if arity != pulse_fit.MODEL_ARITY[model]:
        raise ValueError(f"{model} needs {pulse_fit.MODEL_ARITY[model]} "
                         f"parameters per pixel, got {arity}")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    tau = np.asarray(tau, dtype=float)
    records = []
    for iy in range(ny):
        for ix in range(nx):
            clean = pulse_fit.model_eval(model, tau, truth_params[iy, ix])
            if noise_sigma > 0:
                rng = np.random.default_rng([seed, iy, ix])
                signal = clean + rng.normal(0.0, noise_sigma, size=tau.shape)
            else:
                signal = clean
            records.append((origin[0] + ix * pitch, origin[1] + iy * pitch,
                            TimeSeries(tau, signal)))
    return records


def write_map_csv(pixel_map: PixelMap, path) -> None:
    """Map CSV: x_um,y_um,value,units with one row per pixel; missing
    pixels get an empty value field."""
    lines = ["x_um,y_um,value,units"]
    for iy in range(pixel_map.ny):
        for ix in range(pixel_map.nx):
            x, y = pixel_map.coordinates(ix, iy)
            v = pixel_map.values[iy, ix]
            value = repr(float(v)) if math.isfinite(v) else ""
            lines.append(f"{repr(x * 1e6)},{repr(y * 1e6)},{value},"
                         f"{pixel_map.units}")
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def map_to_json_dict(pixel_map: PixelMap) -> dict:
    values = [[None if not math.isfinite(v) else float(v) for v in row]
              for row in pixel_map.values]
    return {
        "origin_m": [pixel_map.origin[0], pixel_map.origin[1]],
        "pitch_m": pixel_map.pitch,
        "nx": pixel_map.nx,
        "ny": pixel_map.ny,
        "quantity": pixel_map.quantity,
        "units": pixel_map.units,
        "values": values,
    }


def write_stats_json(map_stats: MapStats, path) -> None:
    _atomic_write(Path(path),
                  json.dumps(map_stats.to_json_dict(), indent=2) + "\n")


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)
