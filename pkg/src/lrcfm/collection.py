"""Collection-side model: numerical aperture, relative detection rate,
fiber-core detection proportion, and the detected-signal figure of merit.

The NA-to-collected-fraction map assumes one-sided isotropic point
emission: the fraction of photons inside the collection cone of
half-angle theta is (1 - cos(theta)) / 2. The detection rate is that
fraction normalized to NA = 1, which simplifies to 1 - sqrt(1 - NA^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .beam_optics import BeamGeometry, ExcitationRegion
from .nv_rates import NvRateSet, PumpModel, cw_fluorescence, polarization, steady_state


def numerical_aperture(lens_radius: float, focal_length: float) -> float:
    """NA = sin(arctan(lens_radius / focal_length))."""
    if lens_radius <= 0 or focal_length <= 0:
        raise ValueError("lens radius and focal length must be positive")
    return math.sin(math.atan(lens_radius / focal_length))


def detection_rate(na: float) -> float:
    """Collected solid-angle fraction relative to an NA = 1 objective."""
    if not 0.0 < na <= 1.0:
        raise ValueError(f"NA must be in (0, 1], got {na}")
    return 1.0 - math.sqrt(1.0 - na * na)


def detection_proportion(core_radius: float, magnification: float,
                         w0: float) -> float:
    """Area fraction of the excited-spot image passed by the fiber core,
    min(1, (core_radius / (magnification * w0))^2)."""
    if core_radius <= 0 or magnification <= 0 or w0 <= 0:
        raise ValueError("core radius, magnification and waist must be positive")
    ratio = core_radius / (magnification * w0)
    return min(1.0, ratio * ratio)


@dataclass(frozen=True)
class CollectionGeometry:
    lens_radius: float
    focal_length: float
    numerical_aperture: float
    detection_rate: float

    @classmethod
    def from_lens(cls, lens_radius: float, focal_length: float):
        na = numerical_aperture(lens_radius, focal_length)
        return cls(lens_radius, focal_length, na, detection_rate(na))


@dataclass(frozen=True)
class FigureOfMerit:
    """Detected-signal figure of merit and its factors."""

    detection_volume: float
    i_cw: float
    polarization: float
    detection_rate: float
    detection_proportion: float
    detected_signal: float


def figure_of_merit(beam: BeamGeometry, region: ExcitationRegion,
                    rates: NvRateSet, pump: PumpModel,
                    coll: CollectionGeometry, proportion: float = 1.0,
                    density: float = 1.0) -> FigureOfMerit:
    """Detected signal = volume * I_cw * P * detection rate * detection
    proportion * center density, with the rate model evaluated at the
    excitation region's mean power density."""
    if not 0.0 < proportion <= 1.0:
        raise ValueError(f"detection proportion must be in (0, 1], got {proportion}")
    if density <= 0:
        raise ValueError(f"center density must be positive, got {density}")
    if not math.isclose(beam.waist_radius, region.waist_radius,
                        rel_tol=1e-9):
        raise ValueError("beam and excitation region disagree on the waist "
                         f"radius: {beam.waist_radius} vs {region.waist_radius}")
    ss = steady_state(rates, pump, region.mean_power_density)
    i_cw = cw_fluorescence(ss, rates)
    pol = polarization(ss)
    detected = (region.volume * i_cw * pol * coll.detection_rate
                * proportion * density)
    return FigureOfMerit(
        detection_volume=region.volume,
        i_cw=i_cw,
        polarization=pol,
        detection_rate=coll.detection_rate,
        detection_proportion=proportion,
        detected_signal=detected,
    )
