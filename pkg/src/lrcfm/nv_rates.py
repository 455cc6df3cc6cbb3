"""Five-level NV-center rate-equation model.

Levels: 1 = ground m_s=0, 2 = ground m_s=+-1, 3 = excited m_s=0,
4 = excited m_s=+-1, 5 = metastable singlet. Optical pumping drives
1->3 and 2->4 at the same rate Gamma = kappa * power_density
(spin-conserving excitation).

The steady state solves the linear system d(rho)/dt = 0 with the
normalization sum(rho) = 1:

    d rho11/dt = -G rho11 + k31 rho33 + k41 rho44 + k51 rho55
    d rho22/dt = -G rho22 + k32 rho33 + k42 rho44 + k52 rho55
    d rho33/dt =  G rho11 - (k31 + k32 + k35) rho33
    d rho44/dt =  G rho22 - (k41 + k42 + k45) rho44
    d rho55/dt =  k35 rho33 + k45 rho44 - (k51 + k52) rho55
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

_RATE_KEYS = ("k31", "k32", "k35", "k41", "k42", "k45", "k51", "k52")


@dataclass(frozen=True)
class NvRateSet:
    """Transition rates k_ij in Hz (from level i to level j)."""

    k31: float
    k32: float
    k35: float
    k41: float
    k42: float
    k45: float
    k51: float
    k52: float

    def __post_init__(self):
        for key in _RATE_KEYS:
            if getattr(self, key) < 0:
                raise ValueError(f"{key} must be non-negative")
        if self.k31 + self.k32 + self.k35 <= 0:
            raise ValueError("level 3 must have a decay channel")
        if self.k41 + self.k42 + self.k45 <= 0:
            raise ValueError("level 4 must have a decay channel")
        if self.k51 + self.k52 <= 0:
            raise ValueError("the singlet must have a decay channel")

    @property
    def excited0_decay(self) -> float:
        return self.k31 + self.k32 + self.k35

    @property
    def excited1_decay(self) -> float:
        return self.k41 + self.k42 + self.k45

    @property
    def singlet_decay(self) -> float:
        return self.k51 + self.k52


@dataclass(frozen=True)
class PumpModel:
    """Linear optical pump: Gamma = coupling * power_density, applied
    equally to both ground spin branches."""

    coupling: float  # Hz per (W/m^2)
    spin_conserving: bool = True

    def __post_init__(self):
        if self.coupling <= 0:
            raise ValueError("pump coupling must be positive")

    def pump_rate(self, power_density: float) -> float:
        return self.coupling * power_density


@dataclass(frozen=True)
class SteadyState:
    """Steady-state populations rho_ii; sums to 1."""

    rho11: float
    rho22: float
    rho33: float
    rho44: float
    rho55: float
    condition_number: float | None = None

    def populations(self) -> np.ndarray:
        return np.array([self.rho11, self.rho22, self.rho33,
                         self.rho44, self.rho55])


def rate_matrix(rates: NvRateSet, gamma: float) -> np.ndarray:
    """Generator A of the population ODE d(rho)/dt = A rho."""
    r = rates
    return np.array([
        [-gamma, 0.0, r.k31, r.k41, r.k51],
        [0.0, -gamma, r.k32, r.k42, r.k52],
        [gamma, 0.0, -r.excited0_decay, 0.0, 0.0],
        [0.0, gamma, 0.0, -r.excited1_decay, 0.0],
        [0.0, 0.0, r.k35, r.k45, -r.singlet_decay],
    ])


def steady_state(rates: NvRateSet, pump: PumpModel,
                 power_density: float) -> SteadyState:
    """Unique steady state of the pumped five-level system.

    Solved by replacing the first (redundant) row of the rate matrix with
    the normalization constraint and solving the dense 5x5 system.
    """
    if power_density <= 0:
        raise ValueError(
            "degenerate steady state: power_density must be strictly "
            "positive (with no pumping the ground-state split is "
            "undetermined)")
    gamma = pump.pump_rate(power_density)
    a = rate_matrix(rates, gamma)
    a[0, :] = 1.0  # normalization row replaces one redundant balance row
    b = np.zeros(5)
    b[0] = 1.0
    cond = float(np.linalg.cond(a))
    try:
        rho = np.linalg.solve(a, b)
        # one step of iterative refinement; the system is badly
        # conditioned when the pump is far slower than the decay rates
        rho += np.linalg.solve(a, b - a @ rho)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(
            f"singular steady-state system (cond={cond:.3e}, "
            f"gamma={gamma:.3e} Hz)") from exc
    return SteadyState(*rho, condition_number=cond)


def cw_fluorescence(ss: SteadyState, rates: NvRateSet) -> float:
    """Radiative-emission rate per center from the excited-state
    populations, weighted by the radiative branching ratio of each
    spin branch."""
    d3 = rates.excited0_decay
    d4 = rates.excited1_decay
    if d3 <= 0 or d4 <= 0:
        raise ValueError("excited states must have a nonzero total decay")
    return ((rates.k31 + rates.k32) / d3 * ss.rho33
            + (rates.k41 + rates.k42) / d4 * ss.rho44)


def polarization(ss: SteadyState) -> float:
    """Normalized ground-state population imbalance
    (rho11 - rho22) / (rho11 + rho22), in [-1, 1]."""
    total = ss.rho11 + ss.rho22
    if total <= 0:
        raise ValueError("polarization undefined: empty ground manifold")
    return (ss.rho11 - ss.rho22) / total


def load_rate_file(path) -> tuple[NvRateSet, PumpModel]:
    """Read a flat key-value rate file.

    Keys k31..k52 are given in MHz; kappa is in Hz per (W/m^2).
    Lines starting with '#' and blank lines are ignored.
    """
    values = {}
    path = Path(path)
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, text = line.partition("=")
        key = key.strip()
        try:
            values[key] = float(text.strip())
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad number {text!r}") from exc
    missing = [k for k in _RATE_KEYS + ("kappa",) if k not in values]
    if missing:
        raise ValueError(f"{path}: missing keys: {', '.join(missing)}")
    unknown = [k for k in values if k not in _RATE_KEYS + ("kappa",)]
    if unknown:
        raise ValueError(f"{path}: unknown keys: {', '.join(unknown)}")
    rates = NvRateSet(**{k: values[k] * 1e6 for k in _RATE_KEYS})
    return rates, PumpModel(coupling=values["kappa"])
