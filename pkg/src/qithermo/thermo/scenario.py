"""Scenario description: system, baths, control schedule, measurement, feedback."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ..optmeas import MeasurementModel
from ..qcore import TOL_HERM, LayoutError, SystemLayout, UnitaryOp

SYSTEM = "S"


def _hermitian(m, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name}: expected a square matrix, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T), initial=0.0) > TOL_HERM:
        raise ValueError(f"{name}: matrix is not Hermitian")
    m = (m + m.conj().T) / 2
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class Bath:
    """Finite bath factor, prepared canonical at ``temperature``."""

    label: str
    hamiltonian: np.ndarray
    temperature: float

    def __post_init__(self):
        object.__setattr__(self, "hamiltonian", _hermitian(self.hamiltonian, f"bath {self.label}"))
        if not self.temperature > 0:
            raise ValueError(f"bath {self.label}: temperature must be positive")

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


@dataclass(frozen=True, eq=False)
class Quench:
    """Sudden change of one Hamiltonian term.

    ``target`` is ``"S"`` for the system Hamiltonian or ``"S:<bath>"`` for a
    system-bath coupling (a matrix on S x bath, in that order).
    """

    target: str
    hamiltonian: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "hamiltonian", _hermitian(self.hamiltonian, f"quench {self.target}"))


@dataclass(frozen=True, eq=False)
class Evolve:
    """Unitary step on part of the system and baths under fixed Hamiltonians."""

    unitary: UnitaryOp


@dataclass(frozen=True, eq=False)
class Collide:
    """Contact with a fresh thermal unit that is discarded afterwards.

    The unit (Hamiltonian ``hamiltonian``, canonical at ``temperature``) and
    the factors named in ``unitary`` evolve jointly under ``unitary``, whose
    layout must contain the unit factor ``unit_label``.  The energy the unit
    loses is booked as heat from ``reservoir``.
    """

    hamiltonian: np.ndarray
    temperature: float
    unitary: UnitaryOp
    reservoir: str = "C"
    unit_label: str = "C"

    def __post_init__(self):
        object.__setattr__(self, "hamiltonian", _hermitian(self.hamiltonian, "collision unit"))
        if not self.temperature > 0:
            raise ValueError("collision unit temperature must be positive")
        if self.unit_label not in self.unitary.layout:
            raise LayoutError(f"collision unitary does not act on the unit {self.unit_label!r}")
        if self.unitary.layout.dim_of([self.unit_label]) != self.hamiltonian.shape[0]:
            raise LayoutError("collision unit dimension does not match its Hamiltonian")


Step = Union[Quench, Evolve, Collide]


@dataclass(frozen=True, eq=False)
class ThermoScenario:
    """Everything needed to run one measurement-feedback process.

    Parameters
    ----------
    h_system : ndarray
        Initial system Hamiltonian.
    temperature : float
        Temperature at which the system is prepared.
    baths : sequence of Bath
        Bath factors, prepared canonical at their own temperatures.
    u_init, u_fin : sequence of steps
        Schedules before the measurement and after the feedback.
    measurement : MeasurementModel, optional
        Probe measurement on (part of) the system and baths.  ``None`` means
        no measurement and a single trivial outcome.
    feedback : sequence of UnitaryOp or None
        One entry per outcome (``None`` is the identity).
    final_temperature : float, optional
        Fixes the temperature of the reference canonical state at the end.
        By default the inverse temperature is chosen to minimise
        ``-tr[rho_f log gamma']`` (energy matching).
    name : str
        Free-form tag copied into reports.
    """

    h_system: np.ndarray
    temperature: float
    baths: tuple = ()
    u_init: tuple = ()
    measurement: MeasurementModel | None = None
    feedback: tuple = ()
    u_fin: tuple = ()
    final_temperature: float | None = None
    name: str = "scenario"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "h_system", _hermitian(self.h_system, "system Hamiltonian"))
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.final_temperature is not None and not self.final_temperature > 0:
            raise ValueError("final temperature must be positive")
        for attr in ("baths", "u_init", "feedback", "u_fin"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        labels = [b.label for b in self.baths]
        if SYSTEM in labels or len(set(labels)) != len(labels):
            raise LayoutError("bath labels must be unique and differ from 'S'")
        layout = self.layout
        n_out = 1 if self.measurement is None else self.measurement.n_outcomes
        if self.feedback and len(self.feedback) != n_out:
            raise ValueError(f"{len(self.feedback)} feedback unitaries for {n_out} outcomes")
        if self.measurement is not None:
            for lab in self.measurement.system_layout.labels:
                if lab not in layout:
                    raise LayoutError(f"measurement acts on unknown factor {lab!r}")
        for u in self.feedback:
            if u is not None:
                _check_support(u, layout)
        for step in self.u_init + self.u_fin:
            self._check_step(step)

    @property
    def layout(self) -> SystemLayout:
        factors = [(SYSTEM, self.h_system.shape[0])] + [(b.label, b.dim) for b in self.baths]
        return SystemLayout(tuple(factors))

    def bath(self, label: str) -> Bath:
        for b in self.baths:
            if b.label == label:
                return b
        raise LayoutError(f"no bath {label!r}")

    def _check_step(self, step):
        layout = self.layout
        if isinstance(step, Quench):
            if step.target == SYSTEM:
                want = self.h_system.shape[0]
            elif step.target.startswith(SYSTEM + ":"):
                want = self.h_system.shape[0] * self.bath(step.target[2:]).dim
            else:
                raise LayoutError(f"unknown quench target {step.target!r}")
            if step.hamiltonian.shape[0] != want:
                raise LayoutError(f"quench {step.target}: expected dimension {want}")
        elif isinstance(step, Evolve):
            _check_support(step.unitary, layout)
        elif isinstance(step, Collide):
            rest = step.unitary.layout.subset(step.unitary.layout.complement([step.unit_label]))
            if step.unit_label in layout:
                raise LayoutError(f"collision unit label {step.unit_label!r} clashes with the layout")
            _check_support(UnitaryOp.identity(rest), layout)
        else:
            raise TypeError(f"unknown schedule step {type(step).__name__}")


def _check_support(u: UnitaryOp, layout: SystemLayout):
    for lab, d in u.layout.factors:
        if lab not in layout or layout.dims[layout.index(lab)] != d:
            raise LayoutError(f"operator factor {lab!r} (dim {d}) not in layout {layout.factors}")

