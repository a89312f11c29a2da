"""Finite-difference solver for a Navier-Stokes / Cahn-Hilliard-Oono system with nutrient chemotaxis."""
from .cahn_hilliard import CHStepConfig, CHStepResult, ch_step
from .errors import (
    BarrierError, ConfigError, ContractError, IncompatibleDataError, NewtonError, NSCHError,
    PotentialDomainError, SnapshotError, SolverError, StepError,
)
from .fluid import FluidStepResult, StokesSolution, leray_project, ns_step, stokes_solve
from .grid import Grid, VectorField
from .initial import initial_state
from .nutrient import SigmaStepResult, sigma_step
from .physics import PhysParams, chemical_potential, eta, psi, verify_hypotheses
from .stepper import EnergyLedger, State, bel_audit, energy, make_state, step

__version__ = "0.1.0"

__all__ = [
    "BarrierError", "CHStepConfig", "CHStepResult", "ConfigError", "ContractError", "EnergyLedger",
    "FluidStepResult", "Grid", "IncompatibleDataError", "NSCHError", "NewtonError", "PhysParams",
    "PotentialDomainError", "SigmaStepResult", "SnapshotError", "SolverError", "State", "StepError",
    "StokesSolution", "VectorField", "bel_audit", "ch_step", "chemical_potential", "energy", "eta", "initial_state",
    "leray_project", "make_state", "ns_step", "psi", "sigma_step", "step", "stokes_solve",
    "verify_hypotheses",
]
