"""Thermodynamic bookkeeping of measurement-feedback processes."""

from .constructions import (
    GapCertificate,
    cnot_measurement,
    exchange_unitary,
    ladder_gaps,
    null_scenario,
    random_measurement,
    random_scenario,
    szilard_scenario,
    theorem4_scenario,
    theorem5_witness,
)
from .info import (
    EntanglementInfo,
    QCInfo,
    canonical_state,
    free_energy,
    i_e,
    i_qc,
    i_qc_forms,
    matching_beta,
)
from .process import ProcessLedger, SlackReport, check_inequalities, run_process
from .scenario import Bath, Collide, Evolve, Quench, ThermoScenario

__all__ = [
    "Bath", "Collide", "EntanglementInfo", "Evolve", "GapCertificate", "ProcessLedger", "QCInfo",
    "Quench", "SlackReport", "ThermoScenario", "canonical_state", "check_inequalities",
    "cnot_measurement", "exchange_unitary", "free_energy", "i_e", "i_qc", "i_qc_forms",
    "ladder_gaps", "matching_beta", "null_scenario", "random_measurement", "random_scenario",
    "run_process", "szilard_scenario", "theorem4_scenario", "theorem5_witness",
]
