"""Scenario configuration, file I/O, existing-network import, orchestration and reports."""
from .config import ScenarioConfig, config_from_dict, load_config
from .network import import_existing_network, zone_sequence
from .report import ReportBundle, emit_report
from .scenario import STAGES, ScenarioResult, StageError, run_scenario, run_stage

__all__ = [
    "ScenarioConfig", "config_from_dict", "load_config", "import_existing_network",
    "zone_sequence", "ReportBundle", "emit_report", "STAGES", "ScenarioResult", "StageError",
    "run_scenario", "run_stage",
]
