"""Resilient observer-network laboratory.

Synthesis and simulation toolkit for distributed H-infinity state
estimation over sensor networks that stays accurate when individual
observer nodes are fed biasing attack signals. Per-node observer and
attack-detector/compensator gains come from decentralized Riccati
equations; the attenuation level can be optimized over candidate
communication graphs; the full closed loop is simulated under recorded
attack and disturbance inputs and checked against the designed
performance bound.

Module map:

- ``model``      scenario description (plant, sensors, graph, weights) and I/O
- ``numerics``   Riccati integration/solving and ODE utilities
- ``netmatrix``  interconnection and penalty matrices of both design layers
- ``attackclass`` admissible-attack certification and signal generation
- ``synthesis``  gain design, attenuation-level search, graph optimization
- ``simcore``    closed-loop simulation
- ``analysis``   energies, performance-bound check, attack detection
- ``plots``      deterministic SVG plots
- ``cli``        command-line front end (``rol`` entry point)
"""

from .analysis import (
    BoundReport,
    DetectionResult,
    detect_attacked_nodes,
    signal_energy,
    tracking_error_energy,
    verify_performance_bound,
    weighted_error_energy,
)
from .attackclass import (
    AdmissibilityReport,
    BiasModel,
    check_admissibility,
    realize_bias_model,
)
from .errors import DivergenceError, InfeasibleError, ScenarioError
from .model import (
    Scenario,
    builtin_example_scenario,
    example_disturbance_suite,
    load_scenario,
    save_scenario,
    validate_scenario,
)
from .simcore import Trajectory, simulate, write_trajectory_csv
from .synthesis import (
    GraphSearchResult,
    SynthesizedGains,
    assemble_error_dynamics,
    gains_from_dict,
    gains_to_dict,
    optimize_over_graphs,
    synthesize,
)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityReport",
    "BiasModel",
    "BoundReport",
    "DetectionResult",
    "DivergenceError",
    "GraphSearchResult",
    "InfeasibleError",
    "Scenario",
    "ScenarioError",
    "SynthesizedGains",
    "Trajectory",
    "__version__",
    "assemble_error_dynamics",
    "builtin_example_scenario",
    "check_admissibility",
    "detect_attacked_nodes",
    "example_disturbance_suite",
    "gains_from_dict",
    "gains_to_dict",
    "load_scenario",
    "optimize_over_graphs",
    "realize_bias_model",
    "save_scenario",
    "signal_energy",
    "simulate",
    "synthesize",
    "tracking_error_energy",
    "validate_scenario",
    "verify_performance_bound",
    "weighted_error_energy",
    "write_trajectory_csv",
]
