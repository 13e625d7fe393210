from .am_driver import RunOptions, run
from .harness import ExperimentSpec, load_scenario, load_default_scenario, run_comparison
from .radar_model import ScenarioConfig, build_covariance_bundle
from .waveform_solvers import direct_update, qcqp_solve, sdp_dual_solve, cls_solve, scale_solution
