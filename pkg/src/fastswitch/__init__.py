"""Simulation and analysis of dynamical systems with fast Markov switching
and slow diffusion.

The main entry points are re-exported here; see the submodules for details.
"""

__version__ = "0.1.0"

from .errors import (
    BlowUpError,
    ConfigurationError,
    NoCycleError,
    NumericError,
    ValidationError,
)
from .ctmc import (
    Generator,
    JumpSkeleton,
    StateDependentGenerator,
    check_irreducible,
    occupation_fractions,
    sample_jump_skeleton,
    stationary_distribution,
)
from .hybrid_sde import (
    BatchSummary,
    HybridModel,
    SimParams,
    Trajectory,
    empirical_second_moment_course,
    integrate_switching_ode,
    simulate_batch,
    simulate_path,
)
from .averaged import (
    AveragedField,
    Equilibrium,
    LimitCycle,
    PoincareSection,
    average_field,
    cycle_occupation_measure,
    detect_limit_cycle,
    find_equilibria,
    integrate_ode,
    stable_manifold_normal,
)
from .measures import (
    DiscreteMeasure,
    GridHistogram,
    empirical_occupation,
    energy_distance,
    histogram,
    sliced_wasserstein,
)
from .models import (
    HollingParams,
    PredatorPreyParams,
    moment_diagnostics,
    paper_example_model,
    persistence_functional,
    predator_prey_model,
)
from .experiments import (
    ExitSpec,
    ExperimentReport,
    RegimeSpec,
    assumption_audit,
    closeness_probability,
    convergence_sweep,
    exit_time_experiment,
)
from .config import ExperimentConfig
from .svg import PlotSpec, emit_svg
