"""Two-stage marine glacier model with Ensemble Kalman Filter twin experiments."""

__version__ = "0.1.0"

from glacier_da.core.dynamics import calibrate_constants, tendency  # noqa: E402
from glacier_da.core.enkf import (  # noqa: E402
    Ensemble,
    ObservationSet,
    analysis,
    assimilation_cycle,
    init_ensemble,
)
from glacier_da.core.experiments import (  # noqa: E402
    best_run,
    ensemble_size_sweep,
    projection_run,
    scheme_sweep,
    sensitivity_sweep,
    worse_run,
)
from glacier_da.core.integrate import integrate, rk4_step  # noqa: E402
from glacier_da.core.models import (  # noqa: E402
    FilterConfig,
    GlacierState,
    ModelParams,
    ObservationSchedule,
    SchemeSpec,
    TwinSetup,
    inaccurate_params,
    twin_filter,
)
from glacier_da.core.osse import (  # noqa: E402
    RunRecord,
    default_twin_setup,
    mean_square_difference,
    run_twin,
)
from glacier_da.core.slr import accumulate, to_sea_level_mm, width_study  # noqa: E402
from glacier_da.io.loaders import RunConfig, load_config, parse_config  # noqa: E402

__all__ = [
    "Ensemble",
    "FilterConfig",
    "GlacierState",
    "ModelParams",
    "ObservationSchedule",
    "ObservationSet",
    "RunConfig",
    "RunRecord",
    "SchemeSpec",
    "TwinSetup",
    "accumulate",
    "analysis",
    "assimilation_cycle",
    "best_run",
    "calibrate_constants",
    "default_twin_setup",
    "ensemble_size_sweep",
    "inaccurate_params",
    "init_ensemble",
    "integrate",
    "load_config",
    "mean_square_difference",
    "parse_config",
    "projection_run",
    "rk4_step",
    "run_twin",
    "scheme_sweep",
    "sensitivity_sweep",
    "tendency",
    "to_sea_level_mm",
    "twin_filter",
    "width_study",
    "worse_run",
]
