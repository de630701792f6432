"""Growth-fragmentation eigenproblems with power-law rates and prion strain fits."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CFLError,
    ConvergenceError,
    DomainError,
    FitError,
    NegativeDensityError,
    ParseError,
)
from .grid import SizeGrid, make_grid, uniform_grid  # noqa: E402
from .model import (  # noqa: E402
    FragmentationKernel,
    ModelParams,
    check_kernel,
    kernel_density,
    rate_beta,
    rate_tau,
    steady_monomer,
    validate_params,
)
from .eigen import (  # noqa: E402
    EigenSolution,
    assemble_operator,
    mean_size,
    principal_eigenpair,
    solve_normalized,
)
from .scaling import (  # noqa: E402
    AffineStabilityMap,
    mean_size_scaled,
    scale_eigenfunction,
    scale_eigenvalue,
    stability_from_mean_size,
)
from .simulate import SimConfig, SimMode, empirical_growth_rate, shape_convergence, simulate  # noqa: E402
from .strainfit import FitVariant, fit, load_strains, predict_G, r_squared  # noqa: E402
