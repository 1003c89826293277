"""2-D optical diffraction tomography toolkit.

Forward scattering through the volume integral equation of the
inhomogeneous Helmholtz problem, data-fidelity gradients through the
closed-form Jacobian of the nonlinear forward map, TV+nonnegativity
regularized reconstruction by accelerated proximal splitting, and an
analytic cylinder solution serving as ground truth.
"""

from .grid import (
    ComplexField,
    Grid2D,
    PhysicsParams,
    RefractiveMap,
    ScatteringPotential,
    contrast,
    potential_from_ri,
    ri_from_potential,
    snr_db,
)
from .special import bessel_j0y0j1y1, hankel0, hankel1
from .greens import (
    DetectorGeometry,
    DetectorOperator,
    GreenKernel,
    apply_G,
    apply_G_adjoint,
    build_detector_operator,
    build_green_kernel,
)
from .forward import (
    ForwardSolveReport,
    SolverBudget,
    ls_apply,
    ls_apply_adjoint,
    measure,
    plane_wave,
    relative_error,
    solve_forward_cg,
    solve_forward_nagd,
)
from .gradient import (
    GradientReport,
    IlluminationRecord,
    grad_D_subset,
    grad_Dp,
    jacobian_adjoint_apply,
    jacobian_apply,
    subset_schedule,
)
from .proxtv import (
    ProxParams,
    div_op,
    fourier_solve_A,
    grad_op,
    prox_R,
    prox_group_l21,
    prox_nonneg,
    tv_value,
)
from .recon import MomentumRule, ReconConfig, ReconTrace, fidelity_and_reg, reconstruct
from .mie import BeadSpec, MieSolution, mie_scattered_at, mie_total_field
from .sim import (
    MeasurementSet,
    SimProtocol,
    bead_phantom,
    predict_memory_delta,
    shepp_logan,
    simulate,
)
from .validate import bead_convergence, bead_for_contrast, first_below

__version__ = "0.1.0"
