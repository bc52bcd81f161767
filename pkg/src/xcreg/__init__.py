"""Cross-component registration (XCR) of multivariate functional data."""

from .fcurve import (
    Curve,
    Extension,
    Grid,
    Interp,
    MultiCurveSample,
    Rule,
    SubintervalSpec,
    estimate_derivative,
    evaluate,
    integrate,
    normalize_auc,
)
from .fpca import FpcaModel, fit_fpca, imse, reconstruct
from .global_xcr import (
    ContrastMatrix,
    GlobalShiftResult,
    XcrResult,
    apply_shifts,
    build_contrast_matrix,
    cross_component_distance,
    register,
    solve_global_shifts,
    xd_per_subject,
)
from .pairwise import (
    MinimizerOpts,
    PairwiseCriterion,
    PairwiseShift,
    Quadrature,
    antisymmetry_check,
    criterion_value,
    estimate_pairwise_shift,
)
from .simgen import SimConfig, generate_contaminated, generate_pure_shift, latent_curve

__version__ = "0.1.0"
