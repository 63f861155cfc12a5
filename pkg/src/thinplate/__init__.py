"""Free-plate (Neumann biharmonic) eigenvalues on thin neighbourhoods of closed plane curves."""

from .annulus import (
    EigencurvePoint,
    annulus_spectrum,
    boundary_matrix,
    dispersion_det,
    find_eigencurve,
    leading_order_check,
    limit_eigenvalue,
)
from .bessel import BesselQuad, bessel_quad, bessel_values
from .curve import (
    CurveGeometry,
    WidthProfile,
    gauss_bonnet_residual,
    make_circle,
    make_ellipse,
    make_fourier_curvature,
    make_parametric,
    max_admissible_h,
)
from .errors import ThinPlateError
from .limit1d import (
    BlockPencil,
    FourierBasis,
    assemble_limit_system,
    circle_closed_form,
    kernel_residuals,
    restricted_bilap_apply,
    solve_limit_eigs,
)
from .numerics import Spectrum, SymmetricPencil, brent_root, gauss_legendre, sym_gen_eig
from .thin2d import (
    ConvergenceTable,
    TensorBasis,
    ThinFormSpec,
    assemble_biharmonic,
    assemble_laplacian,
    convergence_study,
    solve_thin2d,
)

__version__ = "0.1.0"
