"""Boundary-value-problem solution of the two-queue model (one sensor per area)."""
from .boundary import (DIRICHLET, RIEMANN_HILBERT, BoundaryValues, IndexReport, classify_case, detect_pole,
                       dirichlet_solve, mean_delays, rh_index, rh_solve, solve)
from .conformal import ConformalMap, conjugate_function, gamma_at_one, theodorsen
from .contour import ContourPolar, KernelContour, circle_contour, contour
from .kernel import (BranchPoints, KernelParams, branch_points, coeffs_in_x, coeffs_in_y, discriminant_x,
                     discriminant_y, kernel_eval, kernel_poly, root_in_unit_disk, root_y_in_unit_disk)
