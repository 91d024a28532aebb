"""Constrained least squares: projections, statistical dimensions and the
low- and high-noise limits of the risk when the mean may lie outside the
constraint set."""

from .exceptions import (ConeriskError, InvalidInputError, NumericalError,
                         SingularMatrixError, SolverError)
from .geometry import (FaceRep, GeneratorSet, TangentConeRep, block_monotone_embedding,
                       core_cone, generators_in_hyperplane, monotone_generators,
                       residual_face, tangent_cone)
from .limits import (BlockPartition, LimitReport, LimitValue, ball_limits, bellec_bound,
                     high_sigma_limit, isotonic_partition, limit_report,
                     low_sigma_limit_isotonic, low_sigma_limit_orthant,
                     low_sigma_limit_polyhedral)
from .numerics import (RandomStream, gaussian_draw, nnls, qr_positive_diag,
                       rowspace_membership)
from .projections import (ProjectionResult, project_ball, project_block_monotone,
                          project_cone_with_equality, project_monotone, project_orthant,
                          project_parabola_epigraph, project_polyhedral_cone,
                          project_polyhedron, project_weighted_monotone)
from .risklab import (RiskCurvePoint, Scenario, per_sample_chain_check, simulate_risks,
                      spiking_demo, table1_report)
from .sets import (Ball, BlockMonotoneCone, FaceCone, MonotoneCone, Orthant,
                   ParabolaEpigraph, PolyhedralCone, Polyhedron, ZeroCone, membership,
                   parse_set_spec, project)
from .statdim import (NoiseModel, StatDimEstimate, mc_statdim, statdim_monotone_closed,
                      statdim_product)

__version__ = "0.1.0"
