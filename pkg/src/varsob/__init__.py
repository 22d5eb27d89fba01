"""Variable-exponent fractional Sobolev spaces: norms, operators and numerical checks."""

from .domains import Ball, Box, Domain, DomainError, Half, HalfBox, SymmetricPair
from .exponents import (ExponentBounds, ExponentError, ExponentField, SpaceParams,
                        conjugate_exponent, critical_exponent, exponent_bounds,
                        validate_admissibility)
from .expr import ExprError, ExprEvalError, ExprSyntaxError, Expression, evaluate, parse
from .functions import GridFunction
from .geometry import (Chart, CoverBall, Cutoff, PartitionOfUnity, bump, chart_atlas,
                       cover_boundary, partition_of_unity, standard_cells)
from .norms import (NormResult, gagliardo_seminorm, luxemburg_norm, modular_lebesgue,
                    pairing, seminorm_double_integral, sobolev_norm)
from .operators import (Decomposition, ExtensionResult, chart_transfer, extend,
                        kernel_decompose, reflect_extend, trace, truncate, zero_extend)
from .quadrature import QuadratureSpec

__version__ = "0.1.0"
