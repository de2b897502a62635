"""Index computations for elliptic operators with shifts along isometric group actions."""
from .errors import *  # noqa: F401,F403
from .geometry import (CosphereGrid, ManifoldModel, SampledForm, build_base_grid, build_cosphere_grid, circle,
                       integrate_form, sphere_cross_circle, torus2)
from .group_action import (GOLDEN, Generator, GroupElement, IsometryGroup, ball, cyclic, diophantine_check,
                           fixed_strata, free_abelian, growth_check, liouville_number, trivial_group)
from .operator_spec import LocalTerm, OperatorSpec, SymbolSpec, TrigPoly, mode
from .symbol_algebra import CrossedSymbol, convolve, cs_character, differential, invert, symbol_of_spec
from .analytic_index import IndexEstimate, assemble, estimate_index, model_euler_index, toeplitz
from .topological_index import (IndexReport, as_denominator, chern_projection, evaluate_dirac_even,
                                evaluate_fixedp, evaluate_local_odd, pf_sin_denominator)

__version__ = "0.1.0"
