from .barrier import ConvexResult, solve_convex_qcqp
from .simplex import solve_lp
from .triangle import Triangle2dProblem, triangle2d_min

__all__ = ["ConvexResult", "solve_convex_qcqp", "solve_lp", "Triangle2dProblem", "triangle2d_min"]
