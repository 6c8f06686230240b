"""Exact computations on the Bruhat-Tits tree of PGL2(Q_p).

Fixed-point sets of compact elements, truncated buildings, the chain
complex of a depth-e coefficient system, and three evaluations of the
character of a representation at a compact element.
"""
from .padic import Matrix2, PadicScalar
from .tree import OrientedEdge, TreeBall, Vertex, act, ball, base_vertex, distance, geodesic
from .elements import ElementClass, classify, fixed_set, fundamental_domain, tube
from .truncate import truncated_building
from .coeff import PrincipalSeriesModel, TrivialModel, make_model
from .chains import ChainComplex, build_decomposition, modified_truncation
from .character import (character_report, deep_fiber_trace, fiber_trace, fixed_facet_sum,
                        hopf_character, independence_scan)

__all__ = ["Matrix2", "PadicScalar", "OrientedEdge", "TreeBall", "Vertex", "act", "ball",
           "base_vertex", "distance", "geodesic", "ElementClass", "classify", "fixed_set",
           "fundamental_domain", "tube", "truncated_building", "PrincipalSeriesModel",
           "TrivialModel", "make_model", "ChainComplex", "build_decomposition",
           "modified_truncation", "character_report", "deep_fiber_trace", "fiber_trace",
           "fixed_facet_sum", "hopf_character", "independence_scan"]
__version__ = "0.1.0"
