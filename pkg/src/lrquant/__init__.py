"""Twisted Schroedinger representations of vector-field observable algebras on flat manifolds.

The package discretizes functions, vector-field momenta and flow unitaries on
the circle, line, torus, annulus and Klein bottle, and twists them by unitary
representations of the fundamental group.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .manifolds import Grid, Manifold, ManifoldSpec, deck_action, make_grid, make_manifold  # noqa: E402
from .homotopy import HomotopyClass, Pi1Representation, evaluate_rep, track_crossings  # noqa: E402
from .dsl import differentiate, evaluate, parse, to_source  # noqa: E402
from .fields import ScalarField, VectorField, lie_bracket, scalar, vector  # noqa: E402
from .flows import FlowMap, flow, jacobian_factor  # noqa: E402
from .operators import (LinOp, check_covariance, check_lie_relations, check_lr_relation,  # noqa: E402
                        check_resolvent_identities, momentum_op, mult_op, resolvent, unitary)
from .representations import (RepSpace, build_space, check_cocycle, check_equivalence,  # noqa: E402
                              check_locally_schroedinger, rep_momentum, rep_mult,
                              rep_unitary_from_flow)
from .spectra import SpectrumResult, eigenvalues, hamiltonian, theta_sweep  # noqa: E402
