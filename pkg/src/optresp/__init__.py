"""Linear and optimal response of uniformly hyperbolic maps.

The package samples the physical measure of a hyperbolic map along one
long orbit, solves the two adjoint covector paths that encode the
sensitivity of long-time averages, and evaluates the derivative of the
average observable with respect to many perturbation directions at once.
On top of that it finds the unit-norm perturbation in a weighted Sobolev
space maximizing that derivative, and cross-checks predictions against
brute-force parameter sweeps.
"""

from .dynamics import MapModel, PerturbedModel, make_model, perturbed_step, register_model
from .errors import (CapabilityError, ConfigurationError, DegenerateFrameError,
                     DivergedOrbitError, NullResponseError, OptrespError,
                     SolverFailureError, TangencyError)
from .fourier import (FourierIndex, HpWeighting, basis_eval, basis_grad,
                      enumerate_full_basis, hp_norm_sq, int2vec,
                      restricted_basis_21d, restricted_norm_sq, vec2int)
from .frames import (FrameBundle, Orbit, adjoint_frame, compute_frames,
                     generate_orbit, load_orbit_cache, orbit_average,
                     save_orbit_cache, span_angle, unstable_frame)
from .optimal import (BasisSpec, CoefficientTable, OptimalPerturbation,
                      assemble_optimal, compute_coefficients,
                      predicted_optimal_response)
from .response import (EngineParams, PerturbationOnOrbit, ResponseBreakdown,
                       ResponseSession, additive_to_composition, batch_response,
                       equivariant_div_X, equivariant_div_fstar, phi_window,
                       response)
from .shadowing import CovectorPath, adjoint_shadowing_solve, oblique_split
from .verify import SlopeReport, SweepResult, gamma_sweep, slope_check

__version__ = "0.1.0"
