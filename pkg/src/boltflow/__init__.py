"""boltflow: U(2)-symmetric cohomogeneity-one Ricci flow with surgery.

A numerical laboratory for the collapse of the Taub-Bolt bolt under Ricci
flow: glued shrinker initial data, blow-up diagnostics against the Kahler
shrinker model, the explicit excision surgery onto R^4, and the long-time
relaxation toward the Taub-NUT family, with the preserved-quantity bounds
run as monitors throughout.
"""

__version__ = "0.1.0"

from .profile import (Profile, Topology, CurvatureFrame, ClassReport,
                      curvature, mass, class_check, resample_arclength, scale)
from .reference import (SolitonBackground, taub_nut, taub_bolt, cone_fik,
                        fik_shoot, soliton_residual, kahler_residual)
from .flow import (FlowState, BlowupReport, simulate, step, detect_singularity,
                   blowup_rescale, nut_residual)
from .spectral import (SymTensorU2, SpectralResult, apply_L, inner_f,
                       eigensolve, project)
from .initial_data import (GlueConfig, glue_cone_to_bolt, build_G0, bump,
                           perturb, diagonalize)
from .surgery import SurgeryReport, excise_and_cap, surgery_admissible
from .monitors import BoxParams, invariant_suite, box_membership, box_shoot
