"""Density steering of a colloidal self-assembly order parameter with a physics-informed network."""
from .landscape import LandscapeParams, LandscapePartials, ConstantLandscape
from .diffnet import NetworkSpec, NetworkParams, FieldJet, Jet, init_network, forward_jet
from .prob import TruncNormSpec, RHO0, RHOT
from .residuals import Problem, LossBreakdown, total_loss

__version__ = "0.1.0"
