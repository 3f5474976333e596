"""ehdecode - Offline transmission policies for energy harvesting networks with decoding costs"""

__version__ = "2026.10.0"
__all__ = []

from .bc import solve_bc, sweep_bc_region
from .gp import GeometricProgram, Monomial, Posynomial, solve_gp
from .mac import DecodingMode, WeightPair, solve_mac_simultaneous, solve_mac_successive, sweep_region
from .model import (
    DecodingFunction,
    EnergyProfile,
    LinkModel,
    PowerPolicy,
    RateFunction,
    RatePolicy,
    Scenario,
    Topology,
    check_scenario,
)
from .oracle import GridSpec, audit
from .single_user import solve_single_user, solve_single_user_no_battery
from .two_hop import solve_inner, solve_two_hop
