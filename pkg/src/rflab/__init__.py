"""Numerical laboratory for frictional pressure-interaction dynamics on the torus.

Core objects: periodic grids and states (fields), tabulated power-law
interaction kernels with two convolution backends (riesz), internal energy
and coercivity constants (thermo), the finite-volume solver for the
frictional system in unscaled and scaled form (euler), the gradient-flow
limit solver and strong-solution proxies (gflow), and relative-energy
diagnostics with Gronwall/rate fits (relenergy). The experiments module
wires these into reproducible runs behind the rflab command line tool.
"""

from .fields import (ModelParams, PeriodicGrid, SolverError, State,
                     grad_centered, lp_norm, restrict, restrict_state,
                     total_mass, validate_state, velocity)
from .riesz import (HLSReport, KernelTable, build_kernel, convolve,
                    grad_convolve, hls_check, riesz_potential)
from .thermo import (KappaCertificate, RelativeBoundConstants, estimate_c_star,
                     fit_bound_constants, h_energy, h_prime, h_relative,
                     p_relative, pressure, verify_bound_constants)
from .euler import EnergyLedger, EulerConfig, euler_step, run_euler, stable_dt
from .gflow import (GFlowConfig, GFTrajectory, StrongProxy, effective_velocity,
                    gf_energy_ledger, gflow_step, reconstruct_strong_proxy,
                    run_gflow)
from .relenergy import (RelativeEnergyReport, gronwall_fit, i3_pairing,
                        relative_energy, relaxation_rate_fit,
                        term_decomposition)

__version__ = "0.1.0"
