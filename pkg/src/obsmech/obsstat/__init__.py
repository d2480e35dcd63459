"""Observable statistics: distributions, weak values, quasiprobabilities and max-entropy estimates."""
from .core import (P_FLOOR, KDQTable, ObservableDistribution, WeakValueRecord, charge_conditioning,
                   charge_conditioning_dense, energy_conditioning, kdq_table, measure_distribution, r_overlaps,
                   shannon_entropy, tvd, weak_value)
from .equations import ee1_residual, ee2_residual
from .information import mutual_information
from .linear import WVLinearModel, fit_wv_linear
from .maxent import MultiplierSolution, solve_multipliers, solve_multipliers_direct
from .predict import predict_equilibrium
from .report import EquilibriumReport, analyze
