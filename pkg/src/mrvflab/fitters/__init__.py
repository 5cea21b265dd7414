"""Factorized surrogate fitters (VDN, ideal QMIX, WQMIX, ResQ, QPLEX)."""
from .base import (EXHAUSTIVE, GRADIENT, IDEAL_QMIX, QPLEX, RESQ, SCHEMES, VDN, WQMIX,
                   CapabilityError, ConvergenceError, FactorizedFit, FitConfig, FitError,
                   OrderBudgetExceeded, greedy_from_q)
from .monotone import (fit_ideal_qmix, fit_ideal_qmix_constrained, fit_wqmix,
                       ideal_qmix_minimizers, monotone_minimizers, wqmix_minimizers,
                       wqmix_weights)
from .vdn import fit_vdn
from .resq import fit_resq, resq_leaving_fit, resq_staying_fit, resq_zero_loss_fits
from .qplex import (fit_qplex, qplex_gradients, qplex_qtot, qplex_stationarity_check)
