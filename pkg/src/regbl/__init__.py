"""Gaussian extremizers for regularized and inverse Brascamp-Lieb inequalities."""

from .datum import (Datum, DegenerateDatumError, MalformedDatumError, QDecomposition,
                    ValidationReport, check_nondegenerate, decompose_Q, ordered_datum,
                    signature, validate_datum)
from .gaussian import (BLValue, ExtremizerReport, bl_gaussian, extremizer_report,
                       key2_evaluate, m_matrix, phi_and_gradient)
from .optimize import (GridSpec, OptConfig, OptResult, amplify, brute_force_oracle,
                       optimize_gaussian, wolff_forward)
from .heatflow import (FlowRun, GaussianMixture, check_monotonicity, closure_residual,
                       evolve_mixture, functional_Q, li_yau_check, sample_typeG)
from .closed_forms import (HCSpec, PLSpec, YoungSpec, hc_datum, pl_datum, pl_regularized,
                           young_constant, young_datum, young_regularized)

__version__ = "0.1.0"
