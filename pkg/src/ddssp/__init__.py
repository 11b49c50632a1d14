"""Private linear and logistic regression from privately released pairwise marginals."""

from ._kernels import BACKEND
from .dataset import Attribute, DiscreteDataset, Domain, discretize_numeric, load_csv, split, write_csv
from .encoding import AttributeEncoding, EncodedData, EncodingSpec, default_spec, encode, feature_bound
from .marginals import MarginalQuery, MarginalTable, Workload, all_pairs_workload, compute_marginal
from .mechanism import AimLiteConfig, MechanismOutput, aim_lite, exact_oracle, gaussian_all_pairs
from .privacy import PrivacyBudget, ZcdpLedger, eps_delta_to_rho, gaussian_sigma
from .ssp import (
    ChebCoeffs,
    FittedModel,
    SuffStats,
    chebyshev_coeffs,
    fit_from_marginals,
    predict,
    reconstruct_ztz,
    solve_linear,
    solve_logistic_approx,
)

__version__ = "0.1.0"
