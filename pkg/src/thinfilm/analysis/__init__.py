"""Quantitative estimates evaluated on runs: constants, bounds, certificates, supports."""
from .bounds import BihariBound, WeightedCheck, bihari_bound, check_exp_weighted_bounds
from .certificates import BlowupCertificate, Verdict, moment_certificate
from .constants import (
    ConstantsLedger,
    b_constants,
    constants_chain,
    interpolation_bound,
    tloc_estimate,
)
from .stampacchia import StampacchiaSystem, sampled, stampacchia_s0
from .support import (
    SupportTrace,
    fit_spreading_exponent,
    localized_integrals,
    monotone_envelope,
    support_edges,
)

__all__ = [
    "BihariBound", "WeightedCheck", "bihari_bound", "check_exp_weighted_bounds",
    "BlowupCertificate", "Verdict", "moment_certificate",
    "ConstantsLedger", "b_constants", "constants_chain", "interpolation_bound", "tloc_estimate",
    "StampacchiaSystem", "sampled", "stampacchia_s0",
    "SupportTrace", "fit_spreading_exponent", "localized_integrals", "monotone_envelope",
    "support_edges",
]
