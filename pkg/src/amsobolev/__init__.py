"""Sobolev energies, decomposability bundles and closability certificates on structured measures."""

from .bundle import BundleField, assign_bundle
from .closability import (
    NO_COUNTEREXAMPLE_FOUND,
    NOT_CLOSABLE,
    ClosabilityCertificate,
    identity_gap_check,
    transversal_counterexample,
    verify_certificate,
)
from .energy import am_gradient_field, energy_am, energy_lip, parallelogram_defect, sobolev_norm
from .errors import (
    CertificateError,
    ConfigError,
    DimensionError,
    EvaluationError,
    InvariantViolation,
    MeasureError,
)
from .fields import NormPlugin, field_from_config, lip
from .grassmann import Subspace, grassmann_distance, project, span_union
from .measure import Measure, integrate, measure_from_config, quadrature
from .relax import assemble_cheeger_interval, relax_sequence
from .testplan import (
    check_compression,
    check_tangency,
    check_wug,
    cheeger_lower_bound,
    ensemble_from_config,
)

__version__ = "0.1.0"
