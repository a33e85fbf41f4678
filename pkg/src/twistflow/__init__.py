"""Twisted holomorphic bundles on a flat torus: curvature, Hermite-Einstein metrics and the heat flow."""
from .bundles import (BundleSpec, InclusionSpec, MatrixField, bundle_dsum, bundle_dual, bundle_end, bundle_tensor,
                      make_preset, restrict)
from .chern import (BundleReport, bundle_report, conformal_normalize, curvature, degree, einstein_constant,
                    he_defect, mean_curvature)
from .errors import TwistflowError
from .flow import (FlowConfig, FlowTrace, construct_perturbed_solution, extract_destabilizer, flow_step,
                   perturbed_residual, run_flow)
from .hermitian import (MetricState, conformal_metric, functional_calculus, geodesic_path, linear_path,
                        random_metric, reference_metric)
from .lagrangian import lagrangian_closed, lagrangian_decomposition, lagrangian_path
from .subobjects import gauss_codazzi_residual, induced_structures, slope_verdict
from .torus import TorusGeometry, make_torus
from .twist import TwistDescriptor, validate_twist

__version__ = "0.1.0"
