//! Graph duality between constant mean curvature surfaces in the homogeneous
//! spaces E(κ,τ) and spacelike surfaces in their Lorentzian counterparts
//! L(κ,τ), computed on masked uniform grids.
// `!(x > 0.0)` style guards are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod catalog;
pub mod cmc_solver;
pub mod duality;
pub mod error;
pub mod field_ops;
pub mod grid;
pub mod gridfile;
pub mod hessian;
mod integrate;
pub mod isometry;
pub mod space_model;

pub use analysis::{
    angle_integrability_probe, cheng_yau_check, coarea_identity, disk_cell_area, heinz_flux_check,
    lambda_circle_length, lambda_disk_area, nil_growth_check, EstimateReport, EstimateSample,
};
pub use catalog::{generate, CatalogSample, Example};
pub use cmc_solver::{solve_dirichlet, DirichletProblem, SolverControls, SolverReport};
pub use duality::{
    dualize, dualize_with, estimate_cmc, integrability_residual, roundtrip, roundtrip_error, twin_gradient, CmcCheck,
    CmcEstimate, DualPair, DualResiduals, DualizeOptions, TwinDirection,
};
pub use error::{Error, ErrorClass, Result};
pub use field_ops::{
    angle_function, bundle_flux_residual, first_fundamental_form, generalized_gradient, generalized_gradient_with,
    mean_curvature, mean_curvature_with, FrameField, FundamentalForm, Rect, DEFAULT_SPACELIKE_MARGIN,
};
pub use grid::{max_diff_mod_constant, max_diff_mod_constant_on, DomainSpec, ScalarField};
pub use gridfile::{write_obj, GridFile, GridHeader, SCHEMA_VERSION};
pub use hessian::{
    det_hessian_minus_one, flux_identity_residual, hessian_from_minimal, HessianDiagnostics, HessianSolution,
};
pub use isometry::{act_on_graph, equivariance_check, EquivarianceReport, LiftedIsometry};
pub use space_model::{
    cheeger_constant, conformal_factor, daniel_parameter_map, existence_classifier, in_chart, metric_eval,
    timelike_circle_range, Causal, ExistenceVerdict, RadiusInterval, SpaceParams,
};
