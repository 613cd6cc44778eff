//! Localized monotonicity quantity, blowup classification, ε-regularity
//! flag and Pohozaev invariants.

mod cutoff;
mod pohozaev;
mod theta;

pub use cutoff::{CutoffProfile, CutoffSpec};
pub use pohozaev::{pohozaev, pohozaev_identity_residual, pohozaev_radial, pohozaev_sampler, PohozaevResidual};
pub use theta::{
    classify, classify_at, default_eps_star, density_verdict, epsilon_regularity_flag, theta, theta_monotonicity_report,
    theta_of_field, ClassificationResult, Extension, MonotonicityReport, ThetaSample, Verdict, DENSITY_TOL, SLOPE_TOL,
};
