//! Maximum-likelihood estimation with a multi-start Nelder-Mead search.

pub mod fit;
pub mod nelder_mead;
pub mod starts;
pub mod transform;

pub use fit::{
    fit_mle, fit_mle_y, grid_offsets, log_data, standard_errors, verify_maximum, FitConfig, FitFlag,
    FittedModel, Verification,
};
pub use nelder_mead::{nelder_mead, NmOptions, NmResult};
pub use starts::{starting_point, warm_starts};
