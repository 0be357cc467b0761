//! Composite size-distribution models.

pub mod distributions;
pub mod error;
pub mod mixture;
pub mod special;

pub use distributions::Density;
pub use error::{Error, Result};
pub use mixture::{Component, Family, Mixture, ModelSpec};
pub mod truncation;
pub mod model;
pub mod sampling;
pub mod estimation;
pub mod gof;
pub mod selection;
pub mod fokker_planck;
pub mod pipeline;
