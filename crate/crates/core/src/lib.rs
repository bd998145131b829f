//! Nonlinear grey system models: the classical Cusum two-step estimator and
//! one-step integral matching on the integro-differential form.

pub mod basis;
pub mod datasets;
pub mod error;
pub mod grey;
pub mod linalg;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod ode;
pub mod reproduce;
pub mod scenario;
pub mod simulate;
pub mod transform;

pub use basis::{evaluate_basis, NonlinearBasis};
pub use error::{GreyError, Result};
pub use model::{
    grey_to_reduced, reduced_to_grey, FitMethod, FitResult, Forecast, ModelSpec, ParameterForm,
    ParameterSet, TimeSeries, TransformedParameters,
};
