//! Multi-level tensor factor models for panels of time series with several
//! nested calendar seasonalities (e.g. hour-of-day within day-of-week).
//!
//! The pipeline is: ingest hourly CSVs into a [`PanelSeries`], fold it into a
//! [`TensorSeries`] of `N × S₁ × … × S_M` tensors, standardize each cell,
//! estimate loadings with the projected eigen-estimator in [`tfm`], forecast
//! the latent factors in [`seasonal`], and score everything with the
//! rolling-window harness in [`eval`].

pub mod archive;
pub mod benchmarks;
pub mod error;
pub mod eval;
pub mod panel;
pub mod report;
pub mod seasonal;
pub mod sim;
pub mod tensor;
pub mod tfm;

pub use error::{Error, Result};
pub use panel::{CalendarSpec, PanelSeries, Standardization, TensorSeries};
pub use tensor::{DenseTensor, Matrix};
pub use tfm::{FactorSeries, LoadingSet, Ranks};
