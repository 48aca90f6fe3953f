//! Finite mixtures of mirrored Weibull distributions for modelling returns,
//! with Gaussian and Student-t mixture baselines, Value-at-Risk estimation
//! and VaR backtesting.
//!
//! Numerical code is generic over [`real::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.

pub mod backtest;
pub mod baselines;
pub mod cli;
pub mod em;
pub mod error;
pub mod mixture;
pub mod model;
pub mod mweibull;
pub mod real;
pub mod report;
pub mod returns;
pub mod roots;
pub mod seed;
pub mod special;
pub mod var;

pub use backtest::{christoffersen_test, exceedances, kupiec_test, rolling_forecast, score_forecasts};
pub use baselines::{fit_gmm, fit_tmm};
pub use em::{EmConfig, FitResult, InitMethod};
pub use error::{Error, Result};
pub use mixture::{fit_em, select_g};
pub use model::{Family, FittedModel, ReturnDistribution};
pub use real::Real;
pub use var::{historical_var, model_var_cdf, model_var_sim, VarMethod};

pub type ReturnSeriesF64 = returns::ReturnSeries<f64>;
pub type MmwMixtureF64 = mixture::MmwMixture<f64>;
pub type GaussianMixtureF64 = baselines::GaussianMixture<f64>;
pub type TMixtureF64 = baselines::TMixture<f64>;
pub type FittedModelF64 = model::FittedModel<f64>;
pub type MirroredWeibullF64 = mweibull::MirroredWeibullParams<f64>;
pub type VaREstimateF64 = var::VaREstimate<f64>;
pub type BacktestReportF64 = backtest::BacktestReport<f64>;
