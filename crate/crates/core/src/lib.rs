//! Spread, volatility and volume models for market microstructure.
//!
//! The crate is organised by concern:
//!
//! - [`spread`]: closed-form bid-ask spread laws (liquidity price, impact
//!   price, the dimensionless U-shaped curve and its minimum).
//! - [`wave`]: the two-level "coupled-wave" price simulator, where the
//!   high/low prices are eigenvalues of a fluctuating 2x2 price operator,
//!   plus closed-form evolution of the level amplitudes.
//! - [`scaling`]: horizon scaling of spreads and high-low bars, with and
//!   without volume, and the spread surface over (horizon, volume).
//! - [`calibration`]: trade/quote/bar ingestion, percentile spread-volume
//!   curves and least-squares fits of the risk multipliers.
//! - [`optimizer`]: execution-rate model and the market maker's
//!   operating-spread optimization.
//! - [`stats`]: small statistics helpers (type-7 quantiles, KS test,
//!   Rayleigh fits) shared by the modules above.
//!
//! All quantities are plain `f64` in caller-chosen units. Volatility and
//! volume must refer to the same reference time unit; nothing here converts
//! between clocks.

// `!(a < b)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod error;
pub mod optimizer;
pub mod rng;
pub mod scaling;
pub mod spread;
pub mod stats;
pub mod wave;

pub use calibration::{
    BarRecord, BucketSpec, CalibrationResult, FitConfig, FitMode, FlowStats, QuoteRecord, SpreadObservation,
    SpreadSource, SpreadVolumeCurve, TradeRecord,
};
pub use error::{Error, Result};
pub use optimizer::{ExecutionModel, PnLParams, QuotePoint, QuotePolicy, QuotingMode, SpreadLaw};
pub use scaling::{RiskTable, SpreadSurface, SpreadSurfaceParams};
pub use spread::{DimensionlessSpreadParams, SpreadMinimum, SpreadModelParams};
pub use wave::{AmplitudeState, BarSample, BarSeries, CoupledWaveParams, LastPriceRule, PriceOperator2x2};

/// Crate version, embedded into reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
