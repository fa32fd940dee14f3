//! Market-data ingestion, percentile spread-volume curves and model fits.

pub mod curve;
pub mod fit;
pub mod flow;
pub mod records;
pub mod synthetic;

pub use curve::{
    bar_observations, build_spread_volume_curve, quote_observations, BucketSpec, CurveBucket, SpreadObservation,
    SpreadSource, SpreadVolumeCurve, DEFAULT_BUCKETS, DEFAULT_MIN_COUNT, DEFAULT_QUANTILE,
};
pub use fit::{
    fit_bar_curve, fit_basic_lambda, fit_bid_ask_curve, fit_execution_scale, overlay, write_overlay_csv,
    CalibrationResult, CrossSectionPoint, FitConfig, FitError, FitMode, OverlayRow,
};
pub use flow::{measure_flow_stats, FlowStats};
pub use records::{
    read_bars, read_quotes, read_trades, write_quotes_csv, write_trades_csv, BarRecord, Loaded, QuoteRecord,
    TimestampFormat, TradeRecord,
};
pub use synthetic::{series_quotes, series_trades, simulate_volume_driven, VolumeDrivenParams};
