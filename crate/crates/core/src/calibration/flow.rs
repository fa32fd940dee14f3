//! Trade-flow statistics: average trade size, volume rate and volatility.

use serde::{Deserialize, Serialize};

use super::records::TradeRecord;
use crate::error::{ensure_positive, Error, Result};
use crate::stats;

/// Minimum number of trades for [`measure_flow_stats`].
pub const MIN_FLOW_TRADES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    /// Mean trade size.
    pub n: f64,
    /// Traded volume per reference time unit.
    pub volume_rate: f64,
    /// Log-price volatility per square root of the reference time unit.
    pub sigma: f64,
    /// Mean trade price, used to turn money spreads into relative ones.
    pub mean_price: f64,
    pub trade_count: usize,
    /// Length of the measurement window in reference time units.
    pub window: f64,
}

/// Flow statistics over `window` reference time units, or over the span
/// from first to last trade when `window` is `None`. Timestamps are
/// converted with `time_unit_ms` milliseconds per reference unit.
///
/// The volatility is the standard deviation of log-price changes between
/// consecutive trades scaled by the square root of the number of changes
/// per unit time.
pub fn measure_flow_stats(trades: &[TradeRecord], window: Option<f64>, time_unit_ms: f64) -> Result<FlowStats> {
    if trades.len() < MIN_FLOW_TRADES {
        return Err(Error::InsufficientData {
            what: "flow statistics",
            need: MIN_FLOW_TRADES,
            got: trades.len(),
        });
    }
    ensure_positive("time_unit_ms", time_unit_ms)?;
    let window = match window {
        Some(w) => w,
        None => (trades[trades.len() - 1].timestamp_ms - trades[0].timestamp_ms) as f64 / time_unit_ms,
    };
    ensure_positive("window", window)?;
    let count = trades.len() as f64;
    let total_size: f64 = trades.iter().map(|t| t.size).sum();
    let log_changes: Vec<f64> = trades.windows(2).map(|w| (w[1].price / w[0].price).ln()).collect();
    let per_unit = log_changes.len() as f64 / window;
    Ok(FlowStats {
        n: total_size / count,
        volume_rate: total_size / window,
        sigma: stats::std_dev(&log_changes) * per_unit.sqrt(),
        mean_price: trades.iter().map(|t| t.price).sum::<f64>() / count,
        trade_count: trades.len(),
        window,
    })
}
