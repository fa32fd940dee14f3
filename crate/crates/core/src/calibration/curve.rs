//! Percentile spread-volume curves.
//!
//! Observations of (volume rate, spread) are split into volume buckets and
//! each bucket reports a spread quantile and its sample count.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::records::{BarRecord, QuoteRecord, TradeRecord};
use crate::error::{ensure_positive, Error, Result};
use crate::stats::{self, log_space};

pub const DEFAULT_QUANTILE: f64 = 0.9;
pub const DEFAULT_BUCKETS: usize = 25;
/// Buckets with fewer samples are flagged as sparse.
pub const DEFAULT_MIN_COUNT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadSource {
    BidAsk,
    Bar,
}

/// One point of the spread-volume scatter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadObservation {
    /// Volume rate, shares per reference time unit.
    pub volume: f64,
    /// Spread in money.
    pub spread: f64,
}

/// Bucket boundaries. Missing bounds default to the 1st and 99th
/// percentiles of the observed volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BucketSpec {
    Log {
        count: usize,
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
    Linear {
        count: usize,
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
    Edges {
        edges: Vec<f64>,
    },
}

impl Default for BucketSpec {
    fn default() -> Self {
        BucketSpec::Log {
            count: DEFAULT_BUCKETS,
            lo: None,
            hi: None,
        }
    }
}

impl BucketSpec {
    /// Bucket edges for the given volumes.
    pub fn edges(&self, volumes: &[f64]) -> Result<Vec<f64>> {
        let edges = match self {
            BucketSpec::Edges { edges } => edges.clone(),
            BucketSpec::Log { count, lo, hi } | BucketSpec::Linear { count, lo, hi } => {
                if *count == 0 {
                    return Err(Error::Invalid("bucket count must be at least 1".into()));
                }
                let is_log = matches!(self, BucketSpec::Log { .. });
                let mut usable: Vec<f64> = volumes
                    .iter()
                    .copied()
                    .filter(|v| v.is_finite() && (!is_log || *v > 0.0))
                    .collect();
                usable.sort_by(f64::total_cmp);
                let bound = |given: Option<f64>, q: f64| match given {
                    Some(x) => Ok(x),
                    None if usable.is_empty() => Err(Error::EmptyCurve),
                    None => Ok(stats::quantile_sorted(&usable, q)),
                };
                let (lo, hi) = (bound(*lo, 0.01)?, bound(*hi, 0.99)?);
                if is_log {
                    ensure_positive("bucket lower bound", lo)?;
                    log_space(lo, hi, count + 1)
                } else {
                    (0..=*count)
                        .map(|i| lo + (hi - lo) * i as f64 / *count as f64)
                        .collect()
                }
            }
        };
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Invalid(
                "bucket edges must be strictly ascending with at least one bucket".into(),
            ));
        }
        Ok(edges)
    }

    fn log_midpoints(&self) -> bool {
        !matches!(self, BucketSpec::Linear { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBucket {
    pub v_lo: f64,
    pub v_hi: f64,
    pub v_mid: f64,
    /// `None` for an empty bucket.
    pub spread_q: Option<f64>,
    pub count: usize,
    pub sparse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadVolumeCurve {
    pub source: SpreadSource,
    pub quantile_level: f64,
    pub buckets: Vec<CurveBucket>,
    /// Observations that fell inside a bucket.
    pub accepted: usize,
    /// Observations outside the bucket range.
    pub out_of_range: usize,
}

/// Builds the curve. Each bucket is `[v_lo, v_hi)` except the last, which
/// also includes its upper edge. `v_mid` is the geometric mean of the edges
/// for log and explicit buckets and the arithmetic mean for linear ones.
pub fn build_spread_volume_curve(
    observations: &[SpreadObservation],
    bucketing: &BucketSpec,
    quantile_level: f64,
    source: SpreadSource,
    min_count: usize,
) -> Result<SpreadVolumeCurve> {
    if observations.is_empty() {
        return Err(Error::InsufficientData {
            what: "spread-volume curve",
            need: 1,
            got: 0,
        });
    }
    if !(0.0..=1.0).contains(&quantile_level) || quantile_level == 0.0 {
        return Err(Error::domain("quantile_level", quantile_level, "must lie in (0, 1]"));
    }
    let volumes: Vec<f64> = observations.iter().map(|o| o.volume).collect();
    let edges = bucketing.edges(&volumes)?;
    let n_buckets = edges.len() - 1;
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); n_buckets];
    let mut out_of_range = 0;
    for o in observations {
        let v = o.volume;
        if !(v >= edges[0] && v <= edges[n_buckets]) || !o.spread.is_finite() {
            out_of_range += 1;
            continue;
        }
        let i = edges.partition_point(|&e| e <= v).saturating_sub(1).min(n_buckets - 1);
        groups[i].push(o.spread);
    }
    let log_mid = bucketing.log_midpoints();
    let buckets: Vec<CurveBucket> = groups
        .into_par_iter()
        .enumerate()
        .map(|(i, mut spreads)| {
            let (v_lo, v_hi) = (edges[i], edges[i + 1]);
            spreads.sort_by(f64::total_cmp);
            CurveBucket {
                v_lo,
                v_hi,
                v_mid: if log_mid && v_lo > 0.0 {
                    (v_lo * v_hi).sqrt()
                } else {
                    0.5 * (v_lo + v_hi)
                },
                spread_q: (!spreads.is_empty()).then(|| stats::quantile_sorted(&spreads, quantile_level)),
                count: spreads.len(),
                sparse: spreads.len() < min_count,
            }
        })
        .collect();
    let accepted = observations.len() - out_of_range;
    if accepted == 0 {
        return Err(Error::EmptyCurve);
    }
    Ok(SpreadVolumeCurve {
        source,
        quantile_level,
        buckets,
        accepted,
        out_of_range,
    })
}

/// Bar observations: volume rate `volume / T`, spread `high - low`.
pub fn bar_observations(bars: &[BarRecord]) -> Vec<SpreadObservation> {
    bars.iter()
        .map(|b| SpreadObservation {
            volume: b.volume / b.horizon_t,
            spread: b.high - b.low,
        })
        .collect()
}

/// Quote observations: spread `ask - bid`, volume rate from the trades in
/// the window `(t - window_ms, t]` before each quote, expressed per
/// reference time unit of `time_unit_ms` milliseconds.
pub fn quote_observations(
    quotes: &[QuoteRecord],
    trades: &[TradeRecord],
    window_ms: i64,
    time_unit_ms: f64,
) -> Result<Vec<SpreadObservation>> {
    if window_ms <= 0 {
        return Err(Error::domain("window_ms", window_ms as f64, "must be > 0"));
    }
    ensure_positive("time_unit_ms", time_unit_ms)?;
    let mut cumulative = Vec::with_capacity(trades.len() + 1);
    cumulative.push(0.0);
    for t in trades {
        cumulative.push(cumulative.last().unwrap() + t.size);
    }
    let window = window_ms as f64 / time_unit_ms;
    Ok(quotes
        .iter()
        .map(|q| {
            let end = trades.partition_point(|t| t.timestamp_ms <= q.timestamp_ms);
            let start = trades.partition_point(|t| t.timestamp_ms <= q.timestamp_ms - window_ms);
            SpreadObservation {
                volume: (cumulative[end] - cumulative[start]) / window,
                spread: q.spread(),
            }
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct CurveRow {
    v_lo: f64,
    v_hi: f64,
    v_mid: f64,
    spread_q: Option<f64>,
    count: usize,
}

#[derive(Serialize)]
struct HistogramRow {
    v_lo: f64,
    v_hi: f64,
    count: usize,
    frequency: f64,
}

impl SpreadVolumeCurve {
    /// Buckets with a quantile value.
    pub fn populated(&self) -> impl Iterator<Item = &CurveBucket> {
        self.buckets.iter().filter(|b| b.spread_q.is_some() && b.count > 0)
    }

    /// Writes `v_lo,v_hi,v_mid,spread_q,count`; empty buckets leave
    /// `spread_q` blank.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for b in &self.buckets {
            w.serialize(CurveRow {
                v_lo: b.v_lo,
                v_hi: b.v_hi,
                v_mid: b.v_mid,
                spread_q: b.spread_q,
                count: b.count,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the trade-frequency histogram `v_lo,v_hi,count,frequency`.
    pub fn write_histogram_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let total = self.accepted.max(1) as f64;
        for b in &self.buckets {
            w.serialize(HistogramRow {
                v_lo: b.v_lo,
                v_hi: b.v_hi,
                count: b.count,
                frequency: b.count as f64 / total,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a curve written by [`SpreadVolumeCurve::write_csv`].
    pub fn read_csv<R: Read>(input: R, source: SpreadSource, quantile_level: f64, min_count: usize) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers()?.clone();
        for col in ["v_lo", "v_hi", "v_mid", "spread_q", "count"] {
            if !headers.iter().any(|h| h == col) {
                return Err(Error::MissingColumn(col.to_string()));
            }
        }
        let mut buckets = Vec::new();
        for row in reader.deserialize::<CurveRow>() {
            let r = row?;
            buckets.push(CurveBucket {
                v_lo: r.v_lo,
                v_hi: r.v_hi,
                v_mid: r.v_mid,
                spread_q: r.spread_q,
                count: r.count,
                sparse: r.count < min_count,
            });
        }
        let accepted = buckets.iter().map(|b| b.count).sum();
        if buckets.iter().all(|b| b.spread_q.is_none()) {
            return Err(Error::EmptyCurve);
        }
        Ok(Self {
            source,
            quantile_level,
            buckets,
            accepted,
            out_of_range: 0,
        })
    }
}
