//! Trade, quote and bar records and their CSV readers.
//!
//! Readers never abort on a bad row: rows that fail to parse, violate a
//! record invariant or go back in time are skipped and counted. A missing
//! required column is an error. Timestamps are either epoch milliseconds or
//! ISO-8601; the format is detected from the first row that parses and must
//! then be used by the whole file.

use std::io::Read;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub timestamp_ms: i64,
    pub price: f64,
    pub size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteRecord {
    pub timestamp_ms: i64,
    pub bid: f64,
    pub ask: f64,
}

impl QuoteRecord {
    pub fn spread(&self) -> f64 {
        self.ask - self.bid
    }
}

/// High-low bar over a horizon given by the caller, not the file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarRecord {
    pub timestamp_ms: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
    pub horizon_t: f64,
}

impl BarRecord {
    pub fn is_valid(&self) -> bool {
        let fields = [self.open, self.high, self.low, self.close, self.volume, self.horizon_t];
        fields.iter().all(|x| x.is_finite())
            && self.volume >= 0.0
            && self.horizon_t > 0.0
            && self.low <= self.open.min(self.close)
            && self.open.max(self.close) <= self.high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampFormat {
    EpochMs,
    Iso8601,
}

/// Records read from one file plus the number of skipped rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub rejected: usize,
    pub timestamp_format: Option<TimestampFormat>,
}

fn parse_iso(s: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_millis());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|dt| dt.and_utc().timestamp_millis())
}

fn parse_timestamp(s: &str, format: TimestampFormat) -> Option<i64> {
    match format {
        TimestampFormat::EpochMs => s.parse().ok(),
        TimestampFormat::Iso8601 => parse_iso(s),
    }
}

fn detect_format(s: &str) -> Option<TimestampFormat> {
    if s.parse::<i64>().is_ok() {
        Some(TimestampFormat::EpochMs)
    } else if parse_iso(s).is_some() {
        Some(TimestampFormat::Iso8601)
    } else {
        None
    }
}

/// Reads `timestamp` plus the named numeric columns and hands each row to
/// `build`, which returns `None` to reject it.
fn read_table<R: Read, T>(input: R, columns: &[&str], build: impl Fn(i64, &[f64]) -> Option<T>) -> Result<Loaded<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let index_of = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let ts_col = index_of("timestamp")?;
    let cols = columns.iter().map(|c| index_of(c)).collect::<Result<Vec<_>>>()?;

    let mut out = Loaded {
        records: Vec::new(),
        rejected: 0,
        timestamp_format: None,
    };
    let mut last_ts = i64::MIN;
    let mut values = vec![0.0; cols.len()];
    for row in reader.records() {
        let Ok(row) = row else {
            out.rejected += 1;
            continue;
        };
        let Some(raw_ts) = row.get(ts_col) else {
            out.rejected += 1;
            continue;
        };
        let format = match out.timestamp_format {
            Some(f) => f,
            None => match detect_format(raw_ts) {
                Some(f) => {
                    out.timestamp_format = Some(f);
                    f
                }
                None => {
                    out.rejected += 1;
                    continue;
                }
            },
        };
        let ts = parse_timestamp(raw_ts, format);
        let mut ok = ts.is_some_and(|t| t >= last_ts);
        for (slot, &c) in values.iter_mut().zip(&cols) {
            match row.get(c).and_then(|s| s.parse::<f64>().ok()) {
                Some(x) if x.is_finite() => *slot = x,
                _ => ok = false,
            }
        }
        match ts.filter(|_| ok).and_then(|t| build(t, &values).map(|r| (t, r))) {
            Some((t, record)) => {
                last_ts = t;
                out.records.push(record);
            }
            None => out.rejected += 1,
        }
    }
    Ok(out)
}

/// Reads `timestamp,price,size`; non-positive prices or sizes are rejected.
pub fn read_trades<R: Read>(input: R) -> Result<Loaded<TradeRecord>> {
    read_table(input, &["price", "size"], |t, v| {
        (v[0] > 0.0 && v[1] > 0.0).then_some(TradeRecord {
            timestamp_ms: t,
            price: v[0],
            size: v[1],
        })
    })
}

/// Reads `timestamp,bid,ask`; crossed or non-positive quotes are rejected.
pub fn read_quotes<R: Read>(input: R) -> Result<Loaded<QuoteRecord>> {
    read_table(input, &["bid", "ask"], |t, v| {
        (v[0] > 0.0 && v[1] >= v[0]).then_some(QuoteRecord {
            timestamp_ms: t,
            bid: v[0],
            ask: v[1],
        })
    })
}

/// Reads `timestamp,open,high,low,close,volume` bars of horizon `horizon_t`;
/// bars violating `low ≤ open, close ≤ high` are rejected.
pub fn read_bars<R: Read>(input: R, horizon_t: f64) -> Result<Loaded<BarRecord>> {
    read_table(input, &["open", "high", "low", "close", "volume"], |t, v| {
        let bar = BarRecord {
            timestamp_ms: t,
            open: v[0],
            high: v[1],
            low: v[2],
            close: v[3],
            volume: v[4],
            horizon_t,
        };
        bar.is_valid().then_some(bar)
    })
}

/// Writes `timestamp,price,size` with epoch-millisecond timestamps.
pub fn write_trades_csv<W: std::io::Write>(trades: &[TradeRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "price", "size"])?;
    for t in trades {
        w.serialize((t.timestamp_ms, t.price, t.size))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `timestamp,bid,ask` with epoch-millisecond timestamps.
pub fn write_quotes_csv<W: std::io::Write>(quotes: &[QuoteRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "bid", "ask"])?;
    for q in quotes {
        w.serialize((q.timestamp_ms, q.bid, q.ask))?;
    }
    w.flush()?;
    Ok(())
}
