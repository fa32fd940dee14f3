use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use spreadwave_core::calibration::{
    bar_observations, build_spread_volume_curve, quote_observations, read_bars, read_quotes, read_trades, BucketSpec,
    SpreadSource, SpreadVolumeCurve, TradeRecord,
};

use crate::config::{overlay, CurveSection, FileConfig, Globals, SourceArg};
use crate::failure::Failure;
use crate::report::{ensure_out_dir, out_path, read_input, write_file, Report};

#[derive(clap::Args, Debug)]
pub struct CurveArgs {
    /// Quotes CSV (bid-ask) or bars CSV (bar).
    #[arg(long, env = "SPREADWAVE_INPUT")]
    input: Option<PathBuf>,
    /// Trades CSV giving the volume rate of each quote.
    #[arg(long, env = "SPREADWAVE_TRADES")]
    trades: Option<PathBuf>,
    #[arg(long, value_enum, env = "SPREADWAVE_SOURCE")]
    source: Option<SourceArg>,
    /// Number of log-spaced volume buckets.
    #[arg(long, env = "SPREADWAVE_BUCKETS")]
    buckets: Option<usize>,
    #[arg(long, env = "SPREADWAVE_MIN_COUNT")]
    min_count: Option<usize>,
}

impl CurveArgs {
    pub fn apply(&self, section: &mut CurveSection) {
        overlay(&mut section.input, self.input.clone().map(Some));
        overlay(&mut section.trades, self.trades.clone().map(Some));
        overlay(&mut section.source, self.source.map(Into::into));
        overlay(&mut section.min_count, self.min_count);
        if let Some(count) = self.buckets {
            section.buckets = BucketSpec::Log {
                count,
                lo: None,
                hi: None,
            };
        }
    }
}

#[derive(Serialize)]
struct Resolved<'a> {
    #[serde(flatten)]
    globals: &'a Globals,
    curve: &'a CurveSection,
}

/// Row counts of one curve build.
#[derive(Debug, Clone, Serialize)]
pub struct CurveSummary {
    pub source: SpreadSource,
    pub quantile_level: f64,
    pub observations: usize,
    pub accepted: usize,
    pub out_of_range: usize,
    pub buckets: usize,
    pub populated_buckets: usize,
    pub sparse_buckets: usize,
    /// Rows skipped while reading each input file.
    pub rejected_rows: BTreeMap<String, usize>,
}

pub fn load_trades(path: &Path, inputs: &mut BTreeMap<String, String>) -> Result<(Vec<TradeRecord>, usize), Failure> {
    let bytes = read_input(path, inputs)?;
    let loaded = read_trades(bytes.as_slice()).map_err(|e| Failure::from(e).context(path.display()))?;
    Ok((loaded.records, loaded.rejected))
}

/// Reads the section's inputs and builds the curve.
pub fn build(
    section: &CurveSection,
    globals: &Globals,
    inputs: &mut BTreeMap<String, String>,
) -> Result<(SpreadVolumeCurve, CurveSummary), Failure> {
    let input = section
        .input
        .as_deref()
        .ok_or_else(|| Failure::invalid("no input file: pass --input or set [curve] input"))?;
    let bytes = read_input(input, inputs)?;
    let mut rejected_rows = BTreeMap::new();
    let observations = match section.source {
        SpreadSource::BidAsk => {
            let quotes = read_quotes(bytes.as_slice()).map_err(|e| Failure::from(e).context(input.display()))?;
            rejected_rows.insert(input.display().to_string(), quotes.rejected);
            let trades_path = section
                .trades
                .as_deref()
                .ok_or_else(|| Failure::invalid("bid-ask curves need a trades file: pass --trades"))?;
            let (trades, rejected) = load_trades(trades_path, inputs)?;
            rejected_rows.insert(trades_path.display().to_string(), rejected);
            let window_ms = (section.window * globals.time_unit_ms).round();
            if !(window_ms >= 1.0 && window_ms < i64::MAX as f64) {
                return Err(Failure::invalid(format!(
                    "window = {} is shorter than 1 ms",
                    section.window
                )));
            }
            quote_observations(&quotes.records, &trades, window_ms as i64, globals.time_unit_ms)?
        }
        SpreadSource::Bar => {
            let bars =
                read_bars(bytes.as_slice(), globals.horizon).map_err(|e| Failure::from(e).context(input.display()))?;
            rejected_rows.insert(input.display().to_string(), bars.rejected);
            bar_observations(&bars.records)
        }
    };
    if observations.is_empty() {
        return Err(Failure::invalid(format!("{}: no usable rows", input.display())));
    }
    let curve = build_spread_volume_curve(
        &observations,
        &section.buckets,
        globals.quantile,
        section.source,
        section.min_count,
    )?;
    let summary = CurveSummary {
        source: curve.source,
        quantile_level: curve.quantile_level,
        observations: observations.len(),
        accepted: curve.accepted,
        out_of_range: curve.out_of_range,
        buckets: curve.buckets.len(),
        populated_buckets: curve.populated().count(),
        sparse_buckets: curve.buckets.iter().filter(|b| b.sparse).count(),
        rejected_rows,
    };
    Ok((curve, summary))
}

pub fn run(args: &CurveArgs, file: &FileConfig, globals: &Globals) -> Result<(), Failure> {
    let mut section = file.curve.clone();
    args.apply(&mut section);
    let mut inputs = BTreeMap::new();
    let (curve, summary) = build(&section, globals, &mut inputs)?;

    ensure_out_dir(&globals.out)?;
    write_file(&out_path(&globals.out, "curve.csv"), |w| curve.write_csv(w))?;
    write_file(&out_path(&globals.out, "histogram.csv"), |w| {
        curve.write_histogram_csv(w)
    })?;
    let resolved = Resolved {
        globals,
        curve: &section,
    };
    Report::new("curve", &resolved, &inputs, &summary)
        .unit("v", "shares per reference time unit")
        .unit("spread_q", "input currency")
        .write(&out_path(&globals.out, "curve.json"))
}
