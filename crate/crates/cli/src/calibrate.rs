use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use spreadwave_core::calibration::{
    fit_bar_curve, fit_bid_ask_curve, measure_flow_stats, overlay as model_overlay, write_overlay_csv,
    CalibrationResult, FitConfig, FitError, FitMode, FlowStats, SpreadSource, SpreadVolumeCurve,
};

use crate::config::{overlay, CalibrateSection, CurveSection, FileConfig, Globals, SourceArg};
use crate::curve::{self, CurveSummary};
use crate::failure::Failure;
use crate::report::{ensure_out_dir, out_path, read_input, write_file, Report};

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FitModeArg {
    FixedTau0,
    RhoTau0Product,
}

impl From<FitModeArg> for FitMode {
    fn from(m: FitModeArg) -> Self {
        match m {
            FitModeArg::FixedTau0 => FitMode::FixedTau0,
            FitModeArg::RhoTau0Product => FitMode::RhoTau0Product,
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct CalibrateArgs {
    /// Curve CSV written by `curve`; without it the curve is built from --input.
    #[arg(long, env = "SPREADWAVE_CURVE")]
    curve: Option<PathBuf>,
    /// Quotes or bars CSV, used when no curve is given.
    #[arg(long, env = "SPREADWAVE_INPUT")]
    input: Option<PathBuf>,
    /// Trades CSV for the flow statistics (and quote volumes).
    #[arg(long, env = "SPREADWAVE_TRADES")]
    trades: Option<PathBuf>,
    #[arg(long, value_enum, env = "SPREADWAVE_SOURCE")]
    source: Option<SourceArg>,
    #[arg(long, env = "SPREADWAVE_TAU0")]
    tau0: Option<f64>,
    #[arg(long, value_enum, env = "SPREADWAVE_FIT_MODE")]
    fit_mode: Option<FitModeArg>,
    /// Average trade size, overriding the trades file.
    #[arg(long, env = "SPREADWAVE_N")]
    n: Option<f64>,
    /// Volatility per square root of the reference unit, overriding the trades file.
    #[arg(long, env = "SPREADWAVE_SIGMA")]
    sigma: Option<f64>,
    /// Price that turns money spreads into relative ones, overriding the trades file.
    #[arg(long, env = "SPREADWAVE_PRICE")]
    price: Option<f64>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    #[serde(flatten)]
    globals: &'a Globals,
    calibrate: &'a CalibrateSection,
    /// Curve settings, present when the curve was built from raw data.
    #[serde(skip_serializing_if = "Option::is_none")]
    curve: Option<&'a CurveSection>,
}

/// The `result` object of `calibration.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrateOutcome {
    pub fit: CalibrationResult,
    pub flow: FlowStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveSummaryRecord>,
}

/// The curve counts echoed into the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveSummaryRecord {
    pub observations: usize,
    pub accepted: usize,
    pub populated_buckets: usize,
}

impl From<&CurveSummary> for CurveSummaryRecord {
    fn from(s: &CurveSummary) -> Self {
        Self {
            observations: s.observations,
            accepted: s.accepted,
            populated_buckets: s.populated_buckets,
        }
    }
}

pub fn run(args: &CalibrateArgs, file: &FileConfig, globals: &Globals) -> Result<(), Failure> {
    let mut section = file.calibrate.clone();
    overlay(&mut section.curve, args.curve.clone().map(Some));
    overlay(&mut section.trades, args.trades.clone().map(Some));
    overlay(&mut section.source, args.source.map(|s| Some(s.into())));
    overlay(&mut section.tau0, args.tau0);
    overlay(&mut section.fit_mode, args.fit_mode.map(Into::into));
    overlay(&mut section.n, args.n.map(Some));
    overlay(&mut section.sigma, args.sigma.map(Some));
    overlay(&mut section.price, args.price.map(Some));

    let mut curve_section = file.curve.clone();
    overlay(&mut curve_section.input, args.input.clone().map(Some));
    if curve_section.trades.is_none() {
        curve_section.trades = section.trades.clone();
    }
    if let Some(source) = section.source {
        curve_section.source = source;
    }
    let source = section.source.unwrap_or(curve_section.source);

    let mut inputs = BTreeMap::new();
    let (curve, summary) = match &section.curve {
        Some(path) => {
            let bytes = read_input(path, &mut inputs)?;
            let c = SpreadVolumeCurve::read_csv(bytes.as_slice(), source, globals.quantile, curve_section.min_count)
                .map_err(|e| Failure::from(e).context(path.display()))?;
            (c, None)
        }
        None => {
            let (c, s) = curve::build(&curve_section, globals, &mut inputs)?;
            (c, Some(s))
        }
    };
    let flow = flow_stats(&section, &curve_section, globals, &mut inputs)?;

    let cfg = FitConfig {
        tau0: section.tau0,
        mode: section.fit_mode,
        max_iterations: section.max_iterations,
        tolerance: section.tolerance,
    };
    let fitted = match source {
        SpreadSource::BidAsk => fit_bid_ask_curve(&curve, &flow, &cfg),
        SpreadSource::Bar => fit_bar_curve(&curve, globals.horizon, &flow, &cfg),
    };
    let (fit, failure) = match fitted {
        Ok(r) => (r, None),
        Err(FitError::NonConvergence { best }) => {
            let msg = format!(
                "fit did not converge ({}); best-so-far parameters written",
                best.termination
            );
            (*best, Some(Failure::numerical(msg)))
        }
        Err(FitError::Invalid(e)) => return Err(e.into()),
    };

    ensure_out_dir(&globals.out)?;
    let rows = model_overlay(&curve, &fit);
    write_file(&out_path(&globals.out, "overlay.csv"), |w| write_overlay_csv(&rows, w))?;
    let outcome = CalibrateOutcome {
        fit,
        flow,
        curve: summary.as_ref().map(Into::into),
    };
    let resolved = Resolved {
        globals,
        calibrate: &section,
        curve: summary.is_some().then_some(&curve_section),
    };
    Report::new("calibrate", &resolved, &inputs, &outcome)
        .unit("lambda_hat", "dimensionless")
        .unit("rho_hat", "dimensionless")
        .unit("tau0_hat", "reference time units")
        .unit("sigma_used", "per square root of reference time unit")
        .unit("residual_norm", "relative spread")
        .unit(
            "overlay",
            "v in shares per reference time unit, spreads in input currency",
        )
        .write(&out_path(&globals.out, "calibration.json"))?;
    failure.map_or(Ok(()), Err)
}

fn flow_stats(
    section: &CalibrateSection,
    curve_section: &CurveSection,
    globals: &Globals,
    inputs: &mut BTreeMap<String, String>,
) -> Result<FlowStats, Failure> {
    let trades_path = section.trades.as_ref().or(curve_section.trades.as_ref());
    let mut flow = match trades_path {
        Some(path) => {
            let (trades, _) = curve::load_trades(path, inputs)?;
            measure_flow_stats(&trades, None, globals.time_unit_ms)
                .map_err(|e| Failure::from(e).context(path.display()))?
        }
        None => {
            let missing: Vec<&str> = [("n", section.n), ("sigma", section.sigma), ("price", section.price)]
                .iter()
                .filter(|(_, v)| v.is_none())
                .map(|(k, _)| *k)
                .collect();
            if !missing.is_empty() {
                return Err(Failure::invalid(format!(
                    "without a trades file, calibrate needs {}",
                    missing.join(", ")
                )));
            }
            FlowStats {
                n: 0.0,
                volume_rate: 0.0,
                sigma: 0.0,
                mean_price: 0.0,
                trade_count: 0,
                window: 0.0,
            }
        }
    };
    overlay(&mut flow.n, section.n);
    overlay(&mut flow.sigma, section.sigma);
    overlay(&mut flow.mean_price, section.price);
    Ok(flow)
}
