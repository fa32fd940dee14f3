//! Declarative run configuration.
//!
//! Values come from a TOML file, then `SPREADWAVE_*` environment variables,
//! then flags; later sources win. Environment variables are read through
//! clap, so a flag and its variable share one `Option` and only have to be
//! laid over the file once. Unknown keys anywhere in the file are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spreadwave_core::calibration::{BucketSpec, FitMode, SpreadSource, DEFAULT_MIN_COUNT, DEFAULT_QUANTILE};
use spreadwave_core::wave::{CoupledWaveParams, LastPriceRule};

use crate::failure::Failure;

/// Milliseconds in the default reference time unit (one second).
pub const DEFAULT_TIME_UNIT_MS: f64 = 1000.0;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub quantile: Option<f64>,
    pub horizon: Option<Duration>,
    pub time_unit_ms: Option<f64>,
    pub simulate: SimulateSection,
    pub curve: CurveSection,
    pub calibrate: CalibrateSection,
    pub scale: ScaleSection,
    pub optimize: OptimizeSection,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
    }
}

/// A horizon: a plain number in reference time units, or a number with one
/// of the suffixes `ms`, `s`, `m`, `h`, `d`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Duration {
    Units(f64),
    Text(String),
}

impl Duration {
    pub fn parse(s: &str) -> Result<Self, String> {
        let d = Duration::Text(s.trim().to_string());
        d.to_units(DEFAULT_TIME_UNIT_MS)?;
        Ok(d)
    }

    /// Length in reference time units of `time_unit_ms` milliseconds.
    pub fn to_units(&self, time_unit_ms: f64) -> Result<f64, String> {
        let units = match self {
            Duration::Units(x) => *x,
            Duration::Text(s) => {
                let split = s.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(s.len());
                let (num, suffix) = s.split_at(split);
                let x: f64 = num.trim().parse().map_err(|_| format!("bad duration `{s}`"))?;
                let ms = match suffix {
                    "" => return positive_duration(x, s),
                    "ms" => 1.0,
                    "s" => 1e3,
                    "m" | "min" => 6e4,
                    "h" => 3.6e6,
                    "d" => 8.64e7,
                    _ => return Err(format!("unknown duration suffix in `{s}`")),
                };
                x * ms / time_unit_ms
            }
        };
        positive_duration(units, &format!("{units}"))
    }
}

fn positive_duration(x: f64, text: &str) -> Result<f64, String> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(format!("duration `{text}` must be positive"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SimulateMode {
    /// Free-running coupled-wave path.
    #[default]
    CoupledWave,
    /// Bars whose heights follow a spread law in a drawn volume rate.
    VolumeDriven,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SourceArg {
    BidAsk,
    Bar,
}

impl From<SourceArg> for SpreadSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::BidAsk => SpreadSource::BidAsk,
            SourceArg::Bar => SpreadSource::Bar,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveSection {
    pub sigma_step: f64,
    pub xi_mean: f64,
    pub xi_std: f64,
    pub kappa_mean: f64,
    pub kappa_std: f64,
    pub tau0: f64,
    pub last_price_rule: LastPriceRule,
}

impl Default for WaveSection {
    fn default() -> Self {
        let p = CoupledWaveParams::default();
        Self {
            sigma_step: p.sigma_step,
            xi_mean: p.xi_mean,
            xi_std: p.xi_std,
            kappa_mean: p.kappa_mean,
            kappa_std: p.kappa_std,
            tau0: p.tau0,
            last_price_rule: p.last_price_rule,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VolumeSection {
    pub source: SpreadSource,
    pub lambda_risk: f64,
    pub rho_risk: f64,
    pub tau0: f64,
    pub n: f64,
    pub sigma: f64,
    pub volume_lo: f64,
    pub volume_hi: f64,
    pub last_price_rule: LastPriceRule,
}

impl Default for VolumeSection {
    fn default() -> Self {
        Self {
            source: SpreadSource::BidAsk,
            lambda_risk: 3.5,
            rho_risk: 0.5,
            tau0: 0.01,
            n: 100.0,
            sigma: 1e-4,
            volume_lo: 0.5,
            volume_hi: 100.0,
            last_price_rule: LastPriceRule::UniformInBar,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub mode: SimulateMode,
    pub steps: usize,
    pub s0: f64,
    /// Timestamp of the series start; bar `i` closes at `start_ms + (i+1)·step`.
    pub start_ms: i64,
    /// Step length in reference time units.
    pub step_dt: f64,
    pub wave: WaveSection,
    pub volume: VolumeSection,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            mode: SimulateMode::CoupledWave,
            steps: 1000,
            s0: 100.0,
            start_ms: 0,
            step_dt: 1.0,
            wave: WaveSection::default(),
            volume: VolumeSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveSection {
    /// Quotes (bid-ask) or bars (bar) CSV.
    pub input: Option<PathBuf>,
    pub source: SpreadSource,
    /// Trades CSV; required for quotes, where it supplies the volume rate.
    pub trades: Option<PathBuf>,
    /// Trailing window for the volume rate of a quote, in reference units.
    pub window: f64,
    pub buckets: BucketSpec,
    pub min_count: usize,
}

impl Default for CurveSection {
    fn default() -> Self {
        Self {
            input: None,
            source: SpreadSource::BidAsk,
            trades: None,
            window: 1.0,
            buckets: BucketSpec::default(),
            min_count: DEFAULT_MIN_COUNT,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateSection {
    /// Curve CSV written by `curve`. Without it the curve is built from
    /// the `[curve]` section.
    pub curve: Option<PathBuf>,
    pub source: Option<SpreadSource>,
    /// Trades CSV for the flow statistics.
    pub trades: Option<PathBuf>,
    pub tau0: f64,
    pub fit_mode: FitMode,
    /// Overrides of the measured flow statistics.
    pub n: Option<f64>,
    pub sigma: Option<f64>,
    pub price: Option<f64>,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        Self {
            curve: None,
            source: None,
            trades: None,
            tau0: 1.0,
            fit_mode: FitMode::FixedTau0,
            n: None,
            sigma: None,
            price: None,
            max_iterations: 500,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScaleSection {
    pub surface: bool,
    /// Spread at the base horizon, in money.
    pub base_spread: Option<f64>,
    /// Last-price volatility over the base horizon, in money.
    pub eta: Option<f64>,
    pub lambda_risk: f64,
    /// Base horizon; defaults to the global horizon.
    pub t1: Option<f64>,
    pub horizons: Option<Vec<f64>>,
    /// Default horizon grid: `points` log-spaced horizons up to `t1·span`.
    pub span: f64,
    pub points: usize,
    pub rho_risk: f64,
    pub sigma: f64,
    pub n: f64,
    pub tau0: f64,
    pub price: f64,
    pub v_lo: f64,
    pub v_hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl Default for ScaleSection {
    fn default() -> Self {
        Self {
            surface: false,
            base_spread: None,
            eta: None,
            lambda_risk: 3.5,
            t1: None,
            horizons: None,
            span: 1e6,
            points: 25,
            rho_risk: 0.5,
            sigma: 1e-3,
            n: 100.0,
            tau0: 0.01,
            price: 100.0,
            v_lo: 1.0,
            v_hi: 1e5,
            t_lo: 1.0,
            t_hi: 1e4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeSection {
    /// `calibration.json` written by `calibrate`.
    pub calibration: Option<PathBuf>,
    /// Bid-ask law coefficient when no calibration is given.
    pub a: Option<f64>,
    /// Bar law inputs when no calibration is given.
    pub bar: Option<BarLawSection>,
    pub commission: f64,
    pub lambda0: f64,
    pub lambda_ref: f64,
    pub lambda_max: Option<f64>,
    /// Dimensionless volume grid; by default `points` log-spaced values
    /// over two decades centred on the law's characteristic volume.
    pub volumes: Option<Vec<f64>>,
    pub points: usize,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self {
            calibration: None,
            a: None,
            bar: None,
            commission: 3.0,
            lambda0: 3.0,
            lambda_ref: spreadwave_core::optimizer::DEFAULT_LAMBDA_REF,
            lambda_max: None,
            volumes: None,
            points: 41,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarLawSection {
    pub lambda_risk: f64,
    pub rho_risk: f64,
    pub sigma: f64,
    pub tau0: f64,
}

/// Settings shared by every command after all sources are merged.
#[derive(Debug, Clone, Serialize)]
pub struct Globals {
    pub seed: u64,
    pub out: PathBuf,
    pub quantile: f64,
    /// Horizon in reference time units.
    pub horizon: f64,
    pub time_unit_ms: f64,
}

impl Globals {
    pub fn resolve(file: &FileConfig, flags: &crate::GlobalArgs) -> Result<Self, Failure> {
        let time_unit_ms = flags.time_unit_ms.or(file.time_unit_ms).unwrap_or(DEFAULT_TIME_UNIT_MS);
        if !(time_unit_ms.is_finite() && time_unit_ms > 0.0) {
            return Err(Failure::invalid(format!(
                "time_unit_ms = {time_unit_ms} must be positive"
            )));
        }
        let horizon = match flags.horizon.clone().or_else(|| file.horizon.clone()) {
            Some(d) => d.to_units(time_unit_ms).map_err(Failure::invalid)?,
            None => 1.0,
        };
        let quantile = flags.quantile.or(file.quantile).unwrap_or(DEFAULT_QUANTILE);
        if !(quantile > 0.0 && quantile < 1.0) {
            return Err(Failure::invalid(format!("quantile = {quantile} must lie in (0, 1)")));
        }
        Ok(Self {
            seed: flags.seed.or(file.seed).unwrap_or(0),
            out: flags
                .out
                .clone()
                .or_else(|| file.out.clone())
                .unwrap_or_else(|| PathBuf::from("out")),
            quantile,
            horizon,
            time_unit_ms,
        })
    }
}

/// Lays `flag` over `slot` when set.
pub fn overlay<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durations() {
        assert_eq!(Duration::Units(2.5).to_units(1000.0), Ok(2.5));
        assert_eq!(Duration::Text("90s".into()).to_units(60_000.0), Ok(1.5));
        assert_eq!(Duration::Text("1d".into()).to_units(3.6e6), Ok(24.0));
        assert_eq!(Duration::Text("3".into()).to_units(1.0), Ok(3.0));
        assert!(Duration::Text("5y".into()).to_units(1.0).is_err());
        assert!(Duration::Text("-1s".into()).to_units(1.0).is_err());
        assert!(Duration::parse("fast").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("sead = 1").is_err());
        assert!(toml::from_str::<FileConfig>("[simulate.wave]\nxi = 1.0").is_err());
        let cfg: FileConfig = toml::from_str("seed = 4\nhorizon = \"5m\"\n[optimize]\na = 10.0").unwrap();
        assert_eq!(cfg.seed, Some(4));
        assert_eq!(cfg.horizon, Some(Duration::Text("5m".into())));
        assert_eq!(cfg.optimize.a, Some(10.0));
        assert_eq!(cfg.optimize.commission, 3.0);
    }
}
