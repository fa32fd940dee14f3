//! Volume-driven synthetic market data.
//!
//! Each step draws a volume rate log-uniformly and runs one coupled-wave
//! step whose `ξ`, `κ` are centred normals with deviation `σ_h(V)`. The bar
//! height is then Rayleigh with scale `σ_h`, and `σ_h` is chosen so that the
//! configured quantile of the height equals the spread law at that volume:
//! `σ_h = s·δ(V)/√(-2·ln(1-q))`. Percentile curves built from the output
//! therefore sit on the law.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::curve::SpreadSource;
use super::records::{QuoteRecord, TradeRecord};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::rng::path_rng;
use crate::scaling::{bar_spread_with_volume, SpreadSurfaceParams};
use crate::spread::{general_spread, SpreadModelParams};
use crate::wave::{step_price, warn_on_redraws, BarSeries, CoupledWaveParams, LastPriceRule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeDrivenParams {
    /// Which law shapes the spreads: bid-ask, or bars over one step.
    pub source: SpreadSource,
    pub lambda_risk: f64,
    pub rho_risk: f64,
    pub tau0: f64,
    /// Average trade size in the law.
    pub n: f64,
    /// Mid-price volatility per reference time unit.
    pub sigma: f64,
    pub volume_lo: f64,
    pub volume_hi: f64,
    /// Quantile of the bar height that matches the law.
    pub quantile_level: f64,
    /// Step length in reference time units; also the bar horizon.
    pub step_dt: f64,
    pub last_price_rule: LastPriceRule,
    pub seed: u64,
}

impl VolumeDrivenParams {
    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("lambda_risk", self.lambda_risk)?;
        ensure_non_negative("rho_risk", self.rho_risk)?;
        ensure_positive("tau0", self.tau0)?;
        ensure_positive("n", self.n)?;
        ensure_non_negative("sigma", self.sigma)?;
        ensure_positive("volume_lo", self.volume_lo)?;
        ensure_positive("volume_hi", self.volume_hi)?;
        ensure_positive("step_dt", self.step_dt)?;
        if self.volume_hi < self.volume_lo {
            return Err(Error::Invalid("volume_hi must not be below volume_lo".into()));
        }
        if !(self.quantile_level > 0.0 && self.quantile_level < 1.0) {
            return Err(Error::domain(
                "quantile_level",
                self.quantile_level,
                "must lie in (0, 1)",
            ));
        }
        Ok(())
    }

    /// Law spread relative to price at volume rate `volume`.
    pub fn relative_spread(&self, volume: f64) -> Result<f64> {
        match self.source {
            SpreadSource::BidAsk => general_spread(
                &SpreadModelParams {
                    price_s: 1.0,
                    sigma: self.sigma,
                    lambda_risk: self.lambda_risk,
                    rho_risk: self.rho_risk,
                    avg_trade_size_n: self.n,
                    tau0: self.tau0,
                },
                volume,
            ),
            SpreadSource::Bar => bar_spread_with_volume(
                &SpreadSurfaceParams::new(self.lambda_risk, self.rho_risk, self.sigma, self.n, self.tau0),
                1.0,
                volume,
                self.step_dt,
            ),
        }
    }
}

/// Simulates `n_steps` volume-driven bars from price `s0`. The series
/// carries the traded volume `V·dt` of each step.
pub fn simulate_volume_driven(params: &VolumeDrivenParams, s0: f64, n_steps: usize) -> Result<BarSeries> {
    params.validate()?;
    ensure_positive("s0", s0)?;
    if n_steps == 0 {
        return Err(Error::InsufficientData {
            what: "simulation steps",
            need: 1,
            got: 0,
        });
    }
    let height_quantile = (-2.0 * (1.0 - params.quantile_level).ln()).sqrt();
    let (ln_lo, ln_hi) = (params.volume_lo.ln(), params.volume_hi.ln());
    let mut rng = path_rng(params.seed, 0);
    let mut step = CoupledWaveParams {
        sigma_step: params.sigma * params.step_dt.sqrt(),
        xi_mean: 0.0,
        xi_std: 0.0,
        kappa_mean: 0.0,
        kappa_std: 0.0,
        tau0: params.tau0,
        last_price_rule: params.last_price_rule,
        seed: params.seed,
    };
    let mut series = BarSeries {
        initial_price: s0,
        bars: Vec::with_capacity(n_steps),
        volumes: Vec::with_capacity(n_steps),
        redraws: 0,
    };
    let mut s_last = s0;
    for _ in 0..n_steps {
        let u: f64 = rng.random();
        let volume = (ln_lo + u * (ln_hi - ln_lo)).exp();
        let sigma_h = s_last * params.relative_spread(volume)? / height_quantile;
        step.xi_std = sigma_h;
        step.kappa_std = sigma_h;
        let (bar, redraws) = step_price(s_last, &step, &mut rng)?;
        series.redraws += u64::from(redraws);
        s_last = bar.s_last;
        series.bars.push(bar);
        series.volumes.push(volume * params.step_dt);
    }
    warn_on_redraws(&series);
    Ok(series)
}

/// Quotes at the bar levels: bid = low, ask = high. Bar `i` is stamped
/// `start_ms + (i + 1)·step_ms`.
pub fn series_quotes(series: &BarSeries, start_ms: i64, step_ms: i64) -> Vec<QuoteRecord> {
    series
        .bars
        .iter()
        .enumerate()
        .map(|(i, b)| QuoteRecord {
            timestamp_ms: start_ms + (i as i64 + 1) * step_ms,
            bid: b.s_low,
            ask: b.s_high,
        })
        .collect()
}

/// One trade per bar at the last price for the bar's volume.
pub fn series_trades(series: &BarSeries, start_ms: i64, step_ms: i64) -> Vec<TradeRecord> {
    series
        .bars
        .iter()
        .zip(&series.volumes)
        .enumerate()
        .map(|(i, (b, &size))| TradeRecord {
            timestamp_ms: start_ms + (i as i64 + 1) * step_ms,
            price: b.s_last,
            size,
        })
        .collect()
}
