//! Two-level "coupled-wave" price model.
//!
//! The high and low prices of a bar are the eigenvalues of a Hermitian 2x2
//! price operator
//!
//! ```text
//! S = | s_mid + ξ/2    κ/2       |
//!     | κ/2            s_mid - ξ/2 |
//! ```
//!
//! whose elements are redrawn every step: the mid-price takes a Gaussian
//! step around the last traded price, `ξ ~ N(ξ₀, ξ₁)` and `κ ~ N(κ₀, κ₁)`
//! set the bar height `h = √(ξ² + κ²)`, and the next last price is placed
//! inside the bar. The level amplitudes `ψ = (ψ_high, ψ_low)` evolve under
//! `i·τ₀·s·dψ/dt = S·ψ`, which for constant coefficients is a rotation with
//! angular frequency `h/(2τ₀s)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::rng::{path_rng, PathRng, AMPLITUDE_STREAM};
use crate::stats;

/// Minimum series length for [`path_volatility`].
pub const MIN_VOLATILITY_SAMPLES: usize = 1000;

/// Redraw rate above which [`simulate_path`] logs a warning.
pub const REDRAW_WARN_RATE: f64 = 1e-3;

/// Placement of the next last price inside the bar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LastPriceRule {
    /// Uniform between the low and high levels.
    #[default]
    UniformInBar,
    /// Normal around the mid-price with half the bar height as deviation.
    NormalHalfBar,
}

impl LastPriceRule {
    /// Coefficient `α` of the bar term in `η² = s²σ²dt + α·h²/4`: the
    /// variance of the placement in units of `(h/2)²`.
    pub fn placement_alpha(self) -> f64 {
        match self {
            LastPriceRule::UniformInBar => 1.0 / 3.0,
            LastPriceRule::NormalHalfBar => 1.0,
        }
    }
}

/// Generative parameters of the two-level price process.
///
/// `sigma_step` is the mid-price volatility for one step, i.e. `σ·√dt` for a
/// step of length `dt` in the reference time unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledWaveParams {
    pub sigma_step: f64,
    pub xi_mean: f64,
    pub xi_std: f64,
    pub kappa_mean: f64,
    pub kappa_std: f64,
    pub tau0: f64,
    #[serde(default)]
    pub last_price_rule: LastPriceRule,
    #[serde(default)]
    pub seed: u64,
}

impl Default for CoupledWaveParams {
    fn default() -> Self {
        Self {
            sigma_step: 1e-3,
            xi_mean: 0.0,
            xi_std: 0.05,
            kappa_mean: 0.0,
            kappa_std: 0.05,
            tau0: 1.0,
            last_price_rule: LastPriceRule::UniformInBar,
            seed: 0,
        }
    }
}

impl CoupledWaveParams {
    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("sigma_step", self.sigma_step)?;
        ensure_non_negative("xi_std", self.xi_std)?;
        ensure_non_negative("kappa_std", self.kappa_std)?;
        ensure_positive("tau0", self.tau0)?;
        if !self.xi_mean.is_finite() {
            return Err(Error::domain("xi_mean", self.xi_mean, "must be finite"));
        }
        if !self.kappa_mean.is_finite() {
            return Err(Error::domain("kappa_mean", self.kappa_mean, "must be finite"));
        }
        Ok(())
    }

    /// Expected squared bar height `E[h²] = ξ₀² + ξ₁² + κ₀² + κ₁²`.
    pub fn mean_square_height(&self) -> f64 {
        self.xi_mean.powi(2) + self.xi_std.powi(2) + self.kappa_mean.powi(2) + self.kappa_std.powi(2)
    }

    fn draw_xi_kappa(&self, rng: &mut PathRng) -> (f64, f64) {
        let z_xi: f64 = rng.sample(StandardNormal);
        let z_kappa: f64 = rng.sample(StandardNormal);
        (
            self.xi_mean + self.xi_std * z_xi,
            self.kappa_mean + self.kappa_std * z_kappa,
        )
    }
}

/// Hermitian 2x2 price operator with a real off-diagonal element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceOperator2x2 {
    pub s11: f64,
    pub s22: f64,
    pub s12: f64,
}

/// Spectrum of a [`PriceOperator2x2`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceLevels {
    pub s_high: f64,
    pub s_low: f64,
    pub h: f64,
    pub s_mid: f64,
}

impl PriceOperator2x2 {
    /// Operator for a step with mid-price `s_mid` and draws `ξ`, `κ`.
    pub fn from_draws(s_mid: f64, xi: f64, kappa: f64) -> Self {
        Self {
            s11: s_mid + 0.5 * xi,
            s22: s_mid - 0.5 * xi,
            s12: 0.5 * kappa,
        }
    }

    /// `ξ = s11 - s22`.
    pub fn xi(&self) -> f64 {
        self.s11 - self.s22
    }

    /// `κ = 2·s12`.
    pub fn kappa(&self) -> f64 {
        2.0 * self.s12
    }

    pub fn eigen_decompose(&self) -> PriceLevels {
        let s_mid = 0.5 * (self.s11 + self.s22);
        let diff = self.s11 - self.s22;
        let h = (diff * diff + 4.0 * self.s12 * self.s12).sqrt();
        PriceLevels {
            s_high: s_mid + 0.5 * h,
            s_low: s_mid - 0.5 * h,
            h,
            s_mid,
        }
    }
}

/// One simulated step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarSample {
    pub s_mid: f64,
    pub s_high: f64,
    pub s_low: f64,
    pub s_last: f64,
    pub h: f64,
}

/// A simulated path: bars in step order plus the guard counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarSeries {
    /// Last price before the first bar.
    pub initial_price: f64,
    pub bars: Vec<BarSample>,
    /// Traded volume per bar; zero when the generator has no volume model.
    pub volumes: Vec<f64>,
    /// Number of rejected draws (non-positive mid or last price).
    pub redraws: u64,
}

impl BarSeries {
    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn heights(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.h).collect()
    }

    /// Fraction of draws that were rejected.
    pub fn redraw_rate(&self) -> f64 {
        if self.bars.is_empty() {
            0.0
        } else {
            self.redraws as f64 / (self.redraws as f64 + self.bars.len() as f64)
        }
    }

    /// Writes the series as bars: `timestamp,open,high,low,close,volume,h`.
    ///
    /// `open` is the mid-price and `close` the last price. Bar `i` is stamped
    /// `start_ms + (i + 1)·step_ms`.
    pub fn write_csv<W: std::io::Write>(&self, out: W, start_ms: i64, step_ms: i64) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "open", "high", "low", "close", "volume", "h"])?;
        for (i, bar) in self.bars.iter().enumerate() {
            let volume = self.volumes.get(i).copied().unwrap_or(0.0);
            w.serialize((
                start_ms + (i as i64 + 1) * step_ms,
                bar.s_mid,
                bar.s_high,
                bar.s_low,
                bar.s_last,
                volume,
                bar.h,
            ))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Advances the price by one step.
///
/// Draws `dz`, `ξ`, `κ`, builds the price operator and places the next last
/// price per the rule. A non-positive mid or last price is rejected and
/// redrawn; the number of rejections is returned alongside the bar.
pub fn step_price(s_last: f64, params: &CoupledWaveParams, rng: &mut PathRng) -> Result<(BarSample, u32)> {
    ensure_positive("s_last", s_last)?;
    let mut redraws = 0u32;
    let s_mid = loop {
        let dz: f64 = rng.sample(StandardNormal);
        let s_mid = s_last * (1.0 + params.sigma_step * dz);
        if s_mid > 0.0 {
            break s_mid;
        }
        redraws += 1;
    };
    let (xi, kappa) = params.draw_xi_kappa(rng);
    let h = (xi * xi + kappa * kappa).sqrt();
    let s_high = s_mid + 0.5 * h;
    let s_low = s_mid - 0.5 * h;
    let s_next = loop {
        let candidate = match params.last_price_rule {
            LastPriceRule::UniformInBar => {
                let u: f64 = rng.random();
                (s_low + u * h).clamp(s_low, s_high)
            }
            LastPriceRule::NormalHalfBar => {
                let z: f64 = rng.sample(StandardNormal);
                s_mid + 0.5 * h * z
            }
        };
        if candidate > 0.0 {
            break candidate;
        }
        redraws += 1;
    };
    Ok((
        BarSample {
            s_mid,
            s_high,
            s_low,
            s_last: s_next,
            h,
        },
        redraws,
    ))
}

/// Simulates `n_steps` bars from `s0` on stream `(params.seed, 0)`.
pub fn simulate_path(params: &CoupledWaveParams, s0: f64, n_steps: usize) -> Result<BarSeries> {
    simulate_path_indexed(params, s0, n_steps, 0)
}

/// Simulates path `path_index` of a multi-path run.
pub fn simulate_path_indexed(
    params: &CoupledWaveParams,
    s0: f64,
    n_steps: usize,
    path_index: u64,
) -> Result<BarSeries> {
    params.validate()?;
    ensure_positive("s0", s0)?;
    if n_steps == 0 {
        return Err(Error::InsufficientData {
            what: "simulation steps",
            need: 1,
            got: 0,
        });
    }
    let mut rng = path_rng(params.seed, path_index);
    let mut bars = Vec::with_capacity(n_steps);
    let mut redraws = 0u64;
    let mut s_last = s0;
    for _ in 0..n_steps {
        let (bar, r) = step_price(s_last, params, &mut rng)?;
        redraws += u64::from(r);
        s_last = bar.s_last;
        bars.push(bar);
    }
    let series = BarSeries {
        initial_price: s0,
        volumes: vec![0.0; bars.len()],
        bars,
        redraws,
    };
    warn_on_redraws(&series);
    Ok(series)
}

pub(crate) fn warn_on_redraws(series: &BarSeries) {
    if series.redraw_rate() > REDRAW_WARN_RATE {
        log::warn!(
            "{} of {} draws rejected for non-positive prices ({:.3}%)",
            series.redraws,
            series.redraws + series.bars.len() as u64,
            100.0 * series.redraw_rate()
        );
    }
}

/// Simulates `n_paths` independent paths in parallel. Path `i` always uses
/// stream `(seed, i)`, so the output does not depend on the thread count.
pub fn simulate_paths(params: &CoupledWaveParams, s0: f64, n_steps: usize, n_paths: usize) -> Result<Vec<BarSeries>> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_path_indexed(params, s0, n_steps, i))
        .collect()
}

/// Standard deviation of last-price increments, starting from the initial
/// price.
pub fn path_volatility(series: &BarSeries) -> Result<f64> {
    if series.len() < MIN_VOLATILITY_SAMPLES {
        return Err(Error::InsufficientData {
            what: "path volatility",
            need: MIN_VOLATILITY_SAMPLES,
            got: series.len(),
        });
    }
    Ok(stats::std_dev(&increments(series)))
}

fn increments(series: &BarSeries) -> Vec<f64> {
    let mut prev = series.initial_price;
    series
        .bars
        .iter()
        .map(|b| {
            let d = b.s_last - prev;
            prev = b.s_last;
            d
        })
        .collect()
}

/// Predicted volatility of last prices `η = √(s²σ²dt + α·E[h²]/4)`, with
/// `dt` counted in steps and `α` fixed by the placement rule.
pub fn predicted_volatility(params: &CoupledWaveParams, price: f64, dt: f64) -> Result<f64> {
    params.validate()?;
    ensure_positive("price", price)?;
    ensure_non_negative("dt", dt)?;
    let alpha = params.last_price_rule.placement_alpha();
    Ok((price * price * params.sigma_step.powi(2) * dt + alpha * params.mean_square_height() / 4.0).sqrt())
}

/// [`predicted_volatility`] for one step of an existing path, using the
/// mean squared price the increments were drawn from.
pub fn predicted_path_volatility(params: &CoupledWaveParams, series: &BarSeries) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::InsufficientData {
            what: "predicted path volatility",
            need: 1,
            got: 0,
        });
    }
    let mut prev = series.initial_price;
    let mut sum_sq = 0.0;
    for b in &series.bars {
        sum_sq += prev * prev;
        prev = b.s_last;
    }
    let rms_price = (sum_sq / series.len() as f64).sqrt();
    predicted_volatility(params, rms_price, 1.0)
}

/// Complex amplitudes of the high and low levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeState {
    pub psi_high: Complex64,
    pub psi_low: Complex64,
}

impl AmplitudeState {
    pub fn new(psi_high: Complex64, psi_low: Complex64) -> Self {
        Self { psi_high, psi_low }
    }

    /// All weight on the high level.
    pub fn high() -> Self {
        Self::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    pub fn low() -> Self {
        Self::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    }

    pub fn p_high(&self) -> f64 {
        self.psi_high.norm_sqr()
    }

    pub fn p_low(&self) -> f64 {
        self.psi_low.norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.p_high() + self.p_low()
    }
}

/// Closed-form evolution of the amplitudes over time `t` under a constant
/// operator, with price scale `s` and time constant `tau0`.
///
/// The rotation angle is `h·t/(2τ₀s)`; the common phase is
/// `exp(-i·s_mid·t/(τ₀s))`.
pub fn evolve_amplitudes(
    state: AmplitudeState,
    op: &PriceOperator2x2,
    price: f64,
    tau0: f64,
    t: f64,
) -> Result<AmplitudeState> {
    ensure_positive("price", price)?;
    ensure_positive("tau0", tau0)?;
    Ok(evolve_unchecked(state, op, 1.0 / (tau0 * price), t))
}

fn evolve_unchecked(state: AmplitudeState, op: &PriceOperator2x2, rate: f64, t: f64) -> AmplitudeState {
    let xi = op.xi();
    let kappa = op.kappa();
    let h = (xi * xi + kappa * kappa).sqrt();
    let s_mid = 0.5 * (op.s11 + op.s22);
    let phase = Complex64::from_polar(1.0, -s_mid * rate * t);
    if h == 0.0 {
        return AmplitudeState::new(phase * state.psi_high, phase * state.psi_low);
    }
    let theta = 0.5 * h * rate * t;
    let (sin, cos) = theta.sin_cos();
    let i = Complex64::i();
    let diag_high = Complex64::new(cos, 0.0) - i * (xi / h * sin);
    let diag_low = Complex64::new(cos, 0.0) + i * (xi / h * sin);
    let off = -i * (kappa / h * sin);
    AmplitudeState::new(
        phase * (diag_high * state.psi_high + off * state.psi_low),
        phase * (off * state.psi_high + diag_low * state.psi_low),
    )
}

/// Outcome of [`evolve_fluctuating`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuatingEvolution {
    pub state: AmplitudeState,
    /// Largest `| |ψ|² - |ψ₀|² |` seen over the run.
    pub max_norm_drift: f64,
}

/// Chains [`evolve_amplitudes`] over `n_steps` steps of length `dt`,
/// redrawing `ξ` and `κ` every step and taking the mid-price and price scale
/// from `price_path` (one entry per step, or a single constant entry).
///
/// Draws come from the amplitude stream of `params.seed`.
pub fn evolve_fluctuating(
    state0: AmplitudeState,
    params: &CoupledWaveParams,
    price_path: &[f64],
    dt: f64,
    n_steps: usize,
) -> Result<FluctuatingEvolution> {
    params.validate()?;
    ensure_positive("dt", dt)?;
    if price_path.len() != 1 && price_path.len() != n_steps {
        return Err(Error::Invalid(format!(
            "price path has {} entries; expected 1 or {n_steps}",
            price_path.len()
        )));
    }
    for &p in price_path {
        ensure_positive("price_path", p)?;
    }
    let mut rng = path_rng(params.seed, AMPLITUDE_STREAM);
    let norm0 = state0.norm_sqr();
    let mut state = state0;
    let mut max_norm_drift = 0.0f64;
    for k in 0..n_steps {
        let price = price_path[if price_path.len() == 1 { 0 } else { k }];
        let (xi, kappa) = params.draw_xi_kappa(&mut rng);
        let op = PriceOperator2x2::from_draws(price, xi, kappa);
        state = evolve_unchecked(state, &op, 1.0 / (params.tau0 * price), dt);
        max_norm_drift = max_norm_drift.max((state.norm_sqr() - norm0).abs());
    }
    Ok(FluctuatingEvolution { state, max_norm_drift })
}

/// Step length keeping the per-step rotation `h·dt/(2τ₀s)` at 0.1 rad for
/// the root-mean-square bar height.
pub fn default_amplitude_dt(params: &CoupledWaveParams, price: f64) -> Result<f64> {
    ensure_positive("price", price)?;
    let h = ensure_positive("rms bar height", params.mean_square_height().sqrt())?;
    Ok(0.2 * params.tau0 * price / h)
}

/// Full period of the population oscillation, `2π·τ₀·s/h`.
pub fn oscillation_period(h: f64, price: f64, tau0: f64) -> Result<f64> {
    ensure_positive("h", h)?;
    ensure_positive("price", price)?;
    ensure_positive("tau0", tau0)?;
    Ok(2.0 * PI * tau0 * price / h)
}

/// Time of the first maximum of `|ψ_low|²` starting from the high level,
/// scanning a grid of step `dt` up to `t_max`. `None` if no interior
/// maximum is found.
pub fn first_transfer_peak(op: &PriceOperator2x2, price: f64, tau0: f64, dt: f64, t_max: f64) -> Result<Option<f64>> {
    ensure_positive("dt", dt)?;
    let mut prev = 0.0;
    let mut prev_prev = f64::NEG_INFINITY;
    let steps = (t_max / dt).ceil() as usize;
    for k in 0..=steps {
        let t = k as f64 * dt;
        let p = evolve_amplitudes(AmplitudeState::high(), op, price, tau0, t)?.p_low();
        if k >= 2 && prev >= prev_prev && prev > p {
            return Ok(Some((k - 1) as f64 * dt));
        }
        prev_prev = prev;
        prev = p;
    }
    Ok(None)
}

/// Impact price `h = 2π·τ₀·s/τ`.
pub fn impact_price(price: f64, tau: f64, tau0: f64) -> Result<f64> {
    ensure_positive("price", price)?;
    ensure_positive("tau", tau)?;
    ensure_positive("tau0", tau0)?;
    Ok(2.0 * PI * tau0 * price / tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix2, SymmetricEigen};
    use proptest::prelude::*;

    fn frozen() -> CoupledWaveParams {
        CoupledWaveParams {
            sigma_step: 0.0,
            xi_mean: 0.0,
            xi_std: 0.0,
            kappa_mean: 0.0,
            kappa_std: 0.0,
            tau0: 1.0,
            last_price_rule: LastPriceRule::UniformInBar,
            seed: 3,
        }
    }

    #[test]
    fn eigen_examples() {
        let l = PriceOperator2x2 {
            s11: 10.0,
            s22: 10.0,
            s12: 0.0,
        }
        .eigen_decompose();
        assert_eq!((l.h, l.s_high, l.s_low), (0.0, 10.0, 10.0));
        let l = PriceOperator2x2 {
            s11: 11.0,
            s22: 9.0,
            s12: 0.0,
        }
        .eigen_decompose();
        assert_eq!((l.h, l.s_high, l.s_low), (2.0, 11.0, 9.0));
        let l = PriceOperator2x2 {
            s11: 10.0,
            s22: 10.0,
            s12: 1.5,
        }
        .eigen_decompose();
        assert_eq!((l.h, l.s_mid), (3.0, 10.0));
    }

    proptest! {
        #[test]
        fn eigen_matches_generic_solver(s11 in -100.0f64..100.0, s22 in -100.0f64..100.0, s12 in -50.0f64..50.0) {
            let op = PriceOperator2x2 { s11, s22, s12 };
            let l = op.eigen_decompose();
            let eig = SymmetricEigen::new(Matrix2::new(s11, s12, s12, s22));
            let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
            let scale = 1.0 + s11.abs().max(s22.abs()).max(s12.abs());
            prop_assert!((l.s_high - hi).abs() < 1e-12 * scale);
            prop_assert!((l.s_low - lo).abs() < 1e-12 * scale);
            prop_assert!(l.s_high >= l.s_low);
            prop_assert!(((l.s_high - l.s_low) - l.h).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn frozen_dynamics() {
        let series = simulate_path(&frozen(), 50.0, 20).unwrap();
        for b in &series.bars {
            assert_eq!((b.s_mid, b.h, b.s_last), (50.0, 0.0, 50.0));
        }
        assert_eq!(series.redraws, 0);
    }

    #[test]
    fn degenerate_heights_give_345_bars() {
        let p = CoupledWaveParams {
            xi_mean: 3.0,
            kappa_mean: 4.0,
            ..frozen()
        };
        let series = simulate_path(&p, 100.0, 50).unwrap();
        assert!(series.bars.iter().all(|b| b.h == 5.0));
        for b in &series.bars {
            assert!(b.s_low <= b.s_last && b.s_last <= b.s_high);
            assert_eq!(b.s_high - b.s_mid, 2.5);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let p = CoupledWaveParams::default();
        let a = simulate_path(&p, 100.0, 500).unwrap();
        let b = simulate_path(&p, 100.0, 500).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&CoupledWaveParams { seed: 1, ..p }, 100.0, 500).unwrap();
        assert_ne!(a, c);
        assert_eq!(simulate_path(&p, 100.0, 1).unwrap().len(), 1);
        assert!(simulate_path(&p, 100.0, 0).is_err());
    }

    #[test]
    fn parallel_paths_match_sequential() {
        let p = CoupledWaveParams::default();
        let par = simulate_paths(&p, 10.0, 200, 6).unwrap();
        for (i, path) in par.iter().enumerate() {
            assert_eq!(path, &simulate_path_indexed(&p, 10.0, 200, i as u64).unwrap());
        }
    }

    #[test]
    fn bar_invariants_hold() {
        let p = CoupledWaveParams {
            xi_mean: 0.2,
            kappa_mean: -0.1,
            ..CoupledWaveParams::default()
        };
        let series = simulate_path(&p, 20.0, 2000).unwrap();
        for b in &series.bars {
            assert_relative_eq!(b.s_high, b.s_mid + b.h / 2.0);
            assert_relative_eq!(b.s_low, b.s_mid - b.h / 2.0);
            assert!(b.s_low <= b.s_last && b.s_last <= b.s_high);
        }
    }

    #[test]
    fn redraws_are_counted() {
        let p = CoupledWaveParams {
            sigma_step: 2.0,
            ..frozen()
        };
        let series = simulate_path(&p, 1.0, 2000).unwrap();
        assert!(series.redraws > 0);
        assert!(series.bars.iter().all(|b| b.s_mid > 0.0 && b.s_last > 0.0));
    }

    #[test]
    fn volatility_limits() {
        let p = CoupledWaveParams {
            sigma_step: 0.01,
            ..frozen()
        };
        assert_relative_eq!(predicted_volatility(&p, 100.0, 4.0).unwrap(), 100.0 * 0.01 * 2.0);
        let uniform = CoupledWaveParams {
            xi_mean: 0.6,
            ..frozen()
        };
        assert_relative_eq!(
            predicted_volatility(&uniform, 100.0, 1.0).unwrap(),
            0.6 / 12f64.sqrt(),
            max_relative = 1e-15
        );
        let normal = CoupledWaveParams {
            last_price_rule: LastPriceRule::NormalHalfBar,
            ..uniform
        };
        assert_relative_eq!(
            predicted_volatility(&normal, 100.0, 1.0).unwrap(),
            0.3,
            max_relative = 1e-15
        );
    }

    #[test]
    fn constant_bar_volatility_matches_placement_variance() {
        // σ = 0, h ≡ 0.6: the mid restarts at the last price each step, so an
        // increment is just the placement offset inside the bar.
        for (rule, placement_std) in [
            (LastPriceRule::UniformInBar, 0.6 / 12f64.sqrt()),
            (LastPriceRule::NormalHalfBar, 0.3),
        ] {
            let p = CoupledWaveParams {
                xi_mean: 0.6,
                last_price_rule: rule,
                ..frozen()
            };
            let series = simulate_path(&p, 100.0, 100_000).unwrap();
            let vol = path_volatility(&series).unwrap();
            assert_relative_eq!(vol, placement_std, max_relative = 0.02);
        }
    }

    #[test]
    fn short_series_is_rejected() {
        let series = simulate_path(&CoupledWaveParams::default(), 10.0, 999).unwrap();
        assert!(matches!(path_volatility(&series), Err(Error::InsufficientData { .. })));
    }

    /// Fourth-order Runge-Kutta integration of i·τ₀·s·dψ/dt = S·ψ.
    fn rk4(
        state: AmplitudeState,
        op: &PriceOperator2x2,
        price: f64,
        tau0: f64,
        t: f64,
        steps: usize,
    ) -> AmplitudeState {
        let rate = Complex64::new(0.0, -1.0 / (tau0 * price));
        let f = |hi: Complex64, lo: Complex64| (rate * (op.s11 * hi + op.s12 * lo), rate * (op.s12 * hi + op.s22 * lo));
        let dt = t / steps as f64;
        let (mut a, mut b) = (state.psi_high, state.psi_low);
        for _ in 0..steps {
            let k1 = f(a, b);
            let k2 = f(a + k1.0 * (dt / 2.0), b + k1.1 * (dt / 2.0));
            let k3 = f(a + k2.0 * (dt / 2.0), b + k2.1 * (dt / 2.0));
            let k4 = f(a + k3.0 * dt, b + k3.1 * dt);
            a += (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (dt / 6.0);
            b += (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (dt / 6.0);
        }
        AmplitudeState::new(a, b)
    }

    #[test]
    fn closed_form_matches_rk4() {
        let op = PriceOperator2x2::from_draws(101.0, 0.7, -1.3);
        let state0 = AmplitudeState::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
        let (price, tau0, t) = (100.0, 0.5, 240.0);
        let exact = evolve_amplitudes(state0, &op, price, tau0, t).unwrap();
        let numeric = rk4(state0, &op, price, tau0, t, 100_000);
        assert!((exact.psi_high - numeric.psi_high).norm() < 1e-6);
        assert!((exact.psi_low - numeric.psi_low).norm() < 1e-6);
        assert!((exact.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn amplitude_examples() {
        let op = PriceOperator2x2::from_draws(100.0, 0.0, 2.0);
        let s0 = AmplitudeState::new(Complex64::new(0.6, 0.1), Complex64::new(0.3, -0.7));
        assert_eq!(evolve_amplitudes(s0, &op, 100.0, 1.0, 0.0).unwrap(), s0);

        let (price, tau0, h) = (100.0, 1.0, 2.0);
        let t = PI * tau0 * price / h;
        let transferred = evolve_amplitudes(AmplitudeState::high(), &op, price, tau0, t).unwrap();
        assert_relative_eq!(transferred.p_low(), 1.0, epsilon = 1e-12);

        let pure_xi = PriceOperator2x2::from_draws(100.0, 2.0, 0.0);
        for t in [0.3, 17.0, 1234.5] {
            let s = evolve_amplitudes(AmplitudeState::high(), &pure_xi, price, tau0, t).unwrap();
            assert_relative_eq!(s.p_high(), 1.0, epsilon = 1e-12);
        }

        let flat = PriceOperator2x2::from_draws(100.0, 0.0, 0.0);
        let s = evolve_amplitudes(s0, &flat, price, tau0, 3.0).unwrap();
        assert_relative_eq!(s.p_high(), s0.p_high(), epsilon = 1e-15);
        assert!(evolve_amplitudes(s0, &op, 0.0, 1.0, 1.0).is_err());
        assert!(evolve_amplitudes(s0, &op, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn fluctuating_evolution_conserves_norm() {
        let p = CoupledWaveParams {
            xi_mean: 0.1,
            xi_std: 0.3,
            kappa_mean: 0.2,
            kappa_std: 0.3,
            ..CoupledWaveParams::default()
        };
        let dt = default_amplitude_dt(&p, 50.0).unwrap();
        let out = evolve_fluctuating(AmplitudeState::high(), &p, &[50.0], dt, 10_000).unwrap();
        assert!(out.max_norm_drift < 1e-9);
        assert!((out.state.norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_fluctuating_equals_constant_evolution() {
        let p = CoupledWaveParams {
            xi_mean: 0.4,
            kappa_mean: 0.9,
            ..frozen()
        };
        let op = PriceOperator2x2::from_draws(80.0, 0.4, 0.9);
        let chained = evolve_fluctuating(AmplitudeState::high(), &p, &[80.0], 0.5, 40)
            .unwrap()
            .state;
        let direct = evolve_amplitudes(AmplitudeState::high(), &op, 80.0, 1.0, 20.0).unwrap();
        assert!((chained.psi_high - direct.psi_high).norm() < 1e-12);
        assert!((chained.psi_low - direct.psi_low).norm() < 1e-12);
    }

    #[test]
    fn transfer_peak_timing() {
        let (price, tau0, h) = (100.0, 0.25, 0.5);
        let op = PriceOperator2x2::from_draws(price, 0.0, h);
        let expected = PI * tau0 * price / h;
        let period = oscillation_period(h, price, tau0).unwrap();
        assert_relative_eq!(period, 2.0 * expected);
        let dt = period / 1000.0;
        let peak = first_transfer_peak(&op, price, tau0, dt, period).unwrap().unwrap();
        assert!((peak - expected).abs() <= dt);
    }

    #[test]
    fn impact_price_examples() {
        assert_relative_eq!(impact_price(1.0, 2.0 * PI, 1.0).unwrap(), 1.0);
        assert_relative_eq!(impact_price(100.0, 1.0, 1.0 / (2.0 * PI)).unwrap(), 100.0);
        let h1 = impact_price(30.0, 0.4, 2.0).unwrap();
        let h2 = impact_price(30.0, 0.2, 2.0).unwrap();
        assert_relative_eq!(h2, 2.0 * h1);
        assert!(impact_price(1.0, 0.0, 1.0).is_err());
    }
}
