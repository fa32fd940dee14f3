//! Operating-spread optimization for a market maker.
//!
//! A quote at control level `λ` executes with probability
//! `r(λ) = exp(-(λ/λ₀)²)`, the survival function of a Rayleigh distribution
//! of market spreads. The quoted spread scales linearly with the control,
//! `δ(λ; v) = (λ/λ_ref)·δ_ref(v)`, where `δ_ref` is the calibrated spread law
//! at `λ_ref`. The expected spread revenue per unit volume is
//! `P/L = 0.5·r·v·(δ - α)` with `α` the round-trip commission in the same
//! dimensionless units as `δ`. All spreads here are dimensionless (money
//! divided by price).

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::spread;

/// Default upper bound of the control search, in units of `λ₀`.
pub const DEFAULT_LAMBDA_MAX_FACTOR: f64 = 10.0;
/// Default control level at which the reference spread law is anchored.
pub const DEFAULT_LAMBDA_REF: f64 = 1.0;

const NEWTON_MAX_ITER: usize = 200;
const FALLBACK_GRID_POINTS: usize = 100_000;

/// Rayleigh execution model with scale `λ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionModel {
    pub lambda0: f64,
}

impl ExecutionModel {
    pub fn new(lambda0: f64) -> Result<Self> {
        ensure_positive("lambda0", lambda0)?;
        Ok(Self { lambda0 })
    }

    /// `r(λ) = exp(-(λ/λ₀)²)`.
    pub fn execution_rate(&self, lambda: f64) -> Result<f64> {
        ensure_non_negative("lambda", lambda)?;
        Ok(self.rate_unchecked(lambda))
    }

    fn rate_unchecked(&self, lambda: f64) -> f64 {
        let x = lambda / self.lambda0;
        (-x * x).exp()
    }

    /// Density `p(λ) = 2λ/λ₀²·exp(-(λ/λ₀)²)`, so that `r(λ) = ∫_λ^∞ p`.
    pub fn density(&self, lambda: f64) -> f64 {
        if lambda < 0.0 {
            return 0.0;
        }
        2.0 * lambda / (self.lambda0 * self.lambda0) * self.rate_unchecked(lambda)
    }
}

/// Which spread the market maker quotes against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuotingMode {
    BidAsk,
    Bar { horizon: f64 },
}

/// Reference spread `δ_ref(v)` at the anchor control level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpreadLaw {
    /// `δ(v) = √(a/v + v²)`. `a = 0` leaves the pure impact term `δ = v`.
    BidAsk { a: f64 },
    /// `δ_T(v) = √(floor² + v²/2 + cubic_coeff·v³)` at horizon `horizon`.
    Bar { floor: f64, cubic_coeff: f64, horizon: f64 },
}

impl SpreadLaw {
    pub fn bid_ask(a: f64) -> Result<Self> {
        ensure_non_negative("a", a)?;
        Ok(SpreadLaw::BidAsk { a })
    }

    /// Bar law at horizon `horizon` from calibrated model parameters:
    /// floor `λ·σ·√T`, cubic coefficient `T/(2^{3/2}ρπτ₀)`.
    pub fn bar(lambda_risk: f64, sigma: f64, horizon: f64, rho_risk: f64, tau0: f64) -> Result<Self> {
        ensure_non_negative("lambda_risk", lambda_risk)?;
        ensure_non_negative("sigma", sigma)?;
        ensure_positive("horizon", horizon)?;
        ensure_positive("rho_risk", rho_risk)?;
        ensure_positive("tau0", tau0)?;
        Ok(SpreadLaw::Bar {
            floor: lambda_risk * sigma * horizon.sqrt(),
            cubic_coeff: horizon / (2f64.powf(1.5) * rho_risk * PI * tau0),
            horizon,
        })
    }

    pub fn mode(&self) -> QuotingMode {
        match *self {
            SpreadLaw::BidAsk { .. } => QuotingMode::BidAsk,
            SpreadLaw::Bar { horizon, .. } => QuotingMode::Bar { horizon },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpreadLaw::BidAsk { a } => {
                ensure_non_negative("a", a)?;
            }
            SpreadLaw::Bar {
                floor,
                cubic_coeff,
                horizon,
            } => {
                ensure_non_negative("floor", floor)?;
                ensure_non_negative("cubic_coeff", cubic_coeff)?;
                ensure_positive("horizon", horizon)?;
            }
        }
        Ok(())
    }

    pub fn reference_spread(&self, v: f64) -> Result<f64> {
        self.validate()?;
        ensure_positive("v", v)?;
        Ok(match *self {
            SpreadLaw::BidAsk { a } => spread::delta_unchecked(a, v),
            SpreadLaw::Bar { floor, cubic_coeff, .. } => (floor * floor + 0.5 * v * v + cubic_coeff * v * v * v).sqrt(),
        })
    }
}

/// Inputs of the spread P/L at one volume point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnLParams {
    pub commission_alpha: f64,
    pub volume_v: f64,
    pub law: SpreadLaw,
    pub lambda_ref: f64,
}

impl PnLParams {
    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("commission_alpha", self.commission_alpha)?;
        ensure_positive("volume_v", self.volume_v)?;
        ensure_positive("lambda_ref", self.lambda_ref)?;
        self.law.validate()
    }

    /// Slope `k = δ_ref(v)/λ_ref` of the quoted spread in the control.
    pub fn spread_slope(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.law.reference_spread(self.volume_v)? / self.lambda_ref)
    }

    /// Quoted spread `δ(λ; v)`.
    pub fn spread_at(&self, lambda: f64) -> Result<f64> {
        Ok(lambda * self.spread_slope()?)
    }
}

/// `P/L = 0.5·r(λ)·v·(δ(λ) - α)`.
pub fn spread_pnl(params: &PnLParams, model: &ExecutionModel, lambda: f64) -> Result<f64> {
    ensure_non_negative("lambda", lambda)?;
    let k = params.spread_slope()?;
    Ok(pnl_unchecked(k, params, model, lambda))
}

fn pnl_unchecked(k: f64, params: &PnLParams, model: &ExecutionModel, lambda: f64) -> f64 {
    0.5 * model.rate_unchecked(lambda) * params.volume_v * (k * lambda - params.commission_alpha)
}

/// First-order condition written in the execution rate,
/// `δ - α + r·∂δ/∂r`, evaluated at control `λ`.
pub fn optimality_residual(params: &PnLParams, model: &ExecutionModel, lambda: f64) -> Result<f64> {
    ensure_positive("lambda", lambda)?;
    let k = params.spread_slope()?;
    // r·∂δ/∂r = δ'(λ)·r/r'(λ) = -δ'(λ)·λ₀²/(2λ).
    Ok(k * lambda - params.commission_alpha - k * model.lambda0 * model.lambda0 / (2.0 * lambda))
}

/// Optimal quote at one volume point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotePoint {
    pub v: f64,
    pub lambda_opt: f64,
    pub spread_opt: f64,
    pub exec_rate: f64,
    pub pnl_opt: f64,
    pub pnl_naive: f64,
    /// No positive P/L is attainable: stop quoting.
    pub halt: bool,
    /// Reference spread `δ_ref(v)` the quote was scaled from.
    pub spread_ref: f64,
    /// First-order residual at `lambda_opt`; only meaningful for interior
    /// optima.
    pub residual: f64,
    /// Set when the root-finder failed and the grid fallback was used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Search bound for the control.
pub fn default_lambda_max(model: &ExecutionModel) -> f64 {
    DEFAULT_LAMBDA_MAX_FACTOR * model.lambda0
}

/// Best point of a uniform grid `step, 2·step, ..., ≤ lambda_max`.
pub fn grid_search(params: &PnLParams, model: &ExecutionModel, step: f64, lambda_max: f64) -> Result<(f64, f64)> {
    ensure_positive("step", step)?;
    ensure_positive("lambda_max", lambda_max)?;
    let k = params.spread_slope()?;
    let n = (lambda_max / step).floor() as usize;
    let mut best = (step, f64::NEG_INFINITY);
    for i in 1..=n.max(1) {
        let lambda = (i as f64 * step).min(lambda_max);
        let p = pnl_unchecked(k, params, model, lambda);
        if p > best.1 {
            best = (lambda, p);
        }
    }
    Ok(best)
}

/// Safeguarded Newton iteration on `g(λ) = δ' - 2λ(δ - α)/λ₀²`, which has
/// the sign of `d(P/L)/dλ`. Returns `None` if it fails to converge.
fn newton_root(k: f64, alpha: f64, lambda0: f64, lambda_max: f64) -> Option<f64> {
    let l0_sq = lambda0 * lambda0;
    let g = |l: f64| k - 2.0 * l * (k * l - alpha) / l0_sq;
    let dg = |l: f64| -2.0 * (2.0 * k * l - alpha) / l0_sq;
    // g(0) = k > 0 and g → -∞, so [0, hi] brackets the single root.
    let mut lo = 0.0;
    let mut hi = lambda0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e6 * lambda_max {
            return None;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..NEWTON_MAX_ITER {
        let gx = g(x);
        if gx == 0.0 {
            return Some(x);
        }
        if gx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = dg(x);
        let mut next = if slope != 0.0 { x - gx / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Some(next);
        }
        x = next;
    }
    None
}

/// Maximizes the spread P/L over `λ ∈ (0, lambda_max]`.
///
/// The interior optimum solves the first-order condition; if it lies beyond
/// `lambda_max` the bound is used. `halt` is set when the best attainable
/// P/L is not positive. Non-convergence of the root-finder returns an error
/// whose message carries the grid-search fallback.
pub fn optimize_spread(params: &PnLParams, model: &ExecutionModel, lambda_max: f64) -> Result<QuotePoint> {
    ensure_positive("lambda_max", lambda_max)?;
    let k = params.spread_slope()?;
    let alpha = params.commission_alpha;
    let pnl_naive = pnl_unchecked(k, params, model, params.lambda_ref);
    let spread_ref = k * params.lambda_ref;
    let lambda_opt = if k > 0.0 {
        match newton_root(k, alpha, model.lambda0, lambda_max) {
            Some(root) => root.min(lambda_max),
            None => {
                let (l, p) = grid_search(params, model, lambda_max / FALLBACK_GRID_POINTS as f64, lambda_max)?;
                return Err(Error::NonConvergence {
                    detail: format!(
                        "optimal control search at v = {}; grid fallback λ = {l}, P/L = {p}",
                        params.volume_v
                    ),
                });
            }
        }
    } else {
        // Zero reference spread: P/L = -0.5·r·v·α is maximized at the bound.
        lambda_max
    };
    let pnl_opt = pnl_unchecked(k, params, model, lambda_opt);
    Ok(QuotePoint {
        v: params.volume_v,
        lambda_opt,
        spread_opt: k * lambda_opt,
        exec_rate: model.rate_unchecked(lambda_opt),
        pnl_opt,
        pnl_naive,
        halt: pnl_opt <= 0.0,
        spread_ref,
        residual: optimality_residual(params, model, lambda_opt).unwrap_or(f64::NAN),
        error: None,
    })
}

/// Optimal quotes over a volume grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotePolicy {
    pub mode: QuotingMode,
    pub law: SpreadLaw,
    pub commission_alpha: f64,
    pub lambda0: f64,
    pub lambda_ref: f64,
    pub lambda_max: f64,
    pub points: Vec<QuotePoint>,
}

/// Runs [`optimize_spread`] at every volume in `volumes`.
///
/// A point whose root-finder fails is filled from a grid search and carries
/// the error message; the rest of the curve is unaffected.
pub fn policy_curve(
    volumes: &[f64],
    law: SpreadLaw,
    commission_alpha: f64,
    lambda_ref: f64,
    model: &ExecutionModel,
    lambda_max: f64,
) -> Result<QuotePolicy> {
    if volumes.is_empty() {
        return Err(Error::InsufficientData {
            what: "volume grid",
            need: 1,
            got: 0,
        });
    }
    if volumes.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Invalid("volume grid must be strictly ascending".into()));
    }
    ensure_positive("lambda_max", lambda_max)?;
    let points = volumes
        .par_iter()
        .map(|&v| {
            let params = PnLParams {
                commission_alpha,
                volume_v: v,
                law,
                lambda_ref,
            };
            params.validate()?;
            match optimize_spread(&params, model, lambda_max) {
                Ok(p) => Ok(p),
                Err(Error::NonConvergence { detail }) => {
                    let k = params.spread_slope()?;
                    let (l, p) = grid_search(&params, model, lambda_max / FALLBACK_GRID_POINTS as f64, lambda_max)?;
                    Ok(QuotePoint {
                        v,
                        lambda_opt: l,
                        spread_opt: k * l,
                        exec_rate: model.rate_unchecked(l),
                        pnl_opt: p,
                        pnl_naive: pnl_unchecked(k, &params, model, lambda_ref),
                        halt: p <= 0.0,
                        spread_ref: k * lambda_ref,
                        residual: optimality_residual(&params, model, l)?,
                        error: Some(detail),
                    })
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuotePolicy {
        mode: law.mode(),
        law,
        commission_alpha,
        lambda0: model.lambda0,
        lambda_ref,
        lambda_max,
        points,
    })
}

impl QuotePolicy {
    /// Writes `v,lambda_opt,spread_opt,exec_rate,pnl_opt,pnl_naive,halt`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "v",
            "lambda_opt",
            "spread_opt",
            "exec_rate",
            "pnl_opt",
            "pnl_naive",
            "halt",
        ])?;
        for p in &self.points {
            w.serialize((
                p.v,
                p.lambda_opt,
                p.spread_opt,
                p.exec_rate,
                p.pnl_opt,
                p.pnl_naive,
                p.halt,
            ))?;
        }
        w.flush()?;
        Ok(())
    }
}
