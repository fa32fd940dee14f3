//! Closed-form spread laws.
//!
//! The bid-ask spread is built from two components:
//!
//! - the *liquidity price* `λ·s·σ·√τ`: price uncertainty accumulated over the
//!   average time between transactions `τ = n/V`;
//! - the *impact price* `2π·τ₀·s/τ`: the money flow of a transaction, which
//!   grows with volume.
//!
//! Together they give the general law
//! `Δ(V) = √(λ²s²σ²n/V + 2ρ²(π·s·τ₀/n)²V²)`, which in dimensionless form is
//! `δ(v) = √(a/v + v²)`: it falls as `1/√v` at low volume, grows linearly at
//! high volume and has a single minimum at `v = (a/2)^(1/3)`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

/// Risk multiplier implied by pricing the spread as an ATM straddle:
/// `√(8/π) ≈ 1.596`.
pub const STRADDLE_LAMBDA: f64 = 1.595_769_121_605_730_7;

/// Absolute tolerance on dimensionless spreads used by the inverse solver.
pub const DIMENSIONLESS_TOL: f64 = 1e-9;

/// Inputs shared by every dimensional spread law.
///
/// `sigma` and the volumes passed alongside must refer to the same
/// reference time unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadModelParams {
    /// Price per share.
    pub price_s: f64,
    /// Volatility per unit reference time (1/√time).
    pub sigma: f64,
    /// Risk-aversion multiplier on the liquidity term.
    pub lambda_risk: f64,
    /// Multiplier on the impact term.
    pub rho_risk: f64,
    /// Average transaction size in shares.
    pub avg_trade_size_n: f64,
    /// Time constant of the amplitude evolution.
    pub tau0: f64,
}

impl SpreadModelParams {
    /// Checks the parameter ranges.
    ///
    /// `sigma`, `lambda_risk` and `rho_risk` may be zero so that the pure
    /// liquidity (`ρ = 0`) and pure impact (`λ = 0`) limits can be evaluated.
    pub fn validate(&self) -> Result<()> {
        ensure_positive("price_s", self.price_s)?;
        ensure_positive("avg_trade_size_n", self.avg_trade_size_n)?;
        ensure_positive("tau0", self.tau0)?;
        ensure_non_negative("sigma", self.sigma)?;
        ensure_non_negative("lambda_risk", self.lambda_risk)?;
        ensure_non_negative("rho_risk", self.rho_risk)?;
        Ok(())
    }

    /// The dimensionless form `(a, V₀)` of these parameters.
    pub fn dimensionless(&self) -> Result<DimensionlessSpreadParams> {
        DimensionlessSpreadParams::from_model(self)
    }
}

/// Parameters of the dimensionless law `δ(v) = √(a/v + v²)` with `v = V/V₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessSpreadParams {
    /// `a = √2·ρ·λ²·σ²·π·τ₀`.
    pub a_coeff: f64,
    /// `V₀ = n / (√2·ρ·π·τ₀)`, shares per unit time.
    pub v0_scale: f64,
}

impl DimensionlessSpreadParams {
    pub fn from_model(params: &SpreadModelParams) -> Result<Self> {
        params.validate()?;
        let rho = ensure_positive("rho_risk", params.rho_risk)?;
        let pi_tau0 = PI * params.tau0;
        let a_coeff = SQRT_2 * rho * params.lambda_risk.powi(2) * params.sigma.powi(2) * pi_tau0;
        let v0_scale = params.avg_trade_size_n / (SQRT_2 * rho * pi_tau0);
        ensure_positive("a_coeff", a_coeff)?;
        Ok(Self { a_coeff, v0_scale })
    }

    /// Dimensionless volume for a volume rate `volume`.
    pub fn to_dimensionless_volume(&self, volume: f64) -> f64 {
        volume / self.v0_scale
    }
}

/// Location and value of the minimum of `δ(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadMinimum {
    pub v_min: f64,
    pub delta_min: f64,
}

/// Average time between transactions, `τ = n / V`.
pub fn transaction_time(avg_trade_size: f64, volume: f64) -> Result<f64> {
    let n = ensure_positive("avg_trade_size", avg_trade_size)?;
    let v = ensure_positive("volume", volume)?;
    Ok(n / v)
}

/// Liquidity price `λ·s·σ·√τ`.
///
/// Shared by [`basic_spread`] and [`straddle_spread`] so both evaluate the
/// same floating-point expression.
#[inline]
fn liquidity_price(lambda: f64, price: f64, sigma: f64, tau: f64) -> f64 {
    lambda * price * sigma * tau.sqrt()
}

/// Square-root spread law `Δ = λ·s·σ·√(n/V)`.
pub fn basic_spread(params: &SpreadModelParams, volume: f64) -> Result<f64> {
    params.validate()?;
    let tau = transaction_time(params.avg_trade_size_n, volume)?;
    Ok(liquidity_price(params.lambda_risk, params.price_s, params.sigma, tau))
}

/// Spread priced as the positive-P/L range of an ATM straddle expiring after
/// `tau`: `Δ = √(8/π)·s·σ·√τ`.
pub fn straddle_spread(price: f64, sigma: f64, tau: f64) -> Result<f64> {
    ensure_positive("price", price)?;
    ensure_non_negative("sigma", sigma)?;
    ensure_non_negative("tau", tau)?;
    Ok(liquidity_price(STRADDLE_LAMBDA, price, sigma, tau))
}

/// Dimensionless spread `δ(v) = √(a/v + v²)`.
///
/// `a = 0` is accepted as the pure-impact limit `δ = v`.
pub fn general_spread_dimensionless(a: f64, v: f64) -> Result<f64> {
    ensure_non_negative("a", a)?;
    ensure_positive("v", v)?;
    Ok(delta_unchecked(a, v))
}

#[inline]
pub(crate) fn delta_unchecked(a: f64, v: f64) -> f64 {
    (a / v + v * v).sqrt()
}

/// General spread law with liquidity and impact terms:
/// `Δ = √(λ²s²σ²n/V + 2ρ²(π·s·τ₀/n)²V²)`.
pub fn general_spread(params: &SpreadModelParams, volume: f64) -> Result<f64> {
    params.validate()?;
    let volume = ensure_positive("volume", volume)?;
    let SpreadModelParams {
        price_s: s,
        sigma,
        lambda_risk: lambda,
        rho_risk: rho,
        avg_trade_size_n: n,
        tau0,
    } = *params;
    let liquidity = lambda * lambda * s * s * sigma * sigma * n / volume;
    let impact_scale = PI * s * tau0 / n;
    let impact = 2.0 * rho * rho * impact_scale * impact_scale * volume * volume;
    Ok((liquidity + impact).sqrt())
}

/// Analytic minimum of `δ(v)`: `v_min = (a/2)^(1/3)`, `δ_min = √3·v_min`.
pub fn spread_minimum(a: f64) -> Result<SpreadMinimum> {
    let a = ensure_positive("a", a)?;
    let v_min = (a / 2.0).cbrt();
    Ok(SpreadMinimum {
        v_min,
        delta_min: 3f64.sqrt() * v_min,
    })
}

/// The two volumes `v₁ ≤ v_min ≤ v₂` at which `δ(v) = delta`.
///
/// Each root is found by bisection on its monotone branch. Inputs within
/// [`DIMENSIONLESS_TOL`] of `δ_min` return the double root `(v_min, v_min)`.
pub fn inverse_spread_volumes(a: f64, delta: f64) -> Result<(f64, f64)> {
    let min = spread_minimum(a)?;
    ensure_positive("delta", delta)?;
    if (delta - min.delta_min).abs() <= DIMENSIONLESS_TOL {
        return Ok((min.v_min, min.v_min));
    }
    if delta < min.delta_min {
        return Err(Error::NoSolution {
            delta,
            delta_min: min.delta_min,
        });
    }
    // δ(v) > √(a/v), so δ(a/(2δ²)) > δ; δ(v) > v, so δ(2δ) > δ.
    let v_small = (0.5 * a / (delta * delta)).min(min.v_min);
    let v_big = (2.0 * delta).max(10.0 * min.v_min);
    let low = bisect(|v| delta_unchecked(a, v) - delta, v_small, min.v_min);
    let high = bisect(|v| delta_unchecked(a, v) - delta, min.v_min, v_big);
    Ok((low, high))
}

/// Bisection for a sign change of `f` on `[lo, hi]`; runs until the bracket
/// stops shrinking in floating point.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
