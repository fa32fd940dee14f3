//! Horizon scaling of spreads and high-low bars.
//!
//! A spread measured over horizon `T1` carries an initial bar term that does
//! not shrink with the horizon, so the scaled spread stays above the
//! classical `√T` extrapolation and only approaches it for `T2 ≫ T1`.
//! With volume, the bar spread over horizon `T` is
//!
//! ```text
//! Δ_T(V) = s·√(λ²σ_T² + ρ²(πτ₀/n)²V² + ρ²(πτ₀)²·T/n³·V³)
//! ```
//!
//! with `σ_T = σ·√T` the mid-price volatility over the horizon. Unlike the
//! bid-ask spread it starts from a floor at `V = 0` and grows monotonically.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::stats::log_space;

/// Default number of volume points in a spread surface.
pub const DEFAULT_SURFACE_VOLUMES: usize = 50;
/// Default number of horizons in a spread surface.
pub const DEFAULT_SURFACE_HORIZONS: usize = 20;

/// A spread observed at one horizon together with the volatility inputs
/// measured at that horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonSpread {
    pub horizon_t: f64,
    pub spread: f64,
    /// Last-price volatility over the horizon, in money.
    pub eta: f64,
    /// Mid-price volatility over the horizon.
    pub sigma_t: f64,
}

/// Scales a spread from horizon `t1` to `t2 ≥ t1`:
/// `Δ₂ = Δ₁·√(1 + λ²(η₁²/Δ₁²)(t2/t1 - 1))`.
pub fn scale_spread_time(spread_t1: f64, eta_t1: f64, lambda_risk: f64, t1: f64, t2: f64) -> Result<f64> {
    ensure_positive("spread_t1", spread_t1)?;
    ensure_non_negative("eta_t1", eta_t1)?;
    ensure_non_negative("lambda_risk", lambda_risk)?;
    ensure_positive("t1", t1)?;
    ensure_positive("t2", t2)?;
    if t2 < t1 {
        return Err(Error::domain("t2", t2, "must not be shorter than the base horizon"));
    }
    let ratio = lambda_risk * eta_t1 / spread_t1;
    Ok(spread_t1 * (1.0 + ratio * ratio * (t2 / t1 - 1.0)).sqrt())
}

/// Classical square-root-of-time extrapolation `√(t2/t1)·Δ₁`.
pub fn classical_scale(spread_t1: f64, t1: f64, t2: f64) -> Result<f64> {
    ensure_non_negative("spread_t1", spread_t1)?;
    ensure_positive("t1", t1)?;
    ensure_positive("t2", t2)?;
    Ok((t2 / t1).sqrt() * spread_t1)
}

/// Spread at horizon `t` built from the per-transaction quantities:
/// `√(ρ²h²/4 + λ²η_τ²·t/τ)`, where `h` is the bar height at the transaction
/// time `τ` and `η_τ` the last-price volatility over `τ`.
pub fn horizon_spread(rho_risk: f64, h_tau: f64, lambda_risk: f64, eta_tau: f64, t: f64, tau: f64) -> Result<f64> {
    ensure_non_negative("rho_risk", rho_risk)?;
    ensure_non_negative("h_tau", h_tau)?;
    ensure_non_negative("lambda_risk", lambda_risk)?;
    ensure_non_negative("eta_tau", eta_tau)?;
    ensure_positive("t", t)?;
    ensure_positive("tau", tau)?;
    Ok((rho_risk * rho_risk * h_tau * h_tau / 4.0 + lambda_risk * lambda_risk * eta_tau * eta_tau * t / tau).sqrt())
}

/// One row of a horizon-scaling table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    #[serde(rename = "T")]
    pub t: f64,
    pub delta_quantum: f64,
    pub delta_classical: f64,
}

/// Scaled and classical spreads from `base` over `horizons`.
pub fn scaling_table(base: &HorizonSpread, lambda_risk: f64, horizons: &[f64]) -> Result<Vec<ScalingRow>> {
    if horizons.is_empty() {
        return Err(Error::InsufficientData {
            what: "horizon grid",
            need: 1,
            got: 0,
        });
    }
    horizons
        .iter()
        .map(|&t| {
            Ok(ScalingRow {
                t,
                delta_quantum: scale_spread_time(base.spread, base.eta, lambda_risk, base.horizon_t, t)?,
                delta_classical: classical_scale(base.spread, base.horizon_t, t)?,
            })
        })
        .collect()
}

/// Writes `T,delta_quantum,delta_classical` rows.
pub fn write_scaling_csv<W: Write>(rows: &[ScalingRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Piecewise-constant lookup over (horizon, volume) buckets.
///
/// `t_edges` and `v_edges` are the interior bucket boundaries; a table with
/// `k` edges along an axis has `k + 1` buckets there, and points outside the
/// edges fall into the end buckets, so every (T, V) has a value. `values` is
/// row-major with horizons as rows. Volumes are dimensional (shares per unit
/// time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    pub t_edges: Vec<f64>,
    pub v_edges: Vec<f64>,
    pub values: Vec<f64>,
}

impl RiskTable {
    pub fn validate(&self) -> Result<()> {
        for edges in [&self.t_edges, &self.v_edges] {
            if edges.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Invalid("risk table edges must be strictly ascending".into()));
            }
        }
        let expected = (self.t_edges.len() + 1) * (self.v_edges.len() + 1);
        if self.values.len() != expected {
            return Err(Error::Invalid(format!(
                "risk table has {} values; expected {expected}",
                self.values.len()
            )));
        }
        for &v in &self.values {
            ensure_non_negative("risk table value", v)?;
        }
        Ok(())
    }

    pub fn lookup(&self, t: f64, volume: f64) -> f64 {
        let row = self.t_edges.partition_point(|&e| e <= t);
        let col = self.v_edges.partition_point(|&e| e <= volume);
        self.values[row * (self.v_edges.len() + 1) + col]
    }
}

/// Parameters of the volume-dependent bar spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadSurfaceParams {
    pub lambda_risk: f64,
    pub rho_risk: f64,
    /// Mid-price volatility per reference time unit.
    pub sigma: f64,
    /// Average trade size.
    pub n: f64,
    pub tau0: f64,
    /// Optional per-bucket override of `lambda_risk`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_table: Option<RiskTable>,
    /// Optional per-bucket override of `rho_risk`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_table: Option<RiskTable>,
}

impl SpreadSurfaceParams {
    pub fn new(lambda_risk: f64, rho_risk: f64, sigma: f64, n: f64, tau0: f64) -> Self {
        Self {
            lambda_risk,
            rho_risk,
            sigma,
            n,
            tau0,
            lambda_table: None,
            rho_table: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("lambda_risk", self.lambda_risk)?;
        ensure_non_negative("rho_risk", self.rho_risk)?;
        ensure_non_negative("sigma", self.sigma)?;
        ensure_positive("n", self.n)?;
        ensure_positive("tau0", self.tau0)?;
        if let Some(t) = &self.lambda_table {
            t.validate()?;
        }
        if let Some(t) = &self.rho_table {
            t.validate()?;
        }
        Ok(())
    }

    pub fn lambda_at(&self, t: f64, volume: f64) -> f64 {
        self.lambda_table
            .as_ref()
            .map_or(self.lambda_risk, |tb| tb.lookup(t, volume))
    }

    pub fn rho_at(&self, t: f64, volume: f64) -> f64 {
        self.rho_table.as_ref().map_or(self.rho_risk, |tb| tb.lookup(t, volume))
    }

    /// Volume scale `V₀ = n/(√2·ρ·π·τ₀)` of the dimensionless form, using the
    /// scalar `rho_risk`.
    pub fn v0_scale(&self) -> Result<f64> {
        ensure_positive("rho_risk", self.rho_risk)?;
        Ok(self.n / (std::f64::consts::SQRT_2 * self.rho_risk * PI * self.tau0))
    }
}

/// Squared relative bar spread and its derivative in `V`.
fn bar_terms(lambda: f64, rho: f64, sigma: f64, n: f64, tau0: f64, volume: f64, t: f64) -> (f64, f64) {
    let sigma_t_sq = sigma * sigma * t;
    let c = rho * PI * tau0 / n;
    let c_sq = c * c;
    let q = lambda * lambda * sigma_t_sq + c_sq * volume * volume * (1.0 + t * volume / n);
    let dq = c_sq * (2.0 * volume + 3.0 * t * volume * volume / n);
    (q, dq)
}

fn check_bar_inputs(params: &SpreadSurfaceParams, price: f64, volume: f64, t: f64) -> Result<()> {
    params.validate()?;
    ensure_positive("price", price)?;
    ensure_non_negative("volume", volume)?;
    ensure_positive("horizon", t)?;
    Ok(())
}

/// Bar spread `Δ_T(V)` in money at horizon `t` and volume rate `volume`.
pub fn bar_spread_with_volume(params: &SpreadSurfaceParams, price: f64, volume: f64, t: f64) -> Result<f64> {
    check_bar_inputs(params, price, volume, t)?;
    let (q, _) = bar_terms(
        params.lambda_at(t, volume),
        params.rho_at(t, volume),
        params.sigma,
        params.n,
        params.tau0,
        volume,
        t,
    );
    Ok(price * q.sqrt())
}

/// `dΔ_T/dV`, analytic. Tables are treated as locally constant.
pub fn bar_spread_derivative(params: &SpreadSurfaceParams, price: f64, volume: f64, t: f64) -> Result<f64> {
    check_bar_inputs(params, price, volume, t)?;
    let (q, dq) = bar_terms(
        params.lambda_at(t, volume),
        params.rho_at(t, volume),
        params.sigma,
        params.n,
        params.tau0,
        volume,
        t,
    );
    if q == 0.0 {
        return Err(Error::domain("volume", volume, "spread vanishes; derivative undefined"));
    }
    Ok(price * dq / (2.0 * q.sqrt()))
}

/// Dimensionless bar spread `δ_T(v) = √(λ²σ_T² + v²/2 + T·v³/(2^{3/2}ρπτ₀))`
/// with `v = V/V₀`. Uses the scalar risk multipliers; tables only apply to
/// the dimensional form.
pub fn bar_spread_dimensionless(v: f64, t: f64, params: &SpreadSurfaceParams) -> Result<f64> {
    params.validate()?;
    ensure_non_negative("v", v)?;
    ensure_positive("horizon", t)?;
    let rho = ensure_positive("rho_risk", params.rho_risk)?;
    let floor = params.lambda_risk * params.lambda_risk * params.sigma * params.sigma * t;
    let cubic = t / (2f64.powf(1.5) * rho * PI * params.tau0);
    Ok((floor + 0.5 * v * v + cubic * v * v * v).sqrt())
}

/// Bar spreads in money over a (horizon, volume) grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadSurface {
    pub horizons: Vec<f64>,
    pub volumes: Vec<f64>,
    /// `values[i][j]` is the spread at `horizons[i]`, `volumes[j]`.
    pub values: Vec<Vec<f64>>,
}

fn check_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain(name, 0.0, "grid must not be empty"));
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Invalid(format!("{name} grid must be sorted ascending")));
    }
    Ok(())
}

/// Evaluates [`bar_spread_with_volume`] on every grid cell.
pub fn spread_surface(
    params: &SpreadSurfaceParams,
    price: f64,
    volumes: &[f64],
    horizons: &[f64],
) -> Result<SpreadSurface> {
    check_grid("volume", volumes)?;
    check_grid("horizon", horizons)?;
    let values = horizons
        .par_iter()
        .map(|&t| {
            volumes
                .iter()
                .map(|&v| bar_spread_with_volume(params, price, v, t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpreadSurface {
        horizons: horizons.to_vec(),
        volumes: volumes.to_vec(),
        values,
    })
}

/// Log-spaced default grids: `DEFAULT_SURFACE_VOLUMES` volumes over
/// `[v_lo, v_hi]` and `DEFAULT_SURFACE_HORIZONS` horizons over `[t_lo, t_hi]`.
pub fn default_surface_grids(v_lo: f64, v_hi: f64, t_lo: f64, t_hi: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    for (name, x) in [("v_lo", v_lo), ("v_hi", v_hi), ("t_lo", t_lo), ("t_hi", t_hi)] {
        ensure_positive(name, x)?;
    }
    Ok((
        log_space(v_lo, v_hi, DEFAULT_SURFACE_VOLUMES),
        log_space(t_lo, t_hi, DEFAULT_SURFACE_HORIZONS),
    ))
}

#[derive(Serialize, Deserialize)]
struct SurfaceRow {
    #[serde(rename = "T")]
    t: f64,
    v: f64,
    delta: f64,
}

impl SpreadSurface {
    /// Writes `T,v,delta` rows, horizons in the outer loop.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (i, &t) in self.horizons.iter().enumerate() {
            for (j, &v) in self.volumes.iter().enumerate() {
                w.serialize(SurfaceRow {
                    t,
                    v,
                    delta: self.values[i][j],
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the layout produced by [`SpreadSurface::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rows = Vec::new();
        for row in csv::Reader::from_reader(input).deserialize::<SurfaceRow>() {
            rows.push(row?);
        }
        let mut horizons: Vec<f64> = Vec::new();
        for r in &rows {
            if horizons.last() != Some(&r.t) {
                horizons.push(r.t);
            }
        }
        if horizons.is_empty() || rows.len() % horizons.len() != 0 {
            return Err(Error::Invalid("surface CSV is not a full grid".into()));
        }
        let width = rows.len() / horizons.len();
        let volumes: Vec<f64> = rows[..width].iter().map(|r| r.v).collect();
        let mut values = Vec::with_capacity(horizons.len());
        for (i, chunk) in rows.chunks(width).enumerate() {
            if chunk.iter().any(|r| r.t != horizons[i]) || chunk.iter().zip(&volumes).any(|(r, v)| r.v != *v) {
                return Err(Error::Invalid("surface CSV is not a full grid".into()));
            }
            values.push(chunk.iter().map(|r| r.delta).collect());
        }
        Ok(Self {
            horizons,
            volumes,
            values,
        })
    }
}
