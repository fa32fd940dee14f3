//! Least-squares fits of the risk multipliers to spread-volume curves.
//!
//! Both curve laws are linear in `(λ², ρ²)` once squared:
//!
//! ```text
//! bid-ask:  δ² = λ²·σ²n/V + ρ²·2(πτ₀/n)²V²
//! bar:      δ² = λ²·σ²T   + ρ²·(πτ₀/n)²V²(1 + T·V/n)
//! ```
//!
//! where `δ` is the spread divided by price. A weighted linear solve on `δ²`
//! gives the starting point; Levenberg-Marquardt then minimizes the weighted
//! residuals in `δ` itself over `(ln λ, ln ρ)`, which keeps both positive.
//! `ρ` and `τ₀` only enter as the product `ρ·τ₀`, so `τ₀` is fixed by
//! configuration unless the product is fitted explicitly.

use std::f64::consts::PI;
use std::io::Write;

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt, TerminationReason};
use nalgebra::{storage::Owned, DVector, Dyn, Matrix2, OMatrix, Vector2, U2};
use serde::{Deserialize, Serialize};

use super::curve::{SpreadSource, SpreadVolumeCurve};
use super::flow::FlowStats;
use crate::error::{ensure_positive, Error, Result};

/// Minimum number of populated buckets for a curve fit.
pub const MIN_FIT_BUCKETS: usize = 3;
/// Minimum sample size for [`fit_execution_scale`].
pub const MIN_EXECUTION_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// `τ₀` fixed by configuration; `λ` and `ρ` fitted.
    #[default]
    FixedTau0,
    /// Fit `λ` and the identifiable product `ρ·τ₀`, reported as `rho_hat`
    /// with `tau0_hat = 1`.
    RhoTau0Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub tau0: f64,
    #[serde(default)]
    pub mode: FitMode,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            tau0: 1.0,
            mode: FitMode::FixedTau0,
            max_iterations: 500,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub source: SpreadSource,
    pub mode: FitMode,
    /// Bar horizon for bar fits.
    pub horizon: Option<f64>,
    pub lambda_hat: f64,
    pub rho_hat: f64,
    pub tau0_hat: f64,
    pub rho_tau0_hat: f64,
    pub lambda_uncertainty: f64,
    pub rho_uncertainty: f64,
    /// Squared uncertainties of `lambda_hat` and `rho_hat`.
    pub covariance_diag: [f64; 2],
    /// Weighted norm of the relative residuals `model/observed - 1`.
    pub residual_norm: f64,
    pub n_used: f64,
    pub sigma_used: f64,
    pub price_used: f64,
    pub buckets_used: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub termination: String,
}

impl CalibrationResult {
    /// Fitted spread relative to price at volume rate `volume`.
    pub fn relative_spread(&self, volume: f64) -> f64 {
        let (a, b) = basis(
            self.source,
            self.horizon,
            self.sigma_used,
            self.n_used,
            self.tau0_hat,
            volume,
        );
        (self.lambda_hat.powi(2) * a + self.rho_hat.powi(2) * b).sqrt()
    }

    /// Fitted spread in money.
    pub fn model_spread(&self, volume: f64) -> f64 {
        self.price_used * self.relative_spread(volume)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FitError {
    #[error(transparent)]
    Invalid(#[from] Error),
    #[error("curve fit did not converge after {} evaluations ({})", .best.evaluations, .best.termination)]
    NonConvergence { best: Box<CalibrationResult> },
}

impl From<FitError> for Error {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Invalid(e) => e,
            FitError::NonConvergence { best } => Error::NonConvergence {
                detail: format!(
                    "best so far λ = {}, ρ = {}, residual {} ({})",
                    best.lambda_hat, best.rho_hat, best.residual_norm, best.termination
                ),
            },
        }
    }
}

/// The two basis functions multiplying `λ²` and `ρ²` in `δ²`.
fn basis(source: SpreadSource, horizon: Option<f64>, sigma: f64, n: f64, tau0: f64, volume: f64) -> (f64, f64) {
    let c = PI * tau0 / n;
    match (source, horizon) {
        (SpreadSource::Bar, Some(t)) => (sigma * sigma * t, c * c * volume * volume * (1.0 + t * volume / n)),
        _ => (sigma * sigma * n / volume, 2.0 * c * c * volume * volume),
    }
}

struct CurveProblem {
    a: Vec<f64>,
    b: Vec<f64>,
    y: Vec<f64>,
    sw: Vec<f64>,
    p: Vector2<f64>,
}

impl CurveProblem {
    fn model(&self, i: usize) -> f64 {
        ((2.0 * self.p[0]).exp() * self.a[i] + (2.0 * self.p[1]).exp() * self.b[i]).sqrt()
    }
}

impl LeastSquaresProblem<f64, Dyn, U2> for CurveProblem {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U2>;
    type ParameterStorage = Owned<f64, U2>;

    fn set_params(&mut self, p: &Vector2<f64>) {
        self.p = *p;
    }

    fn params(&self) -> Vector2<f64> {
        self.p
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        Some(DVector::from_fn(self.y.len(), |i, _| {
            self.sw[i] * (self.model(i) - self.y[i])
        }))
    }

    fn jacobian(&self) -> Option<OMatrix<f64, Dyn, U2>> {
        let (l2, r2) = ((2.0 * self.p[0]).exp(), (2.0 * self.p[1]).exp());
        let mut j = OMatrix::<f64, Dyn, U2>::zeros(self.y.len());
        for i in 0..self.y.len() {
            let d = self.model(i);
            if d == 0.0 {
                return None;
            }
            j[(i, 0)] = self.sw[i] * l2 * self.a[i] / d;
            j[(i, 1)] = self.sw[i] * r2 * self.b[i] / d;
        }
        Some(j)
    }
}

/// Inverse of a symmetric positive 2x2 matrix after diagonal scaling.
fn scaled_inverse(m: Matrix2<f64>) -> Option<Matrix2<f64>> {
    if !(m[(0, 0)] > 0.0 && m[(1, 1)] > 0.0) {
        return None;
    }
    let d = Matrix2::new(1.0 / m[(0, 0)].sqrt(), 0.0, 0.0, 1.0 / m[(1, 1)].sqrt());
    (d * m * d).try_inverse().map(|inv| d * inv * d)
}

/// Weighted linear least squares of `δ²` on the two basis functions.
fn linear_start(p: &CurveProblem, w: &[f64]) -> (f64, f64) {
    let mut m = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    for (((&wi, &y), &a), &b) in w.iter().zip(&p.y).zip(&p.a).zip(&p.b) {
        let y2 = y * y;
        m[(0, 0)] += wi * a * a;
        m[(0, 1)] += wi * a * b;
        m[(1, 1)] += wi * b * b;
        rhs[0] += wi * a * y2;
        rhs[1] += wi * b * y2;
    }
    m[(1, 0)] = m[(0, 1)];
    let single = |k: usize| if m[(k, k)] > 0.0 { rhs[k] / m[(k, k)] } else { 0.0 };
    let (mut t1, mut t2) = match scaled_inverse(m) {
        Some(inv) => {
            let t = inv * rhs;
            (t[0], t[1])
        }
        None => (single(0), single(1)),
    };
    // Keep both starting values positive; a non-positive estimate means the
    // data hardly supports that term, so start it small.
    if t1 <= 0.0 {
        t1 = 1e-6 * single(0).abs().max(1e-300);
        t2 = single(1);
    }
    if t2 <= 0.0 {
        t2 = 1e-6 * single(1).abs().max(1e-300);
        t1 = single(0).max(t1);
    }
    (t1.max(1e-300), t2.max(1e-300))
}

fn fit_curve(
    curve: &SpreadVolumeCurve,
    horizon: Option<f64>,
    flow: &FlowStats,
    cfg: &FitConfig,
) -> std::result::Result<CalibrationResult, FitError> {
    let n = ensure_positive("n", flow.n)?;
    let sigma = ensure_positive("sigma", flow.sigma)?;
    let price = ensure_positive("mean_price", flow.mean_price)?;
    ensure_positive("tau0", cfg.tau0)?;
    if cfg.max_iterations == 0 {
        return Err(Error::Invalid("max_iterations must be at least 1".into()).into());
    }
    let tau0 = match cfg.mode {
        FitMode::FixedTau0 => cfg.tau0,
        FitMode::RhoTau0Product => 1.0,
    };
    let usable: Vec<_> = curve
        .populated()
        .filter(|b| b.v_mid > 0.0 && b.spread_q.is_some_and(|q| q > 0.0))
        .collect();
    if usable.len() < MIN_FIT_BUCKETS {
        return Err(Error::InsufficientData {
            what: "curve fit buckets",
            need: MIN_FIT_BUCKETS,
            got: usable.len(),
        }
        .into());
    }
    let mean_count = usable.iter().map(|b| b.count as f64).sum::<f64>() / usable.len() as f64;
    let weights: Vec<f64> = usable.iter().map(|b| b.count as f64 / mean_count).collect();
    let (a, b): (Vec<f64>, Vec<f64>) = usable
        .iter()
        .map(|bk| basis(curve.source, horizon, sigma, n, tau0, bk.v_mid))
        .unzip();
    let y: Vec<f64> = usable.iter().map(|bk| bk.spread_q.unwrap_or(0.0) / price).collect();
    // Residuals are relative to the observed spread: the noise on quantile
    // curves is multiplicative and the curves span decades, so absolute
    // residuals would let the widest buckets decide both parameters.
    let mut problem = CurveProblem {
        a,
        b,
        sw: weights.iter().zip(&y).map(|(w, yi)| w.sqrt() / yi).collect(),
        y,
        p: Vector2::zeros(),
    };
    let start_weights: Vec<f64> = weights.iter().zip(&problem.y).map(|(w, yi)| w / yi.powi(4)).collect();
    let (t1, t2) = linear_start(&problem, &start_weights);
    problem.p = Vector2::new(0.5 * t1.ln(), 0.5 * t2.ln());

    let (problem, report) = LevenbergMarquardt::new()
        .with_ftol(cfg.tolerance)
        .with_xtol(cfg.tolerance)
        .with_patience(cfg.max_iterations)
        .minimize(problem);
    let converged = report.termination.was_successful()
        || matches!(report.termination, TerminationReason::NoImprovementPossible(_));

    let lambda = problem.p[0].exp();
    let rho = problem.p[1].exp();
    let m = problem.y.len();
    let mut jtj = Matrix2::zeros();
    let mut rss = 0.0;
    for i in 0..m {
        let d = problem.model(i);
        let r = problem.sw[i] * (d - problem.y[i]);
        rss += r * r;
        let j0 = problem.sw[i] * problem.a[i] / (2.0 * d);
        let j1 = problem.sw[i] * problem.b[i] / (2.0 * d);
        jtj[(0, 0)] += j0 * j0;
        jtj[(0, 1)] += j0 * j1;
        jtj[(1, 1)] += j1 * j1;
    }
    jtj[(1, 0)] = jtj[(0, 1)];
    let s2 = rss / (m - 2) as f64;
    // Uncertainty of p from the standard deviation of p², which stays finite
    // and informative when p itself is near zero.
    let (u_lambda, u_rho) = match scaled_inverse(jtj) {
        Some(inv) => {
            let sd1 = (s2 * inv[(0, 0)]).max(0.0).sqrt();
            let sd2 = (s2 * inv[(1, 1)]).max(0.0).sqrt();
            ((lambda * lambda + sd1).sqrt() - lambda, (rho * rho + sd2).sqrt() - rho)
        }
        None => (f64::INFINITY, f64::INFINITY),
    };
    let result = CalibrationResult {
        source: curve.source,
        mode: cfg.mode,
        horizon,
        lambda_hat: lambda,
        rho_hat: rho,
        tau0_hat: tau0,
        rho_tau0_hat: rho * tau0,
        lambda_uncertainty: u_lambda,
        rho_uncertainty: u_rho,
        covariance_diag: [u_lambda * u_lambda, u_rho * u_rho],
        residual_norm: rss.sqrt(),
        n_used: n,
        sigma_used: sigma,
        price_used: price,
        buckets_used: m,
        evaluations: report.number_of_evaluations,
        converged,
        termination: format!("{:?}", report.termination),
    };
    if converged {
        Ok(result)
    } else {
        Err(FitError::NonConvergence { best: Box::new(result) })
    }
}

/// Fits `λ` and `ρ` of the bid-ask law to a curve. `flow` supplies `n`,
/// the per-unit `σ` and the price that converts money spreads to relative.
pub fn fit_bid_ask_curve(
    curve: &SpreadVolumeCurve,
    flow: &FlowStats,
    cfg: &FitConfig,
) -> std::result::Result<CalibrationResult, FitError> {
    if curve.source != SpreadSource::BidAsk {
        return Err(Error::Invalid("bid-ask fit needs a bid-ask curve".into()).into());
    }
    fit_curve(curve, None, flow, cfg)
}

/// Fits `λ` and `ρ` of the bar law at horizon `horizon_t`, with
/// `σ_T = σ·√T` from the per-unit `flow.sigma`.
pub fn fit_bar_curve(
    curve: &SpreadVolumeCurve,
    horizon_t: f64,
    flow: &FlowStats,
    cfg: &FitConfig,
) -> std::result::Result<CalibrationResult, FitError> {
    ensure_positive("horizon_t", horizon_t)?;
    if curve.source != SpreadSource::Bar {
        return Err(Error::Invalid("bar fit needs a bar curve".into()).into());
    }
    fit_curve(curve, Some(horizon_t), flow, cfg)
}

/// Rayleigh scale of the execution model, `λ₀ = √(mean λ²)`, which is the
/// maximum-likelihood estimate for `p(λ) = 2λ/λ₀²·exp(-(λ/λ₀)²)`.
pub fn fit_execution_scale(samples: &[f64]) -> Result<f64> {
    if samples.len() < MIN_EXECUTION_SAMPLES {
        return Err(Error::InsufficientData {
            what: "execution scale",
            need: MIN_EXECUTION_SAMPLES,
            got: samples.len(),
        });
    }
    for &x in samples {
        ensure_positive("spread sample", x)?;
    }
    Ok((samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64).sqrt())
}

/// One security in a cross-sectional fit of `Δ = λ·s·σ·√(n/V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionPoint {
    pub price: f64,
    pub sigma: f64,
    pub n: f64,
    pub volume: f64,
    pub spread: f64,
}

/// Least-squares `λ` through the origin over a cross-section.
pub fn fit_basic_lambda(points: &[CrossSectionPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InsufficientData {
            what: "cross-section fit",
            need: 1,
            got: 0,
        });
    }
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for p in points {
        let x = p.price * p.sigma * (ensure_positive("n", p.n)? / ensure_positive("volume", p.volume)?).sqrt();
        sxy += x * p.spread;
        sxx += x * x;
    }
    ensure_positive("sum of squared regressors", sxx)?;
    Ok(sxy / sxx)
}

/// Observed and fitted spreads at the bucket midpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub v_mid: f64,
    pub spread_q: Option<f64>,
    pub spread_model: f64,
    pub count: usize,
}

pub fn overlay(curve: &SpreadVolumeCurve, result: &CalibrationResult) -> Vec<OverlayRow> {
    curve
        .buckets
        .iter()
        .filter(|b| b.v_mid > 0.0)
        .map(|b| OverlayRow {
            v_mid: b.v_mid,
            spread_q: b.spread_q,
            spread_model: result.model_spread(b.v_mid),
            count: b.count,
        })
        .collect()
}

/// Writes `v_mid,spread_q,spread_model,count`.
pub fn write_overlay_csv<W: Write>(rows: &[OverlayRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
