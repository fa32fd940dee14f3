use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use spreadwave_core::calibration::{CalibrationResult, SpreadSource};
use spreadwave_core::optimizer::{default_lambda_max, policy_curve, ExecutionModel, QuotePolicy, SpreadLaw};
use spreadwave_core::spread::{spread_minimum, SpreadModelParams};
use spreadwave_core::stats::log_space;

use crate::config::{overlay, FileConfig, Globals, OptimizeSection};
use crate::failure::Failure;
use crate::report::{ensure_out_dir, out_path, read_input, write_file, Report};

#[derive(clap::Args, Debug)]
pub struct OptimizeArgs {
    /// calibration.json written by `calibrate`.
    #[arg(long, env = "SPREADWAVE_CALIBRATION")]
    calibration: Option<PathBuf>,
    /// Bid-ask law coefficient; takes precedence over a calibration.
    #[arg(long, env = "SPREADWAVE_A")]
    a: Option<f64>,
    /// Commission per round trip, in units of the price.
    #[arg(long, env = "SPREADWAVE_COMMISSION")]
    commission: Option<f64>,
    /// Scale of the execution-rate law.
    #[arg(long, env = "SPREADWAVE_LAMBDA0")]
    lambda0: Option<f64>,
    /// Control level at which the quoted spread equals the reference spread.
    #[arg(long, env = "SPREADWAVE_LAMBDA_REF")]
    lambda_ref: Option<f64>,
    #[arg(long, env = "SPREADWAVE_LAMBDA_MAX")]
    lambda_max: Option<f64>,
    /// Comma-separated dimensionless volumes.
    #[arg(long, value_delimiter = ',', env = "SPREADWAVE_VOLUMES")]
    volumes: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    #[serde(flatten)]
    globals: &'a Globals,
    optimize: &'a OptimizeSection,
}

#[derive(Serialize)]
struct Outcome {
    /// Volume points where no spread earns a positive P/L.
    halted_points: usize,
    /// Points whose root-finder failed and that were filled from a grid.
    fallback_points: usize,
    policy: QuotePolicy,
}

/// Just the fit from a `calibration.json` report.
#[derive(Deserialize)]
struct CalibrationFile {
    result: CalibrationFileResult,
}

#[derive(Deserialize)]
struct CalibrationFileResult {
    fit: CalibrationResult,
}

/// Reference spread law from a calibration. Bid-ask fits map to
/// `a = √2·ρ·λ²·σ²·π·τ₀`; bar fits to the bar law at the fitted horizon.
fn law_from_fit(fit: &CalibrationResult) -> Result<SpreadLaw, Failure> {
    match fit.source {
        SpreadSource::BidAsk => {
            let params = SpreadModelParams {
                price_s: 1.0,
                sigma: fit.sigma_used,
                lambda_risk: fit.lambda_hat,
                rho_risk: fit.rho_hat,
                avg_trade_size_n: fit.n_used,
                tau0: fit.tau0_hat,
            };
            Ok(SpreadLaw::bid_ask(params.dimensionless()?.a_coeff)?)
        }
        SpreadSource::Bar => {
            let horizon = fit
                .horizon
                .ok_or_else(|| Failure::invalid("bar calibration has no horizon"))?;
            Ok(SpreadLaw::bar(
                fit.lambda_hat,
                fit.sigma_used,
                horizon,
                fit.rho_hat,
                fit.tau0_hat,
            )?)
        }
    }
}

/// Volume where the law bends: the bid-ask minimum, or where the bar
/// impact term reaches the floor.
fn characteristic_volume(law: &SpreadLaw) -> Result<f64, Failure> {
    let v = match *law {
        SpreadLaw::BidAsk { a } if a > 0.0 => spread_minimum(a)?.v_min,
        SpreadLaw::Bar { floor, .. } => floor * std::f64::consts::SQRT_2,
        _ => 0.0,
    };
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Failure::invalid("the law has no characteristic volume; pass --volumes"))
    }
}

pub fn run(args: &OptimizeArgs, file: &FileConfig, globals: &Globals) -> Result<(), Failure> {
    let mut section = file.optimize.clone();
    overlay(&mut section.calibration, args.calibration.clone().map(Some));
    overlay(&mut section.a, args.a.map(Some));
    overlay(&mut section.commission, args.commission);
    overlay(&mut section.lambda0, args.lambda0);
    overlay(&mut section.lambda_ref, args.lambda_ref);
    overlay(&mut section.lambda_max, args.lambda_max.map(Some));
    overlay(&mut section.volumes, args.volumes.clone().map(Some));

    let mut inputs = BTreeMap::new();
    let law = match (section.a, &section.calibration, section.bar) {
        (Some(a), _, _) => SpreadLaw::bid_ask(a)?,
        (None, Some(path), _) => {
            let bytes = read_input(path, &mut inputs)?;
            let parsed: CalibrationFile = serde_json::from_slice(&bytes)
                .map_err(|e| Failure::invalid(format!("{}: not a calibration report: {e}", path.display())))?;
            law_from_fit(&parsed.result.fit).map_err(|f| f.context(path.display()))?
        }
        (None, None, Some(b)) => SpreadLaw::bar(b.lambda_risk, b.sigma, globals.horizon, b.rho_risk, b.tau0)?,
        (None, None, None) => {
            return Err(Failure::invalid(
                "optimize needs --a, --calibration, or an [optimize.bar] section",
            ))
        }
    };
    let model = ExecutionModel::new(section.lambda0)?;
    let lambda_max = *section.lambda_max.get_or_insert(default_lambda_max(&model));
    let volumes = match &section.volumes {
        Some(v) => v.clone(),
        None => {
            let c = characteristic_volume(&law)?;
            log_space(c / 10.0, c * 10.0, section.points)
        }
    };
    let policy = policy_curve(
        &volumes,
        law,
        section.commission,
        section.lambda_ref,
        &model,
        lambda_max,
    )?;

    ensure_out_dir(&globals.out)?;
    write_file(&out_path(&globals.out, "policy.csv"), |w| policy.write_csv(w))?;
    let fallback_points = policy.points.iter().filter(|p| p.error.is_some()).count();
    let outcome = Outcome {
        halted_points: policy.points.iter().filter(|p| p.halt).count(),
        fallback_points,
        policy,
    };
    let resolved = Resolved {
        globals,
        optimize: &section,
    };
    Report::new("optimize", &resolved, &inputs, &outcome)
        .unit("v", "dimensionless volume V/V0")
        .unit("spread", "dimensionless, spread over price")
        .unit("pnl", "dimensionless, per unit price and volume scale")
        .unit("lambda", "dimensionless control level")
        .write(&out_path(&globals.out, "policy.json"))?;
    if fallback_points > 0 {
        return Err(Failure::numerical(format!(
            "{fallback_points} volume points fell back to a grid search; see policy.json"
        )));
    }
    Ok(())
}
