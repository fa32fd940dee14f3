use std::collections::BTreeMap;

use serde::Serialize;
use spreadwave_core::scaling::{
    default_surface_grids, scaling_table, spread_surface, write_scaling_csv, HorizonSpread, SpreadSurfaceParams,
};
use spreadwave_core::stats::log_space;

use crate::config::{overlay, FileConfig, Globals, ScaleSection};
use crate::failure::Failure;
use crate::report::{ensure_out_dir, out_path, write_file, Report};

#[derive(clap::Args, Debug)]
pub struct ScaleArgs {
    /// Tabulate the bar spread over (horizon, volume) instead.
    #[arg(long, env = "SPREADWAVE_SURFACE")]
    surface: bool,
    /// Spread at the base horizon, in money.
    #[arg(long, env = "SPREADWAVE_BASE_SPREAD")]
    base_spread: Option<f64>,
    /// Last-price volatility over the base horizon, in money.
    #[arg(long, env = "SPREADWAVE_ETA")]
    eta: Option<f64>,
    #[arg(long = "lambda", env = "SPREADWAVE_LAMBDA")]
    lambda_risk: Option<f64>,
    /// Base horizon in reference units [default: --horizon].
    #[arg(long, env = "SPREADWAVE_T1")]
    t1: Option<f64>,
    /// Comma-separated horizons in reference units.
    #[arg(long, value_delimiter = ',', env = "SPREADWAVE_HORIZONS")]
    horizons: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    #[serde(flatten)]
    globals: &'a Globals,
    scale: &'a ScaleSection,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Outcome {
    Horizon { t1: f64, rows: usize },
    Surface { horizons: usize, volumes: usize },
}

pub fn run(args: &ScaleArgs, file: &FileConfig, globals: &Globals) -> Result<(), Failure> {
    let mut section = file.scale.clone();
    section.surface |= args.surface;
    overlay(&mut section.base_spread, args.base_spread.map(Some));
    overlay(&mut section.eta, args.eta.map(Some));
    overlay(&mut section.lambda_risk, args.lambda_risk);
    overlay(&mut section.t1, args.t1.map(Some));
    overlay(&mut section.horizons, args.horizons.clone().map(Some));

    let outcome = if section.surface {
        let s = &section;
        let params = SpreadSurfaceParams::new(s.lambda_risk, s.rho_risk, s.sigma, s.n, s.tau0);
        let (volumes, horizons) = default_surface_grids(s.v_lo, s.v_hi, s.t_lo, s.t_hi)?;
        let surface = spread_surface(&params, s.price, &volumes, &horizons)?;
        ensure_out_dir(&globals.out)?;
        write_file(&out_path(&globals.out, "surface.csv"), |w| surface.write_csv(w))?;
        Outcome::Surface {
            horizons: horizons.len(),
            volumes: volumes.len(),
        }
    } else {
        let t1 = *section.t1.get_or_insert(globals.horizon);
        let (Some(spread), Some(eta)) = (section.base_spread, section.eta) else {
            return Err(Failure::invalid("horizon scaling needs --base-spread and --eta"));
        };
        let horizons = match &section.horizons {
            Some(h) => h.clone(),
            None => log_space(t1, t1 * section.span, section.points),
        };
        // The mid-price volatility does not enter the scaling law.
        let base = HorizonSpread {
            horizon_t: t1,
            spread,
            eta,
            sigma_t: 0.0,
        };
        let rows = scaling_table(&base, section.lambda_risk, &horizons)?;
        ensure_out_dir(&globals.out)?;
        write_file(&out_path(&globals.out, "scaling.csv"), |w| write_scaling_csv(&rows, w))?;
        Outcome::Horizon { t1, rows: rows.len() }
    };

    let resolved = Resolved {
        globals,
        scale: &section,
    };
    let inputs = BTreeMap::new();
    Report::new("scale", &resolved, &inputs, &outcome)
        .unit("T", "reference time units")
        .unit("delta", "input currency")
        .unit("v", "shares per reference time unit")
        .write(&out_path(&globals.out, "scale.json"))
}
