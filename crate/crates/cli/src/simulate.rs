use std::collections::BTreeMap;

use serde::Serialize;
use spreadwave_core::calibration::{
    series_quotes, series_trades, simulate_volume_driven, write_quotes_csv, write_trades_csv, VolumeDrivenParams,
};
use spreadwave_core::stats::{mean, rayleigh_scale_mle};
use spreadwave_core::wave::{path_volatility, predicted_path_volatility, simulate_path, BarSeries, CoupledWaveParams};

use crate::config::{overlay, FileConfig, Globals, SimulateMode, SimulateSection};
use crate::failure::Failure;
use crate::report::{ensure_out_dir, out_path, write_file, Report};

#[derive(clap::Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, env = "SPREADWAVE_STEPS")]
    steps: Option<usize>,
    #[arg(long, value_enum, env = "SPREADWAVE_MODE")]
    mode: Option<SimulateMode>,
    /// Initial price.
    #[arg(long, env = "SPREADWAVE_S0")]
    s0: Option<f64>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    #[serde(flatten)]
    globals: &'a Globals,
    simulate: SimulateSection,
}

#[derive(Serialize)]
struct Summary {
    bars: usize,
    /// Standard deviation of last-price increments per step; needs 1000 bars.
    empirical_volatility: Option<f64>,
    /// The same quantity predicted from the step parameters.
    predicted_volatility: Option<f64>,
    mean_height: f64,
    rayleigh_scale: f64,
    redraws: u64,
    redraw_rate: f64,
}

pub fn run(args: &SimulateArgs, file: &FileConfig, globals: &Globals) -> Result<(), Failure> {
    let mut section = file.simulate.clone();
    overlay(&mut section.steps, args.steps);
    overlay(&mut section.mode, args.mode);
    overlay(&mut section.s0, args.s0);
    let step_ms = (section.step_dt * globals.time_unit_ms).round();
    if !(step_ms >= 1.0 && step_ms < i64::MAX as f64) {
        return Err(Failure::invalid(format!(
            "step_dt = {} is not a whole positive number of milliseconds",
            section.step_dt
        )));
    }
    let step_ms = step_ms as i64;

    let (series, predicted) = match section.mode {
        SimulateMode::CoupledWave => {
            let w = &section.wave;
            let params = CoupledWaveParams {
                sigma_step: w.sigma_step,
                xi_mean: w.xi_mean,
                xi_std: w.xi_std,
                kappa_mean: w.kappa_mean,
                kappa_std: w.kappa_std,
                tau0: w.tau0,
                last_price_rule: w.last_price_rule,
                seed: globals.seed,
            };
            let series = simulate_path(&params, section.s0, section.steps)?;
            let predicted = predicted_path_volatility(&params, &series).ok();
            (series, predicted)
        }
        SimulateMode::VolumeDriven => {
            let v = &section.volume;
            let params = VolumeDrivenParams {
                source: v.source,
                lambda_risk: v.lambda_risk,
                rho_risk: v.rho_risk,
                tau0: v.tau0,
                n: v.n,
                sigma: v.sigma,
                volume_lo: v.volume_lo,
                volume_hi: v.volume_hi,
                quantile_level: globals.quantile,
                step_dt: section.step_dt,
                last_price_rule: v.last_price_rule,
                seed: globals.seed,
            };
            (simulate_volume_driven(&params, section.s0, section.steps)?, None)
        }
    };

    ensure_out_dir(&globals.out)?;
    let start = section.start_ms;
    write_file(&out_path(&globals.out, "bars.csv"), |w| {
        series.write_csv(w, start, step_ms)
    })?;
    if section.mode == SimulateMode::VolumeDriven {
        let quotes = series_quotes(&series, start, step_ms);
        let trades = series_trades(&series, start, step_ms);
        write_file(&out_path(&globals.out, "quotes.csv"), |w| write_quotes_csv(&quotes, w))?;
        write_file(&out_path(&globals.out, "trades.csv"), |w| write_trades_csv(&trades, w))?;
    }

    let summary = summarize(&series, predicted);
    let resolved = Resolved {
        globals,
        simulate: section,
    };
    let inputs = BTreeMap::new();
    Report::new("simulate", &resolved, &inputs, &summary)
        .unit("price", "input currency")
        .unit("volatility", "price change per step, input currency")
        .unit("volume", "shares per bar")
        .unit("time", "reference units of time_unit_ms milliseconds")
        .write(&out_path(&globals.out, "summary.json"))
}

fn summarize(series: &BarSeries, predicted: Option<f64>) -> Summary {
    let heights = series.heights();
    Summary {
        bars: series.len(),
        empirical_volatility: path_volatility(series).ok(),
        predicted_volatility: predicted,
        mean_height: mean(&heights),
        rayleigh_scale: rayleigh_scale_mle(&heights),
        redraws: series.redraws,
        redraw_rate: series.redraw_rate(),
    }
}
