use spreadwave_core::calibration::{measure_flow_stats, series_trades};
use spreadwave_core::stats::{ks_test, rayleigh_cdf, rayleigh_scale_mle};
use spreadwave_core::wave::{
    default_amplitude_dt, evolve_fluctuating, first_transfer_peak, oscillation_period, path_volatility,
    predicted_path_volatility, simulate_path, AmplitudeState, CoupledWaveParams, LastPriceRule, PriceOperator2x2,
};

fn rayleigh_params(sigma_h: f64) -> CoupledWaveParams {
    CoupledWaveParams {
        sigma_step: 1e-3,
        xi_mean: 0.0,
        xi_std: sigma_h,
        kappa_mean: 0.0,
        kappa_std: sigma_h,
        tau0: 1.0,
        last_price_rule: LastPriceRule::UniformInBar,
        seed: 2024,
    }
}

#[test]
fn bar_heights_are_rayleigh() {
    let sigma_h = 0.05;
    let series = simulate_path(&rayleigh_params(sigma_h), 100.0, 100_000).unwrap();
    let heights = series.heights();
    let ks = ks_test(&heights, |x| rayleigh_cdf(x, sigma_h)).unwrap();
    assert!(ks.passes(0.01), "{ks:?}");
    assert!((rayleigh_scale_mle(&heights) / sigma_h - 1.0).abs() < 0.01);
}

#[test]
fn path_volatility_matches_prediction() {
    for rule in [LastPriceRule::UniformInBar, LastPriceRule::NormalHalfBar] {
        let params = CoupledWaveParams {
            sigma_step: 2e-3,
            xi_mean: 0.1,
            xi_std: 0.15,
            kappa_mean: -0.05,
            kappa_std: 0.1,
            tau0: 1.0,
            last_price_rule: rule,
            seed: 99,
        };
        let series = simulate_path(&params, 100.0, 100_000).unwrap();
        let empirical = path_volatility(&series).unwrap();
        let predicted = predicted_path_volatility(&params, &series).unwrap();
        assert!(
            (empirical / predicted - 1.0).abs() < 0.02,
            "{rule:?}: {empirical} vs {predicted}"
        );
    }
}

#[test]
fn fluctuating_amplitudes_stay_normalized() {
    let params = CoupledWaveParams {
        xi_mean: 0.2,
        xi_std: 0.2,
        kappa_mean: 0.1,
        kappa_std: 0.3,
        ..rayleigh_params(0.0)
    };
    let price = 40.0;
    let dt = default_amplitude_dt(&params, price).unwrap();
    let state0 = AmplitudeState::new(
        num_complex::Complex64::new(0.6, 0.0),
        num_complex::Complex64::new(0.0, 0.8),
    );
    let out = evolve_fluctuating(state0, &params, &[price], dt, 10_000).unwrap();
    assert!(out.max_norm_drift < 1e-9);
}

#[test]
fn transfer_time_tracks_bar_height() {
    for (h, price, tau0) in [(0.1, 10.0, 1.0), (2.0, 250.0, 0.05), (0.5, 1.0, 3.0)] {
        let op = PriceOperator2x2::from_draws(price, 0.0, h);
        let period = oscillation_period(h, price, tau0).unwrap();
        let dt = period / 5000.0;
        let peak = first_transfer_peak(&op, price, tau0, dt, period).unwrap().unwrap();
        assert!((peak - 0.5 * period).abs() <= dt);
    }
}

#[test]
fn flow_volatility_recovers_the_step_volatility() {
    // Bars far narrower than a step's move, so placement noise is negligible.
    let params = CoupledWaveParams {
        sigma_step: 2e-3,
        ..rayleigh_params(1e-3)
    };
    let series = simulate_path(&params, 100.0, 100_000).unwrap();
    // Four steps per reference unit: the per-unit volatility is 2·σ_step.
    let trades = series_trades(&series, 0, 250);
    let flow = measure_flow_stats(&trades, None, 1000.0).unwrap();
    assert!(
        (flow.sigma / (2.0 * params.sigma_step) - 1.0).abs() < 0.05,
        "{}",
        flow.sigma
    );
}
