use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use spreadwave_core::optimizer::{
    default_lambda_max, grid_search, optimize_spread, spread_pnl, ExecutionModel, PnLParams, SpreadLaw,
};

const GRID_STEP: f64 = 1e-4;

fn random_configs(n: usize) -> Vec<(PnLParams, ExecutionModel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    (0..n)
        .map(|_| {
            let law = if rng.random_bool(0.5) {
                SpreadLaw::BidAsk {
                    a: rng.random_range(0.0..20.0),
                }
            } else {
                SpreadLaw::Bar {
                    floor: rng.random_range(0.0..2.0),
                    cubic_coeff: rng.random_range(0.0..1.0),
                    horizon: 1.0,
                }
            };
            let params = PnLParams {
                commission_alpha: rng.random_range(0.0..5.0),
                volume_v: rng.random_range(0.1..10.0),
                law,
                lambda_ref: rng.random_range(0.5..2.0),
            };
            (params, ExecutionModel::new(rng.random_range(0.5..5.0)).unwrap())
        })
        .collect()
}

#[test]
fn optimum_agrees_with_grid_oracle() {
    random_configs(1000).par_iter().for_each(|(params, model)| {
        let lambda_max = default_lambda_max(model);
        let q = optimize_spread(params, model, lambda_max).unwrap();
        let (grid_lambda, grid_pnl) = grid_search(params, model, GRID_STEP, lambda_max).unwrap();
        assert!(
            (q.lambda_opt - grid_lambda).abs() <= GRID_STEP,
            "{params:?} {model:?}: {} vs {grid_lambda}",
            q.lambda_opt
        );
        assert_eq!(q.halt, grid_pnl <= 0.0);
        assert!(q.pnl_opt >= q.pnl_naive);
        if q.lambda_opt < lambda_max {
            assert!(q.residual.abs() < 1e-8, "residual {}", q.residual);
            for f in [0.99, 1.01] {
                assert!(spread_pnl(params, model, q.lambda_opt * f).unwrap() < q.pnl_opt);
            }
        }
    });
}

#[test]
fn dense_scan_confirms_single_maximum() {
    let model = ExecutionModel::new(3.0).unwrap();
    let params = PnLParams {
        commission_alpha: 3.0,
        volume_v: 1.7,
        law: SpreadLaw::BidAsk { a: 10.0 },
        lambda_ref: 1.0,
    };
    let q = optimize_spread(&params, &model, 30.0).unwrap();
    let pnl: Vec<f64> = (1..30_000)
        .map(|i| spread_pnl(&params, &model, i as f64 * 1e-3).unwrap())
        .collect();
    let sign_changes = pnl.windows(3).filter(|w| (w[1] - w[0]) * (w[2] - w[1]) < 0.0).count();
    assert_eq!(sign_changes, 1);
    let peak = pnl.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(q.pnl_opt >= peak);
}
