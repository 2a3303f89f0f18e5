use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use semicoop::geometry::{christoffel, MetricField, Signature};
use semicoop::grid::{Axis, GridSpec};
use semicoop::sde::{
    derive_coefficients, diffusion_identity_residual, euler_maruyama_path, simulate, ConstantCoefficients, Control,
    FirmState, FnCoefficients,
};

fn cube(n: usize) -> GridSpec {
    GridSpec::new(vec![Axis::new(0.0, 1.0, n), Axis::new(0.0, 1.0, n), Axis::new(0.0, 1.0, n)]).unwrap()
}

fn firm(x0: [f64; 3]) -> FirmState {
    FirmState {
        x0: x0.to_vec(),
        strategy: 0.2,
        opponent_strategy: 0.1,
        alpha1: 0.5,
        alpha2: 0.5,
        rho_hat: 0.5,
        rho_tilde: 0.5,
        stubbornness: 1.0,
    }
}

fn metric(a: f64, c: f64) -> MetricField {
    MetricField::from_fn(cube(5), 3, Signature::Riemannian, move |x| {
        let s = 1.0 + a * (3.0 * x[0]).sin() * x[1];
        let o = c * x[2];
        vec![s, o, 0.0, o, 1.0 + a * x[2] * x[2], 0.0, 0.0, 0.0, s]
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn diffusion_reconstructs_inverse_metric(a in -0.4f64..0.4, c in -0.3f64..0.3) {
        let g = metric(a, c);
        let chr = christoffel(&g).unwrap();
        let coeffs = derive_coefficients(&g, &chr).unwrap();
        let inverse = g.inverse().unwrap();
        prop_assert!(diffusion_identity_residual(&coeffs, &inverse) < 1e-12);
        let contracted = chr.contracted(&inverse);
        for node in 0..g.grid().len() {
            for k in 0..3 {
                prop_assert!((coeffs.drift_at(node)[k] + 0.5 * contracted[node][k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn same_seed_same_ensemble(seed in any::<u64>(), paths in 1usize..20) {
        let g = metric(0.2, 0.1);
        let coeffs = derive_coefficients(&g, &christoffel(&g).unwrap()).unwrap();
        let f = firm([0.4, 0.5, 0.5]);
        let a = simulate(&coeffs, &f, 0.5, 8, paths, seed).unwrap();
        let b = simulate(&coeffs, &f, 0.5, 8, paths, seed).unwrap();
        prop_assert_eq!(a.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        b.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn paths_do_not_depend_on_ensemble_size(seed in any::<u64>(), small in 1usize..8) {
        let coeffs = ConstantCoefficients::new(vec![0.1, -0.2, 0.0], vec![1.0, 0.0, 0.0, 0.3, 0.5, 0.0, 0.0, 0.0, 0.2]).unwrap();
        let f = firm([0.0, 0.0, 0.0]);
        let a = simulate(&coeffs, &f, 1.0, 10, small, seed).unwrap();
        let b = simulate(&coeffs, &f, 1.0, 10, small + 5, seed).unwrap();
        for p in 0..small {
            prop_assert_eq!(a.path(p), b.path(p));
        }
    }
}

/// Mean `|X_T^EM − X_T|` for geometric Brownian motion at `coarse` steps,
/// with the exact solution driven by the same Brownian path.
fn gbm_strong_error(coarse: usize, paths: usize) -> f64 {
    let (mu, sigma, x0, t) = (0.8, 0.9, 1.0, 1.0);
    let fine = 1024;
    let coeffs = FnCoefficients {
        dim: 1,
        noise_dim: 1,
        drift: move |_s: f64, x: &[f64], _u: Control, out: &mut [f64]| out[0] = mu * x[0],
        diffusion: move |_s: f64, x: &[f64], _u: Control, out: &mut [f64]| out[0] = sigma * x[0],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let dt_f = t / fine as f64;
    let ratio = fine / coarse;
    let mut total = 0.0;
    let mut out = vec![0.0; coarse + 1];
    for _ in 0..paths {
        let dw: Vec<f64> = (0..fine).map(|_| rng.sample::<f64, _>(StandardNormal) * dt_f.sqrt()).collect();
        let w: f64 = dw.iter().sum();
        let coarse_dw: Vec<f64> = dw.chunks(ratio).map(|c| c.iter().sum()).collect();
        euler_maruyama_path(&coeffs, &[x0], Control::default(), t / coarse as f64, &coarse_dw, &mut out).unwrap();
        let exact = x0 * ((mu - 0.5 * sigma * sigma) * t + sigma * w).exp();
        total += (out[coarse] - exact).abs();
    }
    total / paths as f64
}

#[test]
fn euler_strong_order_one_half() {
    let e1 = gbm_strong_error(16, 4000);
    let e2 = gbm_strong_error(32, 4000);
    let e3 = gbm_strong_error(64, 4000);
    for r in [e1 / e2, e2 / e3] {
        assert!((1.2..=1.7).contains(&r), "ratio {r} (errors {e1}, {e2}, {e3})");
    }
}
