use proptest::prelude::*;
use semicoop::geometry::{christoffel, covariant_laplacian, curvature, MetricField, Signature};
use semicoop::grid::{discrete_laplacian, Axis, GridSpec};

fn cube(n: usize) -> GridSpec {
    GridSpec::new(vec![Axis::new(-0.5, 0.7, n), Axis::new(0.1, 1.3, n), Axis::new(-1.0, 0.2, n)]).unwrap()
}

/// Smooth positive-definite metric with off-diagonal terms.
fn wavy(grid: GridSpec, a: f64, b: f64, c: f64) -> MetricField {
    MetricField::from_fn(grid, 3, Signature::Riemannian, move |x| {
        let s = 1.0 + a * (x[0]).sin() * (x[1]).cos() + b * x[2] * x[2];
        let o = c * x[0] * x[1];
        vec![s, o, 0.0, o, s, 0.1 * o, 0.0, 0.1 * o, 1.0 + b * x[0] * x[0]]
    })
    .unwrap()
}

fn spd(entries: [f64; 6]) -> Vec<f64> {
    let l = [
        [1.0 + entries[0].abs(), 0.0, 0.0],
        [entries[1], 1.0 + entries[2].abs(), 0.0],
        [entries[3], entries[4], 1.0 + entries[5].abs()],
    ];
    let mut m = vec![0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            m[i * 3 + j] = (0..3).map(|k| l[i][k] * l[j][k]).sum();
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn christoffel_lower_indices_symmetric(
        n in 4usize..7,
        a in -0.3f64..0.3,
        b in 0.0f64..0.3,
        c in -0.2f64..0.2,
    ) {
        let g = wavy(cube(n), a, b, c);
        let chr = christoffel(&g).unwrap();
        for node in 0..g.grid().len() {
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        prop_assert_eq!(chr.get(node, i, j, k).to_bits(), chr.get(node, i, k, j).to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn constant_metric_has_no_connection_or_curvature(
        n in 3usize..6,
        e in prop::array::uniform6(-0.8f64..0.8),
    ) {
        let g = MetricField::constant(cube(n), &spd(e), Signature::Riemannian).unwrap();
        let chr = christoffel(&g).unwrap();
        prop_assert!(chr.max_abs() < 1e-12);
        let bundle = curvature(&g, &chr).unwrap();
        prop_assert!(bundle.max_abs_riemann() < 1e-12);
    }

    #[test]
    fn christoffel_invariant_under_constant_rescaling(
        a in -0.3f64..0.3,
        c in -0.2f64..0.2,
        k in -4i32..5,
        lambda in 0.1f64..10.0,
    ) {
        let grid = cube(5);
        let base = wavy(grid.clone(), a, 0.1, c);
        let chr = christoffel(&base).unwrap();
        let pow2 = 2f64.powi(k);
        let scaled = |f: f64| {
            MetricField::new(grid.clone(), 3, Signature::Riemannian, base.data().iter().map(|v| v * f).collect())
                .unwrap()
        };
        // powers of two scale without rounding
        let exact = christoffel(&scaled(pow2)).unwrap();
        prop_assert_eq!(exact.data(), chr.data());
        let general = christoffel(&scaled(lambda)).unwrap();
        for (x, y) in general.data().iter().zip(chr.data()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn flat_laplacian_matches_plain_stencil(
        n in 4usize..8,
        coefs in prop::array::uniform4(-2.0f64..2.0),
    ) {
        let grid = cube(n);
        let f: Vec<f64> = (0..grid.len())
            .map(|i| {
                let x = grid.coords(i);
                coefs[0] * x[0] * x[1] + coefs[1] * (x[2]).sin() + coefs[2] * x[0].powi(3) + coefs[3]
            })
            .collect();
        let g = MetricField::flat(grid.clone());
        let chr = christoffel(&g).unwrap();
        let cov = covariant_laplacian(&g, &chr, &f).unwrap();
        let plain = discrete_laplacian(&grid, &f);
        prop_assert_eq!(cov, plain);
    }
}

/// Largest deviation of Γ^θ_φφ = −sinθcosθ, Γ^φ_θφ = cotθ and R̃ = 2 over
/// the interior nodes of a sphere patch.
fn sphere_error(nodes: usize) -> f64 {
    let g = semicoop::geometry::sphere_metric((0.6, 1.4), 0.8, nodes).unwrap();
    let chr = christoffel(&g).unwrap();
    let bundle = curvature(&g, &chr).unwrap();
    let grid = g.grid();
    let mut worst = 0.0f64;
    for n in 0..grid.len() {
        if !grid.is_interior(n) {
            continue;
        }
        let t = grid.coords(n)[0];
        worst = worst
            .max((chr.get(n, 0, 1, 1) + t.sin() * t.cos()).abs())
            .max((chr.get(n, 1, 0, 1) - t.cos() / t.sin()).abs())
            .max((bundle.ricci_scalar()[n] - 2.0).abs());
    }
    worst
}

#[test]
fn sphere_error_is_second_order() {
    let coarse = sphere_error(17);
    let fine = sphere_error(33);
    let ratio = coarse / fine;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

