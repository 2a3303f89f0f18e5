use proptest::prelude::*;
use semicoop::polygon::{assemble_polygon, correction_term, patch_area, EllipsoidPatch, PolygonAssembly};

fn patch<'a>(
    radius: f64,
    k: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    theta: (f64, f64),
    tau: (f64, f64),
) -> EllipsoidPatch<'a> {
    EllipsoidPatch {
        radius,
        curvature: k,
        theta,
        rho: (0.0, 1.3),
        tau,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sphere_correction_vanishes(
        r in 0.2f64..5.0,
        t1 in -1.4f64..0.0,
        dt in 0.05f64..1.4,
        nodes in 1usize..64,
    ) {
        let k = move |_: f64, _: f64| 1.0 / (r * r);
        let c = correction_term(&patch(r, &k, (t1, t1 + dt), (0.0, 1.0)), nodes).unwrap();
        prop_assert!(c.abs() < 1e-14 * r * r, "{}", c);
    }

    #[test]
    fn doubling_nodes_converges(
        a in 1.0f64..2.0,
        flat in 0.5f64..1.0,
        t1 in -1.2f64..0.0,
        dt in 0.1f64..1.2,
    ) {
        let b = a * flat;
        let e2 = 1.0 - (b * b) / (a * a);
        let k = move |theta: f64, _: f64| {
            let w = 1.0 - e2 * theta.sin().powi(2);
            w * w / (a * a * (1.0 - e2))
        };
        let p = patch(a, &k, (t1, t1 + dt), (0.0, 0.7));
        let coarse = patch_area(&p, 24).unwrap();
        let fine = patch_area(&p, 48).unwrap();
        prop_assert!((coarse - fine).abs() < 1e-10);
    }

    #[test]
    fn area_adds_over_split_latitude_and_azimuth(
        r in 0.5f64..3.0,
        amp in 0.0f64..0.5,
        t1 in -1.2f64..-0.1,
        t2 in 0.1f64..1.2,
        frac in 0.1f64..0.9,
        tau2 in 0.2f64..3.0,
    ) {
        let k = move |theta: f64, rho: f64| (1.0 + amp * theta.cos() * (1.0 + 0.3 * rho.sin())) / (r * r);
        let tm = t1 + frac * (t2 - t1);
        let taum = frac * tau2;
        let whole = patch_area(&patch(r, &k, (t1, t2), (0.0, tau2)), 32).unwrap();
        let lo = patch_area(&patch(r, &k, (t1, tm), (0.0, taum)), 32).unwrap();
        let hi = patch_area(&patch(r, &k, (tm, t2), (taum, tau2)), 32).unwrap();
        prop_assert!((lo + hi - whole).abs() < 1e-12 * (1.0 + whole.abs()));
    }

    #[test]
    fn assembly_ignores_side_order(
        areas in prop::collection::vec(0.0f64..10.0, 3..9).prop_shuffle(),
        seed in any::<u64>(),
    ) {
        let mut shuffled = areas.clone();
        // deterministic Fisher–Yates from the seed
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = assemble_polygon(&PolygonAssembly { areas, same_side: false, added: 0 }).unwrap();
        let b = assemble_polygon(&PolygonAssembly { areas: shuffled, same_side: false, added: 0 }).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn half_curvature_sphere_closed_form() {
    // k = 1/(2r²): correction r²(ρ₂−ρ₁)(sin θ₂ − sin θ₁)
    let r = 1.7;
    let k = move |_: f64, _: f64| 0.5 / (r * r);
    let (t1, t2) = (-0.4, 0.9);
    let p = patch(r, &k, (t1, t2), (0.2, 1.1));
    let expected = r * r * (1.1 - 0.2) + r * r * 1.3 * (t2.sin() - t1.sin());
    assert!((patch_area(&p, 32).unwrap() - expected).abs() < 1e-10);
}
