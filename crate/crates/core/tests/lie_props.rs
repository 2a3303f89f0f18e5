use std::sync::Arc;

use proptest::prelude::*;
use semicoop::lie::{lie_bracket, BracketField, Monomial, PolynomialField, RandomFourierField, VectorField};

const H: f64 = 1e-3;

type Poly = Vec<Monomial>;

fn eval(p: &Poly, y: [f64; 3]) -> f64 {
    p.iter().map(|m| m.eval(y)).sum()
}

fn diff(p: &Poly, k: usize) -> Poly {
    p.iter()
        .filter(|m| m.powers[k] > 0)
        .map(|m| {
            let mut powers = m.powers;
            powers[k] -= 1;
            Monomial {
                coef: m.coef * m.powers[k] as f64,
                powers,
            }
        })
        .collect()
}

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Vec::new();
    for x in a {
        for y in b {
            out.push(Monomial {
                coef: x.coef * y.coef,
                powers: [x.powers[0] + y.powers[0], x.powers[1] + y.powers[1], x.powers[2] + y.powers[2]],
            });
        }
    }
    out
}

/// `X f = Σ_j X_j ∂_j f` as a polynomial.
fn apply(x: &[Poly; 3], f: &Poly) -> Poly {
    (0..3).flat_map(|j| mul(&x[j], &diff(f, j))).collect()
}

fn sum(a: &PolynomialField, b: &PolynomialField) -> [Poly; 3] {
    std::array::from_fn(|k| a.components[k].iter().chain(&b.components[k]).copied().collect())
}

fn monomial() -> impl Strategy<Value = Monomial> {
    (-1.0f64..1.0, prop::array::uniform3(0u32..=3))
        .prop_filter("degree ≤ 3", |(_, p)| p.iter().sum::<u32>() <= 3)
        .prop_map(|(coef, powers)| Monomial { coef, powers })
}

fn field() -> impl Strategy<Value = PolynomialField> {
    prop::array::uniform3(prop::collection::vec(monomial(), 0..4)).prop_map(|components| PolynomialField { components })
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.0f64..1.0)
}

fn vf(drift: &PolynomialField, noise: &PolynomialField) -> VectorField {
    VectorField::new(drift.clone(), noise.clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matches_operator_composition(
        (vd, vn, ud, un) in (field(), field(), field(), field()),
        y in point(),
    ) {
        let b = lie_bracket(&vf(&vd, &vn), &vf(&ud, &un), y, H).unwrap();
        let v = sum(&vd, &vn);
        let u = sum(&ud, &un);
        let tests: [Poly; 4] = [
            vec![Monomial { coef: 1.0, powers: [1, 0, 0] }],
            vec![Monomial { coef: 1.0, powers: [0, 1, 0] }],
            vec![Monomial { coef: 1.0, powers: [0, 0, 1] }],
            vec![Monomial { coef: 1.0, powers: [1, 1, 1] }, Monomial { coef: -2.0, powers: [2, 0, 0] }],
        ];
        for f in &tests {
            let oracle = eval(&apply(&v, &apply(&u, f)), y) - eval(&apply(&u, &apply(&v, f)), y);
            let grad: Vec<f64> = (0..3).map(|j| eval(&diff(f, j), y)).collect();
            let got: f64 = (0..3).map(|j| b[j] * grad[j]).sum();
            prop_assert!((got - oracle).abs() < 1e-8, "{} vs {}", got, oracle);
        }
    }

    #[test]
    fn antisymmetric(
        (vd, vn, ud, un) in (field(), field(), field(), field()),
        y in point(),
    ) {
        let a = lie_bracket(&vf(&vd, &vn), &vf(&ud, &un), y, H).unwrap();
        let b = lie_bracket(&vf(&ud, &un), &vf(&vd, &vn), y, H).unwrap();
        for k in 0..3 {
            prop_assert!((a[k] + b[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn bilinear_under_scaling(
        (vd, vn, ud, un) in (field(), field(), field(), field()),
        y in point(),
        s in -3.0f64..3.0,
        t in -3.0f64..3.0,
    ) {
        let base = lie_bracket(&vf(&vd, &vn), &vf(&ud, &un), y, H).unwrap();
        let scaled = lie_bracket(
            &vf(&vd.scaled(s), &vn.scaled(s)),
            &vf(&ud.scaled(t), &un.scaled(t)),
            y,
            H,
        )
        .unwrap();
        for k in 0..3 {
            prop_assert!((scaled[k] - s * t * base[k]).abs() < 1e-9 * (1.0 + base[k].abs()));
        }
    }

    #[test]
    fn jacobi_identity(seeds in prop::array::uniform3(any::<u64>()), y in point()) {
        let fourier = |seed: u64| -> VectorField {
            let f = RandomFourierField::new(seed, 4, 0.5, 4.0).unwrap();
            VectorField::drift_only(f)
        };
        let (a, b, c) = (fourier(seeds[0]), fourier(seeds[1]), fourier(seeds[2]));
        let h = 2e-3;
        let nested = |x: &VectorField, z: &VectorField, w: &VectorField| {
            let inner = VectorField::from_arcs(
                Arc::new(BracketField { v: x.clone(), u: z.clone(), spacing: h }),
                Arc::new(PolynomialField::zero()),
            );
            lie_bracket(&inner, w, y, h).unwrap()
        };
        let r1 = nested(&a, &b, &c);
        let r2 = nested(&b, &c, &a);
        let r3 = nested(&c, &a, &b);
        for k in 0..3 {
            prop_assert!((r1[k] + r2[k] + r3[k]).abs() < 1e-6, "{}", r1[k] + r2[k] + r3[k]);
        }
    }
}
