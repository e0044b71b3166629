mod common;

use common::{fixed, interior, setups, unit};
use datri_core::metric::{curvature_at, ricci_jet, sectional};
use proptest::prelude::*;

fn frac() -> impl Strategy<Value = [f64; 3]> {
    [0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64]
}

fn direction() -> impl Strategy<Value = [f64; 3]> {
    [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64].prop_filter("non-degenerate", |d| {
        d[0] * d[0] + d[1] * d[1] + d[2] * d[2] > 0.05
    })
}

proptest! {
    #![proptest_config(fixed(100, 11))]

    #[test]
    fn riemann_symmetries_and_first_bianchi(f in frac()) {
        for s in setups() {
            let p = interior(s, f);
            let c = curvature_at(&s.model, &p).unwrap();
            let r = &c.riemann;
            let scale = 1.0 + r.iter().flatten().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        for l in 0..3 {
                            let v = r[i][j][k][l];
                            prop_assert!((v + r[j][i][k][l]).abs() < 1e-11 * scale, "{}", s.model.name);
                            prop_assert!((v + r[i][j][l][k]).abs() < 1e-11 * scale, "{}", s.model.name);
                            prop_assert!((v - r[k][l][i][j]).abs() < 1e-11 * scale, "{}", s.model.name);
                            let cyc = v + r[j][k][i][l] + r[k][i][j][l];
                            prop_assert!(cyc.abs() < 1e-11 * scale, "{}", s.model.name);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn riemann_norm_in_terms_of_ricci(f in frac()) {
        for s in setups() {
            let c = curvature_at(&s.model, &interior(s, f)).unwrap();
            let lhs = c.riemann_norm_sq();
            let rhs = 4.0 * c.ricci_norm_sq() - c.tau * c.tau;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1e-3), "{}: {lhs} vs {rhs}", s.model.name);
        }
    }

    #[test]
    fn contracted_second_bianchi(f in frac()) {
        for s in setups() {
            let jet = ricci_jet(&s.model, &interior(s, f)).unwrap();
            let div = jet.div_ricci();
            for m in 0..3 {
                prop_assert!(
                    (2.0 * div[m] - jet.nabla_tau[m]).abs() < 1e-9 * jet.nabla_tau[m].abs().max(1.0),
                    "{}", s.model.name
                );
            }
        }
    }

    #[test]
    fn sectional_basis_invariant(
        f in frac(),
        a in direction(),
        b in direction(),
        m in [-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64],
    ) {
        let det = m[0] * m[3] - m[1] * m[2];
        prop_assume!(det.abs() > 0.1);
        for s in setups() {
            let p = interior(s, f);
            let (x, y) = (unit(s, &p, a), unit(s, &p, b));
            let g = s.model.metric_at(&p).unwrap();
            let cross = x.dot(&(g * x)) * y.dot(&(g * y)) - x.dot(&(g * y)).powi(2);
            prop_assume!(cross > 1e-2);
            let k = sectional(&s.model, &p, &x, &y).unwrap();
            let k2 = sectional(&s.model, &p, &(x * m[0] + y * m[1]), &(x * m[2] + y * m[3])).unwrap();
            prop_assert!((k - k2).abs() <= 1e-10 * k.abs().max(1.0), "{}: {k} vs {k2}", s.model.name);
        }
    }
}
