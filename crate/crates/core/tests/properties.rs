//! Randomized invariants across the lattice, jet, family and fiber modules.

use ephemera::coeff::{CRational, Coefficient};
use ephemera::family::{build_family, FamilySystem, PolarPoint};
use ephemera::fiber::{critical_scan, off_critical_levels, reduced_surface, GridField};
use ephemera::jets::{chart_jet, zero_set_shape};
use ephemera::lattice::{
    defining_vector, degree_gt2_criterion, smith_normal_form, stabilizer_from_xi, DefiningVector, IntMatrix,
    StabilizerData, WeightMatrix,
};
use ephemera::local_model::{defining_poly_eval, phi_h, LocalModel};
use ephemera::poly::InvariantPolynomial;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..=4, 1usize..=5).prop_flat_map(|(m, n)| prop::collection::vec(prop::collection::vec(-9i64..=9, n), m))
}

fn family(cols: &[&[i64]]) -> FamilySystem {
    let cols: Vec<Vec<i64>> = cols.iter().map(|c| c.to_vec()).collect();
    build_family(&WeightMatrix::from_columns(&cols).unwrap()).unwrap()
}

fn family_11() -> FamilySystem {
    family(&[&[1, 0], &[0, 1], &[1, 1]])
}

fn family_21() -> FamilySystem {
    family(&[&[1, 0], &[0, 1], &[2, 1]])
}

fn gcd_of(xs: &[i64]) -> u64 {
    xs.iter().fold(0i64, |g, &x| g.gcd(&x)).unsigned_abs()
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| Complex64::new(a, b)), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn smith_form_is_a_unimodular_diagonalization(rows in matrix()) {
        let cols = rows[0].len();
        let a = IntMatrix::from_rows(&rows, cols);
        let snf = smith_normal_form(&a);
        prop_assert_eq!(snf.u.mul(&a).mul(&snf.v), snf.d.clone());
        prop_assert!(snf.u.determinant().abs().is_one());
        prop_assert!(snf.v.determinant().abs().is_one());
        for i in 0..snf.d.rows() {
            for j in 0..snf.d.cols() {
                if i != j {
                    prop_assert!(snf.d.get(i, j).is_zero());
                }
            }
        }
        let diag: Vec<BigInt> = (0..rows.len().min(cols)).map(|i| snf.d.get(i, i).clone()).collect();
        for w in diag.windows(2) {
            prop_assert!(!w[0].is_negative());
            if w[0].is_zero() {
                prop_assert!(w[1].is_zero());
            } else {
                prop_assert!(w[1].is_multiple_of(&w[0]));
            }
        }
        for k in snf.kernel_basis() {
            for row in &rows {
                let dot: BigInt = row.iter().zip(&k).map(|(&x, y)| BigInt::from(x) * y).sum();
                prop_assert!(dot.is_zero());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn defining_vector_is_a_primitive_relation(
        n in 2usize..=5,
        entries in prop::collection::vec(-5i64..=5, 16),
        shift in 0usize..5,
    ) {
        let rows: Vec<Vec<i64>> = (0..n - 1).map(|i| entries[i * n % 16..].iter().cycle().take(n).copied().collect()).collect();
        let Ok(w) = WeightMatrix::new(rows.clone()) else { return Ok(()) };
        let Ok(dv) = defining_vector(&w) else { return Ok(()) };
        prop_assert!(!dv.is_zero());
        prop_assert_eq!(dv.gcd(), 1);
        for row in &rows {
            prop_assert_eq!(row.iter().zip(&dv.xi).map(|(a, b)| a * b).sum::<i64>(), 0);
        }
        let perm: Vec<usize> = (0..n).map(|j| (j + shift) % n).collect();
        let permuted = defining_vector(&w.permuted(&perm)).unwrap();
        let expected = DefiningVector::new(perm.iter().map(|&j| dv.xi[j]).collect());
        prop_assert_eq!(permuted.xi, expected.xi);
    }

    #[test]
    fn degree_criterion_matches_degree_for_tall_relations(
        xi in prop::collection::vec(-4i64..=4, 1..=4).prop_filter("tall and nonzero", |x| {
            let dv = DefiningVector::new(x.clone());
            dv.tall && !dv.is_zero()
        }),
    ) {
        let stab = StabilizerData::from_slice_xi(&xi).unwrap();
        let expected = xi.iter().map(|x| x.abs()).sum::<i64>() > 2;
        prop_assert_eq!(degree_gt2_criterion(&stab.slice_weights, stab.component_count), expected);
    }

    #[test]
    fn component_count_is_the_gcd(xi in prop::collection::vec(0i64..=5, 1..=3)) {
        prop_assume!(xi.iter().any(|&x| x != 0));
        let support: Vec<usize> = (0..xi.len()).collect();
        let stab = stabilizer_from_xi(&xi, &support).unwrap();
        prop_assert_eq!(stab.component_count, gcd_of(&xi));
    }

    #[test]
    fn jet_shape_is_rotation_invariant(
        xi in prop::collection::vec(0i64..=3, 1..=3),
        angles in prop::collection::vec(0.0f64..std::f64::consts::TAU, 3),
        real_weight in -2i64..=2,
    ) {
        let dv = DefiningVector::new(xi.clone());
        prop_assume!(dv.degree >= 2);
        let mut p: InvariantPolynomial =
            InvariantPolynomial::imag_of_defining(dv.clone(), CRational::one());
        if real_weight != 0 {
            let re = InvariantPolynomial::real_of_defining(dv.clone(), CRational::from_i64(real_weight));
            p = p.add(&re);
        }
        let p = p.to_c64();
        let base = chart_jet(&p).unwrap();
        let turned = chart_jet(&p.rotate(&angles[..xi.len()])).unwrap();
        prop_assert_eq!(zero_set_shape(&base), zero_set_shape(&turned));
        let norm = |j: &ephemera::jets::ChartJet| (j.a * j.a + j.b * j.b).sqrt();
        prop_assert!((norm(&base) - norm(&turned)).abs() <= 1e-9 * norm(&base).max(1.0));
        prop_assert!((base.d - turned.d).abs() <= 1e-9 * base.d.abs().max(1.0));
    }

    #[test]
    fn moment_map_and_defining_polynomial_are_homogeneous(
        xi in prop::collection::vec(0i64..=3, 2..=3),
        z in complex_vec(3),
        scale in 0.1f64..3.0,
    ) {
        let dv = DefiningVector::new(xi.clone());
        prop_assume!(dv.degree >= 2 && xi.iter().filter(|&&x| x != 0).count() >= 2);
        let model = LocalModel::new(&xi).unwrap();
        let z = &z[..xi.len()];
        let scaled: Vec<Complex64> = z.iter().map(|x| x * scale).collect();
        let base = phi_h(&model, z).unwrap();
        let big = phi_h(&model, &scaled).unwrap();
        for (a, b) in base.iter().zip(&big) {
            prop_assert!((b - scale * scale * a).abs() <= 1e-10 * (1.0 + b.abs()));
        }
        let p = defining_poly_eval(&dv, z);
        let q = defining_poly_eval(&dv, &scaled);
        let factor = scale.powi(dv.degree as i32);
        prop_assert!((q - p * factor).norm() <= 1e-10 * (1.0 + q.norm()));
    }

    #[test]
    fn polar_and_cartesian_evaluation_agree(
        which in 0usize..2,
        r in prop::collection::vec(0.0f64..2.0, 3),
        theta in prop::collection::vec(0.0f64..std::f64::consts::TAU, 3),
    ) {
        let fam = if which == 0 { family_11() } else { family_21() };
        let w = PolarPoint::new(r, theta).unwrap();
        let (_, polar) = fam.eval_polar(&w).unwrap();
        let cartesian = fam.eval_cartesian(&w.to_cartesian());
        prop_assert!((polar - cartesian).abs() <= 1e-10 * (1.0 + polar.abs()));
    }

    #[test]
    fn lifts_lie_on_the_fiber(
        which in 0usize..2,
        beta in (0.3f64..3.0, 0.3f64..3.0),
        t in 0.0f64..=1.0,
        psi in 0.0f64..std::f64::consts::TAU,
    ) {
        let fam = if which == 0 { family_11() } else { family_21() };
        let beta = [beta.0, beta.1];
        let chart = reduced_surface(&fam, &beta).unwrap();
        let Some(w) = chart.lift(t, psi) else { return Ok(()) };
        let (phi, g) = fam.eval_polar(&w).unwrap();
        for (a, b) in phi.iter().zip(&beta) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{:?} vs {:?}", phi, beta);
        }
        prop_assert!((g - chart.gbar(t, psi)).abs() <= 1e-9 * (1.0 + g.abs()));
    }
}

#[test]
fn level_counts_stable_under_refinement() {
    for fam in [family_11(), family_21()] {
        for beta in [[0.7, 1.3], [1.0, 1.0], [2.0, 0.5]] {
            let chart = reduced_surface(&fam, &beta).unwrap();
            let coarse = GridField::new(&chart, 256);
            let fine = GridField::new(&chart, 512);
            let crit: Vec<f64> = critical_scan(&chart, 256).unwrap().critical_points.iter().map(|p| p.value).collect();
            let (lo, hi) = fine.min_max();
            for c in off_critical_levels(lo, hi, 15, &crit) {
                assert_eq!(coarse.level_components(c), fine.level_components(c), "beta {beta:?} level {c}");
            }
        }
    }
}
