//! Randomized invariant checks across the library.

use num::rational::BigRational;
use num::{One, Zero};
use proptest::prelude::*;

use wellround_core::calculus::{product_certificate, pullback_certificate, WrCertificate};
use wellround_core::certifier::{
    ball_oracle, box_oracle, fit_lipschitz, single_set_constant, FitRow,
};
use wellround_core::counting::{count_integer_points, count_sl2z_norm_ball};
use wellround_core::group::builtin_group;
use wellround_core::intmat::IntMatrix;
use wellround_core::lattice::{
    duality_map, is_in_reduced_siegel_set, reduce_basis, LatticeBasis, SplitBasis,
};
use wellround_core::matrix::{kan_decompose, Matrix};

fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn square(dim: usize, entries: &[f64]) -> Matrix {
    Matrix::new(dim, dim, entries.to_vec()).unwrap()
}

fn int_square(dim: usize, entries: &[i64]) -> IntMatrix {
    IntMatrix { rows: dim, cols: dim, entries: entries.to_vec() }
}

/// Square float matrices kept clearly away from the singular locus.
fn nonsingular_matrix() -> impl Strategy<Value = Matrix> {
    (2usize..=4)
        .prop_flat_map(|dim| {
            prop::collection::vec(-3.0f64..3.0, dim * dim)
                .prop_map(move |entries| square(dim, &entries))
        })
        .prop_filter("determinant too small", |m| m.det().abs() > 0.05)
}

/// Integer bases with nonzero determinant, the reduction corpus shape.
fn integer_basis() -> impl Strategy<Value = IntMatrix> {
    (2usize..=4)
        .prop_flat_map(|dim| {
            prop::collection::vec(-5i64..=5, dim * dim)
                .prop_map(move |entries| int_square(dim, &entries))
        })
        .prop_filter("singular", |m| m.det() != 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kan_factors_reconstruct_and_have_the_right_shape(m in nonsingular_matrix()) {
        let kan = kan_decompose(&m).unwrap();
        let scale = m.max_abs().max(1.0);
        let err = kan.reconstruct().sub(&m).max_abs();
        prop_assert!(err <= 1e-9 * scale, "reconstruction error {err}");

        let ktk = kan.k.transpose().mul(&kan.k);
        let ortho = ktk.sub(&Matrix::identity(m.rows)).max_abs();
        prop_assert!(ortho <= 1e-9, "k not orthogonal: {ortho}");

        for (i, &a) in kan.a.iter().enumerate() {
            prop_assert!(a > 0.0, "a[{i}] = {a} not positive");
        }
        for i in 0..m.rows {
            for j in 0..i.min(m.cols) {
                prop_assert!(kan.n.get(i, j).abs() <= 1e-12, "n not upper triangular");
            }
            prop_assert!((kan.n.get(i, i) - 1.0).abs() <= 1e-12, "n diagonal not one");
        }
    }

    #[test]
    fn duality_squared_fixes_the_left_part_and_then_stabilizes(m in nonsingular_matrix()) {
        let dim = m.rows;
        let split_col = dim / 2;
        let left = Matrix::from_fn(dim, split_col, |i, j| m.get(i, j));
        let right = Matrix::from_fn(dim, dim - split_col, |i, j| m.get(i, j + split_col));
        let start = SplitBasis { left: left.clone(), right };

        let once = duality_map(&start).unwrap();
        let twice = duality_map(&once).unwrap();
        prop_assert!(twice.left.sub(&left).max_abs() <= 1e-9, "left part drifted");

        let thrice = duality_map(&twice).unwrap();
        let fourth = duality_map(&thrice).unwrap();
        let drift = fourth.left.sub(&twice.left).max_abs().max(
            fourth.right.sub(&twice.right).max_abs(),
        );
        prop_assert!(drift <= 1e-8, "duality failed to stabilize: {drift}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reduction_lands_in_the_siegel_set_and_preserves_the_lattice(b in integer_basis()) {
        let basis = LatticeBasis::new(b.to_float()).unwrap();
        let rb = reduce_basis(&basis).unwrap();
        let m = rb.a.len();

        prop_assert!(rb.transform.is_unimodular());
        let recon = basis.mat.mul(&rb.transform.to_float());
        prop_assert!(recon.sub(&rb.reduced).max_abs() <= 1e-6 * basis.mat.max_abs().max(1.0));

        for j in 0..m {
            for i in 0..j {
                prop_assert!(
                    rb.n_coeffs.get(i, j).abs() <= 0.5 + 1e-9,
                    "n[{i}][{j}] = {} not size-reduced",
                    rb.n_coeffs.get(i, j)
                );
            }
        }
        let c = 3.0f64.sqrt() / 2.0;
        for j in 0..m.saturating_sub(1) {
            prop_assert!(
                rb.a[j + 1] >= c * rb.a[j] - 1e-9,
                "a[{}] = {} below {} * a[{}] = {}",
                j + 1, rb.a[j + 1], c, j, c * rb.a[j]
            );
        }

        let membership =
            is_in_reduced_siegel_set(&LatticeBasis::new(rb.reduced.clone()).unwrap()).unwrap();
        prop_assert!(membership.member, "violations: {:?}", membership.violations);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_log_roundtrip_inside_the_chart(
        name in prop::sample::select(vec!["R2", "A2", "N3", "SO3", "SL2"]),
        raw in prop::collection::vec(-0.5f64..0.5, 6),
    ) {
        let group = builtin_group(name).unwrap();
        let dim = group.dim();
        let mut coords: Vec<f64> = raw[..dim].to_vec();
        let norm = group.chart_norm(&coords);
        if norm > 0.45 {
            for c in &mut coords {
                *c *= 0.45 / norm;
            }
        }
        let g = group.exp_coords(&coords).unwrap();
        let back = group.log_coords(&g.mat).unwrap();
        for (i, (x, y)) in coords.iter().zip(&back).enumerate() {
            prop_assert!((x - y).abs() <= 1e-9, "coordinate {i}: {x} vs {y}");
        }
    }

    #[test]
    fn single_set_constants_are_exact_reciprocals(
        c_num in 1i64..200, c_den in 1i64..200,
        mu_num in 1i64..200, mu_den in 1i64..200,
    ) {
        let c = rational(c_num, c_den);
        let mu = rational(mu_num, mu_den);
        let (big_c, eps0) = single_set_constant(&c, &mu).unwrap();
        prop_assert_eq!(big_c.clone() * eps0, BigRational::one());
        prop_assert_eq!(big_c, rational(2, 1) * c / mu);
    }

    #[test]
    fn pullback_and_singleton_product_agree(
        c_num in 1i64..40, f_num in 1i64..40, f_den in 1i64..40, t_num in 0i64..10,
    ) {
        let cert = WrCertificate::new(
            rational(c_num, 7),
            rational(t_num, 1),
            rational(7, c_num),
            "seed",
        ).unwrap();
        let f = rational(f_num, f_den);

        let pulled = pullback_certificate(&cert, &f).unwrap();
        let product = product_certificate(&[cert.clone()], &f).unwrap();
        prop_assert_eq!(pulled.c.clone(), product.c);
        prop_assert_eq!(pulled.t0.clone(), product.t0);
        prop_assert_eq!(pulled.eps0.clone(), product.eps0);

        let expected = f.clone() * cert.c.clone().max(BigRational::one());
        prop_assert_eq!(pulled.c.clone(), expected);
        if f >= BigRational::one() {
            prop_assert!(pulled.c >= cert.c);
        }
        prop_assert_eq!(pulled.c * pulled.eps0, BigRational::one());
    }

    #[test]
    fn synthetic_linear_ratios_fit_their_own_slope(
        slope in 0.0f64..20.0,
        volume in 0.5f64..4.0,
    ) {
        let rows: Vec<FitRow> = [0.01, 0.02, 0.05]
            .iter()
            .map(|&eps| FitRow {
                eps,
                vol_plus: wellround_core::certifier::Estimate {
                    value: volume * (1.0 + slope * eps),
                    stderr: 0.0,
                },
                vol_minus: wellround_core::certifier::Estimate { value: volume, stderr: 0.0 },
            })
            .collect();
        let fit = fit_lipschitz(&rows).unwrap();
        prop_assert!((fit.fitted_c - slope).abs() <= 1e-9 * (1.0 + slope));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn integer_counts_ignore_integer_translations(
        hx in 0.55f64..2.0, hy in 0.55f64..2.0,
        cx in -0.4f64..0.4, cy in -0.4f64..0.4,
        sx in -3i64..=3, sy in -3i64..=3,
        t in 1u8..=3,
    ) {
        let group = builtin_group("R2").unwrap();
        let body = box_oracle(&group, vec![cx, cy], vec![hx, hy]).unwrap();
        let moved =
            box_oracle(&group, vec![cx + sx as f64, cy + sy as f64], vec![hx, hy]).unwrap();
        let t = t as f64;
        prop_assert_eq!(
            count_integer_points(&body, t).unwrap(),
            count_integer_points(&moved, t).unwrap()
        );
    }

    #[test]
    fn centered_counts_grow_with_the_scale(
        r in 0.5f64..2.0,
        t1 in 1.0f64..6.0,
        bump in 0.1f64..4.0,
    ) {
        let group = builtin_group("R2").unwrap();
        let ball = ball_oracle(&group, r).unwrap();
        let c1 = count_integer_points(&ball, t1).unwrap();
        let c2 = count_integer_points(&ball, t1 + bump).unwrap();
        prop_assert!(c1 <= c2, "count dropped from {c1} to {c2}");
    }

    #[test]
    fn sl2z_counts_are_even_and_monotone(b1 in 1.0f64..20.0, bump in 0.0f64..10.0) {
        let c1 = count_sl2z_norm_ball(b1).unwrap();
        let c2 = count_sl2z_norm_ball(b1 + bump).unwrap();
        prop_assert!(c1 <= c2);
        prop_assert_eq!(c1 % 2, 0);
        prop_assert_eq!(c2 % 2, 0);
    }
}

#[test]
fn zero_rational_is_zero() {
    // anchor for the rational helpers used above
    assert!(rational(0, 5).is_zero());
}
