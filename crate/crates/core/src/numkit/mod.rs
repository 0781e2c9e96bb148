//! Dense matrix arithmetic with reverse-mode differentiation and a
//! finite-difference gradient oracle.

mod gradcheck;
mod matrix;
mod tape;

pub use gradcheck::{finite_diff_check, GradCheckReport, ParamCheck};
pub use matrix::{cosine_similarity, sigmoid_scalar, Matrix};
pub use tape::{Tape, Var};

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-50.0f64..50.0, len)
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(data in finite_vec(20)) {
            let m = Matrix::from_vec(4, 5, data).softmax_rows();
            for i in 0..4 {
                let s: f64 = m.row(i).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn cosine_symmetric_and_bounded(u in finite_vec(6), v in finite_vec(6)) {
            prop_assume!(u.iter().any(|&x| x != 0.0) && v.iter().any(|&x| x != 0.0));
            let uv = cosine_similarity(&u, &v);
            let vu = cosine_similarity(&v, &u);
            prop_assert!((uv - vu).abs() < 1e-12);
            prop_assert!(uv.abs() <= 1.0 + 1e-12);
        }

        #[test]
        fn cosine_scale_invariant(u in finite_vec(6), v in finite_vec(6), alpha in 0.001f64..100.0) {
            prop_assume!(u.iter().any(|&x| x.abs() > 1e-6) && v.iter().any(|&x| x.abs() > 1e-6));
            let scaled: Vec<f64> = u.iter().map(|&x| alpha * x).collect();
            let a = cosine_similarity(&scaled, &v);
            let b = cosine_similarity(&u, &v);
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn matmul_associative_at_tolerance(
            a in finite_vec(16), b in finite_vec(16), c in finite_vec(16)
        ) {
            let a = Matrix::from_vec(4, 4, a.iter().map(|v| v / 50.0).collect());
            let b = Matrix::from_vec(4, 4, b.iter().map(|v| v / 50.0).collect());
            let c = Matrix::from_vec(4, 4, c.iter().map(|v| v / 50.0).collect());
            let left = a.matmul(&b).matmul(&c);
            let right = a.matmul(&b.matmul(&c));
            prop_assert!(left.sub(&right).max_abs() < 1e-9);
        }
    }
}
