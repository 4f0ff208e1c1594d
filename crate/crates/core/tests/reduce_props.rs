mod common;

use common::{max_abs_diff, naive_ccpp, naive_la, naive_lp};
use dctnet::reduce::{ReductionKind, ReductionOperator};
use proptest::prelude::*;

fn input(n: usize, plane: usize, seed: u64) -> Vec<f32> {
    (0..n * plane)
        .map(|i| ((i as u64).wrapping_mul(2654435761).wrapping_add(seed.wrapping_mul(97)) % 2001) as f32 / 100.0 - 10.0)
        .collect()
}

#[test]
fn forwards_match_naive_loops_at_full_width() {
    let x = input(192, 16, 1);
    let lp = ReductionOperator::<f32>::random(ReductionKind::Lp, 192, 64, 5).unwrap();
    assert!(max_abs_diff(&lp.forward(&x, 16).unwrap(), &naive_lp(lp.weights(), 192, 64, &x, 16)) < 1e-6);
    let la = ReductionOperator::<f32>::random(ReductionKind::La, 192, 64, 5).unwrap();
    let x4 = input(192, 4, 2);
    assert!(max_abs_diff(&la.forward(&x4, 4).unwrap(), &naive_la(la.weights(), 192, 64, &x4, 4).0) < 1e-6);
    let cc = ReductionOperator::<f32>::random(ReductionKind::Ccpp, 192, 64, 5).unwrap();
    let x9 = input(192, 9, 3);
    let y = cc.forward(&x9, 9).unwrap();
    assert!(max_abs_diff(&y, &naive_ccpp(cc.weights(), cc.bias(), 192, 64, &x9, 9)) < 1e-6);
    assert!(y.iter().all(|&v| v >= 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lp_is_linear(seed: u64, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let op = ReductionOperator::<f64>::random(ReductionKind::Lp, 12, 4, seed).unwrap();
        let x1: Vec<f64> = input(12, 6, seed).iter().map(|&v| v as f64).collect();
        let x2: Vec<f64> = input(12, 6, seed ^ 77).iter().map(|&v| v as f64).collect();
        let mix: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| alpha * a + beta * b).collect();
        let (y1, y2, ym) = (op.forward(&x1, 6).unwrap(), op.forward(&x2, 6).unwrap(), op.forward(&mix, 6).unwrap());
        for k in 0..ym.len() {
            prop_assert!((ym[k] - (alpha * y1[k] + beta * y2[k])).abs() < 1e-10);
        }
    }

    #[test]
    fn la_attention_is_a_distribution(seed: u64, group in 1usize..6, m in 1usize..5) {
        let n = group * m;
        let op = ReductionOperator::<f32>::random(ReductionKind::La, n, m, seed).unwrap();
        let x = input(n, 5, seed);
        for i in 0..m {
            let a = op.attention(&x, 5, i).unwrap();
            for p in 0..5 {
                let s: f64 = (0..group).map(|j| a[j * 5 + p]).sum();
                prop_assert!((s - 1.0).abs() < 1e-6);
                prop_assert!((0..group).all(|j| a[j * 5 + p] > 0.0 && a[j * 5 + p] <= 1.0));
            }
        }
    }

    #[test]
    fn la_shift_invariance(w in -2.0f64..2.0, shift in -5.0f64..5.0, seed: u64) {
        // Equal weights within a group make a common input shift a uniform score shift.
        let op = ReductionOperator::<f64>::new(ReductionKind::La, 6, 2, vec![w; 6], vec![]).unwrap();
        let x: Vec<f64> = input(6, 3, seed).iter().map(|&v| v as f64).collect();
        let moved: Vec<f64> = x.iter().map(|v| v + shift).collect();
        let a = op.attention(&x, 3, 1).unwrap();
        let b = op.attention(&moved, 3, 1).unwrap();
        for k in 0..a.len() {
            prop_assert!((a[k] - b[k]).abs() < 1e-9);
        }
        let (y, ym) = (op.forward(&x, 3).unwrap(), op.forward(&moved, 3).unwrap());
        for k in 0..y.len() {
            prop_assert!((ym[k] - y[k] - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn forwards_are_pointwise(seed: u64, kind in prop::sample::select(ReductionKind::ALL.to_vec()), perm in Just((0..7).collect::<Vec<usize>>()).prop_shuffle()) {
        let op = ReductionOperator::<f32>::random(kind, 12, 4, seed).unwrap();
        let x = input(12, 7, seed);
        let permute = |v: &[f32], ch: usize| -> Vec<f32> {
            (0..ch).flat_map(|c| perm.iter().map(move |&p| v[c * 7 + p])).collect()
        };
        let y = op.forward(&x, 7).unwrap();
        prop_assert_eq!(op.forward(&permute(&x, 12), 7).unwrap(), permute(&y, 4));
    }

    #[test]
    fn ccpp_is_nonnegative(seed: u64) {
        let op = ReductionOperator::<f32>::random(ReductionKind::Ccpp, 24, 8, seed).unwrap();
        prop_assert!(op.forward(&input(24, 9, seed), 9).unwrap().iter().all(|&v| v >= 0.0));
    }
}
