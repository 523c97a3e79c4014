use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub fn tanh_map<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(T::tanh)
}

/// Backward of tanh given its forward output `y`: `(1 - y^2) * grad_out`.
pub fn tanh_backward<T: Scalar>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if output.shape() != grad_out.shape() {
        return Err(Error::shape(
            "tanh_backward",
            format!("{:?} vs {:?}", output.shape(), grad_out.shape()),
        ));
    }
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&y, &g)| (T::one() - y * y) * g)
        .collect();
    Tensor::from_vec(output.shape(), data)
}

/// Max-shifted softmax over a rank-1 tensor.
pub fn softmax<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let m = input
        .data()
        .iter()
        .fold(T::neg_infinity(), |acc, &v| acc.max(v));
    let exps = input.map(|v| (v - m).exp());
    let total: T = exps.data().iter().copied().sum();
    exps.map(|v| v / total)
}

/// Cross-entropy of `softmax(logits)` against `label`, and its gradient
/// `softmax(logits) - onehot(label)`.
pub fn softmax_xent<T: Scalar>(logits: &Tensor<T>, label: usize) -> Result<(T, Tensor<T>)> {
    let n = logits.len();
    if label >= n {
        return Err(Error::Label(label as i64));
    }
    let m = logits
        .data()
        .iter()
        .fold(T::neg_infinity(), |acc, &v| acc.max(v));
    let log_total = logits
        .data()
        .iter()
        .map(|&v| (v - m).exp())
        .sum::<T>()
        .ln();
    let loss = log_total - (logits.data()[label] - m);
    let mut grad = softmax(logits);
    grad.data_mut()[label] -= T::one();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{central_diff, max_rel_err, rng_tensor};
    use proptest::prelude::*;

    #[test]
    fn tanh_is_odd_and_zero_at_origin() {
        let x = Tensor::<f64>::from_vec(&[4], vec![0.0, 0.3, -1.7, 5.0]).unwrap();
        let y = tanh_map(&x);
        let yn = tanh_map(&x.map(|v| -v));
        assert_eq!(y.data()[0], 0.0);
        for (a, b) in y.data().iter().zip(yn.data()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn tanh_backward_matches_finite_differences() {
        let x = rng_tensor(&[10], 1);
        let go = rng_tensor(&[10], 2);
        let g = tanh_backward(&tanh_map(&x), &go).unwrap();
        let fd = central_diff(&x, 1e-5, |v| {
            tanh_map(v).data().iter().zip(go.data()).map(|(a, b)| a * b).sum()
        });
        for (a, n) in g.data().iter().zip(fd.data()) {
            assert!((a - n).abs() / a.abs().max(n.abs()).max(1e-4) < 1e-8);
        }
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let y = softmax(&Tensor::<f64>::zeros(&[4]));
        assert!(y.data().iter().all(|&p| p == 0.25));
    }

    #[test]
    fn softmax_inverts_logs() {
        let x = Tensor::<f64>::from_fn(&[4], |i| ((i + 1) as f64).ln());
        let y = softmax(&x);
        for (p, want) in y.data().iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((p - want).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let x = rng_tensor(&[4], 3);
        let a = softmax(&x);
        let b = softmax(&x.map(|v| v + 123.25));
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_logits_cost_ln4() {
        for label in 0..4 {
            let (loss, _) = softmax_xent(&Tensor::<f64>::zeros(&[4]), label).unwrap();
            assert!((loss - 4f64.ln()).abs() < 1e-12);
            assert!((loss - 1.386_294_4).abs() < 1e-7);
        }
    }

    #[test]
    fn confident_logits_cost_nearly_nothing() {
        let x = Tensor::<f64>::from_vec(&[4], vec![-20.0, 40.0, -20.0, -20.0]).unwrap();
        let (loss, _) = softmax_xent(&x, 1).unwrap();
        assert!(loss < 1e-20);
    }

    #[test]
    fn xent_rejects_out_of_range_label() {
        assert!(softmax_xent(&Tensor::<f64>::zeros(&[4]), 4).is_err());
    }

    #[test]
    fn xent_gradient_matches_finite_differences() {
        let x = rng_tensor(&[4], 4).map(|v| 3.0 * v);
        let (_, g) = softmax_xent(&x, 2).unwrap();
        let fd = central_diff(&x, 1e-5, |v| softmax_xent(v, 2).unwrap().0);
        assert!(max_rel_err(g.data(), fd.data()) < 1e-8);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(v in proptest::collection::vec(-500.0f64..500.0, 1..12)) {
            let n = v.len();
            let y = softmax(&Tensor::from_vec(&[n], v).unwrap());
            prop_assert!(y.data().iter().all(|&p| p >= 0.0));
            prop_assert!((y.data().iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }

        #[test]
        fn softmax_f32_sums_to_one(v in proptest::collection::vec(-30.0f32..30.0, 1..12)) {
            let n = v.len();
            let y = softmax(&Tensor::from_vec(&[n], v).unwrap());
            prop_assert!(y.data().iter().all(|&p| p > 0.0));
            prop_assert!((y.data().iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }
}
