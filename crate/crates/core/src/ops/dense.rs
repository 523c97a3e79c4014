use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Fully connected layer: weights `[out, in]`, bias `[out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayerParams<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

pub type DenseGrads<T> = DenseLayerParams<T>;

impl<T: Scalar> DenseLayerParams<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let p = DenseLayerParams { weights, bias };
        p.geometry()?;
        Ok(p)
    }

    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        DenseLayerParams {
            weights: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    /// `(outputs, inputs)`
    pub fn geometry(&self) -> Result<(usize, usize)> {
        match (self.weights.shape(), self.bias.shape()) {
            (&[o, i], &[ob]) if o == ob => Ok((o, i)),
            (w, b) => Err(Error::shape(
                "dense params",
                format!("weights {w:?} / bias {b:?} do not form [out,in] + [out]"),
            )),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

fn check_input<T: Scalar>(input: &Tensor<T>, params: &DenseLayerParams<T>) -> Result<(usize, usize)> {
    let (o, i) = params.geometry()?;
    if input.shape() != [i] {
        return Err(Error::shape(
            "dense",
            format!("input {:?}, layer expects [{i}]", input.shape()),
        ));
    }
    Ok((o, i))
}

/// `weights * input + bias`
pub fn dense<T: Scalar>(input: &Tensor<T>, params: &DenseLayerParams<T>) -> Result<Tensor<T>> {
    let (o, i) = check_input(input, params)?;
    let x = input.data();
    let out = params
        .weights
        .data()
        .chunks_exact(i)
        .zip(params.bias.data())
        .map(|(row, &b)| {
            let mut acc = b;
            for (&w, &v) in row.iter().zip(x) {
                acc += w * v;
            }
            acc
        })
        .collect();
    Tensor::from_vec(&[o], out)
}

/// Gradients of `sum(grad_out * dense(input, params))`.
pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    params: &DenseLayerParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, DenseGrads<T>)> {
    let (o, i) = check_input(input, params)?;
    if grad_out.shape() != [o] {
        return Err(Error::shape(
            "dense_backward",
            format!("grad_out {:?}, expected [{o}]", grad_out.shape()),
        ));
    }
    let x = input.data();
    let go = grad_out.data();
    let mut grad_w = Vec::with_capacity(o * i);
    for &g in go {
        grad_w.extend(x.iter().map(|&v| g * v));
    }
    let mut grad_in = vec![T::zero(); i];
    for (row, &g) in params.weights.data().chunks_exact(i).zip(go) {
        for (gi, &w) in grad_in.iter_mut().zip(row) {
            *gi += g * w;
        }
    }
    Ok((
        Tensor::from_vec(&[i], grad_in)?,
        DenseLayerParams {
            weights: Tensor::from_vec(&[o, i], grad_w)?,
            bias: grad_out.clone(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{central_diff, max_rel_err, rng_tensor};

    #[test]
    fn identity_weights_pass_input_through() {
        let eye = Tensor::<f64>::from_fn(&[3, 3], |k| if k % 4 == 0 { 1.0 } else { 0.0 });
        let p = DenseLayerParams::new(eye, Tensor::zeros(&[3])).unwrap();
        let x = Tensor::from_vec(&[3], vec![0.5, -2.0, 7.0]).unwrap();
        assert_eq!(dense(&x, &p).unwrap(), x);
    }

    #[test]
    fn zero_weights_yield_bias() {
        let b = Tensor::<f32>::from_vec(&[2], vec![0.25, -1.5]).unwrap();
        let p = DenseLayerParams::new(Tensor::zeros(&[2, 4]), b.clone()).unwrap();
        assert_eq!(dense(&Tensor::full(&[4], 3.0), &p).unwrap(), b);
    }

    #[test]
    fn matches_scalar_dot_products() {
        let w = rng_tensor(&[2, 3], 1);
        let b = rng_tensor(&[2], 2);
        let x = rng_tensor(&[3], 3);
        let y = dense(&x, &DenseLayerParams::new(w.clone(), b.clone()).unwrap()).unwrap();
        for r in 0..2 {
            let mut want = b.data()[r];
            for c in 0..3 {
                want += w.data()[r * 3 + c] * x.data()[c];
            }
            assert!((y.data()[r] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let p = DenseLayerParams::<f32>::zeros(2, 3);
        assert!(dense(&Tensor::zeros(&[4]), &p).is_err());
        assert!(dense_backward(&Tensor::zeros(&[3]), &p, &Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let p = DenseLayerParams::new(rng_tensor(&[4, 5], 4), rng_tensor(&[4], 5)).unwrap();
        let x = rng_tensor(&[5], 6);
        let go = rng_tensor(&[4], 7);
        let obj = |x: &Tensor<f64>, p: &DenseLayerParams<f64>| -> f64 {
            dense(x, p).unwrap().data().iter().zip(go.data()).map(|(a, b)| a * b).sum()
        };
        let (gi, gp) = dense_backward(&x, &p, &go).unwrap();
        assert!(max_rel_err(gi.data(), central_diff(&x, 1e-5, |v| obj(v, &p)).data()) < 1e-6);
        let fd_w = central_diff(&p.weights, 1e-5, |w| {
            obj(&x, &DenseLayerParams { weights: w.clone(), bias: p.bias.clone() })
        });
        assert!(max_rel_err(gp.weights.data(), fd_w.data()) < 1e-6);
        let fd_b = central_diff(&p.bias, 1e-5, |b| {
            obj(&x, &DenseLayerParams { weights: p.weights.clone(), bias: b.clone() })
        });
        assert!(max_rel_err(gp.bias.data(), fd_b.data()) < 1e-6);
    }
}
