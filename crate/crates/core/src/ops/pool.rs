//! Max pooling with floor-mode boundaries.

use crate::error::{Error, Result};
use crate::tensor::{dims3, Scalar, Tensor};

/// `floor((extent - window) / stride) + 1`, or `None` when the window does not fit.
pub fn pooled_extent(extent: usize, window: usize, stride: usize) -> Option<usize> {
    if window == 0 || stride == 0 || extent < window {
        None
    } else {
        Some((extent - window) / stride + 1)
    }
}

/// Winning input position (flat index into the `[C, H, W]` input) of every
/// pooled cell, as recorded by the forward pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArgmaxMap {
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    winners: Vec<usize>,
}

impl ArgmaxMap {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn winners(&self) -> &[usize] {
        &self.winners
    }
}

/// Max over `window x window` blocks moved by `stride`. Rows and columns not
/// covered by a full window are dropped. Ties go to the first maximum in
/// row-major order.
pub fn maxpool<T: Scalar>(
    input: &Tensor<T>,
    window: usize,
    stride: usize,
) -> Result<(Tensor<T>, ArgmaxMap)> {
    let (c, h, w) = dims3("maxpool", input.shape())?;
    let (oh, ow) = match (pooled_extent(h, window, stride), pooled_extent(w, window, stride)) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => {
            return Err(Error::shape(
                "maxpool",
                format!("window {window} stride {stride} does not fit input {h}x{w}"),
            ))
        }
    };
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut winners = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for i in 0..oh {
            for j in 0..ow {
                let mut best = base + i * stride * w + j * stride;
                for a in 0..window {
                    let row = base + (i * stride + a) * w + j * stride;
                    for idx in row..row + window {
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                out.push(x[best]);
                winners.push(best);
            }
        }
    }
    let output_shape = vec![c, oh, ow];
    Ok((
        Tensor::from_vec(&output_shape, out)?,
        ArgmaxMap {
            input_shape: input.shape().to_vec(),
            output_shape,
            winners,
        },
    ))
}

/// Route each upstream gradient to the input position that won its window.
pub fn maxpool_backward<T: Scalar>(map: &ArgmaxMap, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if grad_out.shape() != map.output_shape.as_slice() {
        return Err(Error::shape(
            "maxpool_backward",
            format!("grad_out {:?}, pooled output {:?}", grad_out.shape(), map.output_shape),
        ));
    }
    let mut grad_in = Tensor::zeros(&map.input_shape);
    let gi = grad_in.data_mut();
    for (&idx, &g) in map.winners.iter().zip(grad_out.data()) {
        gi[idx] += g;
    }
    Ok(grad_in)
}
