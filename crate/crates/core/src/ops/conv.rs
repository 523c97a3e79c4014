//! Valid-mode 2-D convolution (stride 1, no padding).
//!
//! The production path lowers the input to a column matrix (im2col) and runs a
//! matrix product. [`conv2d_naive`] is the direct nested-loop definition and is
//! kept as the correctness reference for the fast path.

use super::gemm::{gemm_a_bt_acc, gemm_acc, gemm_at_b_acc};
use crate::error::{Error, Result};
use crate::tensor::{dims3, Scalar, Tensor};

/// Kernels `[F, C, K, K]` and per-filter bias `[F]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayerParams<T> {
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Gradients with the same layout as [`ConvLayerParams`].
pub type ConvGrads<T> = ConvLayerParams<T>;

impl<T: Scalar> ConvLayerParams<T> {
    pub fn new(kernels: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let p = ConvLayerParams { kernels, bias };
        p.geometry()?;
        Ok(p)
    }

    pub fn zeros(filters: usize, channels: usize, side: usize) -> Self {
        ConvLayerParams {
            kernels: Tensor::zeros(&[filters, channels, side, side]),
            bias: Tensor::zeros(&[filters]),
        }
    }

    /// `(filters, channels, kernel side)`
    pub fn geometry(&self) -> Result<(usize, usize, usize)> {
        match (self.kernels.shape(), self.bias.shape()) {
            (&[f, c, kh, kw], &[fb]) if f == fb && kh == kw => Ok((f, c, kh)),
            (k, b) => Err(Error::shape(
                "conv params",
                format!("kernels {k:?} / bias {b:?} do not form [F,C,K,K] + [F]"),
            )),
        }
    }

    pub fn param_count(&self) -> usize {
        self.kernels.len() + self.bias.len()
    }
}

struct Geometry {
    filters: usize,
    channels: usize,
    side: usize,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
}

fn geometry<T: Scalar>(input: &Tensor<T>, params: &ConvLayerParams<T>) -> Result<Geometry> {
    let (c, h, w) = dims3("conv2d", input.shape())?;
    let (filters, channels, side) = params.geometry()?;
    if c != channels {
        return Err(Error::shape(
            "conv2d",
            format!("input has {c} channels, kernels expect {channels}"),
        ));
    }
    if h < side || w < side {
        return Err(Error::shape(
            "conv2d",
            format!("input {h}x{w} smaller than kernel {side}x{side}"),
        ));
    }
    Ok(Geometry {
        filters,
        channels,
        side,
        in_h: h,
        in_w: w,
        out_h: h - side + 1,
        out_w: w - side + 1,
    })
}

/// Unfold `[C, H, W]` into a `[C*K*K, out_h*out_w]` column matrix.
fn im2col<T: Scalar>(input: &[T], g: &Geometry) -> Vec<T> {
    let cols = g.out_h * g.out_w;
    let mut col = vec![T::zero(); g.channels * g.side * g.side * cols];
    let mut row = 0;
    for c in 0..g.channels {
        let plane = &input[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for a in 0..g.side {
            for b in 0..g.side {
                let dst = &mut col[row * cols..(row + 1) * cols];
                for i in 0..g.out_h {
                    let src = &plane[(i + a) * g.in_w + b..(i + a) * g.in_w + b + g.out_w];
                    dst[i * g.out_w..(i + 1) * g.out_w].copy_from_slice(src);
                }
                row += 1;
            }
        }
    }
    col
}

/// Fold a column matrix back onto `[C, H, W]`, summing overlapping entries.
fn col2im<T: Scalar>(col: &[T], g: &Geometry) -> Vec<T> {
    let cols = g.out_h * g.out_w;
    let mut out = vec![T::zero(); g.channels * g.in_h * g.in_w];
    let mut row = 0;
    for c in 0..g.channels {
        let plane = &mut out[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for a in 0..g.side {
            for b in 0..g.side {
                let src = &col[row * cols..(row + 1) * cols];
                for i in 0..g.out_h {
                    let dst = &mut plane[(i + a) * g.in_w + b..(i + a) * g.in_w + b + g.out_w];
                    for (d, &s) in dst.iter_mut().zip(&src[i * g.out_w..(i + 1) * g.out_w]) {
                        *d += s;
                    }
                }
                row += 1;
            }
        }
    }
    out
}

/// `out[f,i,j] = bias[f] + sum_{c,a,b} input[c,i+a,j+b] * kernels[f,c,a,b]`
pub fn conv2d_valid<T: Scalar>(input: &Tensor<T>, params: &ConvLayerParams<T>) -> Result<Tensor<T>> {
    let g = geometry(input, params)?;
    let cols = g.out_h * g.out_w;
    let reduce = g.channels * g.side * g.side;
    let col = im2col(input.data(), &g);
    let mut out = Vec::with_capacity(g.filters * cols);
    for &b in params.bias.data() {
        out.extend(std::iter::repeat_n(b, cols));
    }
    gemm_acc(params.kernels.data(), &col, &mut out, g.filters, reduce, cols);
    Tensor::from_vec(&[g.filters, g.out_h, g.out_w], out)
}

/// Direct quadruple-loop convolution. Reference implementation only.
pub fn conv2d_naive<T: Scalar>(input: &Tensor<T>, params: &ConvLayerParams<T>) -> Result<Tensor<T>> {
    let g = geometry(input, params)?;
    let x = input.data();
    let k = params.kernels.data();
    let mut out = Tensor::zeros(&[g.filters, g.out_h, g.out_w]);
    let o = out.data_mut();
    for f in 0..g.filters {
        for i in 0..g.out_h {
            for j in 0..g.out_w {
                let mut acc = params.bias.data()[f];
                for c in 0..g.channels {
                    for a in 0..g.side {
                        for b in 0..g.side {
                            acc += x[(c * g.in_h + i + a) * g.in_w + j + b]
                                * k[((f * g.channels + c) * g.side + a) * g.side + b];
                        }
                    }
                }
                o[(f * g.out_h + i) * g.out_w + j] = acc;
            }
        }
    }
    Ok(out)
}

/// Gradients of `sum(grad_out * conv2d_valid(input, params))` with respect to
/// the input, kernels and bias.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    params: &ConvLayerParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, ConvGrads<T>)> {
    let g = geometry(input, params)?;
    let expected = [g.filters, g.out_h, g.out_w];
    if grad_out.shape() != expected {
        return Err(Error::shape(
            "conv2d_backward",
            format!("grad_out {:?}, expected {expected:?}", grad_out.shape()),
        ));
    }
    let cols = g.out_h * g.out_w;
    let reduce = g.channels * g.side * g.side;
    let col = im2col(input.data(), &g);
    let go = grad_out.data();

    let mut grad_k = vec![T::zero(); g.filters * reduce];
    gemm_a_bt_acc(go, &col, &mut grad_k, g.filters, cols, reduce);

    let grad_b: Vec<T> = go.chunks_exact(cols).map(|row| row.iter().copied().sum()).collect();

    let mut grad_col = vec![T::zero(); reduce * cols];
    gemm_at_b_acc(params.kernels.data(), go, &mut grad_col, reduce, g.filters, cols);
    let grad_in = col2im(&grad_col, &g);

    Ok((
        Tensor::from_vec(input.shape(), grad_in)?,
        ConvLayerParams {
            kernels: Tensor::from_vec(params.kernels.shape(), grad_k)?,
            bias: Tensor::from_vec(&[g.filters], grad_b)?,
        },
    ))
}
