//! Central-difference verification of the analytic backward pass.
//!
//! The relative error of a coordinate is `|a - n| / max(|a|, |n|, 1e-4)`:
//! gradients smaller than `1e-4` are compared on an absolute scale, since
//! central differences cannot resolve them more finely than the floating
//! point noise of the loss.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::ArchitectureSpec;
use super::network::Network;
use super::params::{build_network, NetworkParams};
use crate::error::{Error, Result};
use crate::ops::softmax_xent;
use crate::tensor::Tensor;

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
const REL_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockReport {
    pub name: String,
    pub coordinates: usize,
    /// Coordinates skipped because the perturbation moved a pooling argmax.
    pub excluded: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub epsilon: f64,
    pub tolerance: f64,
    pub blocks: Vec<BlockReport>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.max_rel_error < self.tolerance)
    }

    /// `Err` listing the failing blocks and their worst coordinates.
    pub fn ensure_passed(&self) -> Result<()> {
        if self.passed() {
            return Ok(());
        }
        let failing: Vec<String> = self
            .blocks
            .iter()
            .filter(|b| b.max_rel_error >= self.tolerance)
            .map(|b| {
                format!(
                    "{}[{}]: analytic {:.6e} numeric {:.6e} (rel {:.3e})",
                    b.name, b.worst_index, b.worst_analytic, b.worst_numeric, b.max_rel_error
                )
            })
            .collect();
        Err(Error::GradCheck(format!(
            "tolerance {:e}: {}",
            self.tolerance,
            failing.join("; ")
        )))
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "block\tcoordinates\texcluded\tmax_rel_error\tworst_index\tanalytic\tnumeric")?;
        for b in &self.blocks {
            writeln!(
                f,
                "{}\t{}\t{}\t{:.3e}\t{}\t{:.9e}\t{:.9e}",
                b.name, b.coordinates, b.excluded, b.max_rel_error, b.worst_index, b.worst_analytic, b.worst_numeric
            )?;
        }
        write!(
            f,
            "max_rel_error={:.3e} tolerance={:e} {}",
            self.max_rel_error(),
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Analytic gradient source: returns `(input gradient, parameter gradients)`
/// of the loss for one labeled sample.
pub type BackwardFn<'a> =
    dyn Fn(&Network<f64>, &Tensor<f64>, usize) -> Result<(Tensor<f64>, NetworkParams<f64>)> + 'a;

/// The network's own backward pass.
pub fn analytic_gradients(
    net: &Network<f64>,
    input: &Tensor<f64>,
    label: usize,
) -> Result<(Tensor<f64>, NetworkParams<f64>)> {
    let sg = net.loss_and_grads(input, label)?;
    Ok((sg.input_grad, sg.grads))
}

/// Build `spec` from `seed`, draw a random input in `[-1, 1]` and a label,
/// and compare analytic against central-difference gradients.
pub fn grad_check(spec: &ArchitectureSpec, seed: u64, epsilon: f64, tolerance: f64) -> Result<GradCheckReport> {
    let net = Network::new(spec.clone(), build_network::<f64>(spec, seed)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let input = Tensor::from_fn(&spec.input, |_| rng.random_range(-1.0..1.0));
    let label = rng.random_range(0..spec.output_units());
    grad_check_network(&net, &input, label, epsilon, tolerance, &analytic_gradients)
}

pub fn grad_check_network(
    net: &Network<f64>,
    input: &Tensor<f64>,
    label: usize,
    epsilon: f64,
    tolerance: f64,
    backward: &BackwardFn<'_>,
) -> Result<GradCheckReport> {
    let base_maps = net.forward_sample(input)?.pool_maps;
    let loss_at = |n: &Network<f64>, x: &Tensor<f64>| -> Result<(f64, bool)> {
        let trace = n.forward_sample(x)?;
        let same_routes = trace.pool_maps == base_maps;
        Ok((softmax_xent(trace.logits(), label)?.0, same_routes))
    };
    let (input_grad, param_grads) = backward(net, input, label)?;
    let mut blocks = Vec::new();

    let mut probe = net.clone();
    for (b, block) in net.params().blocks.iter().enumerate() {
        for (t, tensor) in block.tensors().into_iter().enumerate() {
            let name = format!("{}{}.{}", block.kind(), b, if t == 0 { "weight" } else { "bias" });
            let analytic = param_grads.blocks[b].tensors()[t].data().to_vec();
            let report = check_block(name, &analytic, tensor.len(), epsilon, |i, delta| {
                let target = &mut probe.params_mut().blocks[b].tensors_mut()[t].data_mut()[i];
                let orig = *target;
                *target = orig + delta;
                let out = loss_at(&probe, input);
                probe.params_mut().blocks[b].tensors_mut()[t].data_mut()[i] = orig;
                out
            })?;
            blocks.push(report);
        }
    }

    let mut x = input.clone();
    blocks.push(check_block("input".into(), input_grad.data(), input.len(), epsilon, |i, delta| {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + delta;
        let out = loss_at(net, &x);
        x.data_mut()[i] = orig;
        out
    })?);

    Ok(GradCheckReport {
        epsilon,
        tolerance,
        blocks,
    })
}

fn check_block(
    name: String,
    analytic: &[f64],
    len: usize,
    epsilon: f64,
    mut loss_with: impl FnMut(usize, f64) -> Result<(f64, bool)>,
) -> Result<BlockReport> {
    let mut report = BlockReport {
        name,
        coordinates: len,
        excluded: 0,
        max_rel_error: 0.0,
        worst_index: 0,
        worst_analytic: analytic.first().copied().unwrap_or(0.0),
        worst_numeric: 0.0,
    };
    let mut checked = 0;
    for (i, &a) in analytic.iter().enumerate().take(len) {
        let (up, up_same) = loss_with(i, epsilon)?;
        let (down, down_same) = loss_with(i, -epsilon)?;
        if !(up_same && down_same) {
            report.excluded += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * epsilon);
        let err = relative_error(a, numeric);
        if checked == 0 || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
            report.worst_analytic = a;
            report.worst_numeric = numeric;
        }
        checked += 1;
    }
    Ok(report)
}
