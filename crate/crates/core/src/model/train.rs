//! Minibatch SGD with momentum on softmax cross-entropy.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::arch::ArchitectureSpec;
use super::network::{argmax, Network};
use super::params::{build_network, NetworkParams};
use crate::dataset::{derive_seed, normalize, Sample};
use crate::error::{Error, Result};
use crate::ops::softmax_xent;
use crate::tensor::{Scalar, Tensor};

/// Samples per parallel work unit. Partial gradients are summed in chunk
/// order, so results do not depend on the thread count.
const CHUNK: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" | "binary32" => Ok(Precision::F32),
            "f64" | "binary64" => Ok(Precision::F64),
            other => Err(Error::Config(format!("unknown precision {other:?}"))),
        }
    }
}

/// Multiply the learning rate by `factor` every `every` epochs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDecay {
    pub factor: f64,
    pub every: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub lr_decay: Option<StepDecay>,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
            epochs: 30,
            seed: 0,
            lr_decay: Some(StepDecay {
                factor: 0.5,
                every: 10,
            }),
            precision: Precision::F32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be > 0", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} must be in [0, 1)", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if let Some(d) = self.lr_decay {
            if d.every == 0 || d.factor.is_nan() || d.factor <= 0.0 {
                return Err(Error::Config("lr decay needs factor > 0 and period >= 1".into()));
            }
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.lr_decay {
            Some(d) => self.learning_rate * d.factor.powi((epoch / d.every) as i32),
            None => self.learning_rate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub const HEADER: &'static str = "epoch\tlearning_rate\ttrain_loss\ttrain_accuracy\tval_loss\tval_accuracy";

    pub fn write_tsv(&self, mut sink: impl Write) -> Result<()> {
        writeln!(sink, "{}", Self::HEADER)?;
        for e in &self.epochs {
            writeln!(
                sink,
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                e.epoch, e.learning_rate, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy
            )?;
        }
        Ok(())
    }

    /// Epoch with the highest validation accuracy; the earliest one on ties.
    pub fn best(&self) -> Option<&EpochStats> {
        self.epochs
            .iter()
            .fold(None, |best: Option<&EpochStats>, e| match best {
                Some(b) if b.val_accuracy >= e.val_accuracy => Some(b),
                _ => Some(e),
            })
    }
}

pub struct TrainOutcome<T> {
    /// Parameters from the best validation epoch.
    pub network: Network<T>,
    pub history: TrainHistory,
    pub best_epoch: usize,
}

/// Classical momentum: `v = momentum * v - lr * g; w += v`.
pub struct Sgd<T> {
    velocity: NetworkParams<T>,
    momentum: T,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(params: &NetworkParams<T>, momentum: f64) -> Self {
        Sgd {
            velocity: params.zeros_like(),
            momentum: T::from_f64(momentum),
        }
    }

    pub fn step(&mut self, params: &mut NetworkParams<T>, grads: &NetworkParams<T>, lr: f64) -> Result<()> {
        self.velocity.scale(self.momentum);
        self.velocity.add_scaled(grads, -T::from_f64(lr))?;
        params.add_scaled(&self.velocity, T::one())
    }
}

/// Mean loss gradient over a batch, plus summed loss and correct count.
pub struct BatchGradient<T> {
    pub grads: NetworkParams<T>,
    pub loss_sum: f64,
    pub correct: usize,
}

pub fn batch_gradient<T: Scalar>(net: &Network<T>, batch: &[(Tensor<T>, usize)]) -> Result<BatchGradient<T>> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let partials = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc: Option<BatchGradient<T>> = None;
            for (x, label) in chunk {
                let sg = net.loss_and_grads(x, *label)?;
                let correct = usize::from(sg.predicted == *label);
                match acc.as_mut() {
                    None => {
                        acc = Some(BatchGradient {
                            grads: sg.grads,
                            loss_sum: sg.loss.to_f64(),
                            correct,
                        })
                    }
                    Some(a) => {
                        a.grads.add_scaled(&sg.grads, T::one())?;
                        a.loss_sum += sg.loss.to_f64();
                        a.correct += correct;
                    }
                }
            }
            Ok(acc.expect("chunks are nonempty"))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut parts = partials.into_iter();
    let mut total = parts.next().expect("batch is nonempty");
    for p in parts {
        total.grads.add_scaled(&p.grads, T::one())?;
        total.loss_sum += p.loss_sum;
        total.correct += p.correct;
    }
    total.grads.scale(T::one() / T::from_f64(batch.len() as f64));
    Ok(total)
}

/// Mean cross-entropy and accuracy without updating anything.
pub fn evaluate_loss<T: Scalar>(net: &Network<T>, data: &[(Tensor<T>, usize)]) -> Result<(f64, f64)> {
    let per_sample = data
        .par_iter()
        .map(|(x, label)| {
            let logits = net.logits(x)?;
            let (loss, _) = softmax_xent(&logits, *label)?;
            Ok((loss.to_f64(), argmax(logits.data()) == *label))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_sample.len().max(1) as f64;
    let loss = per_sample.iter().map(|p| p.0).sum::<f64>() / n;
    let acc = per_sample.iter().filter(|p| p.1).count() as f64 / n;
    Ok((loss, acc))
}

pub fn to_tensors<T: Scalar>(samples: &[Sample]) -> Vec<(Tensor<T>, usize)> {
    samples
        .iter()
        .map(|s| (normalize::<T>(&s.record), s.record.label.index()))
        .collect()
}

/// Train a fresh network in scalar type `T`. `observer` sees each epoch's
/// statistics as soon as they are known.
pub fn train_with<T: Scalar>(
    spec: &ArchitectureSpec,
    config: &TrainConfig,
    train_data: &[Sample],
    val_data: &[Sample],
    observer: &mut dyn FnMut(&EpochStats),
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train_data.is_empty() || val_data.is_empty() {
        return Err(Error::Config("training and validation data must be nonempty".into()));
    }
    let classes = spec.output_units();
    if let Some(s) = train_data.iter().chain(val_data).find(|s| s.record.label.index() >= classes) {
        return Err(Error::Config(format!("{}: label exceeds {classes} output units", s.id)));
    }
    let mut net = Network::new(spec.clone(), build_network::<T>(spec, config.seed)?)?;
    let train_set = to_tensors::<T>(train_data);
    let val_set = to_tensors::<T>(val_data);

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[0x5348_5546])); // "SHUF"
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut sgd = Sgd::new(net.params(), config.momentum);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, NetworkParams<T>)> = None;

    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(Tensor<T>, usize)> = idx.iter().map(|&i| train_set[i].clone()).collect();
            let g = batch_gradient(&net, &batch)?;
            loss_sum += g.loss_sum;
            correct += g.correct;
            sgd.step(net.params_mut(), &g.grads, lr)?;
            if !g.loss_sum.is_finite() || !net.params().all_finite() {
                return Err(Error::Diverged {
                    epoch: epoch + 1,
                    batch: b + 1,
                    loss: g.loss_sum / batch.len() as f64,
                });
            }
        }
        let (val_loss, val_accuracy) = evaluate_loss(&net, &val_set)?;
        let stats = EpochStats {
            epoch: epoch + 1,
            learning_rate: lr,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_loss,
            val_accuracy,
        };
        observer(&stats);
        history.epochs.push(stats);
        if best.as_ref().is_none_or(|(acc, _, _)| val_accuracy > *acc) {
            best = Some((val_accuracy, epoch + 1, net.params().clone()));
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        network: Network::new(spec.clone(), params)?,
        history,
        best_epoch,
    })
}

/// Train at `config.precision` and return the network in `f32`, the
/// precision of the model file.
pub fn train(
    spec: &ArchitectureSpec,
    config: &TrainConfig,
    train_data: &[Sample],
    val_data: &[Sample],
    observer: &mut dyn FnMut(&EpochStats),
) -> Result<TrainOutcome<f32>> {
    match config.precision {
        Precision::F32 => train_with::<f32>(spec, config, train_data, val_data, observer),
        Precision::F64 => {
            let out = train_with::<f64>(spec, config, train_data, val_data, observer)?;
            Ok(TrainOutcome {
                network: out.network.cast(),
                history: out.history,
                best_epoch: out.best_epoch,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth_corpus;
    use crate::testutil::rng_tensor;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { momentum: 1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn step_decay_schedule() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate_at(0), 0.01);
        assert_eq!(c.learning_rate_at(9), 0.01);
        assert_eq!(c.learning_rate_at(10), 0.005);
        assert_eq!(c.learning_rate_at(29), 0.0025);
    }

    #[test]
    fn zero_learning_rate_step_is_identity() {
        let spec = ArchitectureSpec::toy();
        let net = Network::new(spec.clone(), build_network::<f64>(&spec, 1).unwrap()).unwrap();
        let batch = vec![(rng_tensor(&[1, 12, 12], 2), 1), (rng_tensor(&[1, 12, 12], 3), 3)];
        let g = batch_gradient(&net, &batch).unwrap();
        let mut params = net.params().clone();
        let mut sgd = Sgd::new(&params, 0.9);
        sgd.step(&mut params, &g.grads, 0.0).unwrap();
        assert_eq!(&params, net.params());
    }

    #[test]
    fn best_epoch_prefers_earliest_tie() {
        let mk = |epoch, val_accuracy| EpochStats {
            epoch,
            learning_rate: 0.1,
            train_loss: 0.0,
            train_accuracy: 0.0,
            val_loss: 0.0,
            val_accuracy,
        };
        let h = TrainHistory { epochs: vec![mk(1, 0.5), mk(2, 0.75), mk(3, 0.75), mk(4, 0.25)] };
        assert_eq!(h.best().unwrap().epoch, 2);
    }

    #[test]
    fn memorizes_a_single_example() {
        let sample = synth_corpus(4, 3).unwrap().swap_remove(7);
        let config = TrainConfig { epochs: 200, batch_size: 1, lr_decay: None, ..Default::default() };
        let out = train_with::<f32>(
            &ArchitectureSpec::default(),
            &config,
            std::slice::from_ref(&sample),
            std::slice::from_ref(&sample),
            &mut |_| {},
        )
        .unwrap();
        assert_eq!(out.history.epochs.len(), 200);
        let last = out.history.epochs.last().unwrap();
        assert!(last.train_loss < 0.01, "loss {}", last.train_loss);
        assert_eq!(last.train_accuracy, 1.0);
    }

    #[test]
    fn divergence_is_reported() {
        let samples = synth_corpus(4, 1).unwrap();
        let config = TrainConfig { learning_rate: 1e300, momentum: 0.0, epochs: 3, ..Default::default() };
        match train_with::<f32>(&ArchitectureSpec::default(), &config, &samples, &samples[..4], &mut |_| {}) {
            Err(Error::Diverged { epoch, batch, .. }) => assert!(epoch >= 1 && batch >= 1),
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => panic!("training with lr 1e300 should diverge"),
        }
    }
}
