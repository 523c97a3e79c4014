use rayon::prelude::*;

use crate::dataset::{normalize, Diagnosis, RecordId, Sample};
use crate::error::{Error, Result};
use crate::model::{argmax, Network};
use crate::tensor::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct ImagePrediction {
    pub id: RecordId,
    pub probabilities: [f64; Diagnosis::COUNT],
    pub predicted: Diagnosis,
    pub observed: Diagnosis,
}

impl ImagePrediction {
    pub fn is_correct(&self) -> bool {
        self.predicted == self.observed
    }
}

pub fn predict_image<T: Scalar>(net: &Network<T>, sample: &Sample) -> Result<ImagePrediction> {
    let units = net.spec().output_units();
    if units != Diagnosis::COUNT {
        return Err(Error::Eval(format!(
            "network has {units} output units, expected {}",
            Diagnosis::COUNT
        )));
    }
    let probs = net.probabilities(&normalize::<T>(&sample.record))?;
    let mut probabilities = [0.0; Diagnosis::COUNT];
    for (p, v) in probabilities.iter_mut().zip(probs.data()) {
        *p = Scalar::to_f64(*v);
    }
    Ok(ImagePrediction {
        id: sample.id.clone(),
        probabilities,
        predicted: Diagnosis::ALL[argmax(probs.data())],
        observed: sample.record.label,
    })
}

/// Predictions for every sample, computed in parallel, in input order.
pub fn predict_batch<T: Scalar>(net: &Network<T>, samples: &[Sample]) -> Result<Vec<ImagePrediction>> {
    samples.par_iter().map(|s| predict_image(net, s)).collect()
}
